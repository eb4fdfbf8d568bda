//! Downlink data phase: RZF precoding that also nulls the BS → radar
//! channel, with measured and deterministic-equivalent SINR.
//!
//! User k receives `√β_k h_k^T x`. Writing the precoder in terms of the
//! conjugated estimates `u_k = ĥ_k*` and the radar rows `v_j = ĝ_br,j*`
//! (so `g_br,j^T x = v_j^H x`) turns everything into the usual
//! `(Σ u u^H + Σ v v^H + α I)^-1 u` form.

use serde::{Deserialize, Serialize};

use crate::de::{solve_full, DeProblem, Shift};
use crate::linalg::{fro2, HpdFactor};
use crate::uplink::SinrTerms;
use crate::{
    CMat, ChannelEstimate, ChannelRealization, Error, PowerAllocation, Result, Scenario,
    SystemConfig, C64,
};

#[allow(non_snake_case)]
#[derive(Debug, Clone)]
pub struct Precoder {
    /// M×K.
    pub Q: CMat,
    pub alpha: f64,
    /// `[Ĥ*, Ĝ_br^H]`, M×(K+N_r).
    pub H_bar: CMat,
}

/// `(K + N_r) N0 / (M · mean_k β_k ε_{d,s,k})` unless `rzf_alpha` is set.
pub fn default_alpha(scenario: &Scenario, powers: &PowerAllocation, config: &SystemConfig) -> f64 {
    if let Some(a) = config.rzf_alpha {
        return a;
    }
    let rx = PowerAllocation::received(&scenario.beta, &powers.eps_dn_data);
    let mean = rx.iter().sum::<f64>() / rx.len() as f64;
    if mean > 0.0 {
        (config.K + config.N_r) as f64 * config.N0 / (config.M as f64 * mean)
    } else {
        1.0
    }
}

/// `Q = (H̄ H̄^H + α I)^-1 Ĥ*`.
#[allow(non_snake_case)]
pub fn rzf_precoder(h_hat: &CMat, g_hat_br: &CMat, alpha: f64) -> Result<Precoder> {
    let (m, k) = h_hat.shape();
    let n_r = g_hat_br.nrows();
    if g_hat_br.ncols() != m {
        return Err(Error::Dimension(format!(
            "Ĝ_br has {} columns, M = {m}",
            g_hat_br.ncols()
        )));
    }
    if m <= k + n_r {
        return Err(Error::InvalidArgument(format!(
            "need M > K + N_r, got {m} <= {}",
            k + n_r
        )));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let h_conj = h_hat.map(|z| z.conj());
    let mut H_bar = CMat::zeros(m, k + n_r);
    H_bar.columns_mut(0, k).copy_from(&h_conj);
    H_bar.columns_mut(k, n_r).copy_from(&g_hat_br.adjoint());
    let gram = &H_bar * H_bar.adjoint() + CMat::identity(m, m) * C64::new(alpha, 0.0);
    let Q = HpdFactor::new(gram)?.solve(&h_conj);
    Ok(Precoder { Q, alpha, H_bar })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DownlinkEmpirical {
    /// `radar_cancellable` carries the radar → user interference;
    /// `radar_residual` is unused. The estimation-error term is averaged
    /// over h̃ given the estimates.
    pub terms: Vec<SinrTerms>,
    /// Same split with the drawn h̃.
    pub realized: Vec<SinrTerms>,
    /// `realized + cross` is the exact received power.
    pub cross: Vec<f64>,
    /// Per-antenna BS → radar leakage through Ĝ_br and through G̃_br.
    pub leak_hat: f64,
    pub leak_tilde: f64,
}

impl DownlinkEmpirical {
    pub fn sinr(&self) -> Vec<f64> {
        self.terms.iter().map(SinrTerms::sinr).collect()
    }
}

fn scale_columns(q: &CMat, eps: &[f64]) -> CMat {
    let mut out = q.clone();
    for (k, e) in eps.iter().enumerate() {
        out.column_mut(k).scale_mut(e.sqrt());
    }
    out
}

#[allow(non_snake_case)]
pub fn empirical_downlink_sinr(
    ch: &ChannelRealization,
    est: &ChannelEstimate,
    precoder: &Precoder,
    scenario: &Scenario,
    powers: &PowerAllocation,
    config: &SystemConfig,
) -> DownlinkEmpirical {
    let k = scenario.k();
    let eps = &powers.eps_dn_data;
    let H_err = &ch.H - &est.H_hat;
    // Row k: h_k^T Q.
    let p_hat = est.H_hat.transpose() * &precoder.Q;
    let p_err = H_err.transpose() * &precoder.Q;
    let mut terms = Vec::with_capacity(k);
    let mut realized = Vec::with_capacity(k);
    let mut cross = Vec::with_capacity(k);
    for u in 0..k {
        let b = scenario.beta[u];
        let b2_bar = est.b2_bar.column(u);
        let mut t = SinrTerms {
            signal: b * eps[u] * p_hat[(u, u)].norm_sqr(),
            radar_cancellable: config.sigma_r2 * ch.g_rk.column(u).norm_squared(),
            noise: config.N0,
            ..SinrTerms::default()
        };
        let mut x = 0.0;
        for l in 0..k {
            if l != u {
                t.interuser += b * eps[l] * p_hat[(u, l)].norm_sqr();
            }
            t.est_error += b * eps[l] * p_err[(u, l)].norm_sqr();
            x += 2.0 * b * eps[l] * (p_hat[(u, l)] * p_err[(u, l)].conj()).re;
        }
        // E|h̃_u^T q_l|² = Σ_i b̄²_iu |q_il|².
        let mut cond = t;
        cond.est_error = (0..k)
            .map(|l| {
                let q = precoder.Q.column(l);
                b * eps[l]
                    * q.iter()
                        .zip(b2_bar.iter())
                        .map(|(qi, bb)| bb * qi.norm_sqr())
                        .sum::<f64>()
            })
            .sum();
        terms.push(cond);
        realized.push(t);
        cross.push(x);
    }
    let (leak_hat, leak_tilde) = if ch.G_br_hat.nrows() > 0 {
        let qe = scale_columns(&precoder.Q, eps);
        let n_r = ch.G_br_hat.nrows() as f64;
        (
            fro2(&(&ch.G_br_hat * &qe)) / n_r,
            fro2(&(&ch.G_br_err * &qe)) / n_r,
        )
    } else {
        (0.0, 0.0)
    };
    DownlinkEmpirical {
        terms,
        realized,
        cross,
        leak_hat,
        leak_tilde,
    }
}

/// Exact received power at each user for a draw.
pub fn total_received_power(
    ch: &ChannelRealization,
    precoder: &Precoder,
    scenario: &Scenario,
    powers: &PowerAllocation,
    config: &SystemConfig,
) -> Vec<f64> {
    let p = ch.H.transpose() * scale_columns(&precoder.Q, &powers.eps_dn_data);
    (0..scenario.k())
        .map(|u| {
            scenario.beta[u] * p.row(u).norm_squared()
                + config.sigma_r2 * ch.g_rk.column(u).norm_squared()
                + config.N0
        })
        .collect()
}

/// Actual per-antenna BS → radar interference power `‖G_br Q E^½‖²_F / N_r`.
pub fn radar_leakage(
    ch: &ChannelRealization,
    precoder: &Precoder,
    powers: &PowerAllocation,
) -> f64 {
    let n_r = ch.G_br_hat.nrows();
    if n_r == 0 {
        return 0.0;
    }
    fro2(&(ch.G_br() * scale_columns(&precoder.Q, &powers.eps_dn_data))) / n_r as f64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DownlinkDe {
    pub terms: Vec<SinrTerms>,
    pub leak_hat: f64,
    pub leak_tilde: f64,
    /// Effective per-antenna noise at the radar, `N0 + leak_hat + leak_tilde`.
    pub sigma_wr2: f64,
    pub max_iterations: usize,
}

impl DownlinkDe {
    pub fn sinr(&self) -> Vec<f64> {
        self.terms.iter().map(SinrTerms::sinr).collect()
    }
}

/// Deterministic equivalent of the RZF downlink and of the radar leakage.
///
/// Weights are `b²_l` for the K users and `g = η_I − η_e` for the N_r radar
/// columns, no shift, regularizer α:
///
/// ```text
/// ζ_r  = β_k ε_k (b²_k μ_k / (1 + b²_k μ_k))²
/// ζ_I  = Σ_{m≠k} β_k ε_m b²_k b²_m μ'_{k,m} / ((1 + b²_k μ_k)² (1 + b²_m μ_{k,m})²)
/// ζ_E  = Σ_l β_k ε_l b̄²_k b²_l μ'_l / (1 + b²_l μ_l)²
/// ζ_RC = N_t σ_r² η_rk,   ζ_W = N0
/// leak_hat   = g Σ_i ε_i b²_i μ'_{r,i} / (1 + b²_i μ_{r,i})² / (1 + g μ_r)²
/// leak_tilde = η_e Σ_i ε_i b²_i μ'_i / (1 + b²_i μ_i)²
/// ```
pub fn de_downlink_sinr(
    scenario: &Scenario,
    powers: &PowerAllocation,
    config: &SystemConfig,
    alpha: f64,
    b2: &[f64],
) -> Result<DownlinkDe> {
    let k = b2.len();
    let n_r = config.N_r;
    let g = scenario.eta_hat();
    let eps = &powers.eps_dn_data;
    let mut weights = b2.to_vec();
    weights.extend(std::iter::repeat_n(g, n_r));
    let base = DeProblem::new(weights, Shift::zero(config.M), alpha);
    let (tol, iters) = (config.de_tol, config.de_max_iter);
    let mut max_iterations = 0;

    let mut mu = Vec::with_capacity(k);
    let mut mup = Vec::with_capacity(k);
    for u in 0..k {
        let (s, p) = solve_full(
            &base.excluding(&[u]),
            tol,
            iters,
            &format!("downlink k={u}"),
        )?;
        max_iterations = max_iterations.max(s.iterations);
        mu.push(s.mu);
        mup.push(p.mu_prime);
    }
    // ‖q_l‖² ≈ b²_l μ'_l / (1 + b²_l μ_l)².
    let q_norm: Vec<f64> = (0..k)
        .map(|l| b2[l] * mup[l] / (1.0 + b2[l] * mu[l]).powi(2))
        .collect();

    let mut terms = Vec::with_capacity(k);
    for u in 0..k {
        let bk = scenario.beta[u];
        let own = 1.0 + b2[u] * mu[u];
        let mut t = SinrTerms {
            signal: bk * eps[u] * (b2[u] * mu[u] / own).powi(2),
            radar_cancellable: config.N_t as f64 * config.sigma_r2 * scenario.eta_rk[u],
            noise: config.N0,
            ..SinrTerms::default()
        };
        for m in (0..k).filter(|&m| m != u) {
            let (s, p) = solve_full(
                &base.excluding(&[u, m]),
                tol,
                iters,
                &format!("downlink k={u},m={m}"),
            )?;
            max_iterations = max_iterations.max(s.iterations);
            t.interuser += bk * eps[m] * b2[u] * b2[m] * p.mu_prime
                / (own.powi(2) * (1.0 + b2[m] * s.mu).powi(2));
        }
        t.est_error = (0..k)
            .map(|l| bk * eps[l] * (1.0 - b2[u]) * q_norm[l])
            .sum();
        terms.push(t);
    }

    let (leak_hat, leak_tilde) = if n_r > 0 {
        let radar = k;
        let (s_r, _) = solve_full(&base.excluding(&[radar]), tol, iters, "downlink radar")?;
        max_iterations = max_iterations.max(s_r.iterations);
        let mut inner = 0.0;
        for i in 0..k {
            let (s, p) = solve_full(
                &base.excluding(&[radar, i]),
                tol,
                iters,
                &format!("downlink radar,i={i}"),
            )?;
            max_iterations = max_iterations.max(s.iterations);
            inner += eps[i] * b2[i] * p.mu_prime / (1.0 + b2[i] * s.mu).powi(2);
        }
        let hat = g * inner / (1.0 + g * s_r.mu).powi(2);
        let tilde = scenario.eta_e * (0..k).map(|i| eps[i] * q_norm[i]).sum::<f64>();
        (hat, tilde)
    } else {
        (0.0, 0.0)
    };

    Ok(DownlinkDe {
        terms,
        leak_hat,
        leak_tilde,
        sigma_wr2: config.N0 + leak_hat + leak_tilde,
        max_iterations,
    })
}
