//! Uplink data phase: MMSE combining and per-user SINR, measured on a draw
//! and predicted by the deterministic equivalent.

use serde::{Deserialize, Serialize};

use crate::de::{solve_full, DeProblem, Shift};
use crate::linalg::HpdFactor;
use crate::{
    rate_bits, CMat, ChannelEstimate, ChannelRealization, PowerAllocation, Result, Scenario,
    SystemConfig, C64,
};

/// Power of each term in a post-processing SINR. Unused terms are zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SinrTerms {
    pub signal: f64,
    pub interuser: f64,
    pub est_error: f64,
    /// Radar interference seen through the known interference channel.
    pub radar_cancellable: f64,
    /// Radar interference through the unknown part of the channel.
    pub radar_residual: f64,
    pub noise: f64,
}

impl SinrTerms {
    pub fn interference(&self) -> f64 {
        self.interuser + self.est_error + self.radar_cancellable + self.radar_residual + self.noise
    }

    pub fn sinr(&self) -> f64 {
        self.signal / self.interference()
    }

    pub fn rate(&self) -> f64 {
        rate_bits(self.sinr())
    }

    pub const NAMES: [&'static str; 6] = [
        "signal",
        "interuser",
        "est_error",
        "radar_cancellable",
        "radar_residual",
        "noise",
    ];

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.signal,
            self.interuser,
            self.est_error,
            self.radar_cancellable,
            self.radar_residual,
            self.noise,
        ]
    }
}

/// Diagonal loading of the combiner covariance, per antenna:
/// `Σ_m β_m ε_m b̄²_im + N_t σ_r² η_e + N0`.
fn loading(est: &ChannelEstimate, rx: &[f64], config: &SystemConfig, eta_e: f64) -> Vec<f64> {
    let base = config.N_t as f64 * config.sigma_r2 * eta_e + config.N0;
    (0..est.H_hat.nrows())
        .map(|i| {
            base + rx
                .iter()
                .enumerate()
                .map(|(m, r)| r * est.b2_bar[(i, m)])
                .sum::<f64>()
        })
        .collect()
}

/// `R = Σ β ε ĥ ĥ^H + σ_r² Ĝ Ĝ^H + diag(loading)`, the covariance of the
/// received data given the estimates.
pub fn combiner_covariance(
    est: &ChannelEstimate,
    g_hat_rb: &CMat,
    scenario: &Scenario,
    powers: &PowerAllocation,
    config: &SystemConfig,
) -> CMat {
    let rx = PowerAllocation::received(&scenario.beta, &powers.eps_up_data);
    let mut hd = est.H_hat.clone();
    for (k, r) in rx.iter().enumerate() {
        hd.column_mut(k).scale_mut(r.sqrt());
    }
    let mut r = &hd * hd.adjoint();
    if config.sigma_r2 > 0.0 {
        r += g_hat_rb * g_hat_rb.adjoint() * C64::new(config.sigma_r2, 0.0);
    }
    for (i, l) in loading(est, &rx, config, scenario.eta_e)
        .into_iter()
        .enumerate()
    {
        r[(i, i)] += C64::new(l, 0.0);
    }
    r
}

/// `C = R^-1 Ĥ`.
pub struct MmseCombiner {
    pub c: CMat,
}

pub fn mmse_combiner(
    est: &ChannelEstimate,
    g_hat_rb: &CMat,
    scenario: &Scenario,
    powers: &PowerAllocation,
    config: &SystemConfig,
) -> Result<MmseCombiner> {
    let r = combiner_covariance(est, g_hat_rb, scenario, powers, config);
    let c = HpdFactor::new(r)?.solve(&est.H_hat);
    Ok(MmseCombiner { c })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UplinkEmpirical {
    /// Error terms averaged over the unknown errors given the estimates,
    /// the conditioning the receiver and the DE work under.
    pub terms: Vec<SinrTerms>,
    /// Same split with the drawn error realizations.
    pub realized: Vec<SinrTerms>,
    /// Cross terms between estimate and error parts sharing a symbol; zero
    /// in expectation. `realized + cross` is the exact output power.
    pub cross: Vec<f64>,
}

impl UplinkEmpirical {
    pub fn sinr(&self) -> Vec<f64> {
        self.terms.iter().map(SinrTerms::sinr).collect()
    }
}

/// Six-way power split of `c_k^H y` for each user, averaged analytically
/// over unit-power symbols, `E[s s^H] = σ_r² I` and white noise.
#[allow(non_snake_case)]
pub fn empirical_uplink_sinr(
    ch: &ChannelRealization,
    est: &ChannelEstimate,
    combiner: &MmseCombiner,
    scenario: &Scenario,
    powers: &PowerAllocation,
    config: &SystemConfig,
) -> UplinkEmpirical {
    let rx = PowerAllocation::received(&scenario.beta, &powers.eps_up_data);
    let k = rx.len();
    let H_err = &ch.H - &est.H_hat;
    let c = &combiner.c;
    // Rows are users' combiners, columns the projected vectors.
    let p_hat = c.adjoint() * &est.H_hat;
    let p_err = c.adjoint() * &H_err;
    let p_g_hat = c.adjoint() * &ch.G_rb_hat;
    let p_g_err = c.adjoint() * &ch.G_rb_err;
    let sr2 = config.sigma_r2;

    let mut terms = Vec::with_capacity(k);
    let mut realized = Vec::with_capacity(k);
    let mut cross = Vec::with_capacity(k);
    for u in 0..k {
        let cu = c.column(u);
        let mut t = SinrTerms {
            signal: rx[u] * p_hat[(u, u)].norm_sqr(),
            ..SinrTerms::default()
        };
        let mut x = 0.0;
        for l in 0..k {
            if l != u {
                t.interuser += rx[l] * p_hat[(u, l)].norm_sqr();
            }
            t.est_error += rx[l] * p_err[(u, l)].norm_sqr();
            x += 2.0 * rx[l] * (p_hat[(u, l)] * p_err[(u, l)].conj()).re;
        }
        for i in 0..ch.G_rb_hat.ncols() {
            t.radar_cancellable += sr2 * p_g_hat[(u, i)].norm_sqr();
            t.radar_residual += sr2 * p_g_err[(u, i)].norm_sqr();
            x += 2.0 * sr2 * (p_g_hat[(u, i)] * p_g_err[(u, i)].conj()).re;
        }
        t.noise = config.N0 * cu.norm_squared();

        // E|c^H h̃_l|² = Σ_i b̄²_il |c_i|², E‖c^H G̃‖² = N_t η_e ‖c‖².
        let mut cond = t;
        cond.est_error = (0..k)
            .map(|l| {
                rx[l]
                    * cu.iter()
                        .zip(est.b2_bar.column(l).iter())
                        .map(|(ci, b)| b * ci.norm_sqr())
                        .sum::<f64>()
            })
            .sum();
        cond.radar_residual = sr2 * ch.G_rb_err.ncols() as f64 * scenario.eta_e * cu.norm_squared();
        terms.push(cond);
        realized.push(t);
        cross.push(x);
    }
    UplinkEmpirical {
        terms,
        realized,
        cross,
    }
}

/// Exact post-combining power `c_k^H R_true c_k` for a draw; used to check
/// that the decomposition is complete.
pub fn total_output_power(
    ch: &ChannelRealization,
    combiner: &MmseCombiner,
    scenario: &Scenario,
    powers: &PowerAllocation,
    config: &SystemConfig,
) -> Vec<f64> {
    let rx = PowerAllocation::received(&scenario.beta, &powers.eps_up_data);
    let mut hd = ch.H.clone();
    for (k, r) in rx.iter().enumerate() {
        hd.column_mut(k).scale_mut(r.sqrt());
    }
    let g = ch.G_rb();
    let m = ch.H.nrows();
    let r_true = &hd * hd.adjoint()
        + &g * g.adjoint() * C64::new(config.sigma_r2, 0.0)
        + CMat::identity(m, m) * C64::new(config.N0, 0.0);
    (0..rx.len())
        .map(|u| {
            let c = combiner.c.column(u);
            (c.adjoint() * &r_true * c)[(0, 0)].re
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UplinkDe {
    pub terms: Vec<SinrTerms>,
    pub mu: Vec<f64>,
    pub mu_prime: Vec<f64>,
    /// Largest iteration count over all leave-out solves.
    pub max_iterations: usize,
}

impl UplinkDe {
    pub fn sinr(&self) -> Vec<f64> {
        self.terms.iter().map(SinrTerms::sinr).collect()
    }
}

/// Deterministic equivalent of the MMSE uplink SINR, conditioned on Ĝ_rb.
///
/// With `c_m = β_m ε_m b²_m` and `D_k = (1 + c_k μ_k)²`:
///
/// ```text
/// ζ_s  = β_k ε_k (b²_k μ_k)² / D_k
/// ζ_I  = Σ_{l≠k} β_l ε_l b²_k b²_l μ'_{k,l} / (D_k (1 + c_l μ_{k,l})²)
/// ζ_E  = Σ_l β_l ε_l b̄²_l · b²_k μ'_k / D_k
/// ζ_RC = Σ_i σ_r² g b²_k μ'_{k,i} / (D_k (1 + σ_r² g μ_{k,i})²),  g = η_I − η_e
/// ζ_RE = N_t σ_r² η_e b²_k μ'_k / D_k
/// ζ_w  = N0 b²_k μ'_k / D_k
/// ```
///
/// where the `(k,i)` problems drop column i of Ĝ_rb from the shift.
pub fn de_uplink_sinr(
    scenario: &Scenario,
    powers: &PowerAllocation,
    config: &SystemConfig,
    g_hat_rb: &CMat,
    b2: &[f64],
) -> Result<UplinkDe> {
    let k = b2.len();
    let rx = PowerAllocation::received(&scenario.beta, &powers.eps_up_data);
    let c: Vec<f64> = rx.iter().zip(b2).map(|(r, b)| r * b).collect();
    let sr2 = config.sigma_r2;
    let g = scenario.eta_hat();
    let rho = rx.iter().zip(b2).map(|(r, b)| r * (1.0 - b)).sum::<f64>()
        + config.N_t as f64 * sr2 * scenario.eta_e
        + config.N0;
    let base = DeProblem::new(c.clone(), Shift::from_gram_factor(g_hat_rb, sr2), rho);
    let (tol, iters) = (config.de_tol, config.de_max_iter);

    // Shifts with one radar column removed.
    let leave_col: Vec<Shift> = if sr2 > 0.0 && g > 0.0 {
        (0..g_hat_rb.ncols())
            .map(|i| {
                let cols: Vec<usize> = (0..g_hat_rb.ncols()).filter(|&j| j != i).collect();
                Shift::from_gram_factor(&g_hat_rb.select_columns(&cols), sr2)
            })
            .collect()
    } else {
        Vec::new()
    };

    let mut terms = Vec::with_capacity(k);
    let (mut mus, mut mups) = (Vec::new(), Vec::new());
    let mut max_iterations = 0;
    for u in 0..k {
        let (s, p) = solve_full(&base.excluding(&[u]), tol, iters, &format!("uplink k={u}"))?;
        max_iterations = max_iterations.max(s.iterations);
        let (mu, mup) = (s.mu, p.mu_prime);
        let d = (1.0 + c[u] * mu).powi(2);
        let mut t = SinrTerms {
            signal: rx[u] * (b2[u] * mu).powi(2) / d,
            ..SinrTerms::default()
        };
        for l in (0..k).filter(|&l| l != u) {
            let (s, p) = solve_full(
                &base.excluding(&[u, l]),
                tol,
                iters,
                &format!("uplink k={u},l={l}"),
            )?;
            max_iterations = max_iterations.max(s.iterations);
            t.interuser += rx[l] * b2[u] * b2[l] * p.mu_prime / (d * (1.0 + c[l] * s.mu).powi(2));
        }
        let err_power: f64 = rx.iter().zip(b2).map(|(r, b)| r * (1.0 - b)).sum();
        t.est_error = err_power * b2[u] * mup / d;
        for (i, shift) in leave_col.iter().enumerate() {
            let prob = base.with_shift(shift.clone()).excluding(&[u]);
            let (s, p) = solve_full(&prob, tol, iters, &format!("uplink k={u},i={i}"))?;
            max_iterations = max_iterations.max(s.iterations);
            t.radar_cancellable +=
                sr2 * g * b2[u] * p.mu_prime / (d * (1.0 + sr2 * g * s.mu).powi(2));
        }
        t.radar_residual = config.N_t as f64 * sr2 * scenario.eta_e * b2[u] * mup / d;
        t.noise = config.N0 * b2[u] * mup / d;
        terms.push(t);
        mus.push(mu);
        mups.push(mup);
    }
    Ok(UplinkDe {
        terms,
        mu: mus,
        mu_prime: mups,
        max_iterations,
    })
}

/// Both pipelines for one draw.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UplinkResult {
    pub gamma_emp: Vec<f64>,
    pub gamma_de: Vec<f64>,
    pub empirical: Vec<SinrTerms>,
    pub zeta: Vec<SinrTerms>,
    pub rate_emp: Vec<f64>,
    pub rate_de: Vec<f64>,
}

impl UplinkResult {
    pub fn new(emp: &UplinkEmpirical, de: &UplinkDe) -> Self {
        let gamma_emp = emp.sinr();
        let gamma_de = de.sinr();
        Self {
            rate_emp: gamma_emp.iter().map(|&g| rate_bits(g)).collect(),
            rate_de: gamma_de.iter().map(|&g| rate_bits(g)).collect(),
            gamma_emp,
            gamma_de,
            empirical: emp.terms.clone(),
            zeta: de.terms.clone(),
        }
    }
}
