//! Uplink pilot phase: despreading and per-entry LMMSE channel estimation
//! under radar interference.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::complex_normal_matrix;
use crate::{
    CMat, ChannelRealization, Error, PowerAllocation, Result, Scenario, SystemConfig, C64,
};

/// Whether the BS knows the radar waveform during the pilot window and can
/// subtract the part of the interference seen through Ĝ_rb.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyncMode {
    Known,
    Unknown,
}

/// K×K pilot matrix; row k is user k's sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotMatrix {
    pub psi: CMat,
}

impl PilotMatrix {
    /// DFT pilots scaled so each row has unit energy.
    pub fn dft(k: usize) -> Self {
        let scale = 1.0 / (k as f64).sqrt();
        let psi = CMat::from_fn(k, k, |row, n| {
            let phase = -std::f64::consts::TAU * (row * n) as f64 / k as f64;
            C64::from_polar(scale, phase)
        });
        Self { psi }
    }

    pub fn k(&self) -> usize {
        self.psi.nrows()
    }
}

pub fn generate_pilots(k: usize) -> PilotMatrix {
    PilotMatrix::dft(k)
}

/// Per (antenna i, user l) LMMSE gains and variances, stored M×K.
#[derive(Debug, Clone, PartialEq)]
pub struct LmmseCoefficients {
    pub a: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub b2_bar: DMatrix<f64>,
    pub sync_mode: SyncMode,
}

impl LmmseCoefficients {
    /// Antenna-averaged estimate variance for user `l`. Exact in sync-known
    /// mode, where the variance does not depend on the antenna.
    pub fn b2_user(&self, l: usize) -> f64 {
        self.b2.column(l).mean()
    }

    pub fn b2_bar_user(&self, l: usize) -> f64 {
        self.b2_bar.column(l).mean()
    }
}

/// Closed-form LMMSE coefficients.
///
/// Known mode: `b² = βε / (βε + N_t η_e σ_r² + N0)`. Unknown mode adds
/// `σ_r² ‖ĝ_rb,i‖²` to the denominator, so `row_norms` (length M) is required.
pub fn lmmse_coefficients(
    scenario: &Scenario,
    powers: &PowerAllocation,
    config: &SystemConfig,
    sync_mode: SyncMode,
    row_norms: Option<&[f64]>,
) -> Result<LmmseCoefficients> {
    let (m, k) = (config.M, scenario.k());
    let base = config.N_t as f64 * scenario.eta_e * config.sigma_r2 + config.N0;
    let extra: Vec<f64> = match (sync_mode, row_norms) {
        (SyncMode::Known, _) => vec![0.0; m],
        (SyncMode::Unknown, Some(norms)) => {
            if norms.len() != m {
                return Err(Error::Dimension(format!(
                    "expected {m} row norms, got {}",
                    norms.len()
                )));
            }
            norms.iter().map(|n| config.sigma_r2 * n).collect()
        }
        (SyncMode::Unknown, None) => {
            return Err(Error::InvalidArgument(
                "sync-unknown coefficients need the per-antenna ‖ĝ_rb,i‖²".into(),
            ))
        }
    };
    if extra.iter().any(|x| x.is_nan()) || powers.eps_up_pilot.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument("NaN in LMMSE inputs".into()));
    }
    let mut a = DMatrix::zeros(m, k);
    let mut b2 = DMatrix::zeros(m, k);
    let mut b2_bar = DMatrix::zeros(m, k);
    for l in 0..k {
        let rx = scenario.beta[l] * powers.eps_up_pilot[l];
        for i in 0..m {
            let den = rx + base + extra[i];
            a[(i, l)] = rx.sqrt() / den;
            b2[(i, l)] = rx / den;
            b2_bar[(i, l)] = (base + extra[i]) / den;
        }
    }
    Ok(LmmseCoefficients {
        a,
        b2,
        b2_bar,
        sync_mode,
    })
}

/// `‖ĝ_rb,i‖²` for each row of Ĝ_rb.
pub fn row_norms(g_hat: &CMat) -> Vec<f64> {
    g_hat
        .row_iter()
        .map(|r| r.iter().map(|z| z.norm_sqr()).sum())
        .collect()
}

/// Radar waveform over the pilot window: N_t×K with i.i.d. CN(0, σ_r²).
pub fn pilot_radar_waveform<R: Rng + ?Sized>(
    n_t: usize,
    k: usize,
    sigma_r2: f64,
    rng: &mut R,
) -> CMat {
    complex_normal_matrix(rng, n_t, k, sigma_r2)
}

/// `Y = H diag(√(βε)) Ψ + G_rb S_p + √N0 W`, M×K.
#[allow(non_snake_case)]
pub fn received_pilot_block<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    scenario: &Scenario,
    powers: &PowerAllocation,
    pilots: &PilotMatrix,
    s_pilot: &CMat,
    n0: f64,
    rng: &mut R,
) -> CMat {
    let (m, k) = ch.H.shape();
    let mut hd = ch.H.clone();
    for l in 0..k {
        let s = (scenario.beta[l] * powers.eps_up_pilot[l]).sqrt();
        hd.column_mut(l).scale_mut(s);
    }
    let W = complex_normal_matrix(rng, m, pilots.k(), n0);
    hd * &pilots.psi + ch.G_rb() * s_pilot + W
}

#[allow(non_snake_case)]
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    pub H_hat: CMat,
    pub b2: DMatrix<f64>,
    pub b2_bar: DMatrix<f64>,
    pub sync_mode: SyncMode,
}

/// Despread `Y Ψ^H`, optionally remove `Ĝ S_p Ψ^H`, and scale each entry by
/// its LMMSE gain. Known mode needs the waveform and Ĝ_rb.
pub fn estimate_channels(
    y: &CMat,
    pilots: &PilotMatrix,
    coeffs: &LmmseCoefficients,
    radar: Option<(&CMat, &CMat)>,
) -> Result<ChannelEstimate> {
    let mut despread = y * pilots.psi.adjoint();
    if coeffs.sync_mode == SyncMode::Known {
        let (s_pilot, g_hat) = radar.ok_or_else(|| {
            Error::InvalidArgument("sync-known estimation needs S and Ĝ_rb".into())
        })?;
        despread -= g_hat * s_pilot * pilots.psi.adjoint();
    }
    if despread.shape() != coeffs.a.shape() {
        return Err(Error::Dimension(format!(
            "despread block {:?} vs coefficients {:?}",
            despread.shape(),
            coeffs.a.shape()
        )));
    }
    let h_hat = CMat::from_fn(despread.nrows(), despread.ncols(), |i, l| {
        despread[(i, l)] * coeffs.a[(i, l)]
    });
    Ok(ChannelEstimate {
        H_hat: h_hat,
        b2: coeffs.b2.clone(),
        b2_bar: coeffs.b2_bar.clone(),
        sync_mode: coeffs.sync_mode,
    })
}

/// Whole pilot phase for one trial: draw the waveform and noise from `rng`,
/// build Y and estimate.
pub fn run_training<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    scenario: &Scenario,
    powers: &PowerAllocation,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<ChannelEstimate> {
    let pilots = generate_pilots(config.K);
    let s_pilot = pilot_radar_waveform(config.N_t, config.K, config.sigma_r2, rng);
    let y = received_pilot_block(ch, scenario, powers, &pilots, &s_pilot, config.N0, rng);
    let norms = row_norms(&ch.G_rb_hat);
    let coeffs = lmmse_coefficients(scenario, powers, config, config.sync_mode, Some(&norms))?;
    estimate_channels(&y, &pilots, &coeffs, Some((&s_pilot, &ch.G_rb_hat)))
}
