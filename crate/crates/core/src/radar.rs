//! Radar side: array manifold, snapshot model, MUSIC and the AoA CRB.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::hermitian_eigen_sorted;
use crate::rng::{complex_normal_matrix, unit_phase};
use crate::{CMat, CVec, Error, PilotMatrix, Result, C64};

/// Uniform linear arrays at half-wavelength spacing. The phase reference is
/// the array centre, element `n` sits at `n - (N-1)/2`.
#[allow(non_snake_case)]
#[derive(Debug, Clone)]
pub struct ArrayManifold {
    pub theta: f64,
    pub a_t: CVec,
    pub a_r: CVec,
    /// `a_r a_t^T`, N_r×N_t.
    pub A: CMat,
    /// `dA/dθ`.
    pub A_dot: CMat,
}

fn offsets(n: usize) -> impl Iterator<Item = f64> {
    let c = (n as f64 - 1.0) / 2.0;
    (0..n).map(move |i| i as f64 - c)
}

pub fn steering(n: usize, theta: f64) -> CVec {
    let s = theta.sin();
    CVec::from_iterator(n, offsets(n).map(|p| C64::from_polar(1.0, PI * p * s)))
}

fn steering_dot(n: usize, theta: f64) -> CVec {
    let (s, c) = theta.sin_cos();
    CVec::from_iterator(
        n,
        offsets(n).map(|p| C64::new(0.0, PI * p * c) * C64::from_polar(1.0, PI * p * s)),
    )
}

impl ArrayManifold {
    pub fn new(theta: f64, n_t: usize, n_r: usize) -> Result<Self> {
        if !(theta > -FRAC_PI_2 && theta < FRAC_PI_2) {
            return Err(Error::InvalidArgument(format!(
                "angle {theta} rad is outside (-π/2, π/2)"
            )));
        }
        let a_t = steering(n_t, theta);
        let a_r = steering(n_r, theta);
        let ad_t = steering_dot(n_t, theta);
        let ad_r = steering_dot(n_r, theta);
        let a = &a_r * a_t.transpose();
        let a_dot = &ad_r * a_t.transpose() + &a_r * ad_t.transpose();
        Ok(Self {
            theta,
            a_t,
            a_r,
            A: a,
            A_dot: a_dot,
        })
    }

    /// `Re Tr(Ȧ Ȧ^H)`.
    pub fn fisher_trace(&self) -> f64 {
        crate::linalg::fro2(&self.A_dot)
    }
}

pub fn array_manifold(theta: f64, n_t: usize, n_r: usize) -> Result<ArrayManifold> {
    ArrayManifold::new(theta, n_t, n_r)
}

/// `S = σ_r U` with `U` a Haar-random N_t×N_t unitary, so `S S^H = σ_r² I`.
pub fn radar_waveform<R: Rng + ?Sized>(n_t: usize, sigma_r2: f64, rng: &mut R) -> CMat {
    let sigma = sigma_r2.sqrt();
    if n_t == 1 {
        return CMat::from_element(1, 1, unit_phase(rng) * sigma);
    }
    let g = complex_normal_matrix(rng, n_t, n_t, 1.0);
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n_t {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..n_t {
            q[(i, j)] *= ph;
        }
    }
    q * C64::new(sigma, 0.0)
}

/// Which communication phase overlaps the radar block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkMode {
    UplinkPilot,
    UplinkData,
    Downlink,
}

/// Interference the communication system injects into the radar block.
#[allow(non_snake_case)]
pub enum RadarInterference<'a> {
    None,
    /// Users' pilots: unit-modulus symbols `√K ψ_k[n]`, cycled over the block.
    UplinkPilot {
        eps: &'a [f64],
        g_kr: &'a CMat,
    },
    /// Users' data: unit-power Gaussian symbols.
    UplinkData {
        eps: &'a [f64],
        g_kr: &'a CMat,
    },
    /// BS downlink `G_br Q diag(√ε) p[n]` with unit-power Gaussian symbols.
    Downlink {
        G_br: &'a CMat,
        Q: &'a CMat,
        eps: &'a [f64],
    },
}

impl RadarInterference<'_> {
    pub fn mode(&self) -> Option<LinkMode> {
        match self {
            Self::None => None,
            Self::UplinkPilot { .. } => Some(LinkMode::UplinkPilot),
            Self::UplinkData { .. } => Some(LinkMode::UplinkData),
            Self::Downlink { .. } => Some(LinkMode::Downlink),
        }
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone)]
pub struct RadarSnapshotBlock {
    /// N_r×N received block.
    pub Z: CMat,
    /// N_t×N transmitted block.
    pub S: CMat,
    pub mode: Option<LinkMode>,
}

fn scaled_symbols(eps: &[f64], symbols: CMat) -> CMat {
    let mut s = symbols;
    for (k, e) in eps.iter().enumerate() {
        s.row_mut(k).scale_mut(e.sqrt());
    }
    s
}

/// `Z = h_rr A S + interference + √N0 W`.
pub fn simulate_radar_receive<R: Rng + ?Sized>(
    manifold: &ArrayManifold,
    h_rr: C64,
    s: &CMat,
    interference: &RadarInterference,
    n0: f64,
    rng: &mut R,
) -> Result<RadarSnapshotBlock> {
    let (n_r, n_t) = manifold.A.shape();
    if s.nrows() != n_t {
        return Err(Error::Dimension(format!(
            "S has {} rows, array has {n_t}",
            s.nrows()
        )));
    }
    let n = s.ncols();
    let mut z = &manifold.A * s * h_rr;
    match interference {
        RadarInterference::None => {}
        RadarInterference::UplinkPilot { eps, g_kr }
        | RadarInterference::UplinkData { eps, g_kr } => {
            let k = eps.len();
            if g_kr.shape() != (n_r, k) {
                return Err(Error::Dimension(format!(
                    "g_kr is {:?}, expected ({n_r}, {k})",
                    g_kr.shape()
                )));
            }
            let symbols = if matches!(interference, RadarInterference::UplinkPilot { .. }) {
                let psi = PilotMatrix::dft(k).psi;
                let root_k = (k as f64).sqrt();
                CMat::from_fn(k, n, |row, col| psi[(row, col % k)] * root_k)
            } else {
                complex_normal_matrix(rng, k, n, 1.0)
            };
            z += *g_kr * scaled_symbols(eps, symbols);
        }
        RadarInterference::Downlink { G_br, Q, eps } => {
            if G_br.nrows() != n_r || G_br.ncols() != Q.nrows() || Q.ncols() != eps.len() {
                return Err(Error::Dimension(
                    "downlink interference shapes disagree".into(),
                ));
            }
            let p = complex_normal_matrix(rng, eps.len(), n, 1.0);
            z += *G_br * *Q * scaled_symbols(eps, p);
        }
    }
    z += complex_normal_matrix(rng, n_r, n, n0);
    Ok(RadarSnapshotBlock {
        Z: z,
        S: s.clone(),
        mode: interference.mode(),
    })
}

/// Subspace used by the MUSIC search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MusicManifold {
    /// Receive array only, noise subspace of `Z Z^H / N`.
    Receive,
    /// Virtual array `a_t ⊗ a_r` on the matched output `vec(Z S^H)`.
    TransmitReceive,
}

/// One-dimensional grid minimization over `(-90°, 90°)` of a denominator
/// given as a function of `sin φ`, refined by one parabolic step.
fn grid_minimize(denominator: impl Fn(f64) -> f64, grid_deg: f64) -> f64 {
    let step = grid_deg.to_radians();
    let n = (PI / step).floor() as i64;
    let half = n / 2;
    let angle = |i: i64| (i as f64 * step).clamp(-FRAC_PI_2, FRAC_PI_2);
    let (mut best_i, mut best_v) = (0i64, f64::INFINITY);
    for i in -half..=half {
        let v = denominator(angle(i).sin());
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    if best_i == -half || best_i == half {
        return angle(best_i);
    }
    let (l, c, r) = (
        denominator(angle(best_i - 1).sin()),
        best_v,
        denominator(angle(best_i + 1).sin()),
    );
    let curv = l - 2.0 * c + r;
    let shift = if curv > 0.0 {
        0.5 * (l - r) / curv
    } else {
        0.0
    };
    angle(best_i) + shift.clamp(-0.5, 0.5) * step
}

/// `|Σ_m c_m z^m|²` with `z = e^{jπ s}`, by Horner.
fn poly_power(coeffs: &[C64], s: f64) -> f64 {
    let z = C64::from_polar(1.0, PI * s);
    let mut acc = C64::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc.norm_sqr()
}

/// MUSIC AoA estimate. Returns `None` when the signal subspace cannot be
/// identified (zero block or no eigenvalue gap).
pub fn music_aoa(z: &CMat, s: &CMat, family: MusicManifold, grid_deg: f64) -> Result<Option<f64>> {
    let (n_r, n) = z.shape();
    let n_t = s.nrows();
    if s.ncols() != n {
        return Err(Error::Dimension(
            "Z and S have different snapshot counts".into(),
        ));
    }
    if n < n_t {
        return Err(Error::InvalidArgument(format!(
            "need at least N_t = {n_t} snapshots, got {n}"
        )));
    }
    match family {
        MusicManifold::Receive => {
            let r = z * z.adjoint() / C64::new(n as f64, 0.0);
            let (vals, vecs) = hermitian_eigen_sorted(&r);
            let top = vals[n_r - 1];
            let second = if n_r > 1 { vals[n_r - 2] } else { 0.0 };
            if !(top > 0.0) || top - second <= 1e-12 * top {
                return Ok(None);
            }
            // V V^H = I - u u^H, so the denominator is N_r - |u^H a|².
            let u = vecs.column(n_r - 1);
            let coeffs: Vec<C64> = u.iter().map(|x| x.conj()).collect();
            let nr = n_r as f64;
            Ok(Some(grid_minimize(
                |sn| nr - poly_power(&coeffs, sn),
                grid_deg,
            )))
        }
        MusicManifold::TransmitReceive => {
            let omega = z * s.adjoint();
            let norm2 = crate::linalg::fro2(&omega);
            if !(norm2 > 0.0) {
                return Ok(None);
            }
            // a_r,i a_t,j depends only on i + j: collapse onto anti-diagonals.
            let mut coeffs = vec![C64::new(0.0, 0.0); n_r + n_t - 1];
            for i in 0..n_r {
                for j in 0..n_t {
                    coeffs[i + j] += omega[(i, j)].conj();
                }
            }
            let total = (n_r * n_t) as f64;
            Ok(Some(grid_minimize(
                |sn| total - poly_power(&coeffs, sn) / norm2,
                grid_deg,
            )))
        }
    }
}

/// Squared error charged for a failed estimate: a uniform guess over the
/// field of view.
pub fn failure_sq_error(theta: f64) -> f64 {
    PI * PI / 12.0 + theta * theta
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarMetrics {
    pub crb: f64,
    pub radar_rate: f64,
    pub theta_hat: Option<f64>,
    pub mse: Option<f64>,
}

pub fn radar_rate(crb: f64) -> f64 {
    if crb.is_infinite() {
        0.0
    } else {
        (1.0 + 1.0 / crb).log2()
    }
}

/// `CRB = σ²_eff / (2 σ_r² |h_rr|² Re Tr(Ȧ Ȧ^H))`. Infinite when the echo
/// carries no energy.
pub fn crb(
    sigma_eff: f64,
    sigma_r2: f64,
    h_rr: C64,
    manifold: &ArrayManifold,
) -> Result<RadarMetrics> {
    if !(sigma_eff > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "effective noise power must be positive, got {sigma_eff}"
        )));
    }
    let info = 2.0 * sigma_r2 * h_rr.norm_sqr() * manifold.fisher_trace();
    let crb = if info > 0.0 {
        sigma_eff / info
    } else {
        f64::INFINITY
    };
    Ok(RadarMetrics {
        crb,
        radar_rate: radar_rate(crb),
        theta_hat: None,
        mse: None,
    })
}

/// Uplink effective noise `N0 + Σ_k ε_{u,p,k} η_rk`.
pub fn uplink_noise(n0: f64, eps_pilot: &[f64], eta_rk: &[f64]) -> f64 {
    n0 + eps_pilot
        .iter()
        .zip(eta_rk)
        .map(|(e, h)| e * h)
        .sum::<f64>()
}
