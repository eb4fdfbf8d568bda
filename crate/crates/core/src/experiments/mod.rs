//! Monte Carlo harness and figure-style curves.
//!
//! Each trial `t` is a fresh drop drawn from `stream(seed, Scenario, t)` and
//! `stream(seed, Trial, t)`. The streams depend only on the seed and the
//! trial index, so sweeping a parameter reuses the same randomness at every
//! grid point, and trials can run on any worker in any order.

pub mod output;
pub mod region;
pub mod validate;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::downlink::{
    de_downlink_sinr, default_alpha, empirical_downlink_sinr, radar_leakage, rzf_precoder,
};
use crate::radar::{
    crb, failure_sq_error, music_aoa, radar_waveform, simulate_radar_receive, uplink_noise,
    RadarInterference,
};
use crate::rng::{stream, Domain, SimRng};
use crate::training::{lmmse_coefficients, run_training};
use crate::uplink::{de_uplink_sinr, empirical_uplink_sinr, mmse_combiner};
use crate::{
    build_scenario, draw_channels, power_control, ArrayManifold, ChannelEstimate,
    ChannelRealization, Error, PowerAllocation, Result, Scenario, SyncMode, SystemConfig,
};

pub use region::{pareto_frontier, rate_region, Link, RateRegion, RateRegionPoint, RegionGrid};
pub use validate::{validate_de, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKind {
    EstMse,
    AoaMse,
    UlRate,
    UlRadarRate,
    DlRate,
    DlRadarRate,
    RateRegion,
    ValidateDe,
}

impl CurveKind {
    pub const ALL: [CurveKind; 8] = [
        CurveKind::EstMse,
        CurveKind::AoaMse,
        CurveKind::UlRate,
        CurveKind::UlRadarRate,
        CurveKind::DlRate,
        CurveKind::DlRadarRate,
        CurveKind::RateRegion,
        CurveKind::ValidateDe,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CurveKind::EstMse => "est-mse",
            CurveKind::AoaMse => "aoa-mse",
            CurveKind::UlRate => "ul-rate",
            CurveKind::UlRadarRate => "ul-radar-rate",
            CurveKind::DlRate => "dl-rate",
            CurveKind::DlRadarRate => "dl-radar-rate",
            CurveKind::RateRegion => "rate-region",
            CurveKind::ValidateDe => "validate-de",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown experiment kind `{s}`")))
    }

    /// Series emitted by a swept curve kind.
    pub fn series(&self) -> &'static [&'static str] {
        match self {
            CurveKind::EstMse => &["mc", "analytic"],
            CurveKind::AoaMse => &["mse", "crb"],
            CurveKind::UlRate | CurveKind::DlRate | CurveKind::DlRadarRate => &["de", "mc"],
            CurveKind::UlRadarRate => &["crb"],
            CurveKind::RateRegion | CurveKind::ValidateDe => &[],
        }
    }

    /// Default sweep for the swept kinds.
    pub fn default_sweep(&self) -> Option<(&'static str, Vec<f64>)> {
        let db = |lo: i32, hi: i32, step: i32| {
            (lo..=hi)
                .step_by(step as usize)
                .map(f64::from)
                .collect::<Vec<_>>()
        };
        match self {
            CurveKind::EstMse => Some(("eps_up_pilot_db", db(-10, 20, 5))),
            CurveKind::AoaMse => Some(("radar_snr_db", db(-10, 30, 5))),
            CurveKind::UlRate => Some(("eps_up_data_db", db(0, 20, 5))),
            CurveKind::UlRadarRate => Some(("radar_snr_db", db(0, 30, 5))),
            CurveKind::DlRate => Some(("eps_dn_data_db", db(0, 20, 5))),
            CurveKind::DlRadarRate => Some(("radar_snr_db", db(0, 30, 5))),
            CurveKind::RateRegion | CurveKind::ValidateDe => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub kind: CurveKind,
    /// Config key, optionally suffixed `_db` for decibel grids.
    pub sweep_key: String,
    pub grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl CurveSpec {
    pub fn default_for(kind: CurveKind, config: &SystemConfig) -> Result<Self> {
        let (key, grid) = kind.default_sweep().ok_or_else(|| {
            Error::InvalidArgument(format!("`{}` is not a swept curve", kind.name()))
        })?;
        Ok(Self {
            kind,
            sweep_key: key.to_string(),
            grid,
            trials: config.trials,
            seed: config.seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidArgument("sweep grid is empty".into()));
        }
        if !self.grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "sweep grid must be strictly increasing".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveResult {
    pub kind: CurveKind,
    pub sweep_key: String,
    pub series: Vec<Series>,
}

impl CurveResult {
    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn total_failures(&self) -> usize {
        self.series
            .iter()
            .flat_map(|s| &s.points)
            .map(|p| p.failures)
            .sum()
    }
}

/// Outcome of one trial for one series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sample {
    Ok(f64),
    /// Counted in the mean with a penalty value and in the failure count.
    Penalized(f64),
    /// Excluded from the mean, counted as a failure.
    Failed,
}

/// Mean, standard error and failure count in trial order.
pub fn summarize(x: f64, samples: &[Sample]) -> Point {
    let mut vals = Vec::with_capacity(samples.len());
    let mut failures = 0;
    for s in samples {
        match *s {
            Sample::Ok(v) => vals.push(v),
            Sample::Penalized(v) => {
                vals.push(v);
                failures += 1;
            }
            Sample::Failed => failures += 1,
        }
    }
    let n = vals.len();
    let mean = if n > 0 {
        vals.iter().sum::<f64>() / n as f64
    } else {
        f64::NAN
    };
    let stderr = if n > 1 {
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Point {
        x,
        mean,
        stderr,
        trials: samples.len(),
        failures,
    }
}

/// Everything drawn for one trial, with the trial stream positioned after
/// channels and training.
pub struct TrialDraw {
    pub config: SystemConfig,
    pub scenario: Scenario,
    pub powers: PowerAllocation,
    pub channels: ChannelRealization,
    pub estimate: ChannelEstimate,
    pub rng: SimRng,
}

impl TrialDraw {
    pub fn draw(config: &SystemConfig, trial: u64) -> Result<Self> {
        let scenario = build_scenario(config, &mut stream(config.seed, Domain::Scenario, trial))?;
        Self::with_scenario(config, scenario, trial)
    }

    /// Use a given geometry; only the small-scale draws come from `trial`.
    pub fn with_scenario(config: &SystemConfig, scenario: Scenario, trial: u64) -> Result<Self> {
        let powers = power_control(&scenario, config)?;
        let mut rng = stream(config.seed, Domain::Trial, trial);
        let channels = draw_channels(&scenario, config, &mut rng);
        let estimate = run_training(&channels, &scenario, &powers, config, &mut rng)?;
        Ok(Self {
            config: config.clone(),
            scenario,
            powers,
            channels,
            estimate,
            rng,
        })
    }

    /// Sync-known `b²_l`, the estimate quality the analytic pipeline uses.
    pub fn analytic_b2(&self) -> Result<Vec<f64>> {
        let c = lmmse_coefficients(
            &self.scenario,
            &self.powers,
            &self.config,
            SyncMode::Known,
            None,
        )?;
        Ok((0..self.config.K).map(|l| c.b2_user(l)).collect())
    }

    pub fn manifold(&self) -> Result<ArrayManifold> {
        ArrayManifold::new(self.scenario.theta, self.config.N_t, self.config.N_r)
    }

    pub fn uplink_radar_noise(&self) -> f64 {
        uplink_noise(
            self.config.N0,
            &self.powers.eps_up_pilot,
            &self.scenario.eta_rk,
        )
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn ok_or_failed(r: Result<f64>) -> Sample {
    match r {
        Ok(v) if v.is_finite() => Sample::Ok(v),
        _ => Sample::Failed,
    }
}

/// Average per-user uplink rate, DE and measured.
pub fn uplink_rates(d: &TrialDraw) -> (Result<f64>, Result<f64>) {
    let b2 = d.analytic_b2();
    let de = b2
        .and_then(|b2| de_uplink_sinr(&d.scenario, &d.powers, &d.config, &d.channels.G_rb_hat, &b2))
        .map(|de| mean(&de.terms.iter().map(|t| t.rate()).collect::<Vec<_>>()));
    let mc = mmse_combiner(
        &d.estimate,
        &d.channels.G_rb_hat,
        &d.scenario,
        &d.powers,
        &d.config,
    )
    .map(|c| {
        let emp = empirical_uplink_sinr(
            &d.channels,
            &d.estimate,
            &c,
            &d.scenario,
            &d.powers,
            &d.config,
        );
        mean(&emp.terms.iter().map(|t| t.rate()).collect::<Vec<_>>())
    });
    (de, mc)
}

/// Average per-user downlink rate, DE and measured.
pub fn downlink_rates(d: &TrialDraw) -> (Result<f64>, Result<f64>) {
    let alpha = default_alpha(&d.scenario, &d.powers, &d.config);
    let de = d
        .analytic_b2()
        .and_then(|b2| de_downlink_sinr(&d.scenario, &d.powers, &d.config, alpha, &b2))
        .map(|de| mean(&de.terms.iter().map(|t| t.rate()).collect::<Vec<_>>()));
    let mc = rzf_precoder(&d.estimate.H_hat, &d.channels.G_br_hat, alpha).map(|p| {
        let emp = empirical_downlink_sinr(
            &d.channels,
            &d.estimate,
            &p,
            &d.scenario,
            &d.powers,
            &d.config,
        );
        mean(&emp.terms.iter().map(|t| t.rate()).collect::<Vec<_>>())
    });
    (de, mc)
}

/// Downlink radar rate from the DE leakage and from the measured leakage.
pub fn downlink_radar_rates(d: &TrialDraw) -> (Result<f64>, Result<f64>) {
    let manifold = match d.manifold() {
        Ok(m) => m,
        Err(e) => return (Err(e), Err(Error::Numerical("no manifold".into()))),
    };
    let cfg = &d.config;
    let alpha = default_alpha(&d.scenario, &d.powers, cfg);
    let de = d
        .analytic_b2()
        .and_then(|b2| de_downlink_sinr(&d.scenario, &d.powers, cfg, alpha, &b2))
        .and_then(|de| crb(de.sigma_wr2, cfg.sigma_r2, d.scenario.h_rr, &manifold))
        .map(|m| m.radar_rate);
    let mc = rzf_precoder(&d.estimate.H_hat, &d.channels.G_br_hat, alpha)
        .and_then(|p| {
            let noise = cfg.N0 + radar_leakage(&d.channels, &p, &d.powers);
            crb(noise, cfg.sigma_r2, d.scenario.h_rr, &manifold)
        })
        .map(|m| m.radar_rate);
    (de, mc)
}

pub fn uplink_radar_rate(d: &TrialDraw) -> Result<f64> {
    crb(
        d.uplink_radar_noise(),
        d.config.sigma_r2,
        d.scenario.h_rr,
        &d.manifold()?,
    )
    .map(|m| m.radar_rate)
}

/// MUSIC squared error under uplink pilot interference, and the CRB.
/// The MUSIC outcome is `Penalized` when the estimator fails.
pub fn aoa_trial(d: &mut TrialDraw) -> Result<(Sample, f64)> {
    let cfg = d.config.clone();
    let manifold = d.manifold()?;
    let s = radar_waveform(cfg.N_t, cfg.sigma_r2, &mut d.rng);
    let interference = RadarInterference::UplinkPilot {
        eps: &d.powers.eps_up_pilot,
        g_kr: &d.channels.g_kr,
    };
    let block = simulate_radar_receive(
        &manifold,
        d.scenario.h_rr,
        &s,
        &interference,
        cfg.N0,
        &mut d.rng,
    )?;
    let theta = d.scenario.theta;
    let est = music_aoa(&block.Z, &block.S, cfg.music_manifold, cfg.music_grid_deg)?;
    let sample = match est {
        Some(t) => Sample::Ok((t - theta).powi(2)),
        None => Sample::Penalized(failure_sq_error(theta)),
    };
    let bound = crb(
        d.uplink_radar_noise(),
        cfg.sigma_r2,
        d.scenario.h_rr,
        &manifold,
    )?
    .crb;
    Ok((sample, bound))
}

/// Per-series samples for one trial of a swept kind.
pub fn trial_samples(kind: CurveKind, config: &SystemConfig, trial: u64) -> Vec<Sample> {
    let n = kind.series().len();
    let mut d = match TrialDraw::draw(config, trial) {
        Ok(d) => d,
        Err(_) => return vec![Sample::Failed; n],
    };
    match kind {
        CurveKind::EstMse => {
            let err = &d.channels.H - &d.estimate.H_hat;
            let mc = crate::linalg::fro2(&err) / err.len() as f64;
            vec![Sample::Ok(mc), Sample::Ok(d.estimate.b2_bar.mean())]
        }
        CurveKind::AoaMse => match aoa_trial(&mut d) {
            Ok((s, bound)) => vec![s, ok_or_failed(Ok(bound))],
            Err(_) => vec![Sample::Failed; 2],
        },
        CurveKind::UlRate => {
            let (de, mc) = uplink_rates(&d);
            vec![ok_or_failed(de), ok_or_failed(mc)]
        }
        CurveKind::UlRadarRate => vec![ok_or_failed(uplink_radar_rate(&d))],
        CurveKind::DlRate => {
            let (de, mc) = downlink_rates(&d);
            vec![ok_or_failed(de), ok_or_failed(mc)]
        }
        CurveKind::DlRadarRate => {
            let (de, mc) = downlink_radar_rates(&d);
            vec![ok_or_failed(de), ok_or_failed(mc)]
        }
        CurveKind::RateRegion | CurveKind::ValidateDe => vec![],
    }
}

/// Run a swept curve. Trials run in parallel on the current rayon pool;
/// results are gathered in trial order so the output does not depend on
/// the number of workers.
pub fn run_curve(spec: &CurveSpec, config: &SystemConfig) -> Result<CurveResult> {
    spec.validate()?;
    let names = spec.kind.series();
    if names.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "`{}` is not a swept curve",
            spec.kind.name()
        )));
    }
    let base = SystemConfig {
        seed: spec.seed,
        trials: spec.trials,
        ..config.clone()
    };
    let mut series: Vec<Series> = names
        .iter()
        .map(|n| Series {
            name: n.to_string(),
            points: Vec::with_capacity(spec.grid.len()),
        })
        .collect();
    for &x in &spec.grid {
        let cfg = base.with_value(&spec.sweep_key, x)?;
        let per_trial: Vec<Vec<Sample>> = (0..spec.trials as u64)
            .into_par_iter()
            .map(|t| trial_samples(spec.kind, &cfg, t))
            .collect();
        for (j, s) in series.iter_mut().enumerate() {
            let col: Vec<Sample> = per_trial.iter().map(|v| v[j]).collect();
            s.points.push(summarize(x, &col));
        }
    }
    Ok(CurveResult {
        kind: spec.kind,
        sweep_key: spec.sweep_key.clone(),
        series,
    })
}
