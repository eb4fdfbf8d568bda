//! Radar/communication rate regions traced by scaling the radar transmit
//! power and all communication energies. The target return `h_rr` stays that
//! of the base configuration, so scaling radar power moves radar SNR.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{downlink_rates, summarize, uplink_radar_rate, uplink_rates, Point, Sample, TrialDraw};
use crate::downlink::{de_downlink_sinr, default_alpha};
use crate::radar::crb;
use crate::rng::{stream, Domain};
use crate::{build_scenario, Error, Result, Scenario, SystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Link {
    Uplink,
    Downlink,
}

impl Link {
    pub fn name(&self) -> &'static str {
        match self {
            Link::Uplink => "uplink",
            Link::Downlink => "downlink",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionGrid {
    pub radar_scales: Vec<f64>,
    pub comm_scales: Vec<f64>,
    /// Drops averaged per grid point.
    pub trials: usize,
    /// Drops for the Monte Carlo check at frontier vertices.
    pub mc_trials: usize,
}

fn log_grid(lo_exp: f64, hi_exp: f64, n: usize) -> Vec<f64> {
    let mut v = vec![0.0];
    v.extend((0..n).map(|i| 10f64.powf(lo_exp + (hi_exp - lo_exp) * i as f64 / (n - 1) as f64)));
    v
}

impl RegionGrid {
    /// Zero plus eight log-spaced scales from 1e-3 to 1 on each axis.
    pub fn default_for(config: &SystemConfig) -> Self {
        Self {
            radar_scales: log_grid(-3.0, 0.0, 8),
            comm_scales: log_grid(-3.0, 0.0, 8),
            trials: config.trials,
            mc_trials: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRegionPoint {
    pub radar_scale: f64,
    pub comm_scale: f64,
    /// Average per-user rate from the deterministic equivalent.
    pub comm_rate: f64,
    pub radar_rate: f64,
    pub failures: usize,
    /// Measured comm rate, filled in for frontier vertices.
    pub mc: Option<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRegion {
    pub link: Link,
    pub points: Vec<RateRegionPoint>,
    /// Pareto-optimal points, by increasing comm rate.
    pub frontier: Vec<RateRegionPoint>,
}

impl RateRegion {
    /// Largest comm rate with the radar silent and largest radar rate with
    /// communication silent.
    pub fn axis_maxima(&self) -> (f64, f64) {
        let c = self
            .points
            .iter()
            .filter(|p| p.radar_scale == 0.0)
            .map(|p| p.comm_rate)
            .fold(0.0, f64::max);
        let r = self
            .points
            .iter()
            .filter(|p| p.comm_scale == 0.0)
            .map(|p| p.radar_rate)
            .fold(0.0, f64::max);
        (c, r)
    }

    /// Time-sharing segment between the two axis maxima.
    pub fn chord(&self) -> [(f64, f64); 2] {
        let (c, r) = self.axis_maxima();
        [(0.0, r), (c, 0.0)]
    }

    /// Smallest margin of a frontier point over the chord at its comm rate.
    /// Non-negative means the frontier weakly dominates time sharing.
    pub fn chord_margin(&self) -> f64 {
        let (c_max, r_max) = self.axis_maxima();
        self.frontier
            .iter()
            .map(|p| {
                let chord = if c_max > 0.0 {
                    r_max * (1.0 - p.comm_rate / c_max).max(0.0)
                } else {
                    0.0
                };
                p.radar_rate - chord
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest relative gap between DE and measured comm rate at the vertices.
    pub fn max_vertex_gap(&self) -> f64 {
        self.frontier
            .iter()
            .filter_map(|p| p.mc.map(|m| (p.comm_rate, m.mean)))
            .filter(|(_, m)| *m > 0.0)
            .map(|(de, m)| (de - m).abs() / m)
            .fold(0.0, f64::max)
    }
}

/// Non-dominated subset, sorted by comm rate then radar rate.
pub fn pareto_frontier(points: &[RateRegionPoint]) -> Vec<RateRegionPoint> {
    let mut out: Vec<RateRegionPoint> = Vec::new();
    for p in points
        .iter()
        .filter(|p| p.comm_rate.is_finite() && p.radar_rate.is_finite())
    {
        let dominated = points.iter().any(|q| {
            q.comm_rate >= p.comm_rate
                && q.radar_rate >= p.radar_rate
                && (q.comm_rate > p.comm_rate || q.radar_rate > p.radar_rate)
        });
        let duplicate = out
            .iter()
            .any(|q| q.comm_rate == p.comm_rate && q.radar_rate == p.radar_rate);
        if !dominated && !duplicate {
            out.push(*p);
        }
    }
    out.sort_by(|a, b| {
        a.comm_rate
            .total_cmp(&b.comm_rate)
            .then(a.radar_rate.total_cmp(&b.radar_rate))
    });
    out
}

fn scaled(base: &SystemConfig, radar_scale: f64, comm_scale: f64) -> SystemConfig {
    SystemConfig {
        sigma_r2: base.sigma_r2 * radar_scale,
        eps_up_pilot: base.eps_up_pilot * comm_scale,
        eps_up_data: base.eps_up_data * comm_scale,
        eps_dn_data: base.eps_dn_data * comm_scale,
        ..base.clone()
    }
}

/// DE comm rate and radar rate for one drop.
fn de_rates(link: Link, d: &TrialDraw, comm_on: bool) -> Result<(f64, f64)> {
    match link {
        Link::Uplink => {
            let comm = if comm_on { uplink_rates(d).0? } else { 0.0 };
            Ok((comm, uplink_radar_rate(d)?))
        }
        Link::Downlink => {
            let cfg = &d.config;
            let manifold = d.manifold()?;
            if !comm_on {
                return Ok((
                    0.0,
                    crb(cfg.N0, cfg.sigma_r2, d.scenario.h_rr, &manifold)?.radar_rate,
                ));
            }
            let alpha = default_alpha(&d.scenario, &d.powers, cfg);
            let de = de_downlink_sinr(&d.scenario, &d.powers, cfg, alpha, &d.analytic_b2()?)?;
            let comm = de.terms.iter().map(|t| t.rate()).sum::<f64>() / de.terms.len() as f64;
            let radar = crb(de.sigma_wr2, cfg.sigma_r2, d.scenario.h_rr, &manifold)?.radar_rate;
            Ok((comm, radar))
        }
    }
}

fn mc_comm_rate(link: Link, d: &TrialDraw) -> Result<f64> {
    match link {
        Link::Uplink => uplink_rates(d).1,
        Link::Downlink => downlink_rates(d).1,
    }
}

/// Trace the region for one link and check the frontier vertices by
/// Monte Carlo.
pub fn rate_region(config: &SystemConfig, link: Link, grid: &RegionGrid) -> Result<RateRegion> {
    if grid.trials == 0 || grid.radar_scales.is_empty() || grid.comm_scales.is_empty() {
        return Err(Error::InvalidArgument("rate region grid is empty".into()));
    }
    let n = grid.trials.max(grid.mc_trials) as u64;
    let scenarios: Vec<Scenario> = (0..n)
        .into_par_iter()
        .map(|t| build_scenario(config, &mut stream(config.seed, Domain::Scenario, t)))
        .collect::<Result<_>>()?;

    let mut points = Vec::new();
    for &sr in &grid.radar_scales {
        for &sc in &grid.comm_scales {
            let cfg = scaled(config, sr, sc);
            let per_trial: Vec<Option<(f64, f64)>> = (0..grid.trials)
                .into_par_iter()
                .map(|t| {
                    let d = TrialDraw::with_scenario(&cfg, scenarios[t].clone(), t as u64).ok()?;
                    de_rates(link, &d, sc > 0.0)
                        .ok()
                        .filter(|(c, r)| c.is_finite() && r.is_finite())
                })
                .collect();
            let ok: Vec<(f64, f64)> = per_trial.iter().flatten().copied().collect();
            let failures = per_trial.len() - ok.len();
            let avg = |f: fn(&(f64, f64)) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(f).sum::<f64>() / ok.len() as f64
                }
            };
            points.push(RateRegionPoint {
                radar_scale: sr,
                comm_scale: sc,
                comm_rate: avg(|p| p.0),
                radar_rate: avg(|p| p.1),
                failures,
                mc: None,
            });
        }
    }

    let mut frontier = pareto_frontier(&points);
    for v in frontier.iter_mut() {
        let cfg = scaled(config, v.radar_scale, v.comm_scale);
        let samples: Vec<Sample> = (0..grid.mc_trials)
            .into_par_iter()
            .map(|t| {
                if v.comm_scale == 0.0 {
                    return Sample::Ok(0.0);
                }
                match TrialDraw::with_scenario(&cfg, scenarios[t].clone(), t as u64)
                    .and_then(|d| mc_comm_rate(link, &d))
                {
                    Ok(r) if r.is_finite() => Sample::Ok(r),
                    _ => Sample::Failed,
                }
            })
            .collect();
        v.mc = Some(summarize(v.comm_rate, &samples));
    }
    Ok(RateRegion {
        link,
        points,
        frontier,
    })
}
