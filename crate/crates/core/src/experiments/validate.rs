//! Term-by-term comparison of the deterministic equivalents against Monte
//! Carlo averages on one fixed geometry.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TrialDraw;
use crate::downlink::{
    de_downlink_sinr, default_alpha, empirical_downlink_sinr, radar_leakage, rzf_precoder,
};
use crate::rng::{stream, Domain};
use crate::uplink::{de_uplink_sinr, empirical_uplink_sinr, mmse_combiner, SinrTerms};
use crate::{build_scenario, Error, Result, Scenario, SystemConfig};

/// Terms smaller than this share of the measured interference are reported
/// but never flagged.
pub const MIN_SHARE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermCheck {
    pub name: String,
    pub de: f64,
    pub mc: f64,
    pub rel_err: f64,
    /// Share of the measured interference (1 for signal and SINR rows).
    pub share: f64,
    pub flagged: bool,
}

impl TermCheck {
    fn new(name: &str, de: f64, mc: f64, share: f64, threshold: f64) -> Self {
        let rel_err = if de == mc {
            0.0
        } else if mc == 0.0 {
            f64::INFINITY
        } else {
            (de - mc).abs() / mc.abs()
        };
        Self {
            name: name.to_string(),
            de,
            mc,
            rel_err,
            share,
            flagged: !(rel_err <= threshold) && share >= MIN_SHARE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserReport {
    pub user: usize,
    pub terms: Vec<TermCheck>,
    pub sinr: TermCheck,
    pub rate: TermCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub link: String,
    pub users: Vec<UserReport>,
    /// Effective radar noise during the downlink.
    pub radar_noise: Option<TermCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub threshold: f64,
    pub trials: usize,
    pub failures: usize,
    pub scenario: Scenario,
    pub links: Vec<LinkReport>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn flagged(&self) -> Vec<String> {
        let mut out = Vec::new();
        for l in &self.links {
            for u in &l.users {
                for t in u.terms.iter().chain([&u.sinr, &u.rate]) {
                    if t.flagged {
                        out.push(format!("{}/user{}/{}", l.link, u.user, t.name));
                    }
                }
            }
            if let Some(t) = l.radar_noise.as_ref().filter(|t| t.flagged) {
                out.push(format!("{}/{}", l.link, t.name));
            }
        }
        out
    }
}

/// Per-user averages of measured and predicted terms.
#[derive(Clone)]
struct Acc {
    emp: Vec<[f64; 6]>,
    de: Vec<[f64; 6]>,
    sinr_emp: Vec<f64>,
    sinr_de: Vec<f64>,
    rate_emp: Vec<f64>,
    rate_de: Vec<f64>,
}

impl Acc {
    fn zero(k: usize) -> Self {
        Self {
            emp: vec![[0.0; 6]; k],
            de: vec![[0.0; 6]; k],
            sinr_emp: vec![0.0; k],
            sinr_de: vec![0.0; k],
            rate_emp: vec![0.0; k],
            rate_de: vec![0.0; k],
        }
    }

    fn add(&mut self, emp: &[SinrTerms], de: &[SinrTerms]) {
        for (u, (e, d)) in emp.iter().zip(de).enumerate() {
            for i in 0..6 {
                self.emp[u][i] += e.as_array()[i];
                self.de[u][i] += d.as_array()[i];
            }
            self.sinr_emp[u] += e.sinr();
            self.sinr_de[u] += d.sinr();
            self.rate_emp[u] += e.rate();
            self.rate_de[u] += d.rate();
        }
    }

    fn report(&self, link: &str, n: f64, threshold: f64) -> LinkReport {
        let users = (0..self.emp.len())
            .map(|u| {
                let emp_interf: f64 = self.emp[u][1..].iter().sum::<f64>() / n;
                let terms = SinrTerms::NAMES
                    .iter()
                    .enumerate()
                    .map(|(i, name)| {
                        let mc = self.emp[u][i] / n;
                        let share = if i == 0 { 1.0 } else { mc / emp_interf };
                        TermCheck::new(name, self.de[u][i] / n, mc, share, threshold)
                    })
                    .collect();
                UserReport {
                    user: u,
                    terms,
                    sinr: TermCheck::new(
                        "sinr",
                        self.sinr_de[u] / n,
                        self.sinr_emp[u] / n,
                        1.0,
                        threshold,
                    ),
                    rate: TermCheck::new(
                        "rate",
                        self.rate_de[u] / n,
                        self.rate_emp[u] / n,
                        1.0,
                        threshold,
                    ),
                }
            })
            .collect();
        LinkReport {
            link: link.to_string(),
            users,
            radar_noise: None,
        }
    }
}

struct TrialOut {
    ul_emp: Vec<SinrTerms>,
    ul_de: Vec<SinrTerms>,
    dl_emp: Vec<SinrTerms>,
    dl_de: Vec<SinrTerms>,
    noise_emp: f64,
    noise_de: f64,
}

fn one_trial(config: &SystemConfig, scenario: &Scenario, t: u64) -> Result<TrialOut> {
    let d = TrialDraw::with_scenario(config, scenario.clone(), t)?;
    let b2 = d.analytic_b2()?;
    let (sc, pw, ch, est) = (&d.scenario, &d.powers, &d.channels, &d.estimate);

    let comb = mmse_combiner(est, &ch.G_rb_hat, sc, pw, config)?;
    let ul_emp = empirical_uplink_sinr(ch, est, &comb, sc, pw, config).terms;
    let ul_de = de_uplink_sinr(sc, pw, config, &ch.G_rb_hat, &b2)?.terms;

    let alpha = default_alpha(sc, pw, config);
    let prec = rzf_precoder(&est.H_hat, &ch.G_br_hat, alpha)?;
    let dl_emp = empirical_downlink_sinr(ch, est, &prec, sc, pw, config).terms;
    let dl = de_downlink_sinr(sc, pw, config, alpha, &b2)?;
    Ok(TrialOut {
        ul_emp,
        ul_de,
        dl_emp,
        dl_de: dl.terms,
        noise_emp: config.N0 + radar_leakage(ch, &prec, pw),
        noise_de: dl.sigma_wr2,
    })
}

/// Compare DE and Monte Carlo averages over `trials` small-scale draws on
/// the geometry of scenario drop 0.
pub fn validate_de(
    config: &SystemConfig,
    trials: usize,
    threshold: f64,
) -> Result<ValidationReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let scenario = build_scenario(config, &mut stream(config.seed, Domain::Scenario, 0))?;
    let outs: Vec<Result<TrialOut>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| one_trial(config, &scenario, t))
        .collect();

    let k = config.K;
    let (mut ul, mut dl) = (Acc::zero(k), Acc::zero(k));
    let (mut noise_emp, mut noise_de) = (0.0, 0.0);
    let mut ok = 0usize;
    for o in outs.iter().flatten() {
        ul.add(&o.ul_emp, &o.ul_de);
        dl.add(&o.dl_emp, &o.dl_de);
        noise_emp += o.noise_emp;
        noise_de += o.noise_de;
        ok += 1;
    }
    if ok == 0 {
        return Err(outs
            .into_iter()
            .find_map(|r| r.err())
            .unwrap_or(Error::Numerical("no trials".into())));
    }
    let n = ok as f64;
    let mut dl_report = dl.report("downlink", n, threshold);
    dl_report.radar_noise = Some(TermCheck::new(
        "radar_noise",
        noise_de / n,
        noise_emp / n,
        1.0,
        threshold,
    ));
    let links = vec![ul.report("uplink", n, threshold), dl_report];
    let mut report = ValidationReport {
        threshold,
        trials,
        failures: trials - ok,
        scenario,
        links,
        passed: false,
    };
    report.passed = report.failures == 0 && report.flagged().is_empty();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn term_check_edge_cases() {
        assert_eq!(TermCheck::new("x", 0.0, 0.0, 1.0, 0.1).rel_err, 0.0);
        let t = TermCheck::new("x", 1.0, 0.0, 0.0, 0.1);
        assert!(t.rel_err.is_infinite() && !t.flagged);
        assert!(TermCheck::new("x", 1.2, 1.0, 0.5, 0.1).flagged);
        assert!(!TermCheck::new("x", 1.05, 1.0, 0.5, 0.1).flagged);
        assert!(TermCheck::new("x", f64::NAN, 1.0, 0.5, 0.1).flagged);
    }
}
