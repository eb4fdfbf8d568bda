//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so every criterion reports even when an earlier
//! one fails. Set `JRC_ACCEPTANCE_STRICT=1` to exit nonzero on any FAIL and
//! `JRC_FULL_SCALE=1` for the large trial counts.

use std::time::Instant;

use jrc_core::de::{solve_delta, solve_full, DeProblem, Shift};
use jrc_core::downlink::{
    de_downlink_sinr, default_alpha, empirical_downlink_sinr, radar_leakage, rzf_precoder,
};
use jrc_core::experiments::output::curve_csvs;
use jrc_core::experiments::{
    downlink_rates, rate_region, run_curve, uplink_rates, validate_de, CurveKind, CurveSpec, Link,
    RegionGrid, TrialDraw,
};
use jrc_core::linalg::fro2;
use jrc_core::radar::RadarInterference;
use jrc_core::radar::{
    crb, failure_sq_error, music_aoa, radar_waveform, simulate_radar_receive, steering,
    uplink_noise,
};
use jrc_core::rng::{stream, Domain};
use jrc_core::{build_scenario, power_control, ArrayManifold, SyncMode, SystemConfig, C64};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn full_scale() -> bool {
    std::env::var("JRC_FULL_SCALE").is_ok_and(|v| v == "1")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Per-user DE vs measured mean SINR at several received SNRs, both links.
fn c1() -> Outcome {
    let start = Instant::now();
    let mut worst = (0.0f64, String::new());
    let mut failures = 0;
    for snr_db in [0.0, 5.0, 10.0, 15.0, 20.0] {
        let snr = 10f64.powf(snr_db / 10.0);
        let cfg = SystemConfig {
            eps_up_pilot: snr,
            eps_up_data: snr,
            eps_dn_data: snr,
            ..SystemConfig::default()
        };
        let report = match validate_de(&cfg, 1000, 0.1) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("validation failed at {snr_db} dB: {e}")),
        };
        failures += report.failures;
        for l in &report.links {
            for u in &l.users {
                if u.sinr.rel_err > worst.0 {
                    worst = (
                        u.sinr.rel_err,
                        format!("{} user {} at {snr_db} dB", l.link, u.user),
                    );
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst.0 <= 0.10 && failures == 0 && secs <= 300.0,
        format!(
            "max SINR rel err {:.4} ({}), {failures} failed trials, {secs:.1} s",
            worst.0, worst.1
        ),
    )
}

fn est_mse(cfg: &SystemConfig, trials: u64) -> (f64, f64) {
    let (mut emp, mut ana, mut n) = (0.0, 0.0, 0usize);
    for t in 0..trials {
        let d = TrialDraw::draw(cfg, t).unwrap();
        let err = &d.channels.H - &d.estimate.H_hat;
        emp += fro2(&err);
        ana += d.estimate.b2_bar.sum();
        n += err.len();
    }
    (emp / n as f64, ana / n as f64)
}

/// Estimation MSE closed forms and saturation with radar on.
fn c2() -> Outcome {
    let trials = 400; // 400 x 64 x 4 > 1e5 samples
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for mode in [SyncMode::Known, SyncMode::Unknown] {
        let cfg = SystemConfig {
            sync_mode: mode,
            ..SystemConfig::default()
        };
        let (emp, ana) = est_mse(&cfg, trials);
        worst = worst.max(rel(emp, ana));
        notes.push(format!("{mode:?}: emp {emp:.4e} vs {ana:.4e}"));
    }
    // The closed form has no floor in pilot power; saturation shows when the
    // residual radar interference dominates the pilot over the whole sweep.
    let at = |pilot_db: f64, sr2: f64| {
        let cfg = SystemConfig {
            eps_up_pilot: 10f64.powf(pilot_db / 10.0),
            sigma_r2: sr2,
            ..SystemConfig::default()
        };
        est_mse(&cfg, 50).0
    };
    let high = 1e8;
    let sat = at(20.0, high) / at(-10.0, high);
    let free = at(20.0, 0.0) / at(-10.0, 0.0);
    outcome(
        worst <= 0.02 && sat > 0.5 && free < 0.05,
        format!(
            "max rel err {worst:.4} [{}]; MSE(20 dB)/MSE(-10 dB) pilot: sigma_r2={high:e} {sat:.3}, radar off {free:.4}",
            notes.join("; ")
        ),
    )
}

/// Ȧ by finite differences, CRB scaling, downlink radar noise limit.
fn c3() -> Outcome {
    let mut fd_worst: f64 = 0.0;
    for deg in (-80..=80).step_by(10) {
        let th = (deg as f64).to_radians();
        let m = ArrayManifold::new(th, 4, 8).unwrap();
        let h = 1e-6;
        let a = |t: f64| steering(8, t) * steering(4, t).transpose();
        let fd = (a(th + h) - a(th - h)) / C64::new(2.0 * h, 0.0);
        fd_worst = fd_worst.max((&fd - &m.A_dot).norm() / m.A_dot.norm());
    }

    let m = ArrayManifold::new(0.3, 4, 4).unwrap();
    let h = C64::from_polar(2.0, 0.7);
    let c1 = crb(1.0, 5.0, h, &m).unwrap().crb;
    let c2 = crb(1.0, 10.0, h, &m).unwrap().crb;
    let c3 = crb(1.0, 5.0, h * 2f64.sqrt(), &m).unwrap().crb;
    let halving = rel(c2, c1 / 2.0).max(rel(c3, c1 / 2.0));

    let cfg = SystemConfig {
        interf_err_frac: 0.0,
        eps_up_pilot: 10.0,
        eps_dn_data: 1e-9,
        ..SystemConfig::default()
    };
    let d = TrialDraw::draw(&cfg, 0).unwrap();
    let prec = rzf_precoder(&d.estimate.H_hat, &d.channels.G_br_hat, 1.0).unwrap();
    let alpha = 1e-6 * fro2(&prec.H_bar);
    let de = de_downlink_sinr(
        &d.scenario,
        &d.powers,
        &cfg,
        alpha,
        &d.analytic_b2().unwrap(),
    )
    .unwrap();
    let prec = rzf_precoder(&d.estimate.H_hat, &d.channels.G_br_hat, alpha).unwrap();
    let emp = cfg.N0 + radar_leakage(&d.channels, &prec, &d.powers);
    let limit = rel(de.sigma_wr2, cfg.N0).max(rel(emp, cfg.N0));

    outcome(
        fd_worst <= 1e-4 && halving <= 1e-12 && limit <= 1e-3,
        format!("FD rel err {fd_worst:.2e}; CRB halving err {halving:.1e}; sigma_wr2/N0 - 1 = {limit:.2e}"),
    )
}

/// MUSIC against the CRB without communication interference.
fn c4() -> Outcome {
    let trials = 1000u64;
    let mut ok = true;
    let mut notes = Vec::new();
    for snr_db in [20.0, 30.0] {
        let cfg = SystemConfig {
            N_r: 8,
            eps_up_pilot: 0.0,
            radar_snr: 10f64.powf(snr_db / 10.0),
            target_angle_deg: Some(30.0),
            ..SystemConfig::default()
        };
        let th = 30f64.to_radians();
        let m = ArrayManifold::new(th, cfg.N_t, cfg.N_r).unwrap();
        let mut errs = Vec::with_capacity(trials as usize);
        let mut bound = 0.0;
        let mut failures = 0;
        for t in 0..trials {
            let sc = build_scenario(&cfg, &mut stream(cfg.seed, Domain::Scenario, t)).unwrap();
            let mut rng = stream(cfg.seed, Domain::Trial, t);
            let s = radar_waveform(cfg.N_t, cfg.sigma_r2, &mut rng);
            let blk =
                simulate_radar_receive(&m, sc.h_rr, &s, &RadarInterference::None, cfg.N0, &mut rng)
                    .unwrap();
            match music_aoa(&blk.Z, &blk.S, cfg.music_manifold, cfg.music_grid_deg).unwrap() {
                Some(e) => errs.push((e - th).powi(2)),
                None => {
                    failures += 1;
                    errs.push(failure_sq_error(th));
                }
            }
            bound += crb(cfg.N0, cfg.sigma_r2, sc.h_rr, &m).unwrap().crb;
        }
        let bound = bound / trials as f64;
        let mse = mean(&errs);
        let se = (errs.iter().map(|e| (e - mse).powi(2)).sum::<f64>()
            / (trials - 1) as f64
            / trials as f64)
            .sqrt();
        let gap_db = 10.0 * (mse / bound).log10();
        ok &= gap_db <= 3.0 && mse + 2.0 * se >= 0.5 * bound;
        notes.push(format!(
            "{snr_db} dB: MSE/CRB {gap_db:+.2} dB, {failures} failures"
        ));
    }
    outcome(ok, notes.join("; "))
}

/// Uplink radar-rate loss from pilot interference at comm SNR 10 dB.
fn c5() -> Outcome {
    let base = SystemConfig::full_scale();
    let drops = if full_scale() {
        base.trials as u64
    } else {
        1000
    };
    let on = SystemConfig {
        eps_up_pilot: 10.0,
        ..base.clone()
    };
    let mut loss = Vec::with_capacity(drops as usize);
    for t in 0..drops {
        let sc = build_scenario(&on, &mut stream(on.seed, Domain::Scenario, t)).unwrap();
        let pw = power_control(&sc, &on).unwrap();
        let m = ArrayManifold::new(sc.theta, on.N_t, on.N_r).unwrap();
        let off = crb(on.N0, on.sigma_r2, sc.h_rr, &m).unwrap().radar_rate;
        let with = crb(
            uplink_noise(on.N0, &pw.eps_up_pilot, &sc.eta_rk),
            on.sigma_r2,
            sc.h_rr,
            &m,
        )
        .unwrap()
        .radar_rate;
        loss.push(off - with);
    }
    let l = mean(&loss);
    outcome(
        (l - 3.0).abs() <= 1.5,
        format!(
            "mean radar-rate loss {l:.2} bits over {drops} drops at M=128, K=8 (target 3 +/- 1.5)"
        ),
    )
}

/// Comm rate loss at radar SNR 30 dB versus radar off, M=128, K=8.
fn c6() -> Outcome {
    let base = SystemConfig::full_scale();
    let drops = if full_scale() { 1000 } else { 200 };
    let on = SystemConfig {
        sigma_r2: 1000.0 * base.N0,
        radar_snr: 1000.0,
        ..base.clone()
    };
    let off = SystemConfig {
        sigma_r2: 0.0,
        ..base
    };
    let avg = |cfg: &SystemConfig, ul: bool| -> (f64, f64) {
        let (mut de, mut mc) = (Vec::new(), Vec::new());
        for t in 0..drops {
            let d = TrialDraw::draw(cfg, t).unwrap();
            let (a, b) = if ul {
                uplink_rates(&d)
            } else {
                downlink_rates(&d)
            };
            de.push(a.unwrap());
            mc.push(b.unwrap());
        }
        (mean(&de), mean(&mc))
    };
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, ul) in [("uplink", true), ("downlink", false)] {
        let (de_on, mc_on) = avg(&on, ul);
        let (de_off, mc_off) = avg(&off, ul);
        let loss_mc = 1.0 - mc_on / mc_off;
        let loss_de = 1.0 - de_on / de_off;
        ok &= loss_mc <= 0.05;
        notes.push(format!(
            "{name}: MC {mc_off:.3} -> {mc_on:.3} ({:.1}%), DE {de_off:.3} -> {de_on:.3} ({:.1}%)",
            100.0 * loss_mc,
            100.0 * loss_de
        ));
    }
    outcome(ok, notes.join("; "))
}

/// RZF null towards the radar with a perfectly known BS->radar channel.
/// Q is not power normalized, so leakage is taken relative to the served
/// signal power.
fn c7() -> Outcome {
    let cfg = SystemConfig {
        interf_err_frac: 0.0,
        ..SystemConfig::default()
    };
    let ratio_at = |d: &TrialDraw, alpha: f64| {
        let p = rzf_precoder(&d.estimate.H_hat, &d.channels.G_br_hat, alpha).unwrap();
        let leak = radar_leakage(&d.channels, &p, &d.powers) * cfg.N_r as f64;
        let emp =
            empirical_downlink_sinr(&d.channels, &d.estimate, &p, &d.scenario, &d.powers, &cfg);
        leak / emp.terms.iter().map(|t| t.signal).sum::<f64>()
    };
    let mut worst: f64 = 0.0;
    let mut deep: f64 = 0.0;
    let mut monotone = true;
    for t in 0..20 {
        let d = TrialDraw::draw(&cfg, t).unwrap();
        let norm = fro2(
            &rzf_precoder(&d.estimate.H_hat, &d.channels.G_br_hat, 1.0)
                .unwrap()
                .H_bar,
        );
        let ratios: Vec<f64> = (0..=6)
            .map(|e| ratio_at(&d, 10f64.powi(-e) * norm))
            .collect();
        monotone &= ratios.windows(2).all(|w| w[1] < w[0]);
        worst = worst.max(ratios[6]);
        deep = deep.max(ratio_at(&d, 1e-12 * norm));
    }
    outcome(
        monotone && worst <= 1e-6,
        format!(
            "leakage/served monotone: {monotone}; worst at 1e-6 |H|^2: {worst:.2e}; at 1e-12 |H|^2: {deep:.2e} (20 drops)"
        ),
    )
}

/// Frontier points lie on or above the time-sharing chord.
fn c8() -> Outcome {
    let cfg = SystemConfig::default();
    let grid = RegionGrid {
        trials: 100,
        mc_trials: 500,
        ..RegionGrid::default_for(&cfg)
    };
    let mut ok = true;
    let mut notes = Vec::new();
    for link in [Link::Uplink, Link::Downlink] {
        match rate_region(&cfg, link, &grid) {
            Ok(r) => {
                let margin = r.chord_margin();
                ok &= margin >= -1e-9;
                notes.push(format!(
                    "{}: {} frontier points, min margin over chord {margin:.3} bits, max DE/MC vertex gap {:.1}%",
                    link.name(),
                    r.frontier.len(),
                    100.0 * r.max_vertex_gap()
                ));
            }
            Err(e) => {
                ok = false;
                notes.push(format!("{}: {e}", link.name()));
            }
        }
    }
    outcome(ok, notes.join("; "))
}

/// Convergence budget and μ' against a finite difference of μ in ρ.
fn c9() -> Outcome {
    let mut worst_iter = 0;
    let mut fd_worst: f64 = 0.0;
    let configs = [SystemConfig::default(), SystemConfig::full_scale()];
    for cfg in &configs {
        for t in 0..5 {
            let d = match TrialDraw::draw(cfg, t) {
                Ok(d) => d,
                Err(e) => return outcome(false, e.to_string()),
            };
            let b2 = d.analytic_b2().unwrap();
            let ul = jrc_core::uplink::de_uplink_sinr(
                &d.scenario,
                &d.powers,
                cfg,
                &d.channels.G_rb_hat,
                &b2,
            );
            let dl = de_downlink_sinr(
                &d.scenario,
                &d.powers,
                cfg,
                default_alpha(&d.scenario, &d.powers, cfg),
                &b2,
            );
            match (ul, dl) {
                (Ok(u), Ok(v)) => {
                    worst_iter = worst_iter.max(u.max_iterations).max(v.max_iterations)
                }
                (Err(e), _) | (_, Err(e)) => return outcome(false, e.to_string()),
            }

            let rx: Vec<f64> = d
                .scenario
                .beta
                .iter()
                .zip(&d.powers.eps_up_data)
                .map(|(b, e)| b * e)
                .collect();
            let c: Vec<f64> = rx.iter().zip(&b2).map(|(r, b)| r * b).collect();
            let rho: f64 = rx.iter().zip(&b2).map(|(r, b)| r * (1.0 - b)).sum::<f64>() + cfg.N0;
            let p = DeProblem::new(
                c,
                Shift::from_gram_factor(&d.channels.G_rb_hat, cfg.sigma_r2),
                rho,
            )
            .excluding(&[0]);
            let (_, prime) = solve_full(&p, 1e-13, 2000, "fd").unwrap();
            let h = 1e-4 * rho;
            let up = solve_delta(&p.with_rho(rho + h), 1e-13, 2000).unwrap().mu;
            let dn = solve_delta(&p.with_rho(rho - h), 1e-13, 2000).unwrap().mu;
            fd_worst = fd_worst.max(rel(prime.mu_prime, -(up - dn) / (2.0 * h)));
        }
    }
    outcome(
        worst_iter <= 500 && fd_worst <= 1e-3,
        format!("max iterations {worst_iter} at tol 1e-9; mu' vs FD worst rel err {fd_worst:.2e}"),
    )
}

/// Identical CSV bytes with one and with four worker threads.
fn c10() -> Outcome {
    let cfg = SystemConfig::default();
    let mut ok = true;
    for kind in [CurveKind::UlRate, CurveKind::AoaMse, CurveKind::DlRadarRate] {
        let spec = CurveSpec {
            trials: 24,
            ..CurveSpec::default_for(kind, &cfg).unwrap()
        };
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| curve_csvs(&run_curve(&spec, &cfg).unwrap()))
        };
        ok &= run(1) == run(4);
    }
    outcome(
        ok,
        "ul-rate, aoa-mse, dl-radar-rate CSVs compared at 1 and 4 threads".into(),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    // cargo passes harness flags such as --list; only run on a plain call.
    if std::env::args().skip(1).any(|a| a == "--list") {
        return;
    }
    let criteria: [Criterion; 10] = [
        ("DE vs Monte Carlo SINR", c1),
        ("estimation MSE closed forms", c2),
        ("CRB correctness", c3),
        ("MUSIC vs CRB", c4),
        ("uplink radar-rate loss", c5),
        ("communication resilience", c6),
        ("null efficacy", c7),
        ("rate-region dominance", c8),
        ("DE solver health", c9),
        ("determinism", c10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {} ({:.1} s) {}",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 && std::env::var("JRC_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
