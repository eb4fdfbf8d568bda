use jrc_core::channel::read_binary_blocks;
use jrc_core::downlink::{default_alpha, empirical_downlink_sinr, rzf_precoder};
use jrc_core::experiments::{
    pareto_frontier, rate_region, run_curve, summarize, validate_de, CurveKind, CurveSpec, Link,
    RegionGrid, Sample, TrialDraw,
};
use jrc_core::uplink::{de_uplink_sinr, empirical_uplink_sinr, mmse_combiner};
use jrc_core::SystemConfig;

fn small() -> SystemConfig {
    SystemConfig {
        M: 32,
        K: 3,
        N_t: 2,
        N_r: 2,
        tau_u: 511,
        tau_d: 510,
        trials: 40,
        ..SystemConfig::default()
    }
}

#[test]
fn radar_off_zeroes_radar_terms_in_both_pipelines() {
    let cfg = SystemConfig {
        sigma_r2: 0.0,
        ..small()
    };
    let d = TrialDraw::draw(&cfg, 3).unwrap();
    let c = mmse_combiner(
        &d.estimate,
        &d.channels.G_rb_hat,
        &d.scenario,
        &d.powers,
        &cfg,
    )
    .unwrap();
    let emp = empirical_uplink_sinr(&d.channels, &d.estimate, &c, &d.scenario, &d.powers, &cfg);
    let de = de_uplink_sinr(
        &d.scenario,
        &d.powers,
        &cfg,
        &d.channels.G_rb_hat,
        &d.analytic_b2().unwrap(),
    )
    .unwrap();
    for t in emp.terms.iter().chain(&de.terms) {
        assert_eq!(t.radar_cancellable, 0.0);
        assert_eq!(t.radar_residual, 0.0);
    }
    let p = rzf_precoder(
        &d.estimate.H_hat,
        &d.channels.G_br_hat,
        default_alpha(&d.scenario, &d.powers, &cfg),
    )
    .unwrap();
    let emp = empirical_downlink_sinr(&d.channels, &d.estimate, &p, &d.scenario, &d.powers, &cfg);
    assert!(emp.terms.iter().all(|t| t.radar_cancellable == 0.0));
}

#[test]
fn de_sinr_monotone_in_powers_and_noise() {
    let base = small();
    let gamma = |cfg: &SystemConfig| {
        let d = TrialDraw::draw(cfg, 0).unwrap();
        let de = de_uplink_sinr(
            &d.scenario,
            &d.powers,
            cfg,
            &d.channels.G_rb_hat,
            &d.analytic_b2().unwrap(),
        )
        .unwrap();
        de.sinr()[0]
    };
    let g0 = gamma(&base);
    assert!(
        gamma(&SystemConfig {
            eps_up_data: 20.0,
            ..base.clone()
        }) > g0
    );
    assert!(
        gamma(&SystemConfig {
            sigma_r2: 1e6,
            ..base.clone()
        }) < g0
    );
    assert!(
        gamma(&SystemConfig {
            interf_err_frac: 0.5,
            sigma_r2: 1e6,
            ..base.clone()
        }) < gamma(&SystemConfig {
            interf_err_frac: 0.1,
            sigma_r2: 1e6,
            ..base.clone()
        })
    );
    assert!(gamma(&SystemConfig { N0: 2.0, ..base }) < g0);
}

#[test]
fn noise_term_agrees_within_five_percent() {
    let report = validate_de(&small(), 300, 0.1).unwrap();
    for link in &report.links {
        for u in &link.users {
            let noise = u.terms.iter().find(|t| t.name == "noise").unwrap();
            assert!(
                noise.rel_err <= 0.05,
                "{} user {}: {}",
                link.link,
                u.user,
                noise.rel_err
            );
        }
    }
}

#[test]
fn stderr_shrinks_like_inverse_sqrt_trials() {
    let cfg = small();
    let spec = |trials| CurveSpec {
        kind: CurveKind::UlRate,
        sweep_key: "eps_up_data_db".into(),
        grid: vec![10.0],
        trials,
        seed: 4,
    };
    let se = |n| {
        run_curve(&spec(n), &cfg)
            .unwrap()
            .series("mc")
            .unwrap()
            .points[0]
            .stderr
    };
    let ratio = se(100) / se(400);
    assert!((1.5..2.7).contains(&ratio), "ratio {ratio}");
}

#[test]
fn est_mse_curve_tracks_closed_form() {
    let cfg = small();
    let spec = CurveSpec {
        trials: 30,
        ..CurveSpec::default_for(CurveKind::EstMse, &cfg).unwrap()
    };
    let r = run_curve(&spec, &cfg).unwrap();
    let (mc, an) = (r.series("mc").unwrap(), r.series("analytic").unwrap());
    for (a, b) in mc.points.iter().zip(&an.points) {
        assert!(
            (a.mean - b.mean).abs() < 0.05 * b.mean + 4.0 * a.stderr,
            "{a:?} {b:?}"
        );
    }
    assert!(mc.points.windows(2).all(|w| w[1].mean < w[0].mean));
}

#[test]
fn failures_are_counted_not_hidden() {
    let p = summarize(0.0, &[Sample::Failed, Sample::Failed]);
    assert_eq!((p.trials, p.failures), (2, 2));
    assert!(p.mean.is_nan());
}

#[test]
fn radar_off_region_has_comm_axis_point() {
    let cfg = small();
    let grid = RegionGrid {
        radar_scales: vec![0.0],
        comm_scales: vec![0.0, 1.0],
        trials: 10,
        mc_trials: 10,
    };
    let r = rate_region(&cfg, Link::Uplink, &grid).unwrap();
    assert!(r.points.iter().all(|p| p.radar_rate == 0.0));
    let top = r.frontier.last().unwrap();
    assert_eq!(top.comm_scale, 1.0);
    assert!(top.comm_rate > 0.0);
}

#[test]
fn coarse_frontier_is_inside_fine_region() {
    let cfg = small();
    let fine = RegionGrid {
        trials: 10,
        mc_trials: 5,
        ..RegionGrid::default_for(&cfg)
    };
    let pick = |v: &[f64]| v.iter().step_by(2).copied().collect::<Vec<_>>();
    let coarse = RegionGrid {
        radar_scales: pick(&fine.radar_scales),
        comm_scales: pick(&fine.comm_scales),
        ..fine.clone()
    };
    let f = rate_region(&cfg, Link::Downlink, &fine).unwrap();
    let c = rate_region(&cfg, Link::Downlink, &coarse).unwrap();
    for p in &c.frontier {
        assert!(
            f.frontier
                .iter()
                .any(|q| q.comm_rate >= p.comm_rate && q.radar_rate >= p.radar_rate),
            "{p:?} not dominated"
        );
    }
    assert_eq!(pareto_frontier(&f.frontier), f.frontier);
}

#[test]
fn channel_dump_layout() {
    let cfg = small();
    let d = TrialDraw::draw(&cfg, 0).unwrap();
    let mut buf = Vec::new();
    d.channels.write_binary(&mut buf).unwrap();
    let blocks = read_binary_blocks(&buf).unwrap();
    assert_eq!(blocks.len(), 7);
    assert_eq!(blocks[0], d.channels.H);
    assert_eq!(blocks[6], d.channels.g_kr);
}
