use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use jrc_bench::desk;
use jrc_core::de::{solve_full, DeProblem, Shift};
use jrc_core::experiments::{downlink_rates, uplink_rates, TrialDraw};
use jrc_core::radar::{music_aoa, radar_waveform, simulate_radar_receive, RadarInterference};
use jrc_core::rng::{stream, Domain};
use jrc_core::{ArrayManifold, C64};

fn de_solve(c: &mut Criterion) {
    let cfg = desk();
    let d = TrialDraw::draw(&cfg, 0).unwrap();
    let b2 = d.analytic_b2().unwrap();
    let w: Vec<f64> = b2.iter().map(|b| 10.0 * b).collect();
    let p = DeProblem::new(
        w,
        Shift::from_gram_factor(&d.channels.G_rb_hat, cfg.sigma_r2),
        2.0,
    )
    .excluding(&[0]);
    c.bench_function("de_solve_full_m64", |b| {
        b.iter(|| solve_full(black_box(&p), 1e-9, 500, "bench").unwrap())
    });
}

fn music(c: &mut Criterion) {
    let cfg = desk();
    let m = ArrayManifold::new(0.5, cfg.N_t, cfg.N_r).unwrap();
    let mut rng = stream(1, Domain::Trial, 0);
    let s = radar_waveform(cfg.N_t, cfg.sigma_r2, &mut rng);
    let h = C64::new(3.0, 0.0);
    let blk = simulate_radar_receive(&m, h, &s, &RadarInterference::None, 1.0, &mut rng).unwrap();
    c.bench_function("music_grid_0.01deg", |b| {
        b.iter(|| {
            music_aoa(
                black_box(&blk.Z),
                &blk.S,
                cfg.music_manifold,
                cfg.music_grid_deg,
            )
            .unwrap()
        })
    });
}

fn trial(c: &mut Criterion) {
    let cfg = desk();
    c.bench_function("trial_draw_and_rates", |b| {
        let mut t = 0u64;
        b.iter(|| {
            t += 1;
            let d = TrialDraw::draw(&cfg, t).unwrap();
            (uplink_rates(&d).1.unwrap(), downlink_rates(&d).1.unwrap())
        })
    });
}

criterion_group!(benches, de_solve, music, trial);
criterion_main!(benches);
