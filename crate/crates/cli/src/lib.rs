//! Batch front end: config loading, experiment dispatch, results directories
//! and run manifests.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use jrc_core::experiments::output::{curve_csvs, region_csvs, write_files};
use jrc_core::experiments::{
    rate_region, run_curve, validate_de, CurveKind, CurveSpec, Link, RegionGrid, TrialDraw,
};
use jrc_core::{Error, SystemConfig};

#[derive(Debug, Parser)]
#[command(
    name = "jrc",
    version,
    about = "MIMO radar / massive MIMO coexistence simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write its artifacts to a fresh directory.
    Run {
        #[command(subcommand)]
        kind: RunKind,
    },
    /// Print the effective configuration as TOML.
    Config(CommonArgs),
    /// Write one channel realization in the binary debug layout.
    DumpChannels {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[arg(long)]
        file: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML file layered over the defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// KEY=VALUE override, applied after the config file. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Parent of the per-run directories.
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// Exit 0 even when trials or checks fail.
    #[arg(long)]
    pub allow_failures: bool,
    /// Start from the M=128, K=8, 10 000-trial setting.
    #[arg(long)]
    pub full_scale: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Config key to sweep; a `_db` suffix takes the grid in decibels.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LinkChoice {
    Uplink,
    Downlink,
    Both,
}

#[derive(Debug, Clone, Subcommand)]
pub enum RunKind {
    EstMse(SweepArgs),
    AoaMse(SweepArgs),
    UlRate(SweepArgs),
    UlRadarRate(SweepArgs),
    DlRate(SweepArgs),
    DlRadarRate(SweepArgs),
    RateRegion {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value_t = LinkChoice::Both)]
        link: LinkChoice,
        /// Drops for the Monte Carlo check at each frontier vertex.
        #[arg(long, default_value_t = 500)]
        mc_trials: usize,
    },
    ValidateDe {
        #[command(flatten)]
        common: CommonArgs,
        /// Relative error above which a term is flagged.
        #[arg(long, default_value_t = 0.1)]
        threshold: f64,
    },
}

impl RunKind {
    pub fn kind(&self) -> CurveKind {
        match self {
            RunKind::EstMse(_) => CurveKind::EstMse,
            RunKind::AoaMse(_) => CurveKind::AoaMse,
            RunKind::UlRate(_) => CurveKind::UlRate,
            RunKind::UlRadarRate(_) => CurveKind::UlRadarRate,
            RunKind::DlRate(_) => CurveKind::DlRate,
            RunKind::DlRadarRate(_) => CurveKind::DlRadarRate,
            RunKind::RateRegion { .. } => CurveKind::RateRegion,
            RunKind::ValidateDe { .. } => CurveKind::ValidateDe,
        }
    }

    pub fn sweep_args(&self) -> Option<&SweepArgs> {
        match self {
            RunKind::EstMse(a)
            | RunKind::AoaMse(a)
            | RunKind::UlRate(a)
            | RunKind::UlRadarRate(a)
            | RunKind::DlRate(a)
            | RunKind::DlRadarRate(a) => Some(a),
            RunKind::RateRegion { .. } | RunKind::ValidateDe { .. } => None,
        }
    }

    pub fn common(&self) -> &CommonArgs {
        match self {
            RunKind::EstMse(a)
            | RunKind::AoaMse(a)
            | RunKind::UlRate(a)
            | RunKind::UlRadarRate(a)
            | RunKind::DlRate(a)
            | RunKind::DlRadarRate(a) => &a.common,
            RunKind::RateRegion { common, .. } | RunKind::ValidateDe { common, .. } => common,
        }
    }
}

/// Defaults, then the config file, then `--set`, `--seed` and `--trials`.
pub fn load_config(args: &CommonArgs) -> Result<SystemConfig, Error> {
    let base = if args.full_scale {
        SystemConfig::full_scale()
    } else {
        SystemConfig::default()
    };
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            SystemConfig::from_toml_str_over(&base, &text)?
        }
        None => base,
    };
    cfg = cfg.with_overrides(&args.overrides)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Create `<parent>/<kind>-<timestamp>`, adding a counter if that exists.
/// Never reuses a directory.
pub fn fresh_run_dir(parent: &Path, kind: &str, at: DateTime<Utc>) -> io::Result<PathBuf> {
    fs::create_dir_all(parent)?;
    let stem = format!("{kind}-{}", at.format("%Y%m%dT%H%M%S%.3fZ"));
    for n in 0.. {
        let name = if n == 0 {
            stem.clone()
        } else {
            format!("{stem}-{n}")
        };
        let dir = parent.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e),
        }
    }
    unreachable!()
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub kind: String,
    pub seed: u64,
    pub code_version: String,
    pub config: SystemConfig,
    /// Experiment-specific settings such as the sweep grid.
    pub settings: serde_json::Value,
    /// Artifact file names, relative to the run directory.
    pub outputs: Vec<String>,
    pub started: String,
    pub finished: String,
    pub wall_time_s: f64,
    pub threads: usize,
    pub failures: usize,
    pub passed: bool,
}

pub const MANIFEST: &str = "manifest.json";

/// Write via a temporary file and rename, so a manifest is either complete
/// or absent.
pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> io::Result<PathBuf> {
    let tmp = dir.join(format!("{MANIFEST}.tmp"));
    let path = dir.join(MANIFEST);
    let body = serde_json::to_string_pretty(manifest).map_err(io::Error::other)?;
    fs::write(&tmp, body + "\n")?;
    fs::rename(&tmp, &path)?;
    Ok(path)
}

/// What a finished run produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

struct Artifacts {
    files: Vec<(String, String)>,
    settings: serde_json::Value,
    failures: usize,
    passed: bool,
}

fn execute(kind: &RunKind, cfg: &SystemConfig) -> Result<Artifacts, Error> {
    match kind {
        RunKind::RateRegion {
            link, mc_trials, ..
        } => {
            let grid = RegionGrid {
                mc_trials: *mc_trials,
                ..RegionGrid::default_for(cfg)
            };
            let links = match link {
                LinkChoice::Uplink => vec![Link::Uplink],
                LinkChoice::Downlink => vec![Link::Downlink],
                LinkChoice::Both => vec![Link::Uplink, Link::Downlink],
            };
            let mut files = Vec::new();
            let mut failures = 0;
            for l in links {
                let region = rate_region(cfg, l, &grid)?;
                failures += region.points.iter().map(|p| p.failures).sum::<usize>();
                failures += region
                    .frontier
                    .iter()
                    .filter_map(|p| p.mc)
                    .map(|m| m.failures)
                    .sum::<usize>();
                files.extend(region_csvs(&region));
            }
            Ok(Artifacts {
                files,
                settings: to_json(&grid),
                failures,
                passed: failures == 0,
            })
        }
        RunKind::ValidateDe { threshold, .. } => {
            let report = validate_de(cfg, cfg.trials, *threshold)?;
            let body = serde_json::to_string_pretty(&report)
                .map_err(|e| Error::Numerical(e.to_string()))?;
            Ok(Artifacts {
                files: vec![("validate-de.json".into(), body + "\n")],
                settings: serde_json::json!({ "threshold": threshold, "trials": cfg.trials }),
                failures: report.failures,
                passed: report.passed,
            })
        }
        swept => {
            let args = swept.sweep_args().expect("swept kind");
            let mut spec = CurveSpec::default_for(swept.kind(), cfg)?;
            if let Some(key) = &args.sweep {
                spec.sweep_key = key.clone();
            }
            if let Some(grid) = &args.grid {
                spec.grid = grid.clone();
            }
            let result = run_curve(&spec, cfg)?;
            // MUSIC breakdowns are penalized in the mean, not solver failures.
            let failures = match spec.kind {
                CurveKind::AoaMse => result
                    .series("crb")
                    .map_or(0, |s| s.points.iter().map(|p| p.failures).sum()),
                _ => result.total_failures(),
            };
            Ok(Artifacts {
                files: curve_csvs(&result),
                settings: to_json(&spec),
                failures,
                passed: failures == 0,
            })
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, Error> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Run one experiment end to end. Artifacts and the manifest are written
/// even when trials fail; the caller decides the exit status.
pub fn run(kind: &RunKind) -> Result<RunOutcome, Error> {
    let common = kind.common();
    let cfg = load_config(common)?;
    let started = Utc::now();
    let clock = Instant::now();
    let threads = if common.threads == 0 {
        rayon::current_num_threads()
    } else {
        common.threads
    };
    let art = in_pool(threads, || execute(kind, &cfg))??;

    let dir = fresh_run_dir(&common.out, kind.kind().name(), started)?;
    let paths = write_files(&dir, &art.files)?;
    let manifest = RunManifest {
        kind: kind.kind().name().to_string(),
        seed: cfg.seed,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg,
        settings: art.settings,
        outputs: paths
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
        started: started.to_rfc3339(),
        finished: Utc::now().to_rfc3339(),
        wall_time_s: clock.elapsed().as_secs_f64(),
        threads,
        failures: art.failures,
        passed: art.passed,
    };
    write_manifest(&dir, &manifest)?;
    Ok(RunOutcome { dir, manifest })
}

pub fn dump_channels(common: &CommonArgs, trial: u64, file: &Path) -> Result<(), Error> {
    let cfg = load_config(common)?;
    let draw = TrialDraw::draw(&cfg, trial)?;
    let f = fs::File::create(file)?;
    draw.channels.write_binary(io::BufWriter::new(f))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn common() -> CommonArgs {
        CommonArgs {
            config: None,
            overrides: vec![],
            seed: None,
            trials: None,
            threads: 1,
            out: PathBuf::from("unused"),
            allow_failures: false,
            full_scale: false,
        }
    }

    #[test]
    fn layering_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "seed = 5\ntrials = 9\nsigma_r2 = 3.0\n").unwrap();
        let args = CommonArgs {
            config: Some(path),
            overrides: vec!["sigma_r2=4.0".into()],
            seed: Some(11),
            ..common()
        };
        let cfg = load_config(&args).unwrap();
        assert_eq!((cfg.seed, cfg.trials, cfg.sigma_r2), (11, 9, 4.0));
    }

    #[test]
    fn bad_key_names_the_key() {
        let args = CommonArgs {
            overrides: vec!["M=lots".into()],
            ..common()
        };
        let msg = load_config(&args).unwrap_err().to_string();
        assert!(msg.contains('M'), "{msg}");
    }

    #[test]
    fn run_dirs_never_collide() {
        let dir = tempfile::tempdir().unwrap();
        let at = Utc::now();
        let a = fresh_run_dir(dir.path(), "ul-rate", at).unwrap();
        let b = fresh_run_dir(dir.path(), "ul-rate", at).unwrap();
        assert_ne!(a, b);
        assert!(b.file_name().unwrap().to_string_lossy().ends_with("-1"));
    }

    #[test]
    fn manifest_is_renamed_into_place() {
        let dir = tempfile::tempdir().unwrap();
        let m = RunManifest {
            kind: "ul-rate".into(),
            seed: 1,
            code_version: "0".into(),
            config: SystemConfig::default(),
            settings: serde_json::Value::Null,
            outputs: vec![],
            started: String::new(),
            finished: String::new(),
            wall_time_s: 0.0,
            threads: 1,
            failures: 0,
            passed: true,
        };
        let p = write_manifest(dir.path(), &m).unwrap();
        assert!(p.exists());
        assert!(!dir.path().join("manifest.json.tmp").exists());
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
        assert_eq!(v["config"]["M"], 64);
    }
}
