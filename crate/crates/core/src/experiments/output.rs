//! CSV rendering. Floats use Rust's shortest round-trip formatting, so equal
//! results always produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::region::{RateRegion, RateRegionPoint};
use super::{CurveResult, Series};
use crate::Result;

pub fn series_csv(sweep_key: &str, series: &Series) -> String {
    let mut out = format!("{sweep_key},mean,stderr,trials,failures\n");
    for p in &series.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.x, p.mean, p.stderr, p.trials, p.failures
        );
    }
    out
}

fn region_rows(points: &[RateRegionPoint]) -> String {
    let mut out = String::from(
        "radar_scale,comm_scale,comm_rate,radar_rate,comm_rate_mc,comm_rate_mc_stderr\n",
    );
    for p in points {
        let (mc, se) = p.mc.map_or((String::new(), String::new()), |m| {
            (m.mean.to_string(), m.stderr.to_string())
        });
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.radar_scale, p.comm_scale, p.comm_rate, p.radar_rate, mc, se
        );
    }
    out
}

/// File name and contents for every CSV a region produces.
pub fn region_csvs(region: &RateRegion) -> Vec<(String, String)> {
    let link = region.link.name();
    let mut chord = String::from("comm_rate,radar_rate\n");
    for (c, r) in region.chord() {
        let _ = writeln!(chord, "{c},{r}");
    }
    vec![
        (
            format!("rate-region_{link}_points.csv"),
            region_rows(&region.points),
        ),
        (
            format!("rate-region_{link}_frontier.csv"),
            region_rows(&region.frontier),
        ),
        (format!("rate-region_{link}_chord.csv"), chord),
    ]
}

pub fn curve_csvs(result: &CurveResult) -> Vec<(String, String)> {
    result
        .series
        .iter()
        .map(|s| {
            (
                format!("{}_{}.csv", result.kind.name(), s.name),
                series_csv(&result.sweep_key, s),
            )
        })
        .collect()
}

/// Write `(name, contents)` pairs into `dir`, returning the paths.
pub fn write_files(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>> {
    files
        .iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            fs::write(&path, body)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Point;

    #[test]
    fn csv_layout() {
        let s = Series {
            name: "de".into(),
            points: vec![Point {
                x: 5.0,
                mean: 0.25,
                stderr: 0.0,
                trials: 3,
                failures: 1,
            }],
        };
        assert_eq!(
            series_csv("radar_snr_db", &s),
            "radar_snr_db,mean,stderr,trials,failures\n5,0.25,0,3,1\n"
        );
    }
}
