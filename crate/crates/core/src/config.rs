//! Experiment configuration with a flat, human-editable TOML schema.
//!
//! Keys are named exactly as the struct fields (`M`, `K`, `N_t`, ...) and
//! unknown keys are rejected. `--set KEY=VALUE` overrides are merged into the
//! parsed table before deserialization so they get the same type checks.

use serde::{Deserialize, Serialize};

use crate::radar::MusicManifold;
use crate::training::SyncMode;
use crate::{Error, Result};

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub M: usize,
    pub K: usize,
    pub N_t: usize,
    pub N_r: usize,
    pub f_c: f64,
    pub cell_radius: f64,
    pub alpha_pl: f64,
    pub frame_len: usize,
    pub tau_u: usize,
    pub tau_d: usize,
    pub N0: f64,
    pub eps_up_pilot: f64,
    pub eps_up_data: f64,
    pub eps_dn_data: f64,
    pub sigma_r2: f64,
    pub radar_snr: f64,
    pub interf_err_frac: f64,
    pub seed: u64,
    pub de_tol: f64,
    pub de_max_iter: usize,
    pub music_grid_deg: f64,
    pub trials: usize,
    /// Smallest admissible β before power control refuses to invert it.
    pub beta_floor: f64,
    /// RZF regularizer; `None` selects `(K + N_r) N0 / (M mean_k β_k ε_dk)`.
    pub rzf_alpha: Option<f64>,
    pub sync_mode: SyncMode,
    pub music_manifold: MusicManifold,
    /// Pins the target direction (degrees) instead of drawing a position.
    pub target_angle_deg: Option<f64>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            M: 64,
            K: 4,
            N_t: 4,
            N_r: 4,
            f_c: 3e9,
            cell_radius: 100.0,
            alpha_pl: 3.0,
            frame_len: 1024,
            tau_u: 510,
            tau_d: 510,
            N0: 1.0,
            eps_up_pilot: 10.0,
            eps_up_data: 10.0,
            eps_dn_data: 10.0,
            sigma_r2: 10.0,
            radar_snr: 100.0,
            interf_err_frac: 0.1,
            seed: 1,
            de_tol: 1e-9,
            de_max_iter: 500,
            music_grid_deg: 0.01,
            trials: 500,
            beta_floor: 1e-12,
            rzf_alpha: None,
            sync_mode: SyncMode::Known,
            music_manifold: MusicManifold::TransmitReceive,
            target_angle_deg: None,
        }
    }
}

impl SystemConfig {
    /// The large-array setting: M=128, K=8, N_t=N_r=8, 10 000 trials.
    pub fn full_scale() -> Self {
        Self {
            M: 128,
            K: 8,
            N_t: 8,
            N_r: 8,
            tau_u: 508,
            tau_d: 508,
            trials: 10_000,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Self::from_table(table)
    }

    /// Layer `text` over `base`: keys present in the file win.
    pub fn from_toml_str_over(base: &Self, text: &str) -> Result<Self> {
        let overlay: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut table = base.to_table()?;
        for (k, v) in overlay {
            table.insert(k, v);
        }
        Self::from_table(table)
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_table(&self) -> Result<toml::Table> {
        toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    /// Apply `KEY=VALUE` overrides. Values are parsed as TOML literals, and
    /// anything that is not a valid literal is taken as a bare string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut table = self.to_table()?;
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item.split_once('=').ok_or_else(|| Error::ConfigKey {
                key: item.to_string(),
                message: "override must look like KEY=VALUE".into(),
            })?;
            let key = key.trim();
            table.insert(key.to_string(), parse_literal(raw.trim()));
        }
        Self::from_table(table)
    }

    /// Set one key, accepting a `_db` suffix that converts from decibels.
    pub fn with_value(&self, key: &str, value: f64) -> Result<Self> {
        let (key, value) = match key.strip_suffix("_db") {
            Some(base) => (base, crate::db_to_linear(value)),
            None => (key, value),
        };
        let mut table = self.to_table()?;
        let current = table.get(key).ok_or_else(|| Error::ConfigKey {
            key: key.to_string(),
            message: "unknown key".into(),
        })?;
        let v = match current {
            toml::Value::Integer(_) => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(Error::ConfigKey {
                        key: key.to_string(),
                        message: format!("expected a non-negative integer, got {value}"),
                    });
                }
                toml::Value::Integer(value as i64)
            }
            _ => toml::Value::Float(value),
        };
        table.insert(key.to_string(), v);
        Self::from_table(table)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, message: String| {
            Err(Error::ConfigKey {
                key: key.to_string(),
                message,
            })
        };
        if self.K == 0 {
            return fail("K", "need at least one user".into());
        }
        if self.N_t == 0 {
            return fail("N_t", "need at least one radar transmit antenna".into());
        }
        if self.M <= self.K + self.N_r {
            return fail(
                "M",
                format!(
                    "M = {} must exceed K + N_r = {} for the downlink null",
                    self.M,
                    self.K + self.N_r
                ),
            );
        }
        if self.frame_len != self.K + self.tau_u + self.tau_d {
            return fail(
                "frame_len",
                format!(
                    "frame_len = {} but K + tau_u + tau_d = {}",
                    self.frame_len,
                    self.K + self.tau_u + self.tau_d
                ),
            );
        }
        for (key, v) in [
            ("N0", self.N0),
            ("eps_up_pilot", self.eps_up_pilot),
            ("eps_up_data", self.eps_up_data),
            ("eps_dn_data", self.eps_dn_data),
            ("sigma_r2", self.sigma_r2),
            ("radar_snr", self.radar_snr),
            ("f_c", self.f_c),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return fail(
                    key,
                    format!("must be a finite non-negative number, got {v}"),
                );
            }
        }
        if !(self.N0 > 0.0) {
            return fail("N0", "noise power must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.interf_err_frac) {
            return fail(
                "interf_err_frac",
                format!("must lie in [0, 1], got {}", self.interf_err_frac),
            );
        }
        if !(self.cell_radius > 0.0) {
            return fail("cell_radius", "must be positive".into());
        }
        if !(self.alpha_pl > 0.0) {
            return fail("alpha_pl", "must be positive".into());
        }
        if !(self.de_tol > 0.0) {
            return fail("de_tol", "must be positive".into());
        }
        if self.de_max_iter == 0 {
            return fail("de_max_iter", "must be at least 1".into());
        }
        if !(self.music_grid_deg > 0.0) {
            return fail("music_grid_deg", "must be positive".into());
        }
        if self.trials == 0 {
            return fail("trials", "must be at least 1".into());
        }
        if !(self.beta_floor > 0.0) {
            return fail("beta_floor", "must be positive".into());
        }
        if let Some(a) = self.rzf_alpha {
            if !(a > 0.0) || !a.is_finite() {
                return fail("rzf_alpha", format!("must be positive, got {a}"));
            }
        }
        if let Some(t) = self.target_angle_deg {
            if !(t > -90.0 && t < 90.0) {
                return fail(
                    "target_angle_deg",
                    format!("must lie in (-90, 90), got {t}"),
                );
            }
        }
        Ok(())
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SystemConfig::default().validate().unwrap();
        SystemConfig::full_scale().validate().unwrap();
    }

    #[test]
    fn roundtrip_through_toml() {
        let cfg = SystemConfig::default();
        let back = SystemConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = SystemConfig::from_toml_str("M = 64\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn wrong_type_names_the_key() {
        let err = SystemConfig::default()
            .with_overrides(&["K=\"four\""])
            .unwrap_err();
        assert!(err.to_string().contains('K'), "{err}");
    }

    #[test]
    fn overrides_apply() {
        let cfg = SystemConfig::default()
            .with_overrides(&["sigma_r2=0", "sync_mode=unknown", "rzf_alpha=0.5"])
            .unwrap();
        assert_eq!(cfg.sigma_r2, 0.0);
        assert_eq!(cfg.sync_mode, SyncMode::Unknown);
        assert_eq!(cfg.rzf_alpha, Some(0.5));
    }

    #[test]
    fn null_rank_guard() {
        let err = SystemConfig::default()
            .with_overrides(&["M=8"])
            .unwrap_err();
        assert!(matches!(err, Error::ConfigKey { ref key, .. } if key == "M"));
    }

    #[test]
    fn db_suffix_converts() {
        let cfg = SystemConfig::default()
            .with_value("radar_snr_db", 20.0)
            .unwrap();
        assert!((cfg.radar_snr - 100.0).abs() < 1e-9);
        let cfg = cfg.with_value("K", 2.0).unwrap_err();
        assert!(matches!(cfg, Error::ConfigKey { .. }));
    }
}
