//! Benchmark-only crate; the benches live in `benches/`.

/// Configuration shared by the benches: the desk-scale defaults.
pub fn desk() -> jrc_core::SystemConfig {
    jrc_core::SystemConfig::default()
}
