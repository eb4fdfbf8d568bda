//! Link-level simulation and analysis of a MIMO radar sharing spectrum with a
//! single-cell massive MIMO system.
//!
//! The crate has two parallel pipelines that run on identical random drops:
//!
//! - an empirical (Monte Carlo) pipeline that draws channels, transmits
//!   pilots, estimates, combines/precodes and measures per-term powers, and
//! - an analytic pipeline built on deterministic equivalents (DE) of the
//!   MMSE uplink and RZF downlink SINRs, plus closed-form Cramér–Rao bounds
//!   for the radar's angle estimate.
//!
//! Module map:
//!
//! | module        | contents                                               |
//! |---------------|--------------------------------------------------------|
//! | [`config`]    | [`SystemConfig`] and its flat TOML schema              |
//! | [`scenario`]  | geometry, large-scale coefficients, power control      |
//! | [`channel`]   | small-scale channel draws and interference splits      |
//! | [`training`]  | pilots, despreading, LMMSE estimation                  |
//! | [`radar`]     | array manifold, radar receive model, MUSIC, CRB        |
//! | [`de`]        | fixed-point deterministic-equivalent engine            |
//! | [`uplink`]    | MMSE combining, empirical and DE uplink SINR           |
//! | [`downlink`]  | RZF precoding with a radar null, downlink SINR         |
//! | [`experiments`] | Monte Carlo harness, curves, rate regions, DE checks |

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod de;
pub mod downlink;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod radar;
pub mod rng;
pub mod scenario;
pub mod training;
pub mod uplink;

pub use channel::{draw_channels, ChannelRealization};
pub use config::SystemConfig;
pub use de::{DePrime, DeProblem, DeSolution, Shift};
pub use downlink::{DownlinkDe, DownlinkEmpirical, Precoder};
pub use error::{Error, Result};
pub use radar::{ArrayManifold, LinkMode, MusicManifold, RadarMetrics, RadarSnapshotBlock};
pub use scenario::{build_scenario, power_control, PowerAllocation, Scenario};
pub use training::{ChannelEstimate, LmmseCoefficients, PilotMatrix, SyncMode};
pub use uplink::{UplinkDe, UplinkEmpirical, UplinkResult};

/// Complex double used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;

/// `log2(1 + x)`, the rate convention for both subsystems.
pub fn rate_bits(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
