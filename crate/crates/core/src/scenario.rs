//! Cell geometry, large-scale coefficients and channel-inversion power control.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::unit_phase;
use crate::{Error, Result, SystemConfig, C64};

/// A point in polar coordinates about the cell centre (the BS).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Polar {
    pub r: f64,
    pub phi: f64,
}

impl Polar {
    pub fn xy(&self) -> (f64, f64) {
        (self.r * self.phi.cos(), self.r * self.phi.sin())
    }

    pub fn distance(&self, other: &Polar) -> f64 {
        let (x0, y0) = self.xy();
        let (x1, y1) = other.xy();
        (x1 - x0).hypot(y1 - y0)
    }
}

/// Uniform draw over a disc of the given radius.
pub fn uniform_in_disc<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Polar {
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    Polar {
        r: radius * u.sqrt(),
        phi: std::f64::consts::TAU * v,
    }
}

/// `min(d^-alpha, 1)`.
pub fn path_gain(d: f64, alpha: f64) -> f64 {
    d.powf(-alpha).min(1.0)
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub user_positions: Vec<Polar>,
    pub radar_position: Polar,
    pub target_position: Option<Polar>,
    /// Target angle of arrival/departure at the radar arrays, radians.
    pub theta: f64,
    pub beta: Vec<f64>,
    pub eta_I: f64,
    pub eta_e: f64,
    pub eta_rk: Vec<f64>,
    #[serde(with = "complex_serde")]
    pub h_rr: C64,
}

impl Scenario {
    pub fn k(&self) -> usize {
        self.beta.len()
    }

    /// Variance of the known part of the interference channel, `η_I − η_e`.
    pub fn eta_hat(&self) -> f64 {
        self.eta_I - self.eta_e
    }
}

mod complex_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::C64;

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(C64::new(re, im))
    }
}

/// Radar/target AoA: the arrays lie along the x axis, so `sinθ` is the x
/// offset over the range.
fn target_angle(radar: &Polar, target: &Polar) -> f64 {
    let (xr, yr) = radar.xy();
    let (xt, yt) = target.xy();
    let d = (xt - xr).hypot(yt - yr);
    if d == 0.0 {
        return 0.0;
    }
    ((xt - xr) / d).clamp(-1.0, 1.0).asin()
}

/// Build one drop. Consumes the stream in a fixed order: users, radar,
/// target, then the `h_rr` phase.
pub fn build_scenario<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Result<Scenario> {
    config.validate()?;
    let alpha = config.alpha_pl;
    let bs = Polar { r: 0.0, phi: 0.0 };

    let user_positions: Vec<Polar> = (0..config.K)
        .map(|_| uniform_in_disc(rng, config.cell_radius))
        .collect();
    let radar_position = uniform_in_disc(rng, config.cell_radius);
    let target = uniform_in_disc(rng, config.cell_radius);
    let phase = unit_phase(rng);

    let beta = user_positions
        .iter()
        .map(|p| path_gain(p.distance(&bs), alpha))
        .collect();
    #[allow(non_snake_case)]
    let eta_I = path_gain(radar_position.distance(&bs), alpha);
    let eta_e = config.interf_err_frac * eta_I;
    let eta_rk = user_positions
        .iter()
        .map(|p| path_gain(p.distance(&radar_position), alpha))
        .collect();

    let (theta, target_position) = match config.target_angle_deg {
        Some(deg) => (deg.to_radians(), None),
        None => {
            // Keep the angle strictly inside the array's field of view.
            let lim = std::f64::consts::FRAC_PI_2 - 1e-6;
            (
                target_angle(&radar_position, &target).clamp(-lim, lim),
                Some(target),
            )
        }
    };

    let h_rr = if config.sigma_r2 > 0.0 {
        phase * (config.radar_snr * config.N0 / config.sigma_r2).sqrt()
    } else {
        C64::new(0.0, 0.0)
    };

    Ok(Scenario {
        user_positions,
        radar_position,
        target_position,
        theta,
        beta,
        eta_I,
        eta_e,
        eta_rk,
        h_rr,
    })
}

/// Per-user energies after channel inversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub eps_up_pilot: Vec<f64>,
    pub eps_up_data: Vec<f64>,
    pub eps_dn_data: Vec<f64>,
}

impl PowerAllocation {
    /// `β_k ε_k` for one of the allocations; identical across users.
    pub fn received(beta: &[f64], eps: &[f64]) -> Vec<f64> {
        beta.iter().zip(eps).map(|(b, e)| b * e).collect()
    }
}

/// `ε_k = configured / β_k`, so every user arrives with the configured energy.
pub fn power_control(scenario: &Scenario, config: &SystemConfig) -> Result<PowerAllocation> {
    for (k, &b) in scenario.beta.iter().enumerate() {
        if !(b >= config.beta_floor) {
            return Err(Error::InvalidArgument(format!(
                "beta[{k}] = {b:e} is below the floor {:e}",
                config.beta_floor
            )));
        }
    }
    let invert = |e: f64| scenario.beta.iter().map(|b| e / b).collect::<Vec<_>>();
    Ok(PowerAllocation {
        eps_up_pilot: invert(config.eps_up_pilot),
        eps_up_data: invert(config.eps_up_data),
        eps_dn_data: invert(config.eps_dn_data),
    })
}
