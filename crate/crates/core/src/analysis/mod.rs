//! Analytical model: MISR gain of the hardcore UAV tier, Laplace-functional
//! rate approximations for UAV users and BS users, and the area spectral
//! efficiency. Rates are in nats/s/Hz.

mod misr;
mod rate;

use std::f64::consts::PI;

use thiserror::Error;

use crate::channel::{ChannelError, Environment, LinkState, LosModel};
use crate::geometry::{GeometryError, MhpParams};
use crate::numerics::NumericsError;
use crate::{dbm_to_watts, PER_KM2};

pub use misr::{misr_gain, misr_mhp_cond, misr_ppp_cond, MisrGain};
pub use rate::{
    ase, bs_interference_exponent, BueRateModel, capacity_from_laplace, k_b, k_s, kappa_b, kappa_s, rate_bue, rate_uue,
    RateEstimate, RateSource,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error("UAV transmit power is zero: the BS interference exponent seen by UAV users is infinite")]
    UavTierSilenced,
    #[error("{0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

/// Which distance the LoS probability of an interfering UAV is evaluated at
/// inside the hardcore MISR integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LosArgument {
    /// 3D distance between the typical user and the interferer.
    InterfererDistance,
    /// Planar separation between the serving UAV and the interferer, fed to
    /// the elevation model as if it were a link length (h/v clamped to 1).
    ServingSeparation,
}

/// Lower limit of the interferer-to-serving-UAV separation v at angle φ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExclusionBoundary {
    /// v ≥ max(d, 2x·cos φ): exactly the interferers farther from the user
    /// than the serving UAV.
    Signed,
    /// v ≥ max(d, 2x·|cos φ|).
    Absolute,
}

/// Physical and model parameters of the two-tier network, in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    /// UAV (hardcore) density, m⁻².
    pub lambda_u: f64,
    /// BS density, m⁻².
    pub lambda_b: f64,
    /// Hardcore distance, m.
    pub d: f64,
    /// UAV altitude, m.
    pub h: f64,
    /// UAV transmit power, W.
    pub p_u: f64,
    /// BS transmit power, W.
    pub p_b: f64,
    /// Power-control factor in [0, 1].
    pub eta: f64,
    /// BS cell radius for BS-user placement, m.
    pub r_b: f64,
    pub env: Environment,
    pub los_argument: LosArgument,
    pub boundary: ExclusionBoundary,
}

impl NetworkConfig {
    /// Dense-urban reference parameters: λ_u = λ_b = 10 km⁻², d = 100 m,
    /// 37 dBm on both tiers, h = 100 m, η = 1, R_b = 100 m.
    pub fn reference() -> Self {
        NetworkConfig {
            lambda_u: 10.0 * PER_KM2,
            lambda_b: 10.0 * PER_KM2,
            d: 100.0,
            h: 100.0,
            p_u: dbm_to_watts(37.0),
            p_b: dbm_to_watts(37.0),
            eta: 1.0,
            r_b: 100.0,
            env: Environment::dense_urban(),
            los_argument: LosArgument::InterfererDistance,
            boundary: ExclusionBoundary::Signed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(AnalysisError::InvalidConfig(msg));
        for (name, v) in [("lambda_u", self.lambda_u), ("lambda_b", self.lambda_b), ("d", self.d)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        for (name, v) in [("p_u", self.p_u), ("p_b", self.p_b), ("r_b", self.r_b)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return bad(format!("eta must lie in [0, 1], got {}", self.eta));
        }
        let fixed_los = matches!(self.env.los, LosModel::Fixed(_));
        if !(self.h > 0.0 || (fixed_los && self.h == 0.0)) || !self.h.is_finite() {
            return bad(format!("altitude must be positive, got {}", self.h));
        }
        if self.lambda_u * PI * self.d * self.d >= 1.0 {
            return bad(format!(
                "lambda_u·π·d² = {} must be below 1",
                self.lambda_u * PI * self.d * self.d
            ));
        }
        self.env.validate()?;
        Ok(())
    }

    pub fn mhp(&self) -> Result<MhpParams> {
        Ok(MhpParams::from_density(self.lambda_u, self.d)?)
    }

    /// Parent PPP density λ_p of the hardcore UAV tier.
    pub fn lambda_p(&self) -> Result<f64> {
        Ok(self.mhp()?.lambda_p)
    }

    /// η·P_u / P_b.
    pub fn uav_to_bs_power(&self) -> f64 {
        self.eta * self.p_u / self.p_b
    }

    #[inline]
    pub(crate) fn p_state(&self, state: LinkState, r: f64) -> f64 {
        let p = self.env.los_probability_unchecked(r, self.h);
        match state {
            LinkState::Los => p,
            LinkState::Nlos => 1.0 - p,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_altitude(mut self, h: f64) -> Self {
        self.h = h;
        self
    }
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig::reference()
    }
}

/// Density of the distance to the nearest node of a PPP of density `lambda`
/// at altitude `h`: 2πλr·exp(−πλ(r² − h²)), r ≥ h.
pub fn serving_pdf_uav(r: f64, lambda: f64, h: f64) -> Result<f64> {
    if r < h * (1.0 - 1e-12) {
        return Err(ChannelError::BelowAltitude { r, h }.into());
    }
    Ok(serving_pdf_unchecked(r, lambda, h))
}

#[inline]
pub(crate) fn serving_pdf_unchecked(r: f64, lambda: f64, h: f64) -> f64 {
    2.0 * PI * lambda * r * (-PI * lambda * (r * r - h * h)).exp()
}

/// Density of the BS-user link length: uniform placement in a disk of
/// radius `r_b`.
pub fn serving_pdf_bs(r: f64, r_b: f64) -> f64 {
    if (0.0..=r_b).contains(&r) {
        2.0 * r / (r_b * r_b)
    } else {
        0.0
    }
}

/// Length scale 1/√(πλ) of nearest-neighbour distances at density λ.
pub(crate) fn nearest_scale(lambda: f64) -> f64 {
    if lambda > 0.0 {
        1.0 / (PI * lambda).sqrt()
    } else {
        1.0
    }
}
