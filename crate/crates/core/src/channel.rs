//! Air-to-ground link model: elevation-dependent LoS probability, power-law
//! path loss and Nakagami-m (Gamma power) fading.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("link distance {r} m is shorter than the altitude {h} m")]
    BelowAltitude { r: f64, h: f64 },
    #[error("path loss is singular at distance {0}")]
    ZeroDistance(f64),
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),
}

/// Line-of-sight / non-line-of-sight state of an air-to-ground link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkState {
    Los,
    Nlos,
}

impl LinkState {
    pub const ALL: [LinkState; 2] = [LinkState::Los, LinkState::Nlos];
}

/// How the LoS probability of an air-to-ground link is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LosModel {
    /// P_l = 1 / (1 + C·exp(−B(θ − C))) with θ the elevation angle in degrees.
    Elevation { b: f64, c: f64 },
    /// Every link is LoS with the same fixed probability, whatever the geometry.
    Fixed(f64),
}

/// Propagation environment shared by both tiers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment {
    pub los: LosModel,
    pub alpha_l: f64,
    pub alpha_n: f64,
    /// Ground-to-ground exponent.
    pub alpha_b: f64,
    pub m_l: f64,
    pub m_n: f64,
}

impl Environment {
    /// Dense-urban values used throughout the numerical study.
    pub fn dense_urban() -> Self {
        Environment {
            los: LosModel::Elevation { b: 0.136, c: 11.95 },
            alpha_l: 3.0,
            alpha_n: 4.0,
            alpha_b: 4.0,
            m_l: 3.0,
            m_n: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |msg: String| Err(ChannelError::InvalidEnvironment(msg));
        match self.los {
            LosModel::Elevation { b, c } => {
                if !(b > 0.0 && c > 0.0) {
                    return bad(format!("B and C must be positive, got B = {b}, C = {c}"));
                }
            }
            LosModel::Fixed(p) => {
                if !(0.0..=1.0).contains(&p) {
                    return bad(format!("fixed LoS probability {p} outside [0, 1]"));
                }
            }
        }
        for (name, alpha) in [("alpha_l", self.alpha_l), ("alpha_n", self.alpha_n), ("alpha_b", self.alpha_b)] {
            if !(alpha > 2.0) {
                return bad(format!("{name} must exceed 2, got {alpha}"));
            }
        }
        for (name, m) in [("m_l", self.m_l), ("m_n", self.m_n)] {
            if !(m >= 1.0) {
                return bad(format!("{name} must be at least 1, got {m}"));
            }
        }
        Ok(())
    }

    pub fn alpha(&self, state: LinkState) -> f64 {
        match state {
            LinkState::Los => self.alpha_l,
            LinkState::Nlos => self.alpha_n,
        }
    }

    pub fn nakagami_m(&self, state: LinkState) -> f64 {
        match state {
            LinkState::Los => self.m_l,
            LinkState::Nlos => self.m_n,
        }
    }

    /// LoS probability of a link of 3D length `r` to a node at altitude `h`.
    pub fn los_probability(&self, r: f64, h: f64) -> Result<f64, ChannelError> {
        match self.los {
            LosModel::Fixed(p) => Ok(p),
            LosModel::Elevation { b, c } => {
                let theta = elevation_angle(r, h)?;
                Ok(sigmoid_los(theta, b, c))
            }
        }
    }

    /// Probability that the link is in `state`.
    pub fn state_probability(&self, state: LinkState, r: f64, h: f64) -> Result<f64, ChannelError> {
        let p_los = self.los_probability(r, h)?;
        Ok(match state {
            LinkState::Los => p_los,
            LinkState::Nlos => 1.0 - p_los,
        })
    }

    /// Unchecked LoS probability for hot loops where `r ≥ h` holds by
    /// construction. The ratio h/r is clamped to 1 to absorb rounding.
    #[inline]
    pub(crate) fn los_probability_unchecked(&self, r: f64, h: f64) -> f64 {
        match self.los {
            LosModel::Fixed(p) => p,
            LosModel::Elevation { b, c } => {
                let ratio = if r > 0.0 { (h / r).min(1.0) } else { 1.0 };
                sigmoid_los(ratio.asin().to_degrees(), b, c)
            }
        }
    }
}

#[inline]
fn sigmoid_los(theta_deg: f64, b: f64, c: f64) -> f64 {
    1.0 / (1.0 + c * (-b * (theta_deg - c)).exp())
}

/// Elevation angle in degrees of a link with 3D length `r` to altitude `h`.
pub fn elevation_angle(r: f64, h: f64) -> Result<f64, ChannelError> {
    if !(h >= 0.0) || !(r > 0.0) || r < h * (1.0 - 1e-12) {
        return Err(ChannelError::BelowAltitude { r, h });
    }
    Ok((h / r).min(1.0).asin().to_degrees())
}

/// LoS probability under the elevation model for the given B and C.
pub fn los_probability(r: f64, h: f64, env: &Environment) -> Result<f64, ChannelError> {
    env.los_probability(r, h)
}

/// distance^(−alpha).
pub fn path_loss(distance: f64, alpha: f64) -> Result<f64, ChannelError> {
    if !(distance > 0.0) {
        return Err(ChannelError::ZeroDistance(distance));
    }
    Ok(distance.powf(-alpha))
}

/// Unit-mean Gamma power gain with shape `m` (Nakagami-m fading).
#[derive(Debug, Clone, Copy)]
pub struct GammaFading {
    dist: Gamma<f64>,
}

impl GammaFading {
    pub fn new(m: f64) -> Result<Self, ChannelError> {
        if !(m >= 1.0) || !m.is_finite() {
            return Err(ChannelError::InvalidEnvironment(format!(
                "Nakagami shape must be at least 1, got {m}"
            )));
        }
        let dist = Gamma::new(m, 1.0 / m).map_err(|e| ChannelError::InvalidEnvironment(e.to_string()))?;
        Ok(GammaFading { dist })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.dist.sample(rng)
    }
}

/// One draw of a unit-mean Gamma(m, 1/m) power gain.
pub fn sample_gamma_fading<R: Rng + ?Sized>(m: f64, rng: &mut R) -> Result<f64, ChannelError> {
    Ok(GammaFading::new(m)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn elevation_examples() {
        assert_relative_eq!(elevation_angle(100.0, 100.0).unwrap(), 90.0, epsilon = 1e-12);
        assert_relative_eq!(elevation_angle(200.0, 100.0).unwrap(), 30.0, epsilon = 1e-12);
        assert_relative_eq!(elevation_angle(100.0 * 2f64.sqrt(), 100.0).unwrap(), 45.0, epsilon = 1e-12);
        assert!(elevation_angle(50.0, 100.0).is_err());
    }

    #[test]
    fn los_probability_examples() {
        let env = Environment::dense_urban();
        let c: f64 = 11.95;
        let b: f64 = 0.136;
        // θ = C: exponent vanishes.
        let r = 100.0 / c.to_radians().sin();
        assert_relative_eq!(env.los_probability(r, 100.0).unwrap(), 1.0 / (1.0 + c), max_relative = 1e-12);
        assert!((1.0 / (1.0 + c) - 0.07722).abs() < 1e-5);
        // Directly overhead.
        let overhead = env.los_probability(100.0, 100.0).unwrap();
        assert!((overhead - 0.99971).abs() < 1e-5, "{overhead}");
        // Horizon limit.
        let limit = 1.0 / (1.0 + c * (b * c).exp());
        assert!((limit - 0.016_208).abs() < 1e-6);
        let far = env.los_probability(1e9, 100.0).unwrap();
        assert_relative_eq!(far, limit, max_relative = 1e-6);
        assert!(env.los_probability(10.0, 100.0).is_err());
    }

    #[test]
    fn los_monotone_in_elevation_and_complementary() {
        let env = Environment::dense_urban();
        let h = 120.0;
        let mut last = 0.0;
        for k in 1..=900 {
            let theta = k as f64 * 0.1;
            let r = h / theta.to_radians().sin();
            let p = env.los_probability(r, h).unwrap();
            assert!(p >= last, "not monotone at θ = {theta}");
            last = p;
            let pl = env.state_probability(LinkState::Los, r, h).unwrap();
            let pn = env.state_probability(LinkState::Nlos, r, h).unwrap();
            assert_eq!(pl + pn, 1.0);
        }
    }

    #[test]
    fn path_loss_examples() {
        assert_eq!(path_loss(1.0, 3.0).unwrap(), 1.0);
        assert_relative_eq!(path_loss(10.0, 4.0).unwrap(), 1e-4, max_relative = 1e-14);
        assert_relative_eq!(path_loss(100.0, 3.0).unwrap(), 1e-6, max_relative = 1e-14);
        assert!(path_loss(0.0, 3.0).is_err());
    }

    #[test]
    fn environment_validation() {
        assert!(Environment::dense_urban().validate().is_ok());
        let mut env = Environment::dense_urban();
        env.alpha_b = 2.0;
        assert!(env.validate().is_err());
        let mut env = Environment::dense_urban();
        env.m_n = 0.5;
        assert!(env.validate().is_err());
        let mut env = Environment::dense_urban();
        env.los = LosModel::Fixed(1.5);
        assert!(env.validate().is_err());
    }

    fn moments(m: f64, n: usize, seed: u64) -> (f64, f64) {
        let fading = GammaFading::new(m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..n).map(|_| fading.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        (mean, var)
    }

    #[test]
    fn gamma_fading_unit_mean() {
        let n = 100_000;
        for m in [1.0, 2.0, 3.0, 5.5] {
            let (mean, _) = moments(m, n, 7);
            let se = (1.0 / m / n as f64).sqrt();
            assert!((mean - 1.0).abs() < 3.0 * se, "m = {m}: mean {mean}");
        }
    }

    #[test]
    fn gamma_fading_variance_is_inverse_shape() {
        // Var = 1/m. The sample variance has standard error √((μ4 − σ⁴)/n),
        // and Gamma(m, 1/m) has fourth central moment μ4 = 3m(m + 2)/m⁴.
        let m = 3.0;
        let n = 100_000;
        let (_, var) = moments(m, n, 11);
        let mu4 = (3.0 * m * m + 6.0 * m) / m.powi(4);
        let se = ((mu4 - 1.0 / (m * m)) / n as f64).sqrt();
        assert!((var - 1.0 / 3.0).abs() < 3.0 * se, "variance {var}, se {se}");
    }

    #[test]
    fn unit_shape_is_exponential() {
        let n = 100_000;
        let fading = GammaFading::new(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut xs: Vec<f64> = (0..n).map(|_| fading.sample(&mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let cdf = 1.0 - (-x).exp();
                (cdf - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - cdf).abs())
            })
            .fold(0.0, f64::max);
        // Kolmogorov–Smirnov critical value at the 1% level.
        assert!(d < 1.628 / (n as f64).sqrt(), "KS statistic {d}");
    }

    #[test]
    fn gamma_shape_below_one_is_rejected() {
        assert!(GammaFading::new(0.5).is_err());
    }
}
