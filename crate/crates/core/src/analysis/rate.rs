//! Average-rate approximations through the capacity lemma
//! E[ln(1 + X/Y)] = ∫₀^∞ z⁻¹ E[e^{−zY}] (1 − E[e^{−zX}]) dz,
//! with the interference Laplace functionals written as exp(−K).

use std::f64::consts::PI;

use super::{nearest_scale, serving_pdf_unchecked, AnalysisError, NetworkConfig, Result};
use crate::channel::LinkState;
use crate::numerics::{beta_function, try_integrate, try_integrate_semi_infinite, QuadratureSpec};

/// exp(−x) underflows to zero beyond this.
const EXP_CUTOFF: f64 = 745.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateSource {
    Analytical,
    MonteCarlo,
}

/// Average rate in nats/s/Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub value: f64,
    pub source: RateSource,
    /// 95% half-width; 0 for analytical values.
    pub half_width: f64,
    /// Set when the UAV tier transmits with zero power, so UAV users get
    /// nothing regardless of interference.
    pub silenced: bool,
}

impl RateEstimate {
    pub fn analytical(value: f64) -> Self {
        RateEstimate {
            value,
            source: RateSource::Analytical,
            half_width: 0.0,
            silenced: false,
        }
    }

    pub fn monte_carlo(value: f64, half_width: f64) -> Self {
        RateEstimate {
            value,
            source: RateSource::MonteCarlo,
            half_width,
            silenced: false,
        }
    }

    pub fn silenced() -> Self {
        RateEstimate {
            silenced: true,
            ..RateEstimate::analytical(0.0)
        }
    }
}

/// 1 − (1 + a)^{−m}, accurate for small a.
#[inline]
fn one_minus_pow(a: f64, m: f64) -> f64 {
    -(-m * a.ln_1p()).exp_m1()
}

/// (1 − (1 + z/m)^{−m}) / z, with its limit 1 at z = 0.
#[inline]
fn signal_factor(z: f64, m: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        one_minus_pow(z / m, m) / z
    }
}

/// ∫₀^∞ z⁻¹ L_Y(z) (1 − L_X(z)) dz, i.e. E[ln(1 + X/Y)] for independent
/// non-negative X and Y with Laplace transforms `laplace_x` and `laplace_y`.
pub fn capacity_from_laplace<LY, LX>(laplace_y: LY, laplace_x: LX, spec: &QuadratureSpec) -> Result<f64>
where
    LY: Fn(f64) -> f64,
    LX: Fn(f64) -> f64,
{
    let integrand = |z: f64| -> Result<f64> {
        if z == 0.0 {
            return Ok(0.0);
        }
        Ok(laplace_y(z) * (1.0 - laplace_x(z)) / z)
    };
    Ok(try_integrate_semi_infinite(integrand, 0.0, 1.0, spec)?.value)
}

/// Per-configuration constants shared by every K evaluation.
struct Kernel<'a> {
    cfg: &'a NetworkConfig,
    lambda_p: f64,
    /// (2π/α_b) B(2/α_b, 1 − 2/α_b).
    bs_constant: f64,
    delta: f64,
    inner: QuadratureSpec,
}

impl<'a> Kernel<'a> {
    fn new(cfg: &'a NetworkConfig) -> Result<Self> {
        cfg.validate()?;
        let alpha_b = cfg.env.alpha_b;
        let delta = 2.0 / alpha_b;
        Ok(Kernel {
            cfg,
            lambda_p: cfg.lambda_p()?,
            bs_constant: 2.0 * PI / alpha_b * beta_function(delta, 1.0 - delta)?,
            delta,
            inner: QuadratureSpec::INNER,
        })
    }

    /// Σ_q [1 − (1 + c_q y^{−α_q})^{−m_q}] P_q(y).
    #[inline]
    fn kappa(&self, y: f64, c: [f64; 2]) -> f64 {
        let env = &self.cfg.env;
        let p_los = env.los_probability_unchecked(y, self.cfg.h);
        let ln_y = y.ln();
        let los = one_minus_pow(c[0] * (-env.alpha_l * ln_y).exp(), env.m_l);
        let nlos = one_minus_pow(c[1] * (-env.alpha_n * ln_y).exp(), env.m_n);
        los * p_los + nlos * (1.0 - p_los)
    }

    /// ∫_lower^∞ κ(y) y dy for κ built from coefficients `c`.
    fn kappa_moment(&self, lower: f64, c: [f64; 2]) -> Result<f64> {
        if c[0] == 0.0 && c[1] == 0.0 {
            return Ok(0.0);
        }
        let env = &self.cfg.env;
        // κ drops off around y where c_q y^{−α_q} ≈ 1.
        let scale = lower
            .max(c[0].powf(1.0 / env.alpha_l))
            .max(c[1].powf(1.0 / env.alpha_n));
        if !(scale > 0.0) {
            return Ok(0.0);
        }
        let integral = try_integrate_semi_infinite::<_, AnalysisError>(
            |t| {
                if t <= 0.0 {
                    return Ok(0.0);
                }
                Ok(self.kappa(scale * t, c) * t)
            },
            lower / scale,
            1.0,
            &self.inner,
        )?
        .value;
        Ok(scale * scale * integral)
    }

    fn uue_coefficients(&self, r: f64, z: f64, s: LinkState, gain: f64) -> [f64; 2] {
        let env = &self.cfg.env;
        let signal = r.powf(env.alpha(s));
        [z * signal / (env.m_l * gain), z * signal / (env.m_n * gain)]
    }

    fn bue_coefficients(&self, r: f64, z: f64) -> [f64; 2] {
        let env = &self.cfg.env;
        let signal = self.cfg.uav_to_bs_power() * r.powf(env.alpha_b);
        [z * signal / env.m_l, z * signal / env.m_n]
    }

    fn k_s_bs_term(&self, r: f64, z: f64, s: LinkState) -> Result<f64> {
        if self.cfg.lambda_b == 0.0 || z == 0.0 {
            return Ok(0.0);
        }
        let ratio = self.cfg.uav_to_bs_power();
        if ratio == 0.0 {
            return Err(AnalysisError::UavTierSilenced);
        }
        let arg = z * r.powf(self.cfg.env.alpha(s)) / ratio;
        Ok(self.cfg.lambda_b * self.bs_constant * arg.powf(self.delta))
    }

    fn k_s(&self, r: f64, z: f64, s: LinkState, gain: f64) -> Result<f64> {
        let bs = self.k_s_bs_term(r, z, s)?;
        if bs > EXP_CUTOFF || z == 0.0 || self.lambda_p == 0.0 {
            return Ok(bs);
        }
        let uav = 2.0 * PI * self.lambda_p * self.kappa_moment(r, self.uue_coefficients(r, z, s, gain))?;
        Ok(uav + bs)
    }

    fn k_b(&self, r: f64, z: f64) -> Result<f64> {
        if z == 0.0 {
            return Ok(0.0);
        }
        let bs = self.cfg.lambda_b * self.bs_constant * z.powf(self.delta) * r * r;
        if bs > EXP_CUTOFF || self.cfg.lambda_u == 0.0 {
            return Ok(bs);
        }
        let uav = 2.0 * PI * self.cfg.lambda_u * self.kappa_moment(self.cfg.h, self.bue_coefficients(r, z))?;
        Ok(uav + bs)
    }
}

/// κ_s(r, y, z): interference kernel seen by a UAV user served in state s at
/// 3D distance r, from a UAV at 3D distance y.
pub fn kappa_s(r: f64, y: f64, z: f64, s: LinkState, gain: f64, cfg: &NetworkConfig) -> f64 {
    let env = &cfg.env;
    let signal = r.powf(env.alpha(s));
    let p_los = env.los_probability_unchecked(y, cfg.h);
    one_minus_pow(z * y.powf(-env.alpha_l) * signal / (env.m_l * gain), env.m_l) * p_los
        + one_minus_pow(z * y.powf(-env.alpha_n) * signal / (env.m_n * gain), env.m_n) * (1.0 - p_los)
}

/// κ_b(r, y, z): kernel seen by a BS user at distance r from its BS, from a
/// UAV at 3D distance y.
pub fn kappa_b(r: f64, y: f64, z: f64, cfg: &NetworkConfig) -> f64 {
    let env = &cfg.env;
    let signal = cfg.uav_to_bs_power() * r.powf(env.alpha_b);
    let p_los = env.los_probability_unchecked(y, cfg.h);
    one_minus_pow(z * signal / (env.m_l * y.powf(env.alpha_l)), env.m_l) * p_los
        + one_minus_pow(z * signal / (env.m_n * y.powf(env.alpha_n)), env.m_n) * (1.0 - p_los)
}

/// Exponent K_s(r, z) of the interference Laplace functional at a UAV user.
pub fn k_s(r: f64, z: f64, s: LinkState, gain: f64, cfg: &NetworkConfig) -> Result<f64> {
    if !(gain > 0.0) {
        return Err(AnalysisError::InvalidConfig(format!("gain must be positive, got {gain}")));
    }
    if !(z >= 0.0) {
        return Err(AnalysisError::InvalidConfig(format!("threshold must be non-negative, got {z}")));
    }
    Kernel::new(cfg)?.k_s(r, z, s, gain)
}

/// Exponent K_b(r, z) of the interference Laplace functional at a BS user.
pub fn k_b(r: f64, z: f64, cfg: &NetworkConfig) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(AnalysisError::InvalidConfig(format!("threshold must be non-negative, got {z}")));
    }
    Kernel::new(cfg)?.k_b(r, z)
}

/// BS-tier part of K_b alone: (2πλ_b/α_b) z^{2/α_b} r² B(2/α_b, 1 − 2/α_b).
pub fn bs_interference_exponent(r: f64, z: f64, cfg: &NetworkConfig) -> Result<f64> {
    let kernel = Kernel::new(cfg)?;
    Ok(cfg.lambda_b * kernel.bs_constant * z.powf(kernel.delta) * r * r)
}

/// Approximate average rate of the typical UAV user for MISR gain `gain`.
pub fn rate_uue(cfg: &NetworkConfig, gain: f64) -> Result<RateEstimate> {
    let kernel = Kernel::new(cfg)?;
    if cfg.eta == 0.0 {
        return Ok(RateEstimate::silenced());
    }
    if !(gain > 0.0) {
        return Err(AnalysisError::InvalidConfig(format!("gain must be positive, got {gain}")));
    }
    if kernel.lambda_p == 0.0 {
        return Err(AnalysisError::Degenerate("no UAVs: the UAV-user rate is undefined".into()));
    }
    let outer = QuadratureSpec::OUTER;
    let h = cfg.h;
    let lambda_p = kernel.lambda_p;
    let env = &cfg.env;

    let over_r = |z: f64| -> Result<f64> {
        let factors = [signal_factor(z, env.m_l), signal_factor(z, env.m_n)];
        let r_integral = try_integrate_semi_infinite::<_, AnalysisError>(
            |r| {
                if r <= 0.0 {
                    return Ok(0.0);
                }
                let pdf = serving_pdf_unchecked(r, lambda_p, h);
                if pdf == 0.0 {
                    return Ok(0.0);
                }
                let p_los = env.los_probability_unchecked(r, h);
                let mut sum = 0.0;
                for (s, (p, factor)) in LinkState::ALL.into_iter().zip([(p_los, factors[0]), (1.0 - p_los, factors[1])]) {
                    if p == 0.0 {
                        continue;
                    }
                    let k = kernel.k_s(r, z, s, gain)?;
                    sum += factor * p * (-k).exp();
                }
                Ok(sum * pdf)
            },
            h,
            nearest_scale(lambda_p),
            &outer,
        )?;
        Ok(r_integral.value)
    };

    let value = try_integrate_semi_infinite(over_r, 0.0, 1.0, &outer)?.value;
    Ok(RateEstimate::analytical(value))
}

/// Ψ(t) = ∫_h^∞ κ y dy with coefficients t/m_q, tabulated on a uniform grid
/// in ln t and interpolated as a cubic in (ln t, ln Ψ). The UAV part of K_b is
/// 2πλ_u Ψ(z ηP_u r^{α_b}/P_b), so one table serves every η at a given h.
#[derive(Debug, Clone)]
struct PsiTable {
    ln_t0: f64,
    step: f64,
    ln_psi: Vec<f64>,
}

const PSI_POINTS_PER_DECADE: f64 = 64.0;
const PSI_MAX_POINTS: usize = 8192;

impl PsiTable {
    /// Covers t from the linear regime up to where 2πλ_u Ψ passes the
    /// underflow cutoff.
    fn build(kernel: &Kernel) -> Result<Self> {
        let cfg = kernel.cfg;
        let env = &cfg.env;
        let psi = |t: f64| kernel.kappa_moment(cfg.h, [t / env.m_l, t / env.m_n]);
        // Below this, t/y^α ≤ 1e-6 everywhere on [h, ∞) and Ψ is linear in t.
        let t0 = 1e-6 * cfg.h.powf(env.alpha_l.min(env.alpha_n));
        let step = std::f64::consts::LN_10 / PSI_POINTS_PER_DECADE;
        let ln_t0 = t0.ln();
        let limit = (EXP_CUTOFF + 55.0) / (2.0 * PI * cfg.lambda_u);
        let mut ln_psi = Vec::new();
        loop {
            let t = (ln_t0 + step * ln_psi.len() as f64).exp();
            let v = psi(t)?;
            if !(v > 0.0) {
                return Err(AnalysisError::Degenerate(format!("interference moment vanished at t = {t}")));
            }
            ln_psi.push(v.ln());
            // Two extra nodes past the cutoff keep the end slopes centred.
            let past = ln_psi.iter().rev().take_while(|&&l| l > limit.ln()).count();
            if past >= 3 || ln_psi.len() >= PSI_MAX_POINTS {
                break;
            }
        }
        Ok(PsiTable { ln_t0, step, ln_psi })
    }

    fn slope(&self, i: usize) -> f64 {
        let n = self.ln_psi.len();
        if n < 2 {
            return 1.0;
        }
        let (a, b) = if i == 0 {
            (0, 1)
        } else if i == n - 1 {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        (self.ln_psi[b] - self.ln_psi[a]) / (self.step * (b - a) as f64)
    }

    fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let n = self.ln_psi.len();
        let x = (t.ln() - self.ln_t0) / self.step;
        if x <= 0.0 {
            return (self.ln_psi[0] + x * self.step).exp();
        }
        if x >= (n - 1) as f64 {
            let last = n - 1;
            return (self.ln_psi[last] + self.slope(last) * (x - last as f64) * self.step).exp();
        }
        let i = (x.floor() as usize).min(n - 2);
        let u = x - i as f64;
        let (p0, p1) = (self.ln_psi[i], self.ln_psi[i + 1]);
        let (m0, m1) = (self.slope(i) * self.step, self.slope(i + 1) * self.step);
        let u2 = u * u;
        let u3 = u2 * u;
        let ln = (2.0 * u3 - 3.0 * u2 + 1.0) * p0
            + (u3 - 2.0 * u2 + u) * m0
            + (-2.0 * u3 + 3.0 * u2) * p1
            + (u3 - u2) * m1;
        ln.exp()
    }
}

/// BS-user rate at a fixed altitude, reusable across power-control factors.
#[derive(Debug, Clone)]
pub struct BueRateModel {
    cfg: NetworkConfig,
    bs_constant: f64,
    delta: f64,
    table: Option<PsiTable>,
}

impl BueRateModel {
    pub fn new(cfg: &NetworkConfig) -> Result<Self> {
        let kernel = Kernel::new(cfg)?;
        // At h = 0 Ψ has no linear regime and is evaluated directly.
        let table = if cfg.lambda_u > 0.0 && cfg.h > 0.0 {
            Some(PsiTable::build(&kernel)?)
        } else {
            None
        };
        Ok(BueRateModel {
            cfg: *cfg,
            bs_constant: kernel.bs_constant,
            delta: kernel.delta,
            table,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    fn k_b(&self, kernel: &Kernel, r: f64, z: f64, eta: f64) -> Result<f64> {
        if z == 0.0 {
            return Ok(0.0);
        }
        let bs = self.cfg.lambda_b * self.bs_constant * z.powf(self.delta) * r * r;
        if bs > EXP_CUTOFF || self.cfg.lambda_u == 0.0 {
            return Ok(bs);
        }
        let t = z * eta * self.cfg.p_u / self.cfg.p_b * r.powf(self.cfg.env.alpha_b);
        let psi = match &self.table {
            Some(table) => table.eval(t),
            None => kernel.kappa_moment(self.cfg.h, [t / self.cfg.env.m_l, t / self.cfg.env.m_n])?,
        };
        Ok(2.0 * PI * self.cfg.lambda_u * psi + bs)
    }

    /// R̂_B at power-control factor `eta`.
    pub fn rate(&self, eta: f64) -> Result<RateEstimate> {
        let cfg = self.cfg.with_eta(eta);
        let kernel = Kernel::new(&cfg)?;
        let outer = QuadratureSpec::OUTER;
        let r_b = cfg.r_b;
        let over_r = |z: f64| -> Result<f64> {
            let r_integral = try_integrate::<_, AnalysisError>(
                |r| Ok((-self.k_b(&kernel, r, z, eta)?).exp() * 2.0 * r / (r_b * r_b)),
                0.0,
                r_b,
                &outer,
            )?;
            Ok(r_integral.value / (1.0 + z))
        };
        let value = try_integrate_semi_infinite(over_r, 0.0, 1.0, &outer)?.value;
        Ok(RateEstimate::analytical(value))
    }
}

/// Approximate average rate of the typical BS user.
pub fn rate_bue(cfg: &NetworkConfig) -> Result<RateEstimate> {
    BueRateModel::new(cfg)?.rate(cfg.eta)
}

/// Area spectral efficiency λ_u R̂_u + λ_b R̂_B in nats/s/Hz/m².
pub fn ase(cfg: &NetworkConfig, gain: f64) -> Result<f64> {
    let bue = rate_bue(cfg)?.value;
    if cfg.lambda_u == 0.0 {
        return Ok(cfg.lambda_b * bue);
    }
    let uue = rate_uue(cfg, gain)?.value;
    Ok(cfg.lambda_u * uue + cfg.lambda_b * bue)
}
