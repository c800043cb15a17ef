//! Mean interference-to-signal ratio of the UAV tier under the parent PPP
//! and under the hardcore process, and the resulting gain G.
//!
//! Inner integrals are written in units of the serving distance r so that
//! every quadrature works on O(1) values.

use std::f64::consts::PI;

use super::{nearest_scale, serving_pdf_unchecked, AnalysisError, ExclusionBoundary, LosArgument, NetworkConfig, Result};
use crate::channel::{ChannelError, LinkState};
use crate::geometry::{product_density, MhpParams};
use crate::numerics::{try_integrate, try_integrate_semi_infinite, QuadratureSpec};

/// MISR under both deployments and their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MisrGain {
    pub misr_ppp: f64,
    pub misr_mhp: f64,
    /// misr_ppp / misr_mhp.
    pub gain: f64,
}

impl MisrGain {
    pub fn new(misr_ppp: f64, misr_mhp: f64) -> Result<Self> {
        if !(misr_ppp > 0.0 && misr_mhp > 0.0) {
            return Err(AnalysisError::Degenerate(format!(
                "MISR values must be positive, got PPP {misr_ppp}, MHP {misr_mhp}"
            )));
        }
        Ok(MisrGain {
            misr_ppp,
            misr_mhp,
            gain: misr_ppp / misr_mhp,
        })
    }
}

fn check_serving(r: f64, cfg: &NetworkConfig) -> Result<()> {
    if !(r >= cfg.h * (1.0 - 1e-12)) || !(r > 0.0) {
        return Err(ChannelError::BelowAltitude { r, h: cfg.h }.into());
    }
    Ok(())
}

/// Weights r^{α_s − α_q} for q ∈ {l, n}, given a serving state s.
fn state_weights(r: f64, s: LinkState, cfg: &NetworkConfig) -> [f64; 2] {
    let alpha_s = cfg.env.alpha(s);
    [
        r.powf(alpha_s - cfg.env.alpha_l),
        r.powf(alpha_s - cfg.env.alpha_n),
    ]
}

/// Weights Σ_s P_s(r) r^{α_s − α_q}: the serving state averaged out.
fn averaged_weights(r: f64, cfg: &NetworkConfig) -> [f64; 2] {
    let mut w = [0.0; 2];
    for s in LinkState::ALL {
        let p = cfg.p_state(s, r);
        let ws = state_weights(r, s, cfg);
        w[0] += p * ws[0];
        w[1] += p * ws[1];
    }
    w
}

/// Σ_q weights[q] ∫_1^∞ P_q(rt) t^{1−α_q} dt.
fn ppp_tail(r: f64, weights: [f64; 2], cfg: &NetworkConfig, spec: &QuadratureSpec) -> Result<f64> {
    let env = &cfg.env;
    let integrand = |t: f64| -> Result<f64> {
        let y = r * t;
        let p_los = env.los_probability_unchecked(y, cfg.h);
        Ok(weights[0] * p_los * t.powf(1.0 - env.alpha_l) + weights[1] * (1.0 - p_los) * t.powf(1.0 - env.alpha_n))
    };
    Ok(try_integrate_semi_infinite(integrand, 1.0, 1.0, spec)?.value)
}

/// Conditional MISR of a PPP(λ_p) UAV tier given serving distance r and
/// serving state s: 2πλ_p r^{α_s} Σ_q ∫_r^∞ P_q(y) y^{1−α_q} dy.
pub fn misr_ppp_cond(r: f64, s: LinkState, cfg: &NetworkConfig) -> Result<f64> {
    cfg.validate()?;
    check_serving(r, cfg)?;
    let lambda_p = cfg.lambda_p()?;
    if lambda_p == 0.0 {
        return Ok(0.0);
    }
    let tail = ppp_tail(r, state_weights(r, s, cfg), cfg, &QuadratureSpec::INNER)?;
    Ok(2.0 * PI * lambda_p * r * r * tail)
}

struct HardcoreGeometry<'a> {
    cfg: &'a NetworkConfig,
    mhp: MhpParams,
    r: f64,
    /// Planar serving distance over r.
    x: f64,
    /// Hardcore distance over r.
    d: f64,
    weights: [f64; 2],
}

impl HardcoreGeometry<'_> {
    /// Σ_q weights[q] P_q · w / ρ^{α_q} at normalized separation w and angle φ.
    #[inline]
    fn f(&self, w: f64, cos_phi: f64) -> f64 {
        let env = &self.cfg.env;
        let rho_sq = w * w + 1.0 - 2.0 * self.x * w * cos_phi;
        let p_los = match self.cfg.los_argument {
            LosArgument::InterfererDistance => env.los_probability_unchecked(self.r * rho_sq.sqrt(), self.cfg.h),
            LosArgument::ServingSeparation => env.los_probability_unchecked(self.r * w, self.cfg.h),
        };
        let ln_rho = 0.5 * rho_sq.ln();
        w * (self.weights[0] * p_los * (-env.alpha_l * ln_rho).exp()
            + self.weights[1] * (1.0 - p_los) * (-env.alpha_n * ln_rho).exp())
    }

    /// χ⁽²⁾(r·w)/λ_u².
    #[inline]
    fn chi(&self, w: f64) -> f64 {
        let lu = self.mhp.lambda_u;
        product_density(self.r * w, &self.mhp) / (lu * lu)
    }

    fn lower_limit(&self, cos_phi: f64) -> f64 {
        let c = match self.cfg.boundary {
            ExclusionBoundary::Signed => cos_phi,
            ExclusionBoundary::Absolute => cos_phi.abs(),
        };
        self.d.max(2.0 * self.x * c)
    }

    /// ∫ F·χ/λ_u² dw over the admissible separations at angle φ.
    fn radial(&self, phi: f64, spec: &QuadratureSpec) -> Result<f64> {
        let cos_phi = phi.cos();
        let w1 = self.lower_limit(cos_phi);
        let w2 = w1.max(2.0 * self.d);
        let mut total = 0.0;
        if w2 > w1 {
            total += try_integrate::<_, AnalysisError>(|w| Ok(self.f(w, cos_phi) * self.chi(w)), w1, w2, spec)?.value;
        }
        total += try_integrate_semi_infinite::<_, AnalysisError>(|w| Ok(self.f(w, cos_phi)), w2, 1.0, spec)?.value;
        Ok(total)
    }

    /// ∫_0^{2π} radial(φ) dφ, split where the lower limit has kinks.
    fn angular(&self, spec: &QuadratureSpec) -> Result<f64> {
        let mut cuts = vec![0.0, PI];
        if self.x > 0.0 {
            for level in [self.d / (2.0 * self.x), self.d / self.x] {
                if level < 1.0 {
                    let phi = level.acos();
                    cuts.push(phi);
                    if self.cfg.boundary == ExclusionBoundary::Absolute {
                        cuts.push(PI - phi);
                    }
                }
            }
            if self.cfg.boundary == ExclusionBoundary::Absolute {
                cuts.push(0.5 * PI);
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut total = 0.0;
        for pair in cuts.windows(2) {
            total += try_integrate::<_, AnalysisError>(|phi| self.radial(phi, spec), pair[0], pair[1], spec)?.value;
        }
        // The integrand depends on φ through cos φ only.
        Ok(2.0 * total)
    }
}

fn mhp_weighted(r: f64, weights: [f64; 2], cfg: &NetworkConfig, mhp: MhpParams, spec: &QuadratureSpec) -> Result<f64> {
    if mhp.lambda_u == 0.0 {
        return Ok(0.0);
    }
    let x = ((r * r - cfg.h * cfg.h).max(0.0)).sqrt() / r;
    let geo = HardcoreGeometry {
        cfg,
        mhp,
        r,
        x,
        d: cfg.d / r,
        weights,
    };
    Ok(mhp.lambda_u * r * r * geo.angular(spec)?)
}

/// Conditional MISR of the hardcore UAV tier given serving distance r and
/// serving state s, via the second-order product density.
pub fn misr_mhp_cond(r: f64, s: LinkState, cfg: &NetworkConfig) -> Result<f64> {
    cfg.validate()?;
    check_serving(r, cfg)?;
    mhp_weighted(r, state_weights(r, s, cfg), cfg, cfg.mhp()?, &QuadratureSpec::INNER)
}

/// MISR under the parent PPP, MISR under the hardcore process, and G.
pub fn misr_gain(cfg: &NetworkConfig) -> Result<MisrGain> {
    cfg.validate()?;
    let mhp = cfg.mhp()?;
    if mhp.lambda_u == 0.0 {
        return Err(AnalysisError::Degenerate("no UAVs: the MISR gain is undefined".into()));
    }
    let inner = QuadratureSpec::INNER;
    let outer = QuadratureSpec::OUTER;
    let h = cfg.h;
    // At h = 0 the serving distance can reach 0, where both integrands vanish.
    let lower_ok = |r: f64| r > 0.0;

    let misr_ppp = try_integrate_semi_infinite::<_, AnalysisError>(
        |r| {
            if !lower_ok(r) {
                return Ok(0.0);
            }
            let pdf = serving_pdf_unchecked(r, mhp.lambda_p, h);
            if pdf == 0.0 {
                return Ok(0.0);
            }
            let tail = ppp_tail(r, averaged_weights(r, cfg), cfg, &inner)?;
            Ok(2.0 * PI * mhp.lambda_p * r * r * tail * pdf)
        },
        h,
        nearest_scale(mhp.lambda_p),
        &outer,
    )?
    .value;

    let misr_mhp = try_integrate_semi_infinite::<_, AnalysisError>(
        |r| {
            if !lower_ok(r) {
                return Ok(0.0);
            }
            let pdf = serving_pdf_unchecked(r, mhp.lambda_u, h);
            if pdf == 0.0 {
                return Ok(0.0);
            }
            Ok(mhp_weighted(r, averaged_weights(r, cfg), cfg, mhp, &inner)? * pdf)
        },
        h,
        nearest_scale(mhp.lambda_u),
        &outer,
    )?
    .value;

    MisrGain::new(misr_ppp, misr_mhp)
}
