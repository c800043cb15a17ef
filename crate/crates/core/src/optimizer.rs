//! Altitude and power-control optimization: maximize the UAV-user rate
//! subject to a floor on the BS-user rate, by an altitude grid search with
//! bisection on η at each altitude.

use std::io::{self, Write};

use thiserror::Error;

use crate::analysis::{misr_gain, rate_uue, AnalysisError, BueRateModel, NetworkConfig};
use crate::exec::Execution;
use crate::numerics::{try_binary_search_root, NumericsError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizerError {
    #[error("invalid optimization problem: {0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

impl From<NumericsError> for OptimizerError {
    fn from(e: NumericsError) -> Self {
        OptimizerError::Analysis(e.into())
    }
}

pub type Result<T> = std::result::Result<T, OptimizerError>;

/// Largest accepted slack R̂_B(η*) − R_th when the constraint binds, nats/s/Hz.
pub const RATE_TOL: f64 = 5e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizationProblem {
    /// Network parameters; its `eta` and `h` are ignored.
    pub base_cfg: NetworkConfig,
    /// Target BS-user rate, nats/s/Hz.
    pub r_th: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub h_step: f64,
    pub eta_tol: f64,
}

impl OptimizationProblem {
    pub fn new(base_cfg: NetworkConfig, r_th: f64) -> Self {
        OptimizationProblem {
            base_cfg,
            r_th,
            h_min: 50.0,
            h_max: 300.0,
            h_step: 10.0,
            eta_tol: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(OptimizerError::InvalidProblem(msg));
        if !(self.r_th > 0.0 && self.r_th.is_finite()) {
            return bad(format!("target rate must be positive, got {}", self.r_th));
        }
        if !(self.h_min > 0.0 && self.h_min < self.h_max && self.h_max.is_finite()) {
            return bad(format!("altitude range [{}, {}] is invalid", self.h_min, self.h_max));
        }
        if !(self.h_step > 0.0) {
            return bad(format!("altitude step must be positive, got {}", self.h_step));
        }
        if !(self.eta_tol > 0.0 && self.eta_tol < 1.0) {
            return bad(format!("eta tolerance must lie in (0, 1), got {}", self.eta_tol));
        }
        self.base_cfg.with_altitude(self.h_min).validate()?;
        Ok(())
    }

    /// h_min, h_min + step, … up to h_max inclusive.
    pub fn altitudes(&self) -> Vec<f64> {
        let n = ((self.h_max - self.h_min) / self.h_step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.h_min + k as f64 * self.h_step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
        }
    }
}

/// Outcome of the η search at one altitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaSolution {
    /// Largest η (within tolerance) meeting the target, and R̂_B there.
    Feasible { eta: f64, rate_b: f64 },
    /// Even a silent UAV tier misses the target; `rate_b_max` = R̂_B(0).
    Infeasible { rate_b_max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub h: f64,
    pub eta: Option<f64>,
    pub rate_u: Option<f64>,
    pub rate_b: f64,
}

impl TracePoint {
    pub fn feasible(&self) -> bool {
        self.eta.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub h: f64,
    pub eta: f64,
    pub rate_u: f64,
    pub rate_b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub r_th: f64,
    pub optimum: Option<Optimum>,
    pub trace: Vec<TracePoint>,
}

impl OptimizationResult {
    pub fn status(&self) -> Status {
        if self.optimum.is_some() {
            Status::Optimal
        } else {
            Status::Infeasible
        }
    }

    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "h_m,eta_star,rate_u_nats,rate_b_nats,feasible")?;
        for p in &self.trace {
            let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{:.6},{}",
                p.h,
                opt(p.eta),
                opt(p.rate_u),
                p.rate_b,
                p.feasible()
            )?;
        }
        Ok(())
    }
}

/// η search on a prepared BS-user rate model. R̂_B is decreasing in η, so the
/// bracket's lower end is always feasible and is what gets returned.
pub fn feasible_eta_with(model: &BueRateModel, r_th: f64, tol: f64) -> Result<EtaSolution> {
    let at_full = model.rate(1.0)?.value;
    if at_full >= r_th {
        return Ok(EtaSolution::Feasible { eta: 1.0, rate_b: at_full });
    }
    let at_zero = model.rate(0.0)?.value;
    if at_zero < r_th {
        return Ok(EtaSolution::Infeasible { rate_b_max: at_zero });
    }
    let gap = |eta: f64| -> Result<f64> { Ok(model.rate(eta)?.value - r_th) };
    let mut bracket = try_binary_search_root(gap, 0.0, 1.0, tol)?;
    // Where R̂_B is steep in η, an η-width of `tol` can still leave a visible
    // rate gap; keep shrinking the bracket until the gap is small too.
    let mut width = tol;
    while bracket.g_lo > RATE_TOL && width > 1e-12 {
        width /= 8.0;
        bracket = try_binary_search_root(gap, bracket.lo, bracket.hi, width)?;
    }
    Ok(EtaSolution::Feasible {
        eta: bracket.lo,
        rate_b: bracket.g_lo + r_th,
    })
}

/// The η meeting R̂_B(η, h) = R_th at altitude `h`.
pub fn feasible_eta(h: f64, r_th: f64, cfg: &NetworkConfig, tol: f64) -> Result<EtaSolution> {
    let model = BueRateModel::new(&cfg.with_altitude(h))?;
    feasible_eta_with(&model, r_th, tol)
}

pub fn solve_p0(problem: &OptimizationProblem) -> Result<OptimizationResult> {
    let mut out = solve_p0_many(problem, &[problem.r_th], Execution::default())?;
    Ok(out.remove(0))
}

/// Solves one problem per target rate on the grid of `problem`, sharing the
/// per-altitude MISR gain and BS-user rate tables across targets.
pub fn solve_p0_many(problem: &OptimizationProblem, r_ths: &[f64], exec: Execution) -> Result<Vec<OptimizationResult>> {
    for &r_th in r_ths {
        OptimizationProblem { r_th, ..*problem }.validate()?;
    }
    let altitudes = problem.altitudes();
    let per_altitude: Vec<Result<Vec<TracePoint>>> = exec.map_slice(&altitudes, |&h| {
        let cfg = problem.base_cfg.with_altitude(h);
        let gain = misr_gain(&cfg)?.gain;
        let model = BueRateModel::new(&cfg)?;
        r_ths
            .iter()
            .map(|&r_th| {
                Ok(match feasible_eta_with(&model, r_th, problem.eta_tol)? {
                    EtaSolution::Feasible { eta, rate_b } => TracePoint {
                        h,
                        eta: Some(eta),
                        rate_u: Some(rate_uue(&cfg.with_eta(eta), gain)?.value),
                        rate_b,
                    },
                    EtaSolution::Infeasible { rate_b_max } => TracePoint {
                        h,
                        eta: None,
                        rate_u: None,
                        rate_b: rate_b_max,
                    },
                })
            })
            .collect()
    });
    let per_altitude: Vec<Vec<TracePoint>> = per_altitude.into_iter().collect::<Result<_>>()?;

    Ok(r_ths
        .iter()
        .enumerate()
        .map(|(k, &r_th)| {
            let trace: Vec<TracePoint> = per_altitude.iter().map(|row| row[k]).collect();
            OptimizationResult {
                r_th,
                optimum: argmax(&trace),
                trace,
            }
        })
        .collect())
}

/// Highest R̂_u over feasible points; ties go to the lowest altitude.
fn argmax(trace: &[TracePoint]) -> Option<Optimum> {
    let mut best: Option<Optimum> = None;
    for p in trace {
        let (Some(eta), Some(rate_u)) = (p.eta, p.rate_u) else {
            continue;
        };
        let better = match best {
            None => true,
            Some(b) => rate_u > b.rate_u || (rate_u == b.rate_u && p.h < b.h),
        };
        if better {
            best = Some(Optimum {
                h: p.h,
                eta,
                rate_u,
                rate_b: p.rate_b,
            });
        }
    }
    best
}
