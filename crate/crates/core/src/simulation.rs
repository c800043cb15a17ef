//! Monte Carlo simulation of the typical UAV user and typical BS user.
//!
//! Every trial draws its own network realization from a random stream keyed
//! by (seed, purpose, trial index), so a trial's outcome does not depend on
//! which thread ran it or in what order.

use std::fmt;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analysis::{AnalysisError, MisrGain, NetworkConfig, RateEstimate};
use crate::channel::{ChannelError, GammaFading, LinkState};
use crate::exec::Execution;
use crate::geometry::{sample_mhp, sample_ppp, GeometryError, MhpParams, Point, Tier, Window};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),
    #[error("UAV transmit power is zero: UAV users have no signal")]
    UavTierSilenced,
    #[error("no UAV in the window after {0} attempts")]
    NoUav(u32),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

pub type Result<T> = std::result::Result<T, SimulationError>;

/// Fading draws used by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadingMode {
    Random,
    /// Every power gain fixed at its mean, 1.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSpec {
    pub n_trials: u64,
    pub seed: u64,
    pub window: Window,
    /// Nodes farther than this (planar distance) from the origin are ignored.
    pub interference_radius: f64,
    pub fading: FadingMode,
}

const MAX_RESAMPLES: u32 = 1000;

impl SimulationSpec {
    /// 5 km window with a 500 m guard, interference out to the window edge.
    pub fn new(n_trials: u64, seed: u64) -> Self {
        let window = Window {
            radius: 5000.0,
            guard: 500.0,
        };
        SimulationSpec {
            n_trials,
            seed,
            window,
            interference_radius: window.radius,
            fading: FadingMode::Random,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimulationError::InvalidSpec(msg));
        if self.n_trials < 1 {
            return bad("at least one trial is required".into());
        }
        self.window.validate()?;
        if !(self.interference_radius > 0.0 && self.interference_radius <= self.window.outer_radius()) {
            return bad(format!(
                "interference radius {} must lie in (0, {}]",
                self.interference_radius,
                self.window.outer_radius()
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServingState {
    Los,
    Nlos,
    /// Ground-to-ground link of a BS user.
    G2g,
}

impl ServingState {
    pub fn as_str(&self) -> &'static str {
        match self {
            ServingState::Los => "los",
            ServingState::Nlos => "nlos",
            ServingState::G2g => "g2g",
        }
    }
}

impl From<LinkState> for ServingState {
    fn from(s: LinkState) -> Self {
        match s {
            LinkState::Los => ServingState::Los,
            LinkState::Nlos => ServingState::Nlos,
        }
    }
}

impl fmt::Display for ServingState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialResult {
    pub sir: f64,
    /// ln(1 + sir), nats.
    pub rate_sample: f64,
    pub serving_state: ServingState,
    pub serving_distance: f64,
    /// No interferer at all, so the SIR is infinite; such trials are left
    /// out of the rate averages.
    pub no_interference: bool,
    /// UAV patterns discarded for being empty before this one was accepted.
    pub rejections: u32,
}

impl TrialResult {
    fn new(signal: f64, interference: f64, state: ServingState, distance: f64, rejections: u32) -> Self {
        let no_interference = interference == 0.0;
        let sir = if no_interference { f64::INFINITY } else { signal / interference };
        TrialResult {
            sir,
            rate_sample: sir.ln_1p(),
            serving_state: state,
            serving_distance: distance,
            no_interference,
            rejections,
        }
    }
}

/// Stream purposes, so UUE, BUE and MISR trials with the same index differ.
#[derive(Clone, Copy)]
enum Purpose {
    Uue = 1,
    Bue = 2,
    MisrHardcore = 3,
    MisrPoisson = 4,
}

fn trial_rng(seed: u64, purpose: Purpose, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (purpose as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(trial);
    rng
}

struct Fading {
    los: GammaFading,
    nlos: GammaFading,
    mode: FadingMode,
}

impl Fading {
    fn new(cfg: &NetworkConfig, mode: FadingMode) -> Result<Self> {
        Ok(Fading {
            los: GammaFading::new(cfg.env.m_l)?,
            nlos: GammaFading::new(cfg.env.m_n)?,
            mode,
        })
    }

    fn a2g<R: Rng>(&self, state: LinkState, rng: &mut R) -> f64 {
        match (self.mode, state) {
            (FadingMode::Unit, _) => 1.0,
            (FadingMode::Random, LinkState::Los) => self.los.sample(rng),
            (FadingMode::Random, LinkState::Nlos) => self.nlos.sample(rng),
        }
    }

    /// Rayleigh power gain of a ground-to-ground link.
    fn g2g<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.mode {
            FadingMode::Unit => 1.0,
            FadingMode::Random => -(1.0 - rng.random::<f64>()).ln(),
        }
    }
}

fn draw_state<R: Rng>(cfg: &NetworkConfig, distance: f64, rng: &mut R) -> LinkState {
    if rng.random::<f64>() < cfg.env.los_probability_unchecked(distance, cfg.h) {
        LinkState::Los
    } else {
        LinkState::Nlos
    }
}

/// Σ g·y^{−α_q} over UAVs with independent LoS draws, skipping `skip`.
fn uav_interference<R: Rng>(
    cfg: &NetworkConfig,
    uavs: &[Point],
    skip: Option<usize>,
    radius: f64,
    fading: &Fading,
    rng: &mut R,
) -> f64 {
    let h2 = cfg.h * cfg.h;
    let r2 = radius * radius;
    let mut sum = 0.0;
    for (i, p) in uavs.iter().enumerate() {
        let planar2 = p.norm_sq();
        if Some(i) == skip || planar2 > r2 {
            continue;
        }
        let y = (planar2 + h2).sqrt();
        let state = draw_state(cfg, y, rng);
        sum += fading.a2g(state, rng) * y.powf(-cfg.env.alpha(state));
    }
    sum
}

/// Σ g·|x|^{−α_b} over ground BSs.
fn bs_interference<R: Rng>(cfg: &NetworkConfig, bss: &[Point], radius: f64, fading: &Fading, rng: &mut R) -> f64 {
    let r2 = radius * radius;
    let mut sum = 0.0;
    for p in bss {
        let d2 = p.norm_sq();
        if d2 > r2 {
            continue;
        }
        sum += fading.g2g(rng) * d2.powf(-0.5 * cfg.env.alpha_b);
    }
    sum
}

fn nearest(points: &[Point]) -> Option<usize> {
    points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.norm_sq().total_cmp(&b.1.norm_sq()))
        .map(|(i, _)| i)
}

/// One realization seen by a UAV user at the origin, served by the nearest
/// UAV of a hardcore UAV tier, with BS interference scaled by P_b/(ηP_u).
pub fn simulate_uue_trial(cfg: &NetworkConfig, spec: &SimulationSpec, trial_index: u64) -> Result<TrialResult> {
    let (params, fading) = prepare(cfg, spec)?;
    if cfg.eta == 0.0 {
        return Err(SimulationError::UavTierSilenced);
    }
    let mut rng = trial_rng(spec.seed, Purpose::Uue, trial_index);
    let mut rejections = 0;
    let uavs = loop {
        let pattern = sample_mhp(&params, &spec.window, cfg.h, &mut rng);
        if !pattern.is_empty() {
            break pattern.points;
        }
        rejections += 1;
        if rejections >= MAX_RESAMPLES {
            return Err(SimulationError::NoUav(rejections));
        }
    };
    let bss = sample_ppp(cfg.lambda_b, &spec.window, Tier::Bs, 0.0, &mut rng).points;

    let serving = nearest(&uavs).expect("non-empty pattern");
    let r = (uavs[serving].norm_sq() + cfg.h * cfg.h).sqrt();
    let state = draw_state(cfg, r, &mut rng);
    let signal = fading.a2g(state, &mut rng) * r.powf(-cfg.env.alpha(state));

    let i_uav = uav_interference(cfg, &uavs, Some(serving), spec.interference_radius, &fading, &mut rng);
    let i_bs = bs_interference(cfg, &bss, spec.interference_radius, &fading, &mut rng);
    let interference = i_uav + i_bs / cfg.uav_to_bs_power();
    Ok(TrialResult::new(signal, interference, state.into(), r, rejections))
}

/// One realization seen by a BS user at the origin whose BS sits at distance
/// R_b√U; other BSs form a PPP and UAV interference is scaled by ηP_u/P_b.
pub fn simulate_bue_trial(cfg: &NetworkConfig, spec: &SimulationSpec, trial_index: u64) -> Result<TrialResult> {
    let (params, fading) = prepare(cfg, spec)?;
    let mut rng = trial_rng(spec.seed, Purpose::Bue, trial_index);
    let r = cfg.r_b * rng.random::<f64>().sqrt();
    let uavs = if cfg.lambda_u > 0.0 {
        sample_mhp(&params, &spec.window, cfg.h, &mut rng).points
    } else {
        Vec::new()
    };
    let bss = sample_ppp(cfg.lambda_b, &spec.window, Tier::Bs, 0.0, &mut rng).points;

    let signal = fading.g2g(&mut rng) * r.powf(-cfg.env.alpha_b);
    let i_bs = bs_interference(cfg, &bss, spec.interference_radius, &fading, &mut rng);
    let ratio = cfg.uav_to_bs_power();
    let i_uav = if ratio > 0.0 {
        ratio * uav_interference(cfg, &uavs, None, spec.interference_radius, &fading, &mut rng)
    } else {
        0.0
    };
    Ok(TrialResult::new(signal, i_bs + i_uav, ServingState::G2g, r, 0))
}

fn prepare(cfg: &NetworkConfig, spec: &SimulationSpec) -> Result<(MhpParams, Fading)> {
    cfg.validate()?;
    spec.validate()?;
    Ok((cfg.mhp()?, Fading::new(cfg, spec.fading)?))
}

/// Sample mean of the per-trial rates with a normal 95% half-width, summed
/// in trial order. Trials without interference are skipped.
pub fn summarize(trials: &[TrialResult]) -> RateEstimate {
    let mut n = 0u64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for t in trials.iter().filter(|t| !t.no_interference) {
        n += 1;
        sum += t.rate_sample;
        sum_sq += t.rate_sample * t.rate_sample;
    }
    if n == 0 {
        return RateEstimate::monte_carlo(f64::NAN, f64::NAN);
    }
    let mean = sum / n as f64;
    let half_width = if n > 1 {
        let var = ((sum_sq - n as f64 * mean * mean) / (n as f64 - 1.0)).max(0.0);
        1.96 * (var / n as f64).sqrt()
    } else {
        f64::INFINITY
    };
    RateEstimate::monte_carlo(mean, half_width)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedRates {
    pub uue: RateEstimate,
    pub bue: RateEstimate,
    /// Empty UAV patterns redrawn over all UUE trials.
    pub rejections: u64,
    /// Trials with no interferer, left out of the averages.
    pub excluded: u64,
    pub uue_trials: Vec<TrialResult>,
    pub bue_trials: Vec<TrialResult>,
}

/// Simulated average rates of both user types.
pub fn estimate_rates(cfg: &NetworkConfig, spec: &SimulationSpec, exec: Execution) -> Result<SimulatedRates> {
    cfg.validate()?;
    spec.validate()?;
    let collect = |f: &(dyn Fn(u64) -> Result<TrialResult> + Sync)| -> Result<Vec<TrialResult>> {
        exec.map_range(spec.n_trials, f).into_iter().collect()
    };
    let uue_active = cfg.eta > 0.0 && cfg.lambda_u > 0.0;
    let uue_trials = if uue_active {
        collect(&|i| simulate_uue_trial(cfg, spec, i))?
    } else {
        Vec::new()
    };
    let bue_trials = collect(&|i| simulate_bue_trial(cfg, spec, i))?;
    // Without UAVs there are no UAV users; report the tier as silent.
    let uue = if uue_active { summarize(&uue_trials) } else { RateEstimate::silenced() };
    let bue = summarize(&bue_trials);
    let rejections = uue_trials.iter().map(|t| t.rejections as u64).sum();
    let excluded = uue_trials.iter().chain(&bue_trials).filter(|t| t.no_interference).count() as u64;
    Ok(SimulatedRates {
        uue,
        bue,
        rejections,
        excluded,
        uue_trials,
        bue_trials,
    })
}

/// CSV with columns `trial,tier,sir,rate_nats,serving_state,serving_distance_m`.
pub fn write_trials_csv<W: Write>(rates: &SimulatedRates, mut out: W) -> io::Result<()> {
    writeln!(out, "trial,tier,sir,rate_nats,serving_state,serving_distance_m")?;
    for (tier, trials) in [("uue", &rates.uue_trials), ("bue", &rates.bue_trials)] {
        for (i, t) in trials.iter().enumerate() {
            writeln!(
                out,
                "{i},{tier},{:e},{:.9},{},{:.6}",
                t.sir, t.rate_sample, t.serving_state, t.serving_distance
            )?;
        }
    }
    Ok(())
}

/// Interference-to-signal ratio of one realization, averaged over fading and
/// over the LoS states of every link given the geometry.
fn mean_isr(cfg: &NetworkConfig, points: &[Point], radius: f64) -> Option<f64> {
    let serving = nearest(points)?;
    let h2 = cfg.h * cfg.h;
    let r = (points[serving].norm_sq() + h2).sqrt();
    let env = &cfg.env;
    let r2 = radius * radius;
    let mut interference = 0.0;
    for (i, p) in points.iter().enumerate() {
        let planar2 = p.norm_sq();
        if i == serving || planar2 > r2 {
            continue;
        }
        let y = (planar2 + h2).sqrt();
        let p_los = env.los_probability_unchecked(y, cfg.h);
        interference += p_los * y.powf(-env.alpha_l) + (1.0 - p_los) * y.powf(-env.alpha_n);
    }
    let p_los = env.los_probability_unchecked(r, cfg.h);
    Some(interference * (p_los * r.powf(env.alpha_l) + (1.0 - p_los) * r.powf(env.alpha_n)))
}

/// Simulated MISR of the hardcore UAV tier and of a PPP with the parent
/// density λ_p, and their ratio.
pub fn estimate_misr(cfg: &NetworkConfig, spec: &SimulationSpec, exec: Execution) -> Result<MisrGain> {
    cfg.validate()?;
    spec.validate()?;
    let params = cfg.mhp()?;
    if params.lambda_p == 0.0 {
        return Err(AnalysisError::Degenerate("no UAVs: the MISR is undefined".into()).into());
    }
    let run = |purpose: Purpose, hardcore: bool| -> Result<f64> {
        let values: Vec<Result<f64>> = exec.map_range(spec.n_trials, |i| {
            let mut rng = trial_rng(spec.seed, purpose, i);
            for _ in 0..MAX_RESAMPLES {
                let pattern = if hardcore {
                    sample_mhp(&params, &spec.window, cfg.h, &mut rng)
                } else {
                    sample_ppp(params.lambda_p, &spec.window, Tier::Uav, cfg.h, &mut rng)
                };
                if let Some(v) = mean_isr(cfg, &pattern.points, spec.interference_radius) {
                    return Ok(v);
                }
            }
            Err(SimulationError::NoUav(MAX_RESAMPLES))
        });
        let mut sum = 0.0;
        for v in values {
            sum += v?;
        }
        Ok(sum / spec.n_trials as f64)
    };
    let misr_mhp = run(Purpose::MisrHardcore, true)?;
    let misr_ppp = run(Purpose::MisrPoisson, false)?;
    Ok(MisrGain::new(misr_ppp, misr_mhp)?)
}
