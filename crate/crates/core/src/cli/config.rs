//! Flat `key = value` run configuration with `#` comments and unit-suffixed
//! keys. Every key is optional; missing keys take the reference values.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{ExclusionBoundary, LosArgument, NetworkConfig};
use crate::channel::LosModel;
use crate::geometry::Window;
use crate::optimizer::OptimizationProblem;
use crate::simulation::SimulationSpec;
use crate::{dbm_to_watts, PER_KM2};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "UAVNET_SEED";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

const DEFAULTS: &[(&str, &str)] = &[
    ("lambda_u_per_km2", "10"),
    ("lambda_b_per_km2", "10"),
    ("d_m", "100"),
    ("h_m", "100"),
    ("p_u_dbm", "37"),
    ("p_b_dbm", "37"),
    ("eta", "1"),
    ("r_b_m", "100"),
    ("b_env", "0.136"),
    ("c_env", "11.95"),
    ("p_los_fixed", ""),
    ("alpha_l", "3"),
    ("alpha_n", "4"),
    ("alpha_b", "4"),
    ("m_l", "3"),
    ("m_n", "1"),
    ("misr_los_reading", "physical"),
    ("misr_boundary", "signed"),
    ("n_trials", "10000"),
    ("seed", "1"),
    ("window_radius_m", "5000"),
    ("guard_m", "500"),
    ("interference_radius_m", ""),
    ("h_min_m", "50"),
    ("h_max_m", "300"),
    ("h_step_m", "10"),
    ("eta_tol", "0.001"),
    ("r_th", "0.6,0.7,0.8,0.9,1.0,1.1"),
    ("ase_lambda_u_per_km2", "0,2,4,6,8,10,12,14,16,18,20"),
];

/// Where the seed in effect came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedSource {
    Config,
    Environment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub network: NetworkConfig,
    pub simulation: SimulationSpec,
    pub problem: OptimizationProblem,
    pub r_th: Vec<f64>,
    /// UAV densities for the ASE sweep, m⁻².
    pub ase_lambda_u: Vec<f64>,
    pub seed_source: SeedSource,
    /// Resolved `key=value` pairs, one per line in key order; hashed into
    /// every output header.
    pub canonical: String,
}

impl RunConfig {
    pub fn hash_hex(&self) -> String {
        let digest = Sha256::digest(self.canonical.as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// `# seed=…, config_sha256=…, version=…` comment line for CSV outputs.
    pub fn provenance(&self) -> String {
        let source = match self.seed_source {
            SeedSource::Config => "config",
            SeedSource::Environment => SEED_ENV,
        };
        format!(
            "# seed={} (from {source}), config_sha256={}, version={}",
            self.simulation.seed,
            self.hash_hex(),
            env!("CARGO_PKG_VERSION")
        )
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config("", None).expect("built-in defaults are valid")
    }
}

/// Parses configuration text; `seed_override` (normally the value of
/// [`SEED_ENV`]) replaces the `seed` key.
pub fn parse_config(text: &str, seed_override: Option<&str>) -> Result<RunConfig, ConfigError> {
    let mut values: BTreeMap<&str, (String, usize)> = DEFAULTS.iter().map(|&(k, v)| (k, (v.to_string(), 0))).collect();
    let mut seen = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| ConfigError::Line { line: line_no, message };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
        let key = key.trim();
        let Some(slot) = values.get_mut(key) else {
            return Err(err(format!("unknown key {key:?}")));
        };
        if let Some(prev) = seen.insert(key.to_string(), line_no) {
            return Err(err(format!("duplicate key {key:?} (first set on line {prev})")));
        }
        *slot = (value.trim().to_string(), line_no);
    }
    let mut seed_source = SeedSource::Config;
    if let Some(seed) = seed_override {
        values.insert("seed", (seed.trim().to_string(), 0));
        seed_source = SeedSource::Environment;
    }

    let at = |key: &str| -> (&str, usize) {
        let (v, l) = &values[key];
        (v.as_str(), *l)
    };
    let fail = |key: &str, message: String| {
        let (_, line) = at(key);
        if line == 0 {
            ConfigError::Invalid(format!("{key}: {message}"))
        } else {
            ConfigError::Line { line, message: format!("{key}: {message}") }
        }
    };
    let num = |key: &str| -> Result<f64, ConfigError> {
        let (v, _) = at(key);
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| fail(key, format!("expected a finite number, got {v:?}")))
    };
    let opt_num = |key: &str| -> Result<Option<f64>, ConfigError> {
        if at(key).0.is_empty() {
            Ok(None)
        } else {
            num(key).map(Some)
        }
    };
    let list = |key: &str| -> Result<Vec<f64>, ConfigError> {
        at(key)
            .0
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| fail(key, format!("expected comma-separated numbers, got {s:?}")))
            })
            .collect()
    };
    let count = |key: &str| -> Result<u64, ConfigError> {
        let (v, _) = at(key);
        v.parse::<u64>()
            .map_err(|_| fail(key, format!("expected a non-negative integer, got {v:?}")))
    };

    let los = match opt_num("p_los_fixed")? {
        Some(p) => LosModel::Fixed(p),
        None => LosModel::Elevation {
            b: num("b_env")?,
            c: num("c_env")?,
        },
    };
    let los_argument = match at("misr_los_reading").0 {
        "physical" => LosArgument::InterfererDistance,
        "literal" => LosArgument::ServingSeparation,
        other => return Err(fail("misr_los_reading", format!("expected physical or literal, got {other:?}"))),
    };
    let boundary = match at("misr_boundary").0 {
        "signed" => ExclusionBoundary::Signed,
        "absolute" => ExclusionBoundary::Absolute,
        other => return Err(fail("misr_boundary", format!("expected signed or absolute, got {other:?}"))),
    };
    let mut network = NetworkConfig {
        lambda_u: num("lambda_u_per_km2")? * PER_KM2,
        lambda_b: num("lambda_b_per_km2")? * PER_KM2,
        d: num("d_m")?,
        h: num("h_m")?,
        p_u: dbm_to_watts(num("p_u_dbm")?),
        p_b: dbm_to_watts(num("p_b_dbm")?),
        eta: num("eta")?,
        r_b: num("r_b_m")?,
        los_argument,
        boundary,
        ..NetworkConfig::reference()
    };
    network.env.los = los;
    network.env.alpha_l = num("alpha_l")?;
    network.env.alpha_n = num("alpha_n")?;
    network.env.alpha_b = num("alpha_b")?;
    network.env.m_l = num("m_l")?;
    network.env.m_n = num("m_n")?;
    network.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;

    let window = Window::new(num("window_radius_m")?, num("guard_m")?).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let simulation = SimulationSpec {
        n_trials: count("n_trials")?,
        seed: count("seed")?,
        window,
        interference_radius: opt_num("interference_radius_m")?.unwrap_or(window.radius),
        ..SimulationSpec::new(1, 0)
    };
    simulation.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;

    let r_th = list("r_th")?;
    let problem = OptimizationProblem {
        base_cfg: network,
        r_th: r_th[0],
        h_min: num("h_min_m")?,
        h_max: num("h_max_m")?,
        h_step: num("h_step_m")?,
        eta_tol: num("eta_tol")?,
    };
    for &t in &r_th {
        OptimizationProblem { r_th: t, ..problem }
            .validate()
            .map_err(|e| fail("r_th", e.to_string()))?;
    }
    let ase_lambda_u: Vec<f64> = list("ase_lambda_u_per_km2")?.into_iter().map(|l| l * PER_KM2).collect();
    for &l in &ase_lambda_u {
        NetworkConfig { lambda_u: l, ..network }
            .validate()
            .map_err(|e| fail("ase_lambda_u_per_km2", e.to_string()))?;
    }

    let canonical = values.iter().fold(String::new(), |mut s, (k, (v, _))| {
        let _ = writeln!(s, "{k}={v}");
        s
    });
    Ok(RunConfig {
        network,
        simulation,
        problem,
        r_th,
        ase_lambda_u,
        seed_source,
        canonical,
    })
}
