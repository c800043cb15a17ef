//! Command-line front end: `rates`, `ase`, `optimize`, `validate`, `sample`.
//!
//! Every command reads a [`RunConfig`], writes CSV (or a report) to a file or
//! stdout, and maps failures to exit codes: 1 for configuration or usage
//! errors, 2 for numerical failures, 3 for failed validation checks.

pub mod config;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use config::{parse_config, ConfigError, RunConfig, SeedSource, SEED_ENV};

use crate::analysis::{misr_gain, rate_uue, BueRateModel, NetworkConfig};
use crate::exec::Execution;
use crate::geometry::{empirical_intensity, sample_mhp, sample_ppp, Tier};
use crate::optimizer::solve_p0_many;
use crate::simulation::{estimate_rates, write_trials_csv};
use crate::PER_KM2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Validation(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn numerical<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Numerical(e.to_string())
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "uavnet", version, about = "Two-tier UAV/BS downlink rates, simulation and optimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytical and simulated average rates over an (η, h) sweep.
    Rates(RatesArgs),
    /// Area spectral efficiency versus UAV density.
    Ase(AseArgs),
    /// Altitude and power-control optimization for each target BS-user rate.
    Optimize(OptimizeArgs),
    /// Checks the simulator against the model; exit 3 on any failure.
    Validate(CommonArgs),
    /// One realization of both tiers as `x_m,y_m,tier` rows.
    Sample(CommonArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// Configuration file (key = value lines); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run on one thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args, Clone, Default)]
pub struct RatesArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// `eta=a:b:step`, `h=a:b:step`, or a comma list such as `eta=0.2,0.5`.
    #[arg(long)]
    pub sweep: Vec<String>,
    /// Skip the Monte Carlo columns.
    #[arg(long)]
    pub no_sim: bool,
    /// Per-trial CSV; only for a single (η, h) point.
    #[arg(long)]
    pub trials: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct AseArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// UAV densities in km⁻², as `a:b:step` or a comma list.
    #[arg(long)]
    pub lambda_u: Option<String>,
    #[arg(long)]
    pub no_sim: bool,
}

#[derive(Debug, Args, Clone, Default)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated target BS-user rates in nats/s/Hz.
    #[arg(long, value_delimiter = ',')]
    pub r_th: Vec<f64>,
    /// Directory for the per-target trace files; defaults to the directory
    /// of `--out`, and no traces are written when printing to stdout.
    #[arg(long)]
    pub trace_dir: Option<PathBuf>,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, seed_override: Option<String>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli.command, seed_override.as_deref()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("uavnet: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: &Command, seed_override: Option<&str>) -> Result<()> {
    let common = match command {
        Command::Rates(a) => &a.common,
        Command::Ase(a) => &a.common,
        Command::Optimize(a) => &a.common,
        Command::Validate(c) | Command::Sample(c) => c,
    };
    let cfg = load_config(common.config.as_deref(), seed_override)?;
    let exec = if common.sequential { Execution::Sequential } else { Execution::default() };
    let mut out = open_output(common.out.as_deref())?;
    match command {
        Command::Rates(a) => cmd_rates(&cfg, a, exec, &mut out)?,
        Command::Ase(a) => cmd_ase(&cfg, a, exec, &mut out)?,
        Command::Optimize(a) => {
            let traces = a
                .trace_dir
                .clone()
                .or_else(|| common.out.as_ref().map(|p| p.parent().unwrap_or(Path::new(".")).to_path_buf()));
            cmd_optimize(&cfg, a, traces.as_deref(), exec, &mut out)?
        }
        Command::Validate(_) => cmd_validate(&cfg, exec, &mut out)?,
        Command::Sample(_) => cmd_sample(&cfg, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

pub fn load_config(path: Option<&Path>, seed_override: Option<&str>) -> Result<RunConfig> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    Ok(parse_config(&text, seed_override)?)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

/// Values of `a:b:step` (inclusive) or `v1,v2,…`.
pub fn parse_values(spec: &str) -> Result<Vec<f64>> {
    let bad = || CliError::Config(format!("cannot parse value list {spec:?}"));
    let num = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(bad);
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(step > 0.0) || b < a {
                return Err(bad());
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            // Snap to 1e-12 so that 0.1-style steps print cleanly.
            Ok((0..=n).map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12).collect())
        }
        [list] => list.split(',').map(num).collect(),
        _ => Err(bad()),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Rows `eta,h_m,rate_u_analytic,rate_b_analytic[,rate_u_mc,rate_b_mc,mc_halfwidth_u,mc_halfwidth_b],gain_G`.
pub fn cmd_rates(cfg: &RunConfig, args: &RatesArgs, exec: Execution, out: &mut dyn Write) -> Result<()> {
    let mut etas = vec![cfg.network.eta];
    let mut hs = vec![cfg.network.h];
    for sweep in &args.sweep {
        let (key, values) = sweep
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("sweep {sweep:?} must look like eta=a:b:step")))?;
        match key.trim() {
            "eta" => etas = parse_values(values)?,
            "h" | "h_m" => hs = parse_values(values)?,
            other => return Err(CliError::Config(format!("cannot sweep {other:?}; use eta or h"))),
        }
    }
    for &eta in &etas {
        cfg.network.with_eta(eta).validate().map_err(|e| CliError::Config(e.to_string()))?;
    }
    for &h in &hs {
        cfg.network.with_altitude(h).validate().map_err(|e| CliError::Config(e.to_string()))?;
    }
    if args.trials.is_some() && (args.no_sim || etas.len() * hs.len() != 1) {
        return Err(CliError::Config("--trials needs simulation and a single (eta, h) point".into()));
    }

    // Per altitude: G and the analytical (R̂_u, R̂_B) for every η.
    type Row = (f64, Vec<(f64, f64)>);
    let analytic: Vec<Result<Row>> = exec.map_slice(&hs, |&h| {
        let base = cfg.network.with_altitude(h);
        let gain = misr_gain(&base).map_err(numerical)?.gain;
        let model = BueRateModel::new(&base).map_err(numerical)?;
        let rates = etas
            .iter()
            .map(|&eta| {
                let u = rate_uue(&base.with_eta(eta), gain).map_err(numerical)?.value;
                let b = model.rate(eta).map_err(numerical)?.value;
                Ok((u, b))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((gain, rates))
    });

    writeln!(out, "{}", cfg.provenance())?;
    if args.no_sim {
        writeln!(out, "eta,h_m,rate_u_analytic,rate_b_analytic,gain_G")?;
    } else {
        writeln!(
            out,
            "eta,h_m,rate_u_analytic,rate_b_analytic,rate_u_mc,rate_b_mc,mc_halfwidth_u,mc_halfwidth_b,gain_G"
        )?;
    }
    for (&h, row) in hs.iter().zip(analytic) {
        let (gain, rates) = row?;
        for (&eta, &(u, b)) in etas.iter().zip(&rates) {
            if args.no_sim {
                writeln!(out, "{eta},{h},{u:.6},{b:.6},{gain:.6}")?;
                continue;
            }
            let point = cfg.network.with_eta(eta).with_altitude(h);
            let sim = estimate_rates(&point, &cfg.simulation, exec).map_err(numerical)?;
            writeln!(
                out,
                "{eta},{h},{u:.6},{b:.6},{:.6},{:.6},{:.6},{:.6},{gain:.6}",
                sim.uue.value, sim.bue.value, sim.uue.half_width, sim.bue.half_width
            )?;
            if let Some(path) = &args.trials {
                let mut f = BufWriter::new(File::create(path)?);
                writeln!(f, "{}", cfg.provenance())?;
                write_trials_csv(&sim, &mut f)?;
                f.flush()?;
            }
        }
    }
    Ok(())
}

/// Rows `lambda_u_per_km2,ase_analytic[,ase_mc]`, ASE in nats/s/Hz/km².
pub fn cmd_ase(cfg: &RunConfig, args: &AseArgs, exec: Execution, out: &mut dyn Write) -> Result<()> {
    let lambdas: Vec<f64> = match &args.lambda_u {
        Some(spec) => parse_values(spec)?.into_iter().map(|l| l * PER_KM2).collect(),
        None => cfg.ase_lambda_u.clone(),
    };
    let points: Vec<NetworkConfig> = lambdas
        .iter()
        .map(|&l| {
            let c = NetworkConfig { lambda_u: l, ..cfg.network };
            c.validate().map(|_| c).map_err(|e| CliError::Config(e.to_string()))
        })
        .collect::<Result<_>>()?;
    let analytic: Vec<Result<f64>> = exec.map_slice(&points, |c| {
        let gain = if c.lambda_u > 0.0 { misr_gain(c).map_err(numerical)?.gain } else { 1.0 };
        crate::analysis::ase(c, gain).map_err(numerical)
    });

    writeln!(out, "{}", cfg.provenance())?;
    writeln!(out, "lambda_u_per_km2,ase_analytic{}", if args.no_sim { "" } else { ",ase_mc" })?;
    for (c, a) in points.iter().zip(analytic) {
        let a = a? / PER_KM2;
        let l = ((c.lambda_u / PER_KM2) * 1e9).round() / 1e9;
        if args.no_sim {
            writeln!(out, "{l},{a:.6}")?;
            continue;
        }
        let sim = estimate_rates(c, &cfg.simulation, exec).map_err(numerical)?;
        let uue = if c.lambda_u > 0.0 { c.lambda_u * sim.uue.value } else { 0.0 };
        let mc = (uue + c.lambda_b * sim.bue.value) / PER_KM2;
        writeln!(out, "{l},{a:.6},{mc:.6}")?;
    }
    Ok(())
}

/// Rows `r_th,h_star_m,eta_star,rate_u_star,status`; one trace file per
/// target in `trace_dir` when given.
pub fn cmd_optimize(
    cfg: &RunConfig,
    args: &OptimizeArgs,
    trace_dir: Option<&Path>,
    exec: Execution,
    out: &mut dyn Write,
) -> Result<()> {
    let r_ths = if args.r_th.is_empty() { cfg.r_th.clone() } else { args.r_th.clone() };
    let results = solve_p0_many(&cfg.problem, &r_ths, exec).map_err(|e| match e {
        crate::optimizer::OptimizerError::InvalidProblem(m) => CliError::Config(m),
        other => numerical(other),
    })?;
    writeln!(out, "{}", cfg.provenance())?;
    writeln!(out, "r_th,h_star_m,eta_star,rate_u_star,status")?;
    for res in &results {
        let o = res.optimum.as_ref();
        writeln!(
            out,
            "{},{},{},{},{}",
            res.r_th,
            o.map(|o| o.h.to_string()).unwrap_or_default(),
            fmt_opt(o.map(|o| o.eta)),
            fmt_opt(o.map(|o| o.rate_u)),
            res.status().as_str()
        )?;
        if let Some(dir) = trace_dir {
            let mut f = BufWriter::new(File::create(dir.join(format!("trace_rth_{}.csv", res.r_th)))?);
            writeln!(f, "{}", cfg.provenance())?;
            res.write_trace_csv(&mut f)?;
            f.flush()?;
        }
    }
    Ok(())
}

/// Realizations used by the point-process checks.
const VALIDATE_PATTERNS: u64 = 100;

/// Point-process and rate checks; prints one PASS/FAIL line each.
pub fn cmd_validate(cfg: &RunConfig, exec: Execution, out: &mut dyn Write) -> Result<()> {
    let net = &cfg.network;
    let spec = &cfg.simulation;
    let mut failures = Vec::new();
    let mut report = |out: &mut dyn Write, name: &str, ok: bool, detail: String| -> io::Result<()> {
        if !ok {
            failures.push(name.to_string());
        }
        writeln!(out, "{} {name}: {detail}", if ok { "PASS" } else { "FAIL" })
    };

    if net.lambda_u > 0.0 {
        let params = net.mhp().map_err(numerical)?;
        let patterns = exec.map_range(VALIDATE_PATTERNS, |i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i);
            sample_mhp(&params, &spec.window, net.h, &mut rng)
        });
        let min_gap = patterns
            .iter()
            .filter_map(|p| p.min_pairwise_distance())
            .fold(f64::INFINITY, f64::min);
        report(
            out,
            "hardcore",
            min_gap >= net.d,
            format!("min separation {min_gap:.3} m over {VALIDATE_PATTERNS} patterns, d = {} m", net.d),
        )?;
        let intensity = empirical_intensity(&patterns).map_err(numerical)?;
        let rel = (intensity - net.lambda_u) / net.lambda_u;
        report(
            out,
            "density",
            rel.abs() <= 0.01,
            format!(
                "empirical {:.4} /km² vs {:.4} /km² ({:+.2}%, tolerance 1%)",
                intensity / PER_KM2,
                net.lambda_u / PER_KM2,
                100.0 * rel
            ),
        )?;
    }

    let gain = if net.lambda_u > 0.0 { misr_gain(net).map_err(numerical)?.gain } else { 1.0 };
    let sim = estimate_rates(net, spec, exec).map_err(numerical)?;
    let mut rate_check = |out: &mut dyn Write, name: &str, analytic: f64, mc: f64, hw: f64| {
        let rel = (mc - analytic) / analytic;
        report(
            out,
            name,
            rel.abs() <= 0.10,
            format!("analytic {analytic:.4}, simulated {mc:.4} ± {hw:.4} ({:+.2}%, tolerance 10%)", 100.0 * rel),
        )
    };
    if net.lambda_u > 0.0 && net.eta > 0.0 {
        let u = rate_uue(net, gain).map_err(numerical)?.value;
        rate_check(out, "uue_rate", u, sim.uue.value, sim.uue.half_width)?;
    }
    let b = BueRateModel::new(net).and_then(|m| m.rate(net.eta)).map_err(numerical)?.value;
    rate_check(out, "bue_rate", b, sim.bue.value, sim.bue.half_width)?;

    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(failures.join(", ")))
    }
}

/// One realization of the UAV and BS tiers.
pub fn cmd_sample(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let net = &cfg.network;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.simulation.seed);
    let params = net.mhp().map_err(numerical)?;
    let uavs = sample_mhp(&params, &cfg.simulation.window, net.h, &mut rng);
    let bss = sample_ppp(net.lambda_b, &cfg.simulation.window, Tier::Bs, 0.0, &mut rng);
    writeln!(out, "{}", cfg.provenance())?;
    uavs.write_csv(&mut *out)?;
    for p in &bss.points {
        writeln!(out, "{},{},{}", p.x, p.y, bss.tier)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_lists() {
        assert_eq!(parse_values("0.2:1:0.2").unwrap(), vec![0.2, 0.4, 0.6, 0.8, 1.0]);
        assert_eq!(parse_values("50:300:50").unwrap().len(), 6);
        assert_eq!(parse_values("0.1, 0.5").unwrap(), vec![0.1, 0.5]);
        assert!(parse_values("1:0:0.1").is_err());
        assert!(parse_values("0:1:0").is_err());
        assert!(parse_values("x").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 1);
        assert_eq!(CliError::Numerical("x".into()).exit_code(), 2);
        assert_eq!(CliError::Validation("x".into()).exit_code(), 3);
        assert_eq!(run(["uavnet", "no-such-command"], None), 1);
        assert_eq!(run(["uavnet", "--help"], None), 0);
    }

    #[test]
    fn rates_without_simulation() {
        let cfg = RunConfig::default();
        let args = RatesArgs {
            sweep: vec!["eta=0.5,1".into()],
            no_sim: true,
            ..Default::default()
        };
        let mut buf = Vec::new();
        cmd_rates(&cfg, &args, Execution::Sequential, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# seed=1"));
        assert_eq!(lines[1], "eta,h_m,rate_u_analytic,rate_b_analytic,gain_G");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("1,100,1.05"), "{}", lines[3]);
    }

    #[test]
    fn rejects_bad_sweeps() {
        let cfg = RunConfig::default();
        let mut buf = Vec::new();
        for sweep in ["eta=0:2:0.5", "d=1:2:1", "eta"] {
            let args = RatesArgs {
                sweep: vec![sweep.into()],
                no_sim: true,
                ..Default::default()
            };
            let err = cmd_rates(&cfg, &args, Execution::Sequential, &mut buf).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{sweep}: {err}");
        }
    }
}
