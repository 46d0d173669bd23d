//! Command-line flags, the optional TOML config file and their merge.
//!
//! Precedence, highest first: command-line flag, `MTC_SEED` (seed only),
//! config file, built-in default.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use mtc_core::simulation::Scenario;
use mtc_core::special_math::QuadratureSettings;
use mtc_core::{Method, Sides};

use crate::error::{io_error, usage, CliError};

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_SEED: u64 = 1;
pub const SEED_ENV: &str = "MTC_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Global test on a file of z-scores (needs --input).
    Test,
    /// Critical value c_alpha for given n and rho (needs --n and --rho).
    CriticalValue,
    /// Null rejection rates over the n x rho x alpha grid.
    SimulateSize,
    /// Power curves for the sparse-single or density-sweep scenario.
    SimulatePower,
    /// Single-draw selection runs with half of the means shifted.
    SimulateSelection,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Test => "test",
            Command::CriticalValue => "critical-value",
            Command::SimulateSize => "simulate-size",
            Command::SimulatePower => "simulate-power",
            Command::SimulateSelection => "simulate-selection",
        }
    }
}

/// Max-statistic multiple testing for exchangeable normal test statistics.
#[derive(Debug, Parser)]
#[command(name = "mtc", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML file with defaults for any of the flags below (kebab-case keys).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// File of z-scores: one per line, optional header "z".
    #[arg(long, global = true, value_name = "FILE")]
    pub input: Option<PathBuf>,

    /// Family-wise level in (0, 1). Default 0.05 for test and
    /// critical-value; restricts the alpha grid of simulations when given.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,

    /// Alternative: one or two [default: two].
    #[arg(long, global = true)]
    pub sides: Option<String>,

    /// gnp-mom, bonferroni, hmp, hmp-adj or fisher [default: gnp-mom].
    /// Restricts the methods of simulate-size and simulate-power when given.
    #[arg(long, global = true)]
    pub method: Option<String>,

    /// Known correlation in [0, 1) used instead of the estimate (gnp-mom only).
    #[arg(long, global = true)]
    pub rho_override: Option<f64>,

    /// Number of statistics (critical-value; n grid or n of simulations).
    #[arg(long, global = true)]
    pub n: Option<usize>,

    /// Correlation in [0, 1) (critical-value; rho grid of simulations).
    #[arg(long, global = true)]
    pub rho: Option<f64>,

    /// sparse-single or density-sweep for simulate-power [default: sparse-single].
    #[arg(long, global = true)]
    pub scenario: Option<String>,

    /// Master seed for simulations [default: 1, or $MTC_SEED].
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Use 10000 replicates per cell instead of 2000.
    #[arg(long, global = true)]
    pub full: bool,

    /// Write the primary output here instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    pub output: Option<PathBuf>,

    /// csv or json [default: json; csv for simulate-size and simulate-power].
    /// critical-value prints a JSON record after the value only when json is
    /// requested explicitly.
    #[arg(long, global = true)]
    pub output_format: Option<OutputFormat>,

    /// Gauss-Hermite nodes for test and critical-value, 2..=256 [default: 128].
    #[arg(long, global = true)]
    pub quad_nodes: Option<usize>,

    /// Absolute quadrature tolerance for test and critical-value [default: 1e-10].
    #[arg(long, global = true)]
    pub quad_tol: Option<f64>,

    /// Replicates per cell (or selection runs); overrides --full.
    #[arg(long, global = true)]
    pub replicates: Option<usize>,

    /// Worker threads for simulations [default: all cores].
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

/// Keys accepted in the config file; names match the long flags.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub alpha: Option<f64>,
    pub sides: Option<Sides>,
    pub method: Option<Method>,
    pub rho_override: Option<f64>,
    pub n: Option<usize>,
    pub rho: Option<f64>,
    pub scenario: Option<Scenario>,
    pub seed: Option<u64>,
    pub full: Option<bool>,
    pub output: Option<PathBuf>,
    pub output_format: Option<OutputFormat>,
    pub quad_nodes: Option<usize>,
    pub quad_tol: Option<f64>,
    pub replicates: Option<usize>,
    pub workers: Option<usize>,
}

pub fn parse_config_file(text: &str) -> Result<FileConfig, CliError> {
    toml::from_str(text).map_err(|e| usage(format!("config file: {}", e.message())))
}

fn read_config_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error("read config", path, e))?;
    parse_config_file(&text)
}

/// A fully resolved invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub input_path: Option<PathBuf>,
    /// `None` when neither flag nor file set it.
    pub alpha: Option<f64>,
    pub sides: Sides,
    pub method: Option<Method>,
    pub rho_override: Option<f64>,
    pub n: Option<usize>,
    pub rho: Option<f64>,
    pub scenario: Option<Scenario>,
    /// `None` when neither flag nor file set it; see [`RunConfig::format`].
    pub output_format: Option<OutputFormat>,
    pub output_path: Option<PathBuf>,
    pub seed: u64,
    pub full_scale: bool,
    pub quadrature: QuadratureSettings,
    pub replicates: Option<usize>,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn alpha_or_default(&self) -> f64 {
        self.alpha.unwrap_or(DEFAULT_ALPHA)
    }

    pub fn method_or_default(&self) -> Method {
        self.method.unwrap_or(Method::GnpMom)
    }

    /// CSV for the tabular simulation results, JSON otherwise.
    pub fn format(&self) -> OutputFormat {
        self.output_format.unwrap_or(match self.command {
            Command::SimulateSize | Command::SimulatePower => OutputFormat::Csv,
            _ => OutputFormat::Json,
        })
    }
}

fn parse_flag<T>(flag: &str, value: Option<String>) -> Result<Option<T>, CliError>
where
    T: std::str::FromStr<Err = mtc_core::Error>,
{
    value
        .map(|v| v.parse::<T>().map_err(|e| usage(format!("--{flag}: {e}"))))
        .transpose()
}

fn check_unit(flag: &str, v: Option<f64>, closed_low: bool) -> Result<(), CliError> {
    if let Some(v) = v {
        let ok = if closed_low { (0.0..1.0).contains(&v) } else { v > 0.0 && v < 1.0 };
        if !ok {
            let range = if closed_low { "[0, 1)" } else { "(0, 1)" };
            return Err(usage(format!("--{flag} must lie in {range}, got {v}")));
        }
    }
    Ok(())
}

/// Parses argv (including the program name) and merges it with the config
/// file and environment. `env` looks up environment variables.
pub fn parse_config<I, T>(argv: I, env: impl Fn(&str) -> Option<String>) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| usage(e.render().to_string().trim_end()))?;
    load(cli, env)
}

/// Reads the config file named by `--config`, if any, and resolves.
pub fn load(cli: Cli, env: impl Fn(&str) -> Option<String>) -> Result<RunConfig, CliError> {
    let file = match &cli.config {
        Some(path) => read_config_file(path)?,
        None => FileConfig::default(),
    };
    resolve(cli, file, env)
}

pub(crate) fn resolve(cli: Cli, file: FileConfig, env: impl Fn(&str) -> Option<String>) -> Result<RunConfig, CliError> {
    let env_seed = env(SEED_ENV)
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| usage(format!("{SEED_ENV} must be an unsigned 64-bit integer, got '{s}'")))
        })
        .transpose()?;

    let alpha = cli.alpha.or(file.alpha);
    check_unit("alpha", alpha, false)?;
    let rho_override = cli.rho_override.or(file.rho_override);
    check_unit("rho-override", rho_override, true)?;
    let rho = cli.rho.or(file.rho);
    check_unit("rho", rho, true)?;

    let sides = parse_flag::<Sides>("sides", cli.sides)?.or(file.sides).unwrap_or(Sides::Two);
    let method = parse_flag::<Method>("method", cli.method)?.or(file.method);
    let scenario = parse_flag::<Scenario>("scenario", cli.scenario)?.or(file.scenario);

    let mut quadrature = QuadratureSettings::default();
    if let Some(k) = cli.quad_nodes.or(file.quad_nodes) {
        quadrature.node_count = k;
    }
    if let Some(t) = cli.quad_tol.or(file.quad_tol) {
        quadrature.abs_tolerance = t;
    }
    quadrature
        .validate()
        .map_err(|e| usage(format!("--quad-nodes/--quad-tol: {e}")))?;

    let n = cli.n.or(file.n);
    if n == Some(0) {
        return Err(usage("--n must be positive"));
    }
    let replicates = cli.replicates.or(file.replicates);
    if replicates == Some(0) {
        return Err(usage("--replicates must be positive"));
    }
    let workers = cli.workers.or(file.workers);
    if workers == Some(0) {
        return Err(usage("--workers must be positive"));
    }

    let command = cli.command;
    let output_format = cli.output_format.or(file.output_format);

    let cfg = RunConfig {
        command,
        input_path: cli.input.or(file.input),
        alpha,
        sides,
        method,
        rho_override,
        n,
        rho,
        scenario,
        output_format,
        output_path: cli.output.or(file.output),
        seed: cli.seed.or(env_seed).or(file.seed).unwrap_or(DEFAULT_SEED),
        full_scale: cli.full || file.full.unwrap_or(false),
        quadrature,
        replicates,
        workers,
    };
    check_command(&cfg)?;
    Ok(cfg)
}

fn check_command(cfg: &RunConfig) -> Result<(), CliError> {
    let name = cfg.command.name();
    match cfg.command {
        Command::Test => {
            if cfg.input_path.is_none() {
                return Err(usage("test requires --input"));
            }
            if cfg.rho_override.is_some() && cfg.method_or_default() != Method::GnpMom {
                return Err(usage("--rho-override applies to --method gnp-mom only"));
            }
            if cfg.output_format == Some(OutputFormat::Csv) {
                return Err(usage("test writes JSON only; --output-format csv is not supported"));
            }
        }
        Command::CriticalValue => {
            if cfg.n.is_none() {
                return Err(usage("critical-value requires --n"));
            }
            if cfg.rho.is_none() {
                return Err(usage("critical-value requires --rho"));
            }
        }
        Command::SimulatePower => {
            if cfg.scenario == Some(Scenario::Selection) {
                return Err(usage("--scenario selection belongs to simulate-selection"));
            }
        }
        Command::SimulateSelection => {
            if matches!(cfg.scenario, Some(s) if s != Scenario::Selection) {
                return Err(usage("simulate-selection only runs --scenario selection"));
            }
            if matches!(cfg.method, Some(m) if m != Method::GnpMom) {
                return Err(usage("simulate-selection supports --method gnp-mom only"));
            }
        }
        Command::SimulateSize => {}
    }
    if cfg.n == Some(1) && cfg.command != Command::CriticalValue {
        return Err(usage(format!("{name}: --n must be at least 2")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_env(_: &str) -> Option<String> {
        None
    }

    fn parse(args: &[&str]) -> Result<RunConfig, CliError> {
        parse_config(std::iter::once("mtc").chain(args.iter().copied()), no_env)
    }

    #[test]
    fn test_command_flags() {
        let c = parse(&["test", "--input", "x.csv", "--alpha", "0.05", "--sides", "two"]).unwrap();
        assert_eq!(c.command, Command::Test);
        assert_eq!(c.input_path.as_deref(), Some(Path::new("x.csv")));
        assert_eq!(c.alpha, Some(0.05));
        assert_eq!(c.sides, Sides::Two);
        assert_eq!(c.method_or_default(), Method::GnpMom);
        assert_eq!(c.format(), OutputFormat::Json);
        assert_eq!(c.output_format, None);
        assert_eq!(c.quadrature, QuadratureSettings::default());
    }

    #[test]
    fn domain_violations_name_the_flag() {
        for (args, flag) in [
            (vec!["test", "--input", "x", "--alpha", "1.5"], "--alpha"),
            (vec!["test", "--input", "x", "--alpha", "0"], "--alpha"),
            (vec!["test", "--input", "x", "--rho-override", "1"], "--rho-override"),
            (vec!["test", "--input", "x", "--sides", "three"], "--sides"),
            (vec!["test", "--input", "x", "--method", "holm"], "--method"),
            (vec!["simulate-power", "--scenario", "dense"], "--scenario"),
            (vec!["critical-value", "--n", "3", "--rho", "0", "--quad-nodes", "1"], "--quad-nodes"),
            (vec!["critical-value", "--n", "x", "--rho", "0"], "--n"),
        ] {
            let e = parse(&args).unwrap_err();
            assert_eq!(e.exit_code(), 2);
            assert!(e.to_string().contains(flag), "{args:?}: {e}");
        }
    }

    #[test]
    fn command_requirements() {
        assert!(parse(&["test"]).is_err());
        assert!(parse(&["critical-value", "--n", "10"]).is_err());
        assert!(parse(&["critical-value", "--n", "1", "--rho", "0"]).is_ok());
        assert!(parse(&["test", "--input", "x", "--method", "hmp", "--rho-override", "0.2"]).is_err());
        assert!(parse(&["simulate-power", "--scenario", "selection"]).is_err());
        assert!(parse(&["simulate-selection", "--method", "hmp"]).is_err());
        assert!(parse(&["simulate-size", "--n", "1"]).is_err());
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let file = parse_config_file("alpha = 0.01\nsides = \"one\"\nseed = 9\n").unwrap();
        let cli = Cli::try_parse_from(["mtc", "test", "--input", "x", "--alpha", "0.05"]).unwrap();
        let c = resolve(cli, file.clone(), no_env).unwrap();
        assert_eq!(c.alpha, Some(0.05));
        assert_eq!(c.sides, Sides::One);
        assert_eq!(c.seed, 9);
        let cli = Cli::try_parse_from(["mtc", "test", "--input", "x"]).unwrap();
        assert_eq!(resolve(cli, file, no_env).unwrap().alpha, Some(0.01));
    }

    #[test]
    fn seed_precedence() {
        let file = parse_config_file("seed = 9").unwrap();
        let env = |k: &str| (k == SEED_ENV).then(|| "77".to_string());
        let run = |args: &[&str], file: FileConfig, env: &dyn Fn(&str) -> Option<String>| {
            let cli = Cli::try_parse_from(std::iter::once("mtc").chain(args.iter().copied())).unwrap();
            resolve(cli, file, env).unwrap().seed
        };
        assert_eq!(run(&["simulate-size", "--seed", "5"], file.clone(), &env), 5);
        assert_eq!(run(&["simulate-size"], file.clone(), &env), 77);
        assert_eq!(run(&["simulate-size"], file, &no_env), 9);
        assert_eq!(run(&["simulate-size"], FileConfig::default(), &no_env), DEFAULT_SEED);
        let bad = |_: &str| Some("x".to_string());
        let cli = Cli::try_parse_from(["mtc", "simulate-size"]).unwrap();
        assert!(resolve(cli, FileConfig::default(), bad).is_err());
    }

    #[test]
    fn config_file_rejects_unknown_keys() {
        let e = parse_config_file("alpha = 0.1\nbogus = 3\n").unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        assert!(parse_config_file("method = \"holm\"").is_err());
        let f = parse_config_file("method = \"hmp-adj\"\nscenario = \"density-sweep\"\nrho-override = 0.3\noutput-format = \"csv\"").unwrap();
        assert_eq!(f.method, Some(Method::HmpAdjusted));
        assert_eq!(f.scenario, Some(Scenario::DensitySweep));
        assert_eq!(f.rho_override, Some(0.3));
        assert_eq!(f.output_format, Some(OutputFormat::Csv));
    }

    #[test]
    fn simulation_output_defaults_to_csv() {
        assert_eq!(parse(&["simulate-size"]).unwrap().format(), OutputFormat::Csv);
        assert_eq!(parse(&["simulate-selection"]).unwrap().format(), OutputFormat::Json);
    }
}
