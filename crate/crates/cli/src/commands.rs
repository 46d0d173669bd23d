use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use mtc_core::baselines::{bonferroni_test, fisher_combined_test, hmp_adjusted_test, hmp_test, z_to_p};
use mtc_core::estimator::CorrelationEstimate;
use mtc_core::gnp::{critical_value, run_gnp_test, RhoChoice};
use mtc_core::simulation::{
    run_power_density_sweep, run_power_sparse, run_selection_experiment, run_size_experiment,
    with_workers, ExperimentResult, PowerExperimentConfig, Scenario, SelectionRecord,
    SizeExperimentConfig,
};
use mtc_core::special_math::{std_normal_quantile, GaussianIntegrator};
use mtc_core::{Method, Sides};

use crate::config::{Command, OutputFormat, RunConfig};
use crate::error::{io_error, CliError};
use crate::input::read_statistics;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorFlags {
    pub sample_variance: f64,
    pub indicator_fired: bool,
    pub upper_clipped: bool,
}

/// The JSON report of `mtc test`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub method: Method,
    pub sides: Sides,
    pub n: usize,
    pub rho_hat: Option<f64>,
    /// "estimated" or "override"; null for methods that ignore ρ.
    pub rho_source: Option<&'static str>,
    pub m_stat: f64,
    pub p_value: f64,
    pub alpha: f64,
    /// Threshold on the z scale; null for the combination methods.
    pub critical_value: Option<f64>,
    pub reject_global: bool,
    pub significant_indices: Vec<usize>,
    pub estimator_flags: Option<EstimatorFlags>,
}

fn flags(e: &CorrelationEstimate) -> EstimatorFlags {
    EstimatorFlags {
        sample_variance: e.sample_variance,
        indicator_fired: e.indicator_fired,
        upper_clipped: e.upper_clipped,
    }
}

pub fn cmd_test(cfg: &RunConfig) -> Result<TestReport, CliError> {
    let path = cfg.input_path.as_deref().expect("checked during config resolution");
    let x = read_statistics(path)?;
    let alpha = cfg.alpha_or_default();
    let method = cfg.method_or_default();
    let (m_stat, _) = cfg.sides.max_statistic(&x);
    if method == Method::GnpMom {
        let integ = GaussianIntegrator::new(cfg.quadrature)?;
        let rho = match cfg.rho_override {
            Some(r) => RhoChoice::Known(r),
            None => RhoChoice::Estimate,
        };
        let a = run_gnp_test(&x, alpha, cfg.sides, rho, &integ)?;
        return Ok(TestReport {
            method,
            sides: cfg.sides,
            n: x.len(),
            rho_hat: a.outcome.rho_used,
            rho_source: Some(if cfg.rho_override.is_some() { "override" } else { "estimated" }),
            m_stat,
            p_value: a.outcome.p_value,
            alpha,
            critical_value: a.outcome.critical_value,
            reject_global: a.outcome.reject_global,
            significant_indices: a.outcome.significant_indices,
            estimator_flags: a.estimate.as_ref().map(flags),
        });
    }
    let p = z_to_p(&x, cfg.sides);
    let outcome = match method {
        Method::Bonferroni => bonferroni_test(&p, alpha)?,
        Method::Hmp => hmp_test(&p, alpha)?,
        Method::HmpAdjusted => hmp_adjusted_test(&p, alpha)?,
        Method::Fisher => fisher_combined_test(&p, alpha)?,
        Method::GnpMom => unreachable!(),
    };
    let critical_value = match method {
        Method::Bonferroni => {
            let tail = alpha / x.len() as f64;
            Some(-std_normal_quantile(match cfg.sides {
                Sides::One => tail,
                Sides::Two => tail / 2.0,
            })?)
        }
        _ => None,
    };
    Ok(TestReport {
        method,
        sides: cfg.sides,
        n: x.len(),
        rho_hat: None,
        rho_source: None,
        m_stat,
        p_value: outcome.p_value,
        alpha,
        critical_value,
        reject_global: outcome.reject_global,
        significant_indices: outcome.significant_indices,
        estimator_flags: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalValueReport {
    pub n: usize,
    pub rho: f64,
    pub alpha: f64,
    pub sides: Sides,
    pub critical_value: f64,
}

pub fn cmd_critical_value(cfg: &RunConfig) -> Result<CriticalValueReport, CliError> {
    let n = cfg.n.expect("checked during config resolution");
    let rho = cfg.rho.expect("checked during config resolution");
    let alpha = cfg.alpha_or_default();
    let integ = GaussianIntegrator::new(cfg.quadrature)?;
    Ok(CriticalValueReport {
        n,
        rho,
        alpha,
        sides: cfg.sides,
        critical_value: critical_value(n, rho, alpha, cfg.sides, &integ)?,
    })
}

pub fn size_config(cfg: &RunConfig) -> SizeExperimentConfig {
    let mut sim = if cfg.full_scale {
        SizeExperimentConfig::full(cfg.seed)
    } else {
        SizeExperimentConfig::desk(cfg.seed)
    };
    if let Some(n) = cfg.n {
        sim.n_grid = vec![n];
    }
    if let Some(rho) = cfg.rho {
        sim.rho_grid = vec![rho];
    }
    if let Some(alpha) = cfg.alpha {
        sim.alpha_grid = vec![alpha];
    }
    if let Some(m) = cfg.method {
        sim.methods = vec![m];
    }
    if let Some(r) = cfg.replicates {
        sim.replicates = r;
    }
    sim.sides = cfg.sides;
    sim
}

pub fn power_config(cfg: &RunConfig, scenario: Scenario) -> PowerExperimentConfig {
    let mut sim = if cfg.full_scale {
        PowerExperimentConfig::full(scenario, cfg.seed)
    } else {
        PowerExperimentConfig::desk(scenario, cfg.seed)
    };
    if let Some(n) = cfg.n {
        sim.n = n;
    }
    if let Some(rho) = cfg.rho {
        sim.rho_grid = vec![rho];
    }
    if let Some(alpha) = cfg.alpha {
        sim.alpha_grid = vec![alpha];
    }
    if let Some(m) = cfg.method {
        sim.methods = vec![m];
    }
    if let Some(r) = cfg.replicates {
        sim.replicates = r;
    }
    sim.sides = cfg.sides;
    sim
}

fn on_workers<T: Send>(cfg: &RunConfig, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match cfg.workers {
        Some(w) => Ok(with_workers(w, f)?),
        None => Ok(f()),
    }
}

fn size_summary(cfg: &SizeExperimentConfig, res: &ExperimentResult) -> String {
    let mut s = format!("size: {} replicates per cell, seed {}\n", cfg.replicates, cfg.master_seed);
    let _ = writeln!(s, "{:<11} {:>5} {:>12} {:>16}", "method", "cells", "within 3 SE", "max |rate-alpha|");
    for &m in &cfg.methods {
        let rows: Vec<_> = res.rows.iter().filter(|r| r.method == m).collect();
        let within = rows
            .iter()
            .filter(|r| {
                (r.rejection_rate - r.alpha).abs() <= 3.0 * (r.alpha * (1.0 - r.alpha) / r.replicates as f64).sqrt()
            })
            .count();
        let worst = rows.iter().map(|r| (r.rejection_rate - r.alpha).abs()).fold(0.0, f64::max);
        let _ = writeln!(s, "{:<11} {:>5} {:>12} {:>16.4}", m.as_str(), rows.len(), within, worst);
    }
    if cfg.methods.contains(&Method::Fisher) {
        s.push_str("note: fisher assumes independent p-values; its size is exact only at rho = 0\n");
    }
    s
}

fn power_summary(cfg: &PowerExperimentConfig, res: &ExperimentResult) -> String {
    let first = cfg.sweep_grid[0];
    let last = *cfg.sweep_grid.last().unwrap();
    let mut s = format!(
        "{}: n = {}, {} replicates, seed {}; power at sweep {first} and {last}\n",
        cfg.scenario.as_str(),
        cfg.n,
        cfg.replicates,
        cfg.master_seed
    );
    let _ = writeln!(s, "{:<11} {:>5} {:>6} {:>9} {:>9}", "method", "rho", "alpha", "first", "last");
    for &m in &cfg.methods {
        for &rho in &cfg.rho_grid {
            for &alpha in &cfg.alpha_grid {
                let rate = |v| res.find(m, cfg.n, rho, alpha, v).map_or(f64::NAN, |r| r.rejection_rate);
                let _ = writeln!(s, "{:<11} {:>5} {:>6} {:>9.4} {:>9.4}", m.as_str(), rho, alpha, rate(first), rate(last));
            }
        }
    }
    s
}

fn selection_summary(records: &[SelectionRecord]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>9} {:>5} {:>6} {:>7} {:>9} {:>7} {:>8} {:>9}",
        "replicate", "rho", "alpha", "rho_hat", "c_alpha", "reject", "flagged", "non-null"
    );
    for r in records {
        let _ = writeln!(
            s,
            "{:>9} {:>5} {:>6} {:>7.4} {:>9.4} {:>7} {:>8} {:>9}",
            r.replicate,
            r.rho,
            r.alpha,
            r.rho_hat,
            r.critical_value,
            r.reject_global,
            r.flagged.len(),
            r.flagged_non_null
        );
    }
    s
}

#[derive(Serialize)]
struct SelectionCsvRow {
    replicate: u64,
    rho: f64,
    alpha: f64,
    shift: f64,
    index: usize,
    value: f64,
    non_null: bool,
    flagged: bool,
    critical_value: f64,
}

fn selection_csv(records: &[SelectionRecord]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        for (i, &v) in r.plotted_statistics.iter().enumerate() {
            w.serialize(SelectionCsvRow {
                replicate: r.replicate,
                rho: r.rho,
                alpha: r.alpha,
                shift: r.shift,
                index: i,
                value: v,
                non_null: i < r.n / 2,
                flagged: r.flagged.binary_search(&i).is_ok(),
                critical_value: r.critical_value,
            })
            .map_err(|e| CliError::Input(format!("csv: {e}")))?;
        }
    }
    w.into_inner().map_err(|e| CliError::Input(format!("csv: {e}")))
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("reports serialize");
    v.push(b'\n');
    v
}

fn result_bytes(cfg: &RunConfig, res: &ExperimentResult) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    match cfg.format() {
        OutputFormat::Csv => res.write_csv(&mut buf)?,
        OutputFormat::Json => {
            res.write_json(&mut buf)?;
            buf.push(b'\n');
        }
    }
    Ok(buf)
}

/// Primary output and a human-readable summary for the invocation.
pub struct CommandOutput {
    pub primary: Vec<u8>,
    pub summary: Option<String>,
}

pub fn execute(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    match cfg.command {
        Command::Test => Ok(CommandOutput {
            primary: to_json(&cmd_test(cfg)?),
            summary: None,
        }),
        Command::CriticalValue => {
            let report = cmd_critical_value(cfg)?;
            let mut primary = format!("{:.9}\n", report.critical_value).into_bytes();
            if cfg.output_format == Some(OutputFormat::Json) {
                primary.extend(serde_json::to_vec(&report).expect("reports serialize"));
                primary.push(b'\n');
            }
            Ok(CommandOutput { primary, summary: None })
        }
        Command::SimulateSize => {
            let sim = size_config(cfg);
            let res = on_workers(cfg, || run_size_experiment(&sim))??;
            Ok(CommandOutput {
                primary: result_bytes(cfg, &res)?,
                summary: Some(size_summary(&sim, &res)),
            })
        }
        Command::SimulatePower => {
            let sim = power_config(cfg, cfg.scenario.unwrap_or(Scenario::SparseSingle));
            let res = on_workers(cfg, || match sim.scenario {
                Scenario::DensitySweep => run_power_density_sweep(&sim),
                _ => run_power_sparse(&sim),
            })??;
            Ok(CommandOutput {
                primary: result_bytes(cfg, &res)?,
                summary: Some(power_summary(&sim, &res)),
            })
        }
        Command::SimulateSelection => {
            let sim = power_config(cfg, Scenario::Selection);
            let records = on_workers(cfg, || run_selection_experiment(&sim))??;
            let primary = match cfg.format() {
                OutputFormat::Json => to_json(&records),
                OutputFormat::Csv => selection_csv(&records)?,
            };
            Ok(CommandOutput {
                primary,
                summary: Some(selection_summary(&records)),
            })
        }
    }
}

/// Writes the primary output to `--output` or `out`, and the summary to `err`.
pub fn emit(cfg: &RunConfig, output: &CommandOutput, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match &cfg.output_path {
        Some(path) => std::fs::write(path, &output.primary).map_err(|e| io_error("write", path, e))?,
        None => out
            .write_all(&output.primary)
            .map_err(|e| CliError::Input(format!("cannot write output: {e}")))?,
    }
    if let Some(s) = &output.summary {
        let _ = err.write_all(s.as_bytes());
    }
    Ok(())
}
