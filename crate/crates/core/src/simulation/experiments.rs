use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::{
    density_count, density_shift, fill_null, replicate_rng, PowerExperimentConfig, Scenario,
    SizeExperimentConfig,
};
use super::results::{ExperimentResult, ExperimentRow};
use crate::baselines::{bonferroni_p, fisher_p, harmonic_mean_p, hmp_adjusted_p, z_to_p};
use crate::error::{Error, Result};
use crate::gnp::{gnp_mom_p_value, run_gnp_test, RhoChoice};
use crate::special_math::{GaussianIntegrator, QuadratureSettings};
use crate::types::{Method, Sides, TestStatistics};

/// Per-worker accumulator: integer counts plus the lowest failing replicate.
struct Tally {
    counts: Vec<u64>,
    failure: Option<(u64, Error)>,
}

impl Tally {
    fn new(slots: usize) -> Self {
        Tally {
            counts: vec![0; slots],
            failure: None,
        }
    }

    fn fail(&mut self, replicate: u64, e: Error) {
        if self.failure.as_ref().is_none_or(|(r, _)| replicate < *r) {
            self.failure = Some((replicate, e));
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        if let Some((r, e)) = other.failure {
            self.fail(r, e);
        }
        self
    }
}

/// Runs `replicates` replicates of one cell in parallel and sums the counts
/// each replicate adds. Any failure aborts with the lowest failing replicate.
fn tally<F>(seed: u64, cell: u64, replicates: usize, slots: usize, f: F) -> Result<Vec<u64>>
where
    F: Fn(&mut ChaCha8Rng, &mut [u64]) -> Result<()> + Sync,
{
    let total = (0..replicates as u64)
        .into_par_iter()
        .fold(
            || Tally::new(slots),
            |mut t, r| {
                if t.failure.is_none() {
                    let mut rng = replicate_rng(seed, cell, r);
                    if let Err(e) = f(&mut rng, &mut t.counts) {
                        t.fail(r, e);
                    }
                }
                t
            },
        )
        .reduce(|| Tally::new(slots), Tally::merge);
    match total.failure {
        None => Ok(total.counts),
        Some((replicate, e)) => Err(Error::Replicate {
            seed,
            cell,
            replicate,
            message: e.to_string(),
        }),
    }
}

/// Global p-values of each method on the same draw.
struct Evaluator<'a> {
    methods: &'a [Method],
    sides: Sides,
    integ: GaussianIntegrator,
}

impl<'a> Evaluator<'a> {
    fn new(methods: &'a [Method], sides: Sides) -> Result<Self> {
        Ok(Evaluator {
            methods,
            sides,
            integ: GaussianIntegrator::new(QuadratureSettings::default())?,
        })
    }

    fn p_values(&self, x: &TestStatistics, out: &mut [f64]) -> Result<()> {
        let needs_p = self.methods.iter().any(|m| *m != Method::GnpMom);
        let p = if needs_p { Some(z_to_p(x, self.sides)) } else { None };
        for (slot, method) in out.iter_mut().zip(self.methods) {
            let p = p.as_ref();
            *slot = match method {
                Method::GnpMom => gnp_mom_p_value(x, self.sides, &self.integ)?,
                Method::Bonferroni => bonferroni_p(p.unwrap()),
                Method::Hmp => harmonic_mean_p(p.unwrap()),
                Method::HmpAdjusted => hmp_adjusted_p(p.unwrap())?,
                Method::Fisher => fisher_p(p.unwrap())?,
            };
        }
        Ok(())
    }

    /// Adds one to `counts[i·A + a]` when method i rejects at alpha_grid[a].
    fn count_rejections(&self, x: &TestStatistics, alphas: &[f64], counts: &mut [u64]) -> Result<()> {
        let mut p = vec![0.0; self.methods.len()];
        self.p_values(x, &mut p)?;
        for (i, &pi) in p.iter().enumerate() {
            for (a, &alpha) in alphas.iter().enumerate() {
                if pi <= alpha {
                    counts[i * alphas.len() + a] += 1;
                }
            }
        }
        Ok(())
    }
}

/// Rejection rates under the global null for every (n, ρ) cell, method and
/// α. Cell k = n-index·|ρ grid| + ρ-index; all methods and α values see the
/// same draws.
pub fn run_size_experiment(cfg: &SizeExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let eval = Evaluator::new(&cfg.methods, cfg.sides)?;
    let slots = cfg.methods.len() * cfg.alpha_grid.len();
    let mut rows = Vec::new();
    for (ni, &n) in cfg.n_grid.iter().enumerate() {
        for (ri, &rho) in cfg.rho_grid.iter().enumerate() {
            let cell = (ni * cfg.rho_grid.len() + ri) as u64;
            let counts = tally(cfg.master_seed, cell, cfg.replicates, slots, |rng, counts| {
                let mut x = vec![0.0; n];
                fill_null(rho, rng, &mut x);
                eval.count_rejections(&TestStatistics::from_finite(x), &cfg.alpha_grid, counts)
            })?;
            for (i, &method) in cfg.methods.iter().enumerate() {
                for (a, &alpha) in cfg.alpha_grid.iter().enumerate() {
                    rows.push(ExperimentRow::from_count(
                        method,
                        n,
                        rho,
                        alpha,
                        0.0,
                        counts[i * cfg.alpha_grid.len() + a],
                        cfg.replicates,
                        cfg.master_seed,
                    ));
                }
            }
        }
    }
    Ok(ExperimentResult { rows })
}

/// Shared driver for the two power scenarios. `shift(v, x)` adds the mean
/// vector for sweep value `v` to a null draw. Cell k is the ρ index; every
/// sweep value, method and α reuses the same null draw.
fn run_power<S>(cfg: &PowerExperimentConfig, shift: S) -> Result<ExperimentResult>
where
    S: Fn(f64, &mut [f64]) + Sync,
{
    let eval = Evaluator::new(&cfg.methods, cfg.sides)?;
    let per_sweep = cfg.methods.len() * cfg.alpha_grid.len();
    let slots = cfg.sweep_grid.len() * per_sweep;
    let mut rows = Vec::new();
    for (ri, &rho) in cfg.rho_grid.iter().enumerate() {
        let counts = tally(cfg.master_seed, ri as u64, cfg.replicates, slots, |rng, counts| {
            let mut noise = vec![0.0; cfg.n];
            fill_null(rho, rng, &mut noise);
            for (si, &v) in cfg.sweep_grid.iter().enumerate() {
                let mut x = noise.clone();
                shift(v, &mut x);
                let block = &mut counts[si * per_sweep..(si + 1) * per_sweep];
                eval.count_rejections(&TestStatistics::from_finite(x), &cfg.alpha_grid, block)?;
            }
            Ok(())
        })?;
        for (i, &method) in cfg.methods.iter().enumerate() {
            for (a, &alpha) in cfg.alpha_grid.iter().enumerate() {
                for (si, &v) in cfg.sweep_grid.iter().enumerate() {
                    rows.push(ExperimentRow::from_count(
                        method,
                        cfg.n,
                        rho,
                        alpha,
                        v,
                        counts[si * per_sweep + i * cfg.alpha_grid.len() + a],
                        cfg.replicates,
                        cfg.master_seed,
                    ));
                }
            }
        }
    }
    Ok(ExperimentResult { rows })
}

fn expect_scenario(cfg: &PowerExperimentConfig, scenario: Scenario) -> Result<()> {
    cfg.validate()?;
    if cfg.scenario != scenario {
        return Err(Error::domain(format!(
            "expected scenario {}, got {}",
            scenario.as_str(),
            cfg.scenario.as_str()
        )));
    }
    Ok(())
}

/// Power against μ = (μ₁, 0, …, 0) for each μ₁ in the sweep grid.
pub fn run_power_sparse(cfg: &PowerExperimentConfig) -> Result<ExperimentResult> {
    expect_scenario(cfg, Scenario::SparseSingle)?;
    run_power(cfg, |mu1, x| x[0] += mu1)
}

/// Power when the first round(s·n) means equal √(ln n)/s^0.1, for each s in
/// the sweep grid; s = 0 is the global null.
pub fn run_power_density_sweep(cfg: &PowerExperimentConfig) -> Result<ExperimentResult> {
    expect_scenario(cfg, Scenario::DensitySweep)?;
    let n = cfg.n;
    run_power(cfg, move |s, x| {
        let count = density_count(n, s);
        if count > 0 {
            let mu = density_shift(n, s);
            for v in &mut x[..count] {
                *v += mu;
            }
        }
    })
}

/// One single-draw selection run: the data, c_α and the flagged indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionRecord {
    pub replicate: u64,
    pub seed: u64,
    pub n: usize,
    pub rho: f64,
    pub alpha: f64,
    /// Mean of the first n/2 statistics.
    pub shift: f64,
    pub rho_hat: f64,
    pub m_stat: f64,
    pub p_value: f64,
    pub critical_value: f64,
    pub reject_global: bool,
    pub argmax: usize,
    pub flagged: Vec<usize>,
    /// Flagged indices among the shifted first half.
    pub flagged_non_null: usize,
    /// |Xᵢ| for two-sided runs, Xᵢ for one-sided runs.
    pub plotted_statistics: Vec<f64>,
}

/// For each (ρ, shift) cell and replicate r < m: one draw with the first n/2
/// means set to the shift, analysed by the plug-in test at every α.
/// Cell k = ρ-index·|sweep grid| + shift-index.
pub fn run_selection_experiment(cfg: &PowerExperimentConfig) -> Result<Vec<SelectionRecord>> {
    expect_scenario(cfg, Scenario::Selection)?;
    if cfg.methods.iter().any(|m| *m != Method::GnpMom) {
        return Err(Error::domain("the selection experiment is defined for gnp-mom only"));
    }
    let integ = GaussianIntegrator::new(QuadratureSettings::default())?;
    let half = cfg.n / 2;
    let mut records = Vec::new();
    for (ri, &rho) in cfg.rho_grid.iter().enumerate() {
        for (si, &shift) in cfg.sweep_grid.iter().enumerate() {
            let cell = (ri * cfg.sweep_grid.len() + si) as u64;
            let runs: Vec<Result<Vec<SelectionRecord>>> = (0..cfg.replicates as u64)
                .into_par_iter()
                .map(|r| {
                    let mut rng = replicate_rng(cfg.master_seed, cell, r);
                    let mut x = vec![0.0; cfg.n];
                    fill_null(rho, &mut rng, &mut x);
                    for v in &mut x[..half] {
                        *v += shift;
                    }
                    let x = TestStatistics::from_finite(x);
                    cfg.alpha_grid
                        .iter()
                        .map(|&alpha| {
                            let a = run_gnp_test(&x, alpha, cfg.sides, RhoChoice::Estimate, &integ)?;
                            let o = a.outcome;
                            let (_, argmax) = cfg.sides.max_statistic(&x);
                            Ok(SelectionRecord {
                                replicate: r,
                                seed: cfg.master_seed,
                                n: cfg.n,
                                rho,
                                alpha,
                                shift,
                                rho_hat: o.rho_used.unwrap_or(0.0),
                                m_stat: o.statistic,
                                p_value: o.p_value,
                                critical_value: o.critical_value.unwrap_or(f64::NAN),
                                reject_global: o.reject_global,
                                argmax,
                                flagged_non_null: o.significant_indices.iter().filter(|&&i| i < half).count(),
                                flagged: o.significant_indices,
                                plotted_statistics: match cfg.sides {
                                    Sides::Two => x.values().iter().map(|v| v.abs()).collect(),
                                    Sides::One => x.values().to_vec(),
                                },
                            })
                        })
                        .collect::<Result<Vec<_>>>()
                        .map_err(|e| Error::Replicate {
                            seed: cfg.master_seed,
                            cell,
                            replicate: r,
                            message: e.to_string(),
                        })
                })
                .collect();
            for run in runs {
                records.extend(run?);
            }
        }
    }
    Ok(records)
}

/// Brute-force P(M > m_stat) under the null model with `reps` draws from
/// streams (seed, 0, r). Returns the estimate and its standard error.
pub fn monte_carlo_p_oracle(
    m_stat: f64,
    n: usize,
    rho: f64,
    sides: Sides,
    reps: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if reps < 10_000 {
        return Err(Error::domain(format!("oracle needs at least 10000 draws, got {reps}")));
    }
    if n == 0 {
        return Err(Error::domain("number of statistics must be positive"));
    }
    super::check_rho(rho)?;
    let a = rho.sqrt();
    let b = (1.0 - rho).sqrt();
    let counts = tally(seed, 0, reps, 1, |rng, counts| {
        let shared = a * rng.sample::<f64, _>(StandardNormal);
        let mut max = f64::NEG_INFINITY;
        for _ in 0..n {
            let v = shared + b * rng.sample::<f64, _>(StandardNormal);
            let v = match sides {
                Sides::One => v,
                Sides::Two => v.abs(),
            };
            max = max.max(v);
        }
        if max > m_stat {
            counts[0] += 1;
        }
        Ok(())
    })?;
    let p = counts[0] as f64 / reps as f64;
    Ok((p, (p * (1.0 - p) / reps as f64).sqrt()))
}
