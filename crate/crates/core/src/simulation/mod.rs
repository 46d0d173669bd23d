//! Seeded Monte Carlo experiments under the exchangeable normal model
//! Xᵢ = √ρ Z₀ + √(1−ρ) Zᵢ + μᵢ.
//!
//! Replicate `r` of cell `k` always draws from [`replicate_rng`]`(seed, k, r)`,
//! and per-cell rejection counts are summed as integers, so results do not
//! depend on how many worker threads run them.

mod experiments;
mod results;

pub use experiments::{
    monte_carlo_p_oracle, run_power_density_sweep, run_power_sparse, run_selection_experiment,
    run_size_experiment, SelectionRecord,
};
pub use results::{ExperimentResult, ExperimentRow};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{check_alpha, Method, Sides, TestStatistics};

/// Smallest replicate count accepted by the size and power experiments.
pub const MIN_REPLICATES: usize = 100;

/// Replicates per cell at desk scale and in the full published grid.
pub const DESK_REPLICATES: usize = 2000;
pub const FULL_REPLICATES: usize = 10_000;

/// One draw of n exchangeable statistics with correlation ρ and means μ.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeableModel {
    rho: f64,
    mu: Vec<f64>,
}

impl ExchangeableModel {
    pub fn new(rho: f64, mu: Vec<f64>) -> Result<Self> {
        if mu.len() < 2 {
            return Err(Error::domain(format!("model needs n >= 2, got {}", mu.len())));
        }
        check_rho(rho)?;
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::domain("mean vector must be finite"));
        }
        Ok(ExchangeableModel { rho, mu })
    }

    /// All means zero.
    pub fn null(n: usize, rho: f64) -> Result<Self> {
        Self::new(rho, vec![0.0; n])
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::domain(format!("correlation must lie in [0, 1), got {rho}")))
    }
}

/// The RNG for replicate `replicate` of cell `cell`: ChaCha8 keyed by the
/// master seed and cell, with the replicate as the stream id.
pub fn replicate_rng(master_seed: u64, cell: u64, replicate: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&cell.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replicate);
    rng
}

/// Null noise √ρ Z₀ + √(1−ρ) Zᵢ into `out`; Z₀ is drawn first, then Z₁..Zₙ.
pub(crate) fn fill_null<R: Rng + ?Sized>(rho: f64, rng: &mut R, out: &mut [f64]) {
    let shared = rho.sqrt() * rng.sample::<f64, _>(StandardNormal);
    let own = (1.0 - rho).sqrt();
    for v in out.iter_mut() {
        *v = shared + own * rng.sample::<f64, _>(StandardNormal);
    }
}

/// Draws X from the model using n + 1 standard normal variates.
pub fn sample_exchangeable<R: Rng + ?Sized>(model: &ExchangeableModel, rng: &mut R) -> TestStatistics {
    let mut x = vec![0.0; model.n()];
    fill_null(model.rho, rng, &mut x);
    for (v, m) in x.iter_mut().zip(&model.mu) {
        *v += m;
    }
    TestStatistics::from_finite(x)
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T, F>(workers: usize, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    if workers == 0 {
        return Err(Error::domain("worker count must be positive"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::domain(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Null rejection rates over an (n, ρ, α) grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeExperimentConfig {
    pub n_grid: Vec<usize>,
    pub rho_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub sides: Sides,
    pub master_seed: u64,
}

impl SizeExperimentConfig {
    /// n ∈ {20, 100, 1000}, ρ ∈ {0, 0.2, 0.5, 0.9}, α ∈ {0.01, 0.05, 0.10},
    /// 2000 replicates, every method, two-sided.
    pub fn desk(master_seed: u64) -> Self {
        SizeExperimentConfig {
            n_grid: vec![20, 100, 1000],
            rho_grid: default_rho_grid(),
            alpha_grid: default_alpha_grid(),
            replicates: DESK_REPLICATES,
            methods: Method::ALL.to_vec(),
            sides: Sides::Two,
            master_seed,
        }
    }

    /// Same grid with 10 000 replicates.
    pub fn full(master_seed: u64) -> Self {
        SizeExperimentConfig {
            replicates: FULL_REPLICATES,
            ..Self::desk(master_seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.rho_grid.is_empty() || self.alpha_grid.is_empty() {
            return Err(Error::domain("size experiment grids must be nonempty"));
        }
        if let Some(n) = self.n_grid.iter().find(|&&n| n < 2) {
            return Err(Error::domain(format!("n must be at least 2, got {n}")));
        }
        validate_common(&self.rho_grid, &self.alpha_grid, &self.methods, self.replicates, MIN_REPLICATES)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// μ = (μ₁, 0, …, 0), sweeping μ₁.
    SparseSingle,
    /// The first round(s·n) means set to √(ln n)/s^0.1, sweeping s.
    DensitySweep,
    /// First half of the means shifted, one replicate per stream.
    Selection,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::SparseSingle => "sparse-single",
            Scenario::DensitySweep => "density-sweep",
            Scenario::Selection => "selection",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sparse-single" => Ok(Scenario::SparseSingle),
            "density-sweep" => Ok(Scenario::DensitySweep),
            "selection" => Ok(Scenario::Selection),
            other => Err(Error::domain(format!(
                "unknown scenario '{other}' (expected sparse-single|density-sweep|selection)"
            ))),
        }
    }
}

/// Power curves at fixed n over ρ, α and a scenario-specific sweep.
///
/// `sweep_grid` holds μ₁ for sparse-single, the non-null proportion s for
/// density-sweep and the shift of the first n/2 means for selection. For
/// selection, `replicates` is the number of independent single-draw runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerExperimentConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub rho_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    pub sweep_grid: Vec<f64>,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub sides: Sides,
    pub master_seed: u64,
}

impl PowerExperimentConfig {
    /// Desk-scale defaults for a scenario: n = 1000, the published ρ and α
    /// grids, μ₁ ∈ {0, 0.05, …, 3} or s ∈ {0.01, …, 1}; selection uses
    /// ρ = 0.5, α = 0.10, shift 3 and a single run.
    pub fn desk(scenario: Scenario, master_seed: u64) -> Self {
        let base = PowerExperimentConfig {
            scenario,
            n: 1000,
            rho_grid: default_rho_grid(),
            alpha_grid: default_alpha_grid(),
            sweep_grid: Vec::new(),
            replicates: DESK_REPLICATES,
            methods: Method::ALL.to_vec(),
            sides: Sides::Two,
            master_seed,
        };
        match scenario {
            Scenario::SparseSingle => PowerExperimentConfig {
                sweep_grid: (0..=60).map(|i| i as f64 / 20.0).collect(),
                ..base
            },
            Scenario::DensitySweep => PowerExperimentConfig {
                sweep_grid: (1..=100).map(|i| i as f64 / 100.0).collect(),
                ..base
            },
            Scenario::Selection => PowerExperimentConfig {
                rho_grid: vec![0.5],
                alpha_grid: vec![0.10],
                sweep_grid: vec![3.0],
                replicates: 1,
                methods: vec![Method::GnpMom],
                ..base
            },
        }
    }

    /// Desk defaults with 10 000 replicates (selection keeps its run count).
    pub fn full(scenario: Scenario, master_seed: u64) -> Self {
        let desk = Self::desk(scenario, master_seed);
        match scenario {
            Scenario::Selection => desk,
            _ => PowerExperimentConfig {
                replicates: FULL_REPLICATES,
                ..desk
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::domain(format!("n must be at least 2, got {}", self.n)));
        }
        if self.rho_grid.is_empty() || self.alpha_grid.is_empty() || self.sweep_grid.is_empty() {
            return Err(Error::domain("power experiment grids must be nonempty"));
        }
        if self.sweep_grid.iter().any(|s| !s.is_finite())
            || self.sweep_grid.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::domain("sweep grid must be finite and strictly increasing"));
        }
        let min_replicates = match self.scenario {
            Scenario::SparseSingle => MIN_REPLICATES,
            Scenario::DensitySweep => {
                if self.sweep_grid.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
                    return Err(Error::domain("density proportions must lie in [0, 1]"));
                }
                MIN_REPLICATES
            }
            Scenario::Selection => {
                if self.n % 2 != 0 {
                    return Err(Error::domain(format!("selection needs an even n, got {}", self.n)));
                }
                1
            }
        };
        validate_common(&self.rho_grid, &self.alpha_grid, &self.methods, self.replicates, min_replicates)
    }
}

fn default_rho_grid() -> Vec<f64> {
    vec![0.0, 0.2, 0.5, 0.9]
}

fn default_alpha_grid() -> Vec<f64> {
    vec![0.01, 0.05, 0.10]
}

fn validate_common(
    rho_grid: &[f64],
    alpha_grid: &[f64],
    methods: &[Method],
    replicates: usize,
    min_replicates: usize,
) -> Result<()> {
    for &rho in rho_grid {
        check_rho(rho)?;
    }
    for &alpha in alpha_grid {
        check_alpha(alpha)?;
    }
    if methods.is_empty() {
        return Err(Error::domain("at least one method is required"));
    }
    if replicates < min_replicates {
        return Err(Error::domain(format!(
            "need at least {min_replicates} replicates, got {replicates}"
        )));
    }
    Ok(())
}

/// Mean of each shifted coordinate in the density sweep: √(ln n)/s^0.1.
pub fn density_shift(n: usize, s: f64) -> f64 {
    (n as f64).ln().sqrt() / s.powf(0.1)
}

/// Number of shifted coordinates in the density sweep: round(s·n), at least
/// one for s > 0, none for s = 0.
pub fn density_count(n: usize, s: f64) -> usize {
    if s <= 0.0 {
        0
    } else {
        ((s * n as f64).round() as usize).clamp(1, n)
    }
}
