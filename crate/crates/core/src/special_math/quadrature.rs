use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{PI, SQRT_2};

use super::FRAC_1_SQRT_2PI;
use crate::error::{Error, Result};

/// Largest supported Gauss–Hermite rule.
pub const MAX_HERMITE_NODES: usize = 512;

/// Evaluation budget of the adaptive fallback.
const MAX_FALLBACK_EVALUATIONS: usize = 1_000_000;

/// Panels the fallback window is split into before any refinement.
const FALLBACK_PANELS: usize = 32;

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    /// Gauss–Hermite nodes of the coarse rule; the check rule uses twice as many.
    pub node_count: usize,
    /// Absolute error target for ∫f(z)φ(z)dz.
    pub abs_tolerance: f64,
    /// Half-width of the window used by the adaptive fallback.
    pub truncation_bound: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            node_count: 128,
            abs_tolerance: 1e-10,
            truncation_bound: 10.0,
        }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        if self.node_count < 2 || 2 * self.node_count > MAX_HERMITE_NODES {
            return Err(Error::domain(format!(
                "quadrature node count must lie in [2, {}], got {}",
                MAX_HERMITE_NODES / 2,
                self.node_count
            )));
        }
        if !(self.abs_tolerance > 0.0) || !self.abs_tolerance.is_finite() {
            return Err(Error::domain(format!(
                "quadrature tolerance must be positive, got {}",
                self.abs_tolerance
            )));
        }
        if !(self.truncation_bound >= 8.0) || !self.truncation_bound.is_finite() {
            return Err(Error::domain(format!(
                "truncation bound must be at least 8, got {}",
                self.truncation_bound
            )));
        }
        Ok(())
    }
}

/// Nodes and weights for ∫g(t)e^{−t²}dt ≈ Σ wᵢ g(tᵢ). Nodes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermiteRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// (1/√π) Σ wᵢ f(√2 tᵢ) ≈ ∫f(z)φ(z)dz.
    pub fn gaussian_expectation(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        let sum: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(SQRT_2 * t))
            .sum();
        sum * FRAC_1_SQRT_PI
    }
}

/// Number of eigenvalues of the k×k Hermite Jacobi matrix below `x`
/// (Sturm sequence count of the tridiagonal with zero diagonal and
/// off-diagonal √(j/2)).
fn sturm_count(k: usize, x: f64) -> usize {
    let mut count = 0;
    let mut q = -x;
    if q < 0.0 {
        count += 1;
    }
    for j in 1..k {
        let denom = if q == 0.0 { f64::EPSILON } else { q };
        q = -x - 0.5 * j as f64 / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// i-th smallest eigenvalue by bisection on the Sturm count.
fn jacobi_eigenvalue(k: usize, i: usize, bound: f64) -> f64 {
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(k, mid) > i {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Christoffel weight 1 / Σ_{j<k} h̃ⱼ(t)², with h̃ⱼ the Hermite polynomials
/// orthonormal under e^{−t²}. Rescaled on the fly so large |t| underflows to
/// a zero weight instead of overflowing.
fn christoffel_weight(k: usize, t: f64) -> f64 {
    const SCALE: f64 = 1e100;
    let ln_scale = SCALE.ln();
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    let mut sum = cur * cur;
    let mut log_factor = 0.0;
    for j in 0..k - 1 {
        let jf = j as f64;
        let next = (2.0 / (jf + 1.0)).sqrt() * t * cur - (jf / (jf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        sum += cur * cur;
        if cur.abs() > SCALE {
            cur /= SCALE;
            prev /= SCALE;
            sum /= SCALE * SCALE;
            log_factor += 2.0 * ln_scale;
        }
    }
    (-(sum.ln() + log_factor)).exp()
}

/// Gauss–Hermite rule with `k` nodes for the weight e^{−t²}.
///
/// Nodes are the eigenvalues of the Jacobi matrix (Golub–Welsch), located by
/// Sturm bisection; weights are the Christoffel numbers. The rule is exactly
/// symmetric about zero.
pub fn gauss_hermite_rule(k: usize) -> Result<GaussHermiteRule> {
    if k == 0 || k > MAX_HERMITE_NODES {
        return Err(Error::domain(format!(
            "Gauss-Hermite rule needs 1 <= k <= {MAX_HERMITE_NODES}, got {k}"
        )));
    }
    // Gershgorin: |t| ≤ 2·max off-diagonal.
    let bound = (2.0 * (k as f64 - 1.0)).sqrt() + 1.0;
    let half = k / 2;
    let mut positive = Vec::with_capacity(half);
    for i in (k - half)..k {
        positive.push(jacobi_eigenvalue(k, i, bound));
    }

    let mut nodes = Vec::with_capacity(k);
    let mut weights = Vec::with_capacity(k);
    for &t in positive.iter().rev() {
        nodes.push(-t);
        weights.push(christoffel_weight(k, t));
    }
    if k % 2 == 1 {
        nodes.push(0.0);
        weights.push(christoffel_weight(k, 0.0));
    }
    for &t in &positive {
        nodes.push(t);
        weights.push(christoffel_weight(k, t));
    }
    Ok(GaussHermiteRule { nodes, weights })
}

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod_panel(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = KRONROD_WEIGHTS[7] * fc;
    let mut gauss = GAUSS_WEIGHTS[3] * fc;
    for j in 0..7 {
        let dx = half * KRONROD_NODES[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += KRONROD_WEIGHTS[j] * pair;
        if j % 2 == 1 {
            gauss += GAUSS_WEIGHTS[j / 2] * pair;
        }
    }
    Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Globally adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// The interval is first split into `panels` equal pieces; the panel with the
/// largest error estimate is bisected until the summed estimate drops below
/// `abs_tol`. Fails with [`Error::Convergence`] once `max_evaluations` is
/// exhausted.
pub fn integrate_adaptive(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_evaluations: usize,
    panels: usize,
) -> Result<f64> {
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut heap = BinaryHeap::with_capacity(4 * panels);
    let mut evaluations = 0;
    for i in 0..panels {
        let lo = a + width * i as f64;
        let hi = if i + 1 == panels { b } else { lo + width };
        heap.push(kronrod_panel(&mut f, lo, hi));
        evaluations += 15;
    }

    loop {
        let error: f64 = heap.iter().map(|p| p.error).sum();
        if error <= abs_tol {
            return Ok(heap.iter().map(|p| p.value).sum());
        }
        if evaluations + 30 > max_evaluations {
            return Err(Error::Convergence {
                tolerance: abs_tol,
                evaluations,
                estimate: heap.iter().map(|p| p.value).sum(),
                error,
            });
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        heap.push(kronrod_panel(&mut f, worst.a, mid));
        heap.push(kronrod_panel(&mut f, mid, worst.b));
        evaluations += 30;
    }
}

/// Gaussian expectations ∫f(z)φ(z)dz with a fixed pair of Gauss–Hermite rules
/// (k and 2k nodes) built once up front.
///
/// When the two rules disagree by more than the tolerance the integrand is
/// treated as too rough for fixed nodes and the expectation is recomputed by
/// adaptive Gauss–Kronrod on [−T, T].
#[derive(Debug, Clone)]
pub struct GaussianIntegrator {
    settings: QuadratureSettings,
    coarse: GaussHermiteRule,
    fine: GaussHermiteRule,
}

impl GaussianIntegrator {
    pub fn new(settings: QuadratureSettings) -> Result<Self> {
        settings.validate()?;
        Ok(GaussianIntegrator {
            settings,
            coarse: gauss_hermite_rule(settings.node_count)?,
            fine: gauss_hermite_rule(2 * settings.node_count)?,
        })
    }

    pub fn settings(&self) -> &QuadratureSettings {
        &self.settings
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> Result<f64> {
        let coarse = self.coarse.gaussian_expectation(&mut f);
        let fine = self.fine.gaussian_expectation(&mut f);
        if (coarse - fine).abs() <= self.settings.abs_tolerance {
            return Ok(fine);
        }
        let bound = self.settings.truncation_bound;
        integrate_adaptive(
            |z| f(z) * FRAC_1_SQRT_2PI * (-0.5 * z * z).exp(),
            -bound,
            bound,
            self.settings.abs_tolerance,
            MAX_FALLBACK_EVALUATIONS,
            FALLBACK_PANELS,
        )
    }
}

/// One-shot ∫f(z)φ(z)dz. Builds the Gauss–Hermite rules on every call; hold a
/// [`GaussianIntegrator`] when integrating repeatedly.
pub fn integrate_gaussian_weight(
    f: impl FnMut(f64) -> f64,
    settings: &QuadratureSettings,
) -> Result<f64> {
    GaussianIntegrator::new(*settings)?.integrate(f)
}
