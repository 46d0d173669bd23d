//! Max-statistic global test for jointly normal, exchangeable statistics.
//!
//! With Xᵢ = √ρ Z₀ + √(1−ρ) Zᵢ, conditioning on Z₀ = z makes the |Xᵢ|
//! i.i.d. folded normals with location √ρ z and scale √(1−ρ), so
//!
//! ```text
//! P(M_n(|X|) ≤ m) = ∫ Ψ_{√ρ z, √(1−ρ)}(m)ⁿ φ(z) dz
//! ```
//!
//! and the one-sided analogue replaces Ψ by Φ((z√ρ + m)/√(1−ρ)). Both are
//! evaluated as ∫(1 − ·ⁿ)φ so small p-values keep their relative precision.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{estimate_rho_mom, CorrelationEstimate, RHO_MAX};
use crate::roots::brent;
use crate::special_math::{folded_ln_cdf_unchecked, std_normal_ln_cdf, GaussianIntegrator};
use crate::types::{check_alpha, GlobalTestOutcome, Method, Sides, TestStatistics};

const TWO_SIDED_BRACKET: (f64, f64) = (0.0, 40.0);
const ONE_SIDED_BRACKET: (f64, f64) = (-10.0, 40.0);
const CRITICAL_X_TOL: f64 = 1e-10;
const CRITICAL_P_TOL: f64 = 1e-10;

/// Clamp ρ into [0, RHO_MAX]; NaN is rejected.
pub fn clamp_rho(rho: f64) -> Result<f64> {
    if rho.is_nan() {
        return Err(Error::domain("correlation is NaN"));
    }
    Ok(rho.clamp(0.0, RHO_MAX))
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::domain("number of statistics must be positive"))
    } else {
        Ok(())
    }
}

/// 1 − exp(n·ln q) without cancellation; ln q = −∞ gives 1.
fn one_minus_power(n: usize, ln_q: f64) -> f64 {
    -(n as f64 * ln_q).exp_m1()
}

/// p₀ = 1 − ∫Ψⁿ_{√ρ z, √(1−ρ)}(m) φ(z) dz for the max absolute statistic `m`.
pub fn global_p_two_sided(m: f64, n: usize, rho: f64, integ: &GaussianIntegrator) -> Result<f64> {
    check_n(n)?;
    if !(m >= 0.0) {
        return Err(Error::domain(format!(
            "max absolute statistic must be non-negative, got {m}"
        )));
    }
    let rho = clamp_rho(rho)?;
    if m == 0.0 {
        return Ok(1.0);
    }
    if m == f64::INFINITY {
        return Ok(0.0);
    }
    let sigma = (1.0 - rho).sqrt();
    if rho == 0.0 {
        return Ok(one_minus_power(n, folded_ln_cdf_unchecked(m, 0.0, 1.0)));
    }
    let loading = rho.sqrt();
    let p = integ.integrate(|z| one_minus_power(n, folded_ln_cdf_unchecked(m, loading * z, sigma)))?;
    Ok(p.clamp(0.0, 1.0))
}

/// p = 1 − ∫Φⁿ((z√ρ + m)/√(1−ρ)) φ(z) dz for the max statistic `m`
/// (positive alternative).
pub fn global_p_one_sided(m: f64, n: usize, rho: f64, integ: &GaussianIntegrator) -> Result<f64> {
    check_n(n)?;
    if m.is_nan() {
        return Err(Error::domain("max statistic is NaN"));
    }
    let rho = clamp_rho(rho)?;
    if m == f64::INFINITY {
        return Ok(0.0);
    }
    if m == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    let sigma = (1.0 - rho).sqrt();
    if rho == 0.0 {
        return Ok(one_minus_power(n, std_normal_ln_cdf(m)));
    }
    let loading = rho.sqrt();
    let p = integ.integrate(|z| one_minus_power(n, std_normal_ln_cdf((z * loading + m) / sigma)))?;
    Ok(p.clamp(0.0, 1.0))
}

pub fn global_p(m: f64, n: usize, rho: f64, sides: Sides, integ: &GaussianIntegrator) -> Result<f64> {
    match sides {
        Sides::One => global_p_one_sided(m, n, rho, integ),
        Sides::Two => global_p_two_sided(m, n, rho, integ),
    }
}

/// c_α with global_p(c_α) = α, by Brent's method on the monotone p-value.
pub fn critical_value(
    n: usize,
    rho: f64,
    alpha: f64,
    sides: Sides,
    integ: &GaussianIntegrator,
) -> Result<f64> {
    check_n(n)?;
    check_alpha(alpha)?;
    let rho = clamp_rho(rho)?;
    let (lo, hi) = match sides {
        Sides::One => ONE_SIDED_BRACKET,
        Sides::Two => TWO_SIDED_BRACKET,
    };
    brent(
        |c| Ok(global_p(c, n, rho, sides, integ)? - alpha),
        lo,
        hi,
        CRITICAL_X_TOL,
        CRITICAL_P_TOL,
        200,
    )
}

/// Indices whose statistic (absolute value when two-sided) is at least `c`.
pub fn select_significant(x: &TestStatistics, c: f64, sides: Sides) -> Vec<usize> {
    x.values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| match sides {
            Sides::One => v >= c,
            Sides::Two => v.abs() >= c,
        })
        .map(|(i, _)| i)
        .collect()
}

/// Where the correlation used by the test comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoChoice {
    Estimate,
    Known(f64),
}

/// A GNP test together with the correlation estimate it used, if any.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GnpAnalysis {
    pub outcome: GlobalTestOutcome,
    pub estimate: Option<CorrelationEstimate>,
}

/// Global p-value of the plug-in test without solving for c_α.
pub fn gnp_mom_p_value(x: &TestStatistics, sides: Sides, integ: &GaussianIntegrator) -> Result<f64> {
    let estimate = estimate_rho_mom(x.values())?;
    let (m, _) = sides.max_statistic(x);
    global_p(m, x.len(), estimate.rho_hat, sides, integ)
}

pub fn run_gnp_test(
    x: &TestStatistics,
    alpha: f64,
    sides: Sides,
    rho: RhoChoice,
    integ: &GaussianIntegrator,
) -> Result<GnpAnalysis> {
    check_alpha(alpha)?;
    let (rho_used, estimate) = match rho {
        RhoChoice::Estimate => {
            let e = estimate_rho_mom(x.values())?;
            (e.rho_hat, Some(e))
        }
        RhoChoice::Known(r) => {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::domain(format!("correlation must lie in [0, 1), got {r}")));
            }
            (clamp_rho(r)?, None)
        }
    };
    let n = x.len();
    let (m_stat, argmax) = sides.max_statistic(x);
    let p_value = global_p(m_stat, n, rho_used, sides, integ)?;
    let c = critical_value(n, rho_used, alpha, sides, integ)?;
    let reject_global = p_value <= alpha;
    let significant_indices = if reject_global {
        let mut selected = select_significant(x, c, sides);
        // The maximum is significant whenever the global null falls, even if
        // it sits within solver tolerance below c.
        if !selected.contains(&argmax) {
            selected.push(argmax);
            selected.sort_unstable();
        }
        selected
    } else {
        Vec::new()
    };
    Ok(GnpAnalysis {
        outcome: GlobalTestOutcome {
            method: Method::GnpMom,
            sides,
            statistic: m_stat,
            rho_used: Some(rho_used),
            p_value,
            alpha,
            critical_value: Some(c),
            significant_indices,
            reject_global,
        },
        estimate,
    })
}

/// The plug-in test: ρ̂ from the data, then p-value, c_α and selection.
pub fn run_gnp_mom_test(
    x: &TestStatistics,
    alpha: f64,
    sides: Sides,
    integ: &GaussianIntegrator,
) -> Result<GlobalTestOutcome> {
    Ok(run_gnp_test(x, alpha, sides, RhoChoice::Estimate, integ)?.outcome)
}
