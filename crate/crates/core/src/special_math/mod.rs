//! Scalar distribution functions and Gaussian-weight quadrature.
//!
//! Everything here is a pure function of its arguments. The error function
//! family comes from `libm`; the normal and folded-normal helpers are
//! written in terms of `erfc` so both tails keep full relative precision.

mod quadrature;

pub use quadrature::{
    gauss_hermite_rule, integrate_adaptive, integrate_gaussian_weight, GaussHermiteRule,
    GaussianIntegrator, QuadratureSettings, MAX_HERMITE_NODES,
};

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use crate::error::{Error, Result};

/// 1/√(2π)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Φ(x).
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail 1 − Φ(x), accurate far into the right tail.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// ln Φ(x) without cancellation on either side.
pub fn std_normal_ln_cdf(x: f64) -> f64 {
    if x > 0.0 {
        (-std_normal_sf(x)).ln_1p()
    } else {
        std_normal_cdf(x).ln()
    }
}

/// Φ⁻¹(p) for 0 < p < 1.
///
/// Starts from the `statrs` inverse complementary error function and applies
/// one Halley step against [`std_normal_cdf`] (or [`std_normal_sf`] in the
/// upper half, where that has the better conditioning).
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!(
            "normal quantile needs 0 < p < 1, got {p}"
        )));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let mut x = -SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    let density = std_normal_pdf(x);
    if density > 0.0 && x.is_finite() {
        let residual = if p < 0.5 {
            std_normal_cdf(x) - p
        } else {
            (1.0 - p) - std_normal_sf(x)
        };
        let step = residual / density;
        x -= step / (1.0 + 0.5 * x * step);
    }
    Ok(x)
}

/// P(lo ≤ Y ≤ hi) for Y ~ N(0,1), choosing the tail that avoids cancellation.
///
/// The result for `(lo, hi)` is bit-identical to the result for `(-hi, -lo)`.
fn normal_interval(lo: f64, hi: f64) -> f64 {
    if lo >= 0.0 {
        std_normal_sf(lo) - std_normal_sf(hi)
    } else if hi <= 0.0 {
        std_normal_sf(-hi) - std_normal_sf(-lo)
    } else {
        1.0 - (std_normal_sf(-lo) + std_normal_sf(hi))
    }
    .clamp(0.0, 1.0)
}

/// CDF of |Y| with Y ~ N(mu, sigma²):
/// ½[erf((x+μ)/(σ√2)) + erf((x−μ)/(σ√2))] for x > 0 and 0 otherwise.
///
/// Evaluated as P(−x ≤ Y ≤ x) through the normal tails, which is the same
/// quantity without the erf cancellation. Exactly symmetric in `mu`.
pub fn folded_normal_cdf(x: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!(
            "folded normal scale must be positive and finite, got {sigma}"
        )));
    }
    Ok(folded_cdf_unchecked(x, mu, sigma))
}

pub(crate) fn folded_cdf_unchecked(x: f64, mu: f64, sigma: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    normal_interval((-x - mu) / sigma, (x - mu) / sigma)
}

/// ln Ψ_{μ,σ}(x); `-inf` where Ψ is zero. Precise when Ψ is close to one,
/// which is the regime that matters once Ψ is raised to a large power.
pub(crate) fn folded_ln_cdf_unchecked(x: f64, mu: f64, sigma: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let lo = (-x - mu) / sigma;
    let hi = (x - mu) / sigma;
    // Mass outside [lo, hi].
    let outside = std_normal_sf(-lo) + std_normal_sf(hi);
    if outside < 0.5 {
        (-outside).ln_1p()
    } else {
        normal_interval(lo, hi).ln()
    }
}
