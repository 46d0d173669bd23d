//! Upper tail of the totally skewed (β = 1) stable law with α = 1.
//!
//! Standard coordinates are S(1, 1, 0) with unit scale, the parameterization
//! in which the harmonic-mean-p location/scale constants are quoted. The
//! classical Landau variable L with density (1/π)∫₀^∞ e^{−t ln t − xt} sin(πt) dt
//! is L = (π/2)X + ln(π/2) for X in these coordinates.
//!
//! The tail comes from Nolan's non-oscillatory representation
//! F(x) = (1/π) ∫_{−π/2}^{π/2} exp(−e^{−πx/2} V(θ)) dθ with
//! V(θ) = (2/π)·((π/2 + θ)/cos θ)·exp((π/2 + θ) tan θ).

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::Result;
use crate::special_math::integrate_adaptive;

const TAIL_TOLERANCE: f64 = 1e-13;
const MAX_EVALUATIONS: usize = 200_000;
/// Integration runs over ψ = π/2 − θ ∈ [PSI_MIN, π]; the omitted sliver
/// contributes at most PSI_MIN/π.
const PSI_MIN: f64 = 1e-16;

/// ln V(θ) written in ψ = π/2 − θ, which stays accurate as θ → π/2.
fn ln_v(psi: f64) -> f64 {
    let shifted = PI - psi;
    let (sin, cos) = psi.sin_cos();
    (2.0 / PI).ln() + (shifted / sin).ln() + shifted * cos / sin
}

/// P(X > z) for X ~ S(1, 1, 0).
///
/// For large z the integrand only lives within ~2/z of θ = π/2, so the
/// integral is taken over s = ln ψ, where that region has unit width.
pub fn stable_landau_sf(z: f64) -> Result<f64> {
    if z.is_nan() {
        return Ok(f64::NAN);
    }
    if z == f64::INFINITY {
        return Ok(0.0);
    }
    if z == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    let shift = -FRAC_PI_2 * z;
    let integral = integrate_adaptive(
        |s| {
            let psi = s.exp();
            psi * -(-(shift + ln_v(psi)).exp()).exp_m1()
        },
        PSI_MIN.ln(),
        PI.ln(),
        TAIL_TOLERANCE,
        MAX_EVALUATIONS,
        32,
    )?;
    Ok((integral / PI).clamp(0.0, 1.0))
}
