//! Plug-in estimate of the common correlation ρ from a single vector of
//! exchangeable statistics.
//!
//! Under the null the statistics scatter around one shared random level, so
//! E[s²] = 1 − ρ and ρ̂ = (1 − s²)·I(s² < 1).

use serde::Serialize;

use crate::error::{Error, Result};

/// Upper clamp for ρ. Keeps √(1 − ρ) strictly positive downstream.
pub const RHO_MAX: f64 = 1.0 - 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationEstimate {
    pub rho_hat: f64,
    pub sample_variance: f64,
    /// s² ≥ 1, so ρ̂ was set to zero.
    pub indicator_fired: bool,
    /// 1 − s² exceeded [`RHO_MAX`] and was clamped.
    pub upper_clipped: bool,
}

/// Unbiased sample variance X'(I − J/n)X / (n − 1), two-pass.
pub fn sample_variance(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::domain(format!(
            "sample variance needs at least 2 values, got {n}"
        )));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok(ss / (n - 1) as f64)
}

pub fn estimate_rho_mom(values: &[f64]) -> Result<CorrelationEstimate> {
    let s2 = sample_variance(values)?;
    let mut estimate = CorrelationEstimate {
        rho_hat: 0.0,
        sample_variance: s2,
        indicator_fired: false,
        upper_clipped: false,
    };
    if s2 >= 1.0 {
        estimate.indicator_fired = true;
    } else if 1.0 - s2 > RHO_MAX {
        estimate.rho_hat = RHO_MAX;
        estimate.upper_clipped = true;
    } else {
        estimate.rho_hat = 1.0 - s2;
    }
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn variance_by_hand() {
        assert_eq!(sample_variance(&[0.0, 1.0]).unwrap(), 0.5);
        assert_eq!(sample_variance(&[0.0, 2.0]).unwrap(), 2.0);
        assert_eq!(sample_variance(&[3.5; 7]).unwrap(), 0.0);
        assert!(sample_variance(&[1.0]).is_err());
        assert!(sample_variance(&[]).is_err());
    }

    #[test]
    fn estimator_branches() {
        // s² = 0.5
        let e = estimate_rho_mom(&[0.0, 1.0]).unwrap();
        assert_eq!(e.rho_hat, 0.5);
        assert!(!e.indicator_fired && !e.upper_clipped);

        // s² = 1.3: deviations ±√0.65 around 0.
        let d = 0.65f64.sqrt();
        let e = estimate_rho_mom(&[-d, d]).unwrap();
        assert!((e.sample_variance - 1.3).abs() < 1e-15);
        assert_eq!(e.rho_hat, 0.0);
        assert!(e.indicator_fired && !e.upper_clipped);

        let e = estimate_rho_mom(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(e.rho_hat, RHO_MAX);
        assert!(e.upper_clipped && !e.indicator_fired);

        // s² exactly 1 fires the indicator.
        let e = estimate_rho_mom(&[0.0, 2f64.sqrt()]).unwrap();
        assert!(e.sample_variance >= 1.0 - 1e-15);
        assert!(estimate_rho_mom(&[0.5]).is_err());
    }

    proptest! {
        #[test]
        fn shift_invariance(values in prop::collection::vec(-5.0f64..5.0, 2..60), c in -3.0f64..3.0) {
            let base = estimate_rho_mom(&values).unwrap();
            let shifted: Vec<f64> = values.iter().map(|v| v + c).collect();
            let moved = estimate_rho_mom(&shifted).unwrap();
            prop_assert!((base.sample_variance - moved.sample_variance).abs() <= 1e-10 * (1.0 + base.sample_variance));
            prop_assert!((base.rho_hat - moved.rho_hat).abs() <= 1e-10);
        }

        #[test]
        fn estimate_invariants(values in prop::collection::vec(-3.0f64..3.0, 2..60)) {
            let e = estimate_rho_mom(&values).unwrap();
            prop_assert!(e.rho_hat >= 0.0 && e.rho_hat <= RHO_MAX);
            if e.indicator_fired {
                prop_assert_eq!(e.rho_hat, 0.0);
            }
            if !e.indicator_fired && !e.upper_clipped {
                prop_assert_eq!(e.rho_hat, 1.0 - e.sample_variance);
            }
        }
    }
}
