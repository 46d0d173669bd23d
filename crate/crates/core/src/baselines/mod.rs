//! Comparator procedures that work on p-values: Bonferroni, the harmonic
//! mean p-value (raw and Landau-calibrated) and Fisher's combination.

mod landau;

pub use landau::stable_landau_sf;

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::special_math::std_normal_sf;
use crate::types::{check_alpha, GlobalTestOutcome, Method, Sides, TestStatistics};

/// Floor applied to p-values before reciprocals and logarithms.
pub const P_FLOOR: f64 = 1e-300;

/// Location offset 1 − γ + ln(π/2) of the stable limit of the mean of 1/pᵢ.
pub const HMP_LOCATION_OFFSET: f64 = 0.874_367_040_387_922;

/// Scale of the same limit.
pub const HMP_SCALE: f64 = FRAC_PI_2;

/// Individual p-values, each in (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct PValueVector {
    values: Vec<f64>,
}

impl PValueVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("need at least one p-value"));
        }
        if let Some(i) = values.iter().position(|p| !(*p > 0.0 && *p <= 1.0)) {
            return Err(Error::domain(format!(
                "p-value at index {i} is outside (0, 1]: {}",
                values[i]
            )));
        }
        Ok(PValueVector { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Per-statistic normal p-values, floored at [`P_FLOOR`].
pub fn z_to_p(x: &TestStatistics, sides: Sides) -> PValueVector {
    let values = x
        .values()
        .iter()
        .map(|&z| {
            let p = match sides {
                Sides::One => std_normal_sf(z),
                Sides::Two => 2.0 * std_normal_sf(z.abs()),
            };
            p.clamp(P_FLOOR, 1.0)
        })
        .collect();
    PValueVector { values }
}

fn outcome(method: Method, statistic: f64, p_value: f64, alpha: f64) -> GlobalTestOutcome {
    GlobalTestOutcome {
        method,
        sides: Sides::Two,
        statistic,
        rho_used: None,
        p_value,
        alpha,
        critical_value: None,
        significant_indices: Vec::new(),
        reject_global: p_value <= alpha,
    }
}

/// Global p-value min(1, n·min pᵢ).
pub fn bonferroni_p(p: &PValueVector) -> f64 {
    (p.len() as f64 * p.min()).min(1.0)
}

/// Bonferroni: the global statistic is min pᵢ. An index is significant when its
/// adjusted p-value min(1, n·pᵢ) is at most α, i.e. pᵢ ≤ α/n.
pub fn bonferroni_test(p: &PValueVector, alpha: f64) -> Result<GlobalTestOutcome> {
    check_alpha(alpha)?;
    let n = p.len() as f64;
    let mut out = outcome(Method::Bonferroni, p.min(), bonferroni_p(p), alpha);
    out.critical_value = Some(alpha / n);
    out.significant_indices = p
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &pi)| (n * pi).min(1.0) <= alpha)
        .map(|(i, _)| i)
        .collect();
    Ok(out)
}

/// n / Σ 1/pᵢ
pub fn harmonic_mean_p(p: &PValueVector) -> f64 {
    let reciprocal_sum: f64 = p.values().iter().map(|&pi| 1.0 / pi.max(P_FLOOR)).sum();
    p.len() as f64 / reciprocal_sum
}

/// Raw HMP test: rejects when the harmonic mean itself is at most α.
pub fn hmp_test(p: &PValueVector, alpha: f64) -> Result<GlobalTestOutcome> {
    check_alpha(alpha)?;
    let h = harmonic_mean_p(p);
    Ok(outcome(Method::Hmp, h, h, alpha))
}

/// Asymptotically exact p-value for the harmonic mean: the mean of 1/pᵢ is
/// referred to a stable(α = 1, β = 1) law with location ln n + 0.874… and
/// scale π/2.
pub fn hmp_adjusted_p(p: &PValueVector) -> Result<f64> {
    let h = harmonic_mean_p(p);
    let location = (p.len() as f64).ln() + HMP_LOCATION_OFFSET;
    stable_landau_sf((1.0 / h - location) / HMP_SCALE)
}

pub fn hmp_adjusted_test(p: &PValueVector, alpha: f64) -> Result<GlobalTestOutcome> {
    check_alpha(alpha)?;
    let h = harmonic_mean_p(p);
    Ok(outcome(Method::HmpAdjusted, h, hmp_adjusted_p(p)?, alpha))
}

/// −2 Σ ln pᵢ
pub fn fisher_statistic(p: &PValueVector) -> f64 {
    -2.0 * p.values().iter().map(|&pi| pi.max(P_FLOOR).ln()).sum::<f64>()
}

/// Upper χ²₂ₙ tail of the Fisher statistic, Q(n, T/2).
pub fn fisher_p(p: &PValueVector) -> Result<f64> {
    let t = fisher_statistic(p);
    if t <= 0.0 {
        return Ok(1.0);
    }
    statrs::function::gamma::checked_gamma_ur(p.len() as f64, t / 2.0)
        .map(|q| q.clamp(0.0, 1.0))
        .map_err(|e| Error::domain(format!("chi-squared tail: {e}")))
}

pub fn fisher_combined_test(p: &PValueVector, alpha: f64) -> Result<GlobalTestOutcome> {
    check_alpha(alpha)?;
    Ok(outcome(Method::Fisher, fisher_statistic(p), fisher_p(p)?, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> PValueVector {
        PValueVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn p_vector_validation() {
        assert!(PValueVector::new(vec![]).is_err());
        assert!(PValueVector::new(vec![0.0]).is_err());
        assert!(PValueVector::new(vec![0.5, 1.2]).is_err());
        assert!(PValueVector::new(vec![f64::NAN]).is_err());
        assert_eq!(pv(&[1.0, 0.3]).len(), 2);
    }

    #[test]
    fn z_conversion() {
        let x = TestStatistics::new(vec![0.0, 1.959963984540054, -1.959963984540054, 40.0]).unwrap();
        let two = z_to_p(&x, Sides::Two);
        assert_eq!(two.values()[0], 1.0);
        assert!((two.values()[1] - 0.05).abs() < 1e-15);
        assert_eq!(two.values()[1], two.values()[2]);
        assert_eq!(two.values()[3], P_FLOOR);
        let y = TestStatistics::new(vec![1.6448536269514722, 0.0]).unwrap();
        let one = z_to_p(&y, Sides::One);
        assert!((one.values()[0] - 0.05).abs() < 1e-15);
        assert_eq!(one.values()[1], 0.5);
    }

    #[test]
    fn bonferroni_examples() {
        let out = bonferroni_test(&pv(&[0.001, 0.5]), 0.05).unwrap();
        assert!(out.reject_global);
        assert!((out.p_value - 0.002).abs() < 1e-16);
        assert_eq!(out.significant_indices, vec![0]);

        let out = bonferroni_test(&pv(&[1.0, 1.0, 1.0]), 0.05).unwrap();
        assert_eq!(out.p_value, 1.0);
        assert!(!out.reject_global && out.significant_indices.is_empty());

        let single = bonferroni_test(&pv(&[0.03]), 0.05).unwrap();
        assert_eq!(single.p_value, 0.03);
        assert!(single.reject_global);
    }

    #[test]
    fn hmp_examples() {
        assert!((harmonic_mean_p(&pv(&[0.2; 9])) - 0.2).abs() < 1e-15);
        assert!((harmonic_mean_p(&pv(&[0.01, 1.0])) - 2.0 / 101.0).abs() < 1e-16);
        let out = hmp_test(&pv(&[0.01, 1.0]), 0.05).unwrap();
        assert!(out.reject_global);
    }

    /// With one test 1/p is exactly Pareto, P(1/U ≥ x) = 1/x; the stable limit
    /// is within 0.01 of that through the usual significance range and errs
    /// on the conservative side.
    #[test]
    fn hmp_adjusted_single_test_is_calibrated() {
        for p in [0.001, 0.005, 0.01, 0.02, 0.05] {
            let adj = hmp_adjusted_p(&pv(&[p])).unwrap();
            assert!((adj - p).abs() <= 0.01, "p={p}: adjusted {adj}");
        }
        for p in [0.1, 0.3, 0.4] {
            assert!(hmp_adjusted_p(&pv(&[p])).unwrap() >= p);
        }
    }

    #[test]
    fn fisher_examples() {
        let p = fisher_p(&pv(&[0.05])).unwrap();
        assert!((p - 0.05).abs() < 1e-12, "{p}");
        assert_eq!(fisher_p(&pv(&[1.0, 1.0, 1.0])).unwrap(), 1.0);
        // n = 2: Q(2, x) = e^{-x}(1 + x), x = -ln(p1 p2).
        let (a, b) = (0.2f64, 0.03f64);
        let x = -(a * b).ln();
        let exact = (-x).exp() * (1.0 + x);
        assert!((fisher_p(&pv(&[a, b])).unwrap() - exact).abs() < 1e-12);
        let out = fisher_combined_test(&pv(&[0.001, 0.002, 0.5]), 0.05).unwrap();
        assert!(out.reject_global);
    }

    #[test]
    fn alpha_is_checked() {
        let p = pv(&[0.5]);
        assert!(bonferroni_test(&p, 0.0).is_err());
        assert!(hmp_test(&p, 1.0).is_err());
        assert!(hmp_adjusted_test(&p, -0.1).is_err());
        assert!(fisher_combined_test(&p, 2.0).is_err());
    }

    fn p_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1e-8f64..=1.0, 1..200)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn bonferroni_bounds_sidak(values in p_strategy()) {
            let p = PValueVector::new(values).unwrap();
            let n = p.len() as i32;
            let sidak = 1.0 - (1.0 - p.min()).powi(n);
            prop_assert!(bonferroni_p(&p) >= sidak - 1e-15);
        }

        #[test]
        fn hmp_scale_and_mean_inequalities(values in p_strategy(), c in 0.01f64..=1.0) {
            let p = PValueVector::new(values.clone()).unwrap();
            let h = harmonic_mean_p(&p);
            let scaled = PValueVector::new(values.iter().map(|v| v * c).collect()).unwrap();
            prop_assert!((harmonic_mean_p(&scaled) - c * h).abs() <= 1e-12 * h);
            let n = values.len() as f64;
            let geometric = (values.iter().map(|v| v.ln()).sum::<f64>() / n).exp();
            let arithmetic = values.iter().sum::<f64>() / n;
            prop_assert!(h <= geometric * (1.0 + 1e-12));
            prop_assert!(h <= arithmetic * (1.0 + 1e-12));
        }

        #[test]
        fn global_p_values_in_unit_interval(values in p_strategy()) {
            let p = PValueVector::new(values).unwrap();
            for g in [bonferroni_p(&p), harmonic_mean_p(&p), hmp_adjusted_p(&p).unwrap(), fisher_p(&p).unwrap()] {
                prop_assert!((0.0..=1.0).contains(&g));
            }
        }

        /// Holds wherever a rejection is possible; for n < 25 and HMP above
        /// ~0.44 the asymptotic law dips below the raw value.
        #[test]
        fn adjustment_inflates_hmp(values in p_strategy()) {
            let p = PValueVector::new(values).unwrap();
            let h = harmonic_mean_p(&p);
            prop_assume!(h <= 0.4 || p.len() >= 25);
            prop_assert!(hmp_adjusted_p(&p).unwrap() >= h);
        }
    }
}
