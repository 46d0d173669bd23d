use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standardized z-scores X₁..Xₙ, n ≥ 2, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct TestStatistics {
    values: Vec<f64>,
}

impl TestStatistics {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::domain(format!(
                "need at least 2 test statistics, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "test statistic at index {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(TestStatistics { values })
    }

    /// For callers that construct finite vectors of length ≥ 2 by design.
    pub(crate) fn from_finite(values: Vec<f64>) -> Self {
        debug_assert!(values.len() >= 2 && values.iter().all(|v| v.is_finite()));
        TestStatistics { values }
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

    /// −X, for the negative one-sided alternative.
    pub fn negated(&self) -> Self {
        TestStatistics {
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.values
    }
}

/// First index attaining the maximum of `key` over `values`.
fn argmax_by(values: &[f64], key: impl Fn(f64) -> f64) -> (f64, usize) {
    let mut best = (key(values[0]), 0);
    for (i, &v) in values.iter().enumerate().skip(1) {
        let k = key(v);
        if k > best.0 {
            best = (k, i);
        }
    }
    best
}

/// M_n(|X|) = max |Xᵢ| and the first index attaining it.
pub fn max_abs_statistic(x: &TestStatistics) -> (f64, usize) {
    argmax_by(&x.values, f64::abs)
}

/// M_n(X) = max Xᵢ and the first index attaining it.
pub fn max_statistic(x: &TestStatistics) -> (f64, usize) {
    argmax_by(&x.values, |v| v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sides {
    /// Positive one-sided alternative. Negate the statistics for the negative side.
    One,
    Two,
}

impl Sides {
    pub fn as_str(self) -> &'static str {
        match self {
            Sides::One => "one",
            Sides::Two => "two",
        }
    }

    /// The M-statistic for this alternative.
    pub fn max_statistic(self, x: &TestStatistics) -> (f64, usize) {
        match self {
            Sides::One => max_statistic(x),
            Sides::Two => max_abs_statistic(x),
        }
    }
}

impl fmt::Display for Sides {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sides {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" => Ok(Sides::One),
            "two" => Ok(Sides::Two),
            other => Err(Error::domain(format!("unknown sides '{other}' (expected one|two)"))),
        }
    }
}

/// Global testing procedures available to the CLI and the simulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Max-statistic test with the plug-in correlation estimate.
    #[serde(rename = "gnp-mom")]
    GnpMom,
    #[serde(rename = "bonferroni")]
    Bonferroni,
    /// Unadjusted harmonic mean p-value.
    #[serde(rename = "hmp")]
    Hmp,
    /// Harmonic mean p-value calibrated against its Landau limit.
    #[serde(rename = "hmp-adj")]
    HmpAdjusted,
    /// Fisher's combined probability test.
    #[serde(rename = "fisher")]
    Fisher,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::GnpMom,
        Method::Bonferroni,
        Method::Hmp,
        Method::HmpAdjusted,
        Method::Fisher,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::GnpMom => "gnp-mom",
            Method::Bonferroni => "bonferroni",
            Method::Hmp => "hmp",
            Method::HmpAdjusted => "hmp-adj",
            Method::Fisher => "fisher",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::domain(format!(
                    "unknown method '{s}' (expected gnp-mom|bonferroni|hmp|hmp-adj|fisher)"
                ))
            })
    }
}

/// Result of a global test of H₀: μ = 0.
///
/// `reject_global` is decided by `p_value <= alpha`. When present,
/// `critical_value` is on the scale of `statistic` and may disagree with the
/// p-value decision only within solver tolerance of the boundary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalTestOutcome {
    pub method: Method,
    pub sides: Sides,
    pub statistic: f64,
    pub rho_used: Option<f64>,
    pub p_value: f64,
    pub alpha: f64,
    pub critical_value: Option<f64>,
    pub significant_indices: Vec<usize>,
    pub reject_global: bool,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}
