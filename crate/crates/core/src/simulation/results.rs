use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::Method;

/// One (method, n, ρ, α, sweep value) cell of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub method: Method,
    pub n: usize,
    pub rho: f64,
    pub alpha: f64,
    /// μ₁, s or 0 for null rows.
    pub sweep_value: f64,
    pub rejection_rate: f64,
    /// √(r(1−r)/m)
    pub se: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl ExperimentRow {
    pub(crate) fn from_count(
        method: Method,
        n: usize,
        rho: f64,
        alpha: f64,
        sweep_value: f64,
        rejections: u64,
        replicates: usize,
        seed: u64,
    ) -> Self {
        let rate = rejections as f64 / replicates as f64;
        ExperimentRow {
            method,
            n,
            rho,
            alpha,
            sweep_value,
            rejection_rate: rate,
            se: (rate * (1.0 - rate) / replicates as f64).sqrt(),
            replicates,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
#[serde(transparent)]
pub struct ExperimentResult {
    pub rows: Vec<ExperimentRow>,
}

impl ExperimentResult {
    /// First row matching the key, if present.
    pub fn find(&self, method: Method, n: usize, rho: f64, alpha: f64, sweep_value: f64) -> Option<&ExperimentRow> {
        self.rows.iter().find(|r| {
            r.method == method && r.n == n && r.rho == rho && r.alpha == alpha && r.sweep_value == sweep_value
        })
    }

    /// CSV with header `method,n,rho,alpha,sweep_value,rejection_rate,se,replicates,seed`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row).map_err(io_error)?;
        }
        if self.rows.is_empty() {
            w.write_record(["method", "n", "rho", "alpha", "sweep_value", "rejection_rate", "se", "replicates", "seed"])
                .map_err(io_error)?;
        }
        w.flush().map_err(|e| Error::domain(format!("write failed: {e}")))
    }

    /// A JSON array of row objects.
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self).map_err(|e| Error::domain(format!("write failed: {e}")))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::domain(e.to_string()))
    }
}

fn io_error(e: csv::Error) -> Error {
    Error::domain(format!("write failed: {e}"))
}
