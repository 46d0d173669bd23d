//! Reading z-scores: one value per line, optionally under a `z` header.

use std::path::Path;

use mtc_core::TestStatistics;

use crate::error::{io_error, CliError};

/// Parses newline-delimited reals. Blank lines are skipped, a first
/// non-blank line of `z` (optionally quoted) is treated as a header, and
/// at least two values are required.
pub fn parse_statistics(text: &str) -> Result<TestStatistics, CliError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut values = Vec::new();
    let mut seen_content = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let first = !seen_content;
        seen_content = true;
        if first && matches!(line, "z" | "\"z\"" | "Z" | "\"Z\"") {
            continue;
        }
        if line.contains(',') {
            return Err(CliError::Input(format!(
                "line {line_no}: expected a single column, found '{line}'"
            )));
        }
        let v: f64 = line
            .parse()
            .map_err(|_| CliError::Input(format!("line {line_no}: cannot parse '{line}' as a number")))?;
        if !v.is_finite() {
            return Err(CliError::Input(format!("line {line_no}: value '{line}' is not finite")));
        }
        values.push(v);
    }
    if values.len() < 2 {
        return Err(CliError::Input(format!(
            "need at least 2 test statistics, found {}",
            values.len()
        )));
    }
    TestStatistics::new(values).map_err(|e| CliError::Input(e.to_string()))
}

pub fn read_statistics(path: &Path) -> Result<TestStatistics, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error("read", path, e))?;
    parse_statistics(&text)
}
