//! Deterministic artifact plumbing: UTF-8 JSON reports with sorted keys and
//! no timestamps, RFC-4180 CSV series, and drift summaries.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use magnls_core::dynamics::EvolveOutcome;
use magnls_core::functionals::DiagnosticsRecord;

use crate::Failure;

/// Writes `value` as pretty-printed JSON (keys are sorted by the underlying
/// map) with a trailing newline.
pub fn write_json(path: &Path, value: &Value) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes the diagnostics series as RFC-4180 CSV (CRLF record separators).
pub fn write_series(path: &Path, series: &[DiagnosticsRecord]) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut buf = String::with_capacity(series.len() * 240 + 128);
    buf.push_str(DiagnosticsRecord::CSV_HEADER);
    buf.push_str("\r\n");
    for row in series {
        buf.push_str(&row.to_csv_row());
        buf.push_str("\r\n");
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Largest deviation of a series column from its initial value, relative to
/// that value's magnitude.
pub fn relative_drift(
    series: &[DiagnosticsRecord],
    get: impl Fn(&DiagnosticsRecord) -> f64,
) -> f64 {
    let Some(first) = series.first() else {
        return 0.0;
    };
    let base = get(first);
    let scale = base.abs().max(1e-12);
    absolute_drift(series, get) / scale
}

/// Largest absolute deviation of a series column from its initial value; the
/// right summary for conserved quantities whose value may be zero (R for real
/// data).
pub fn absolute_drift(
    series: &[DiagnosticsRecord],
    get: impl Fn(&DiagnosticsRecord) -> f64,
) -> f64 {
    let Some(first) = series.first() else {
        return 0.0;
    };
    let base = get(first);
    series
        .iter()
        .map(|r| (get(r) - base).abs())
        .fold(0.0, f64::max)
}

/// Standard summary fragment of an evolution outcome.
pub fn outcome_summary(out: &EvolveOutcome) -> Value {
    json!({
        "status": out.status,
        "t_end": out.t_end,
        "samples": out.series.len(),
        "blowup_time_estimate": out.blowup_time_estimate,
        "drift": {
            "mass": relative_drift(&out.series, |r| r.mass),
            "energy": relative_drift(&out.series, |r| r.energy_e),
            "angular": absolute_drift(&out.series, |r| r.angular_r),
        },
    })
}
