//! Reports (pretty JSON, keys sorted) and columnar tables.

use std::path::Path;

use kl_core::grid::log_spaced;
use kl_core::tables::write_table;
use kl_core::{DesingFn, Eta, GridSpec};
use serde::Serialize;
use serde_json::Value;

use crate::resolve::usage;
use crate::Failure;

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

/// Explicit grids can be huge; reports only carry their size.
pub fn grid_summary(grid: &GridSpec) -> Value {
    match grid {
        GridSpec::Explicit { points } => serde_json::json!({
            "kind": "explicit",
            "count": points.len(),
        }),
        g => to_value(g),
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

pub fn emit_report(report: &Value, path: Option<&Path>) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    match path {
        Some(p) => write_file(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Upper end of a plotting range on `(0, η)`.
pub fn plot_top(eta: Eta) -> f64 {
    if eta.is_finite() {
        eta.get() * 0.999
    } else {
        10.0
    }
}

/// `n` log-spaced points on `[lo, hi]` plus any `extra` points inside it.
pub fn plot_points(lo: f64, hi: f64, n: usize, extra: &[f64]) -> Vec<f64> {
    let mut ts = if hi > lo { log_spaced(lo, hi, n) } else { vec![hi] };
    ts.extend(extra.iter().copied().filter(|&t| t >= lo && t <= hi));
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

/// `t,phi,dphi` rows, with a `reference` column when given.
pub fn phi_table(
    phi: &DesingFn,
    reference: Option<&DesingFn>,
    ts: &[f64],
    meta: &[(&str, String)],
) -> Result<String, Failure> {
    let mut header = vec!["t".to_string(), "phi".into(), "dphi".into()];
    if reference.is_some() {
        header.push("reference".into());
    }
    let mut rows = Vec::with_capacity(ts.len());
    for &t in ts {
        let mut row = vec![t, phi.eval(t)?, phi.left_deriv(t)?];
        if let Some(r) = reference {
            row.push(r.eval(t)?);
        }
        rows.push(row);
    }
    Ok(write_table(meta, &header, rows))
}
