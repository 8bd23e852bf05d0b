//! CSV rows shared by every experiment: parameter, sup_phi, res_lich,
//! res_vector, iterations, branch.

use super::{ContinuationTrace, SolveReport};
use crate::error::{Error, Result};
use std::io::Write;

pub const COLUMNS: [&str; 6] = ["parameter", "sup_phi", "res_lich", "res_vector", "iterations", "branch"];

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub parameter: f64,
    pub sup_phi: f64,
    pub res_lich: f64,
    pub res_vector: f64,
    pub iterations: usize,
    pub branch: String,
}

impl Row {
    pub fn from_report(parameter: f64, r: &SolveReport) -> Row {
        Row {
            parameter,
            sup_phi: r.sup_phi,
            res_lich: r.res_lich,
            res_vector: r.res_vector,
            iterations: r.iterations,
            branch: r.branch.label().to_string(),
        }
    }
}

pub fn trace_rows(trace: &ContinuationTrace) -> Vec<Row> {
    trace
        .points
        .iter()
        .map(|p| Row {
            parameter: p.k,
            sup_phi: p.sup_phi,
            res_lich: p.res_lich,
            res_vector: p.res_vector,
            iterations: p.iterations,
            branch: p.branch.label().to_string(),
        })
        .collect()
}

/// Fixed 12-digit scientific notation keeps output byte-stable.
pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.12e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn write_rows<W: Write>(out: W, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Profile(format!("CSV write failed: {e}"));
    w.write_record(COLUMNS).map_err(io)?;
    for r in rows {
        w.write_record([
            fmt_num(r.parameter),
            fmt_num(r.sup_phi),
            fmt_num(r.res_lich),
            fmt_num(r.res_vector),
            r.iterations.to_string(),
            r.branch.clone(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Profile(format!("CSV write failed: {e}")))?;
    Ok(())
}
