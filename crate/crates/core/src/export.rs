//! CSV output with a commented metadata header.
//!
//! Floats are written with 17 significant digits so that every value
//! round-trips exactly.

use std::io::Write;

use crate::analysis::{SweepResult, TcResult, WindowScan};
use crate::error::{Error, Result};
use crate::extraction::ExtractionRow;

pub const SWEEP_COLUMNS: [&str; 21] = [
    "delta_s",
    "temperature",
    "verdict",
    "log_negativity",
    "nu_minus",
    "nu_minus_pt",
    "purity",
    "flags",
    "width",
    "a_uu",
    "a_pp",
    "b_uu",
    "b_pp",
    "c_uu",
    "c_pp",
    "purity_threshold",
    "sep_expr_direct",
    "sep_expr_det",
    "raw_cross_residual",
    "as_constructed_nu_minus",
    "error",
];

pub const WINDOW_COLUMNS: [&str; 5] = ["width", "l_max", "verdict", "log_negativity", "as_constructed_nu_minus"];

pub const TC_COLUMNS: [&str; 6] = ["width", "route", "status", "t_c", "lo", "hi"];

pub const EXTRACTION_COLUMNS: [&str; 12] = [
    "delta_s",
    "temperature",
    "field_verdict",
    "log_negativity",
    "x",
    "y",
    "z",
    "delta",
    "threshold",
    "probe_entangled",
    "condition_margin",
    "oracle_min_eigenvalue",
];

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn io(e: std::io::Error) -> Error {
    Error::Numerical(format!("write failed: {e}"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Numerical(format!("csv write failed: {e}"))
}

fn write_table<W: Write>(
    mut out: W,
    metadata: &[(String, String)],
    columns: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    for (k, v) in metadata {
        writeln!(out, "# {k}: {v}").map_err(io)?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns).map_err(csv_err)?;
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io)
}

pub fn write_sweep_csv<W: Write>(out: W, metadata: &[(String, String)], result: &SweepResult) -> Result<()> {
    let width = result.spec.width;
    let rows = result.points.iter().map(|p| {
        let head = vec![fmt_f64(p.separation), fmt_f64(p.temperature)];
        let tail = match p.evaluation() {
            Some(e) => {
                let v = &e.verdict;
                let mut r = vec![
                    v.verdict.to_string(),
                    fmt_f64(v.log_negativity),
                    fmt_f64(v.nu_minus),
                    fmt_f64(v.nu_minus_pt),
                    fmt_f64(e.purity),
                    e.flags().join(";"),
                    fmt_f64(width),
                ];
                r.extend(e.report.cm.entries().iter().map(|&x| fmt_f64(x)));
                r.extend([
                    fmt_f64(e.purity_threshold),
                    fmt_f64(v.sep_expr_direct),
                    fmt_f64(v.sep_expr_det),
                    fmt_f64(e.raw_residual),
                    fmt_f64(e.as_constructed_nu_minus),
                    String::new(),
                ]);
                r
            }
            None => {
                let (kind, message) = match &p.outcome {
                    crate::analysis::PointOutcome::Failed { kind, message } => (kind.as_str(), message.as_str()),
                    _ => unreachable!(),
                };
                let mut r = vec!["error".to_string()];
                r.extend(std::iter::repeat_n(String::new(), 4));
                r.push(kind.to_string());
                r.push(fmt_f64(width));
                r.extend(std::iter::repeat_n(String::new(), 11));
                r.push(message.to_string());
                r
            }
        };
        head.into_iter().chain(tail).collect()
    });
    write_table(out, metadata, &SWEEP_COLUMNS, rows)
}

pub fn write_window_csv<W: Write>(out: W, metadata: &[(String, String)], scans: &[WindowScan]) -> Result<()> {
    let rows = scans.iter().flat_map(|s| {
        s.entries.iter().map(move |e| {
            vec![
                fmt_f64(s.width),
                e.l_max.to_string(),
                e.verdict.map(|v| v.to_string()).unwrap_or_else(|| "not_canonical".into()),
                fmt_f64(e.log_negativity),
                fmt_f64(e.as_constructed_nu_minus),
            ]
        })
    });
    write_table(out, metadata, &WINDOW_COLUMNS, rows)
}

fn snake<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(str::to_string))
        .unwrap_or_default()
}

pub fn write_tc_csv<W: Write>(out: W, metadata: &[(String, String)], results: &[TcResult]) -> Result<()> {
    let rows = results.iter().map(|r| {
        vec![
            fmt_f64(r.width),
            snake(&r.route),
            snake(&r.status),
            fmt_f64(r.t_c),
            fmt_f64(r.lo),
            fmt_f64(r.hi),
        ]
    });
    write_table(out, metadata, &TC_COLUMNS, rows)
}

pub fn write_extraction_csv<W: Write>(out: W, metadata: &[(String, String)], rows: &[ExtractionRow]) -> Result<()> {
    let rows = rows.iter().map(|r| {
        vec![
            fmt_f64(r.separation),
            fmt_f64(r.temperature),
            r.field_verdict.to_string(),
            fmt_f64(r.log_negativity),
            fmt_f64(r.state.x),
            fmt_f64(r.state.y),
            fmt_f64(r.state.z),
            fmt_f64(r.state.delta),
            fmt_f64(r.threshold),
            r.state.entangled.to_string(),
            fmt_f64(r.state.condition_margin),
            fmt_f64(r.oracle_min_eigenvalue),
        ]
    });
    write_table(out, metadata, &EXTRACTION_COLUMNS, rows)
}
