//! Report files. Numbers are written with Rust's shortest round-trip
//! formatting and nothing time-dependent is recorded, so identical runs
//! produce identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use mgcurv_core::curvature::{CEstimate, CaseResult, CurvatureFunction, Lambda1Estimate, VerificationReport};
use mgcurv_core::suite::{Series, Session, SuiteConfig, SuiteKind, SuiteOutcome};
use mgcurv_core::SuiteError;
use serde::Serialize;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct ReportFile<'a> {
    schema_version: u32,
    graph: GraphSummary,
    grid: GridSummary,
    config: &'a SuiteConfig,
    lambda1: Lambda1Estimate,
    curvature: CurvatureFunction,
    c_estimate: Option<&'a CEstimate>,
    pass: bool,
    suites: Vec<SuiteEntry<'a>>,
}

#[derive(Serialize)]
struct GraphSummary {
    vertices: Vec<String>,
    edges: Vec<EdgeSummary>,
    total_length: f64,
}

#[derive(Serialize)]
struct EdgeSummary {
    tail: String,
    head: String,
    length: f64,
}

#[derive(Serialize)]
struct GridSummary {
    target_h: f64,
    max_spacing: f64,
    nodes: usize,
}

#[derive(Serialize)]
struct SuiteEntry<'a> {
    suite: SuiteKind,
    pass: bool,
    cases_file: Option<String>,
    series_file: Option<String>,
    report: Option<&'a VerificationReport>,
    error: Option<String>,
}

fn file(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Write { path, source })
}

fn io_err(dir: &Path, name: &str) -> impl FnOnce(std::io::Error) -> CliError {
    let path = dir.join(name);
    move |source| CliError::Write { path, source }
}

pub fn params_text(params: &[(String, f64)]) -> String {
    params
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Writes `report.json`, `summary.csv` and the per-suite files; returns
/// whether every suite passed.
pub fn write_verify(
    dir: &Path,
    session: &Session,
    outcomes: &[(SuiteKind, Result<SuiteOutcome, SuiteError>)],
) -> Result<bool, CliError> {
    let mut entries = Vec::new();
    for (kind, o) in outcomes {
        let entry = match o {
            Ok(o) => {
                let cases = format!("{kind}_cases.csv");
                write_cases(dir, &cases, &o.report)?;
                let series = match &o.series {
                    Some(s) => {
                        let name = format!("{kind}_series.csv");
                        write_series(dir, &name, s)?;
                        Some(name)
                    }
                    None => None,
                };
                SuiteEntry {
                    suite: *kind,
                    pass: o.report.pass,
                    cases_file: Some(cases),
                    series_file: series,
                    report: Some(&o.report),
                    error: None,
                }
            }
            Err(e) => SuiteEntry {
                suite: *kind,
                pass: false,
                cases_file: None,
                series_file: None,
                report: None,
                error: Some(e.to_string()),
            },
        };
        entries.push(entry);
    }
    let pass = entries.iter().all(|e| e.pass);
    write_summary(dir, &entries)?;

    let g = &session.graph;
    let labels = g.labels();
    let report = ReportFile {
        schema_version: SCHEMA_VERSION,
        graph: GraphSummary {
            vertices: labels.to_vec(),
            edges: g
                .edges()
                .iter()
                .map(|e| EdgeSummary {
                    tail: labels[e.tail].clone(),
                    head: labels[e.head].clone(),
                    length: e.length,
                })
                .collect(),
            total_length: g.total_length(),
        },
        grid: GridSummary {
            target_h: session.config.h,
            max_spacing: session.grid.max_spacing(),
            nodes: session.grid.len(),
        },
        config: &session.config,
        lambda1: session.lambda1,
        curvature: session.curvature,
        c_estimate: session.c_estimate.as_ref(),
        pass,
        suites: entries,
    };
    let mut w = file(dir, "report.json")?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_err(dir, "report.json"))?;
    Ok(pass)
}

fn write_summary(dir: &Path, entries: &[SuiteEntry]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(file(dir, "summary.csv")?);
    w.write_record([
        "suite",
        "pass",
        "cases",
        "violations",
        "worst_residual",
        "tolerance",
        "h",
        "dt",
        "h_term",
        "dt_term",
        "solver_term",
        "witness",
        "witness_params",
        "witness_location",
        "error",
    ])?;
    for e in entries {
        let mut row = vec![e.suite.to_string(), e.pass.to_string()];
        match e.report {
            Some(r) => {
                let t = &r.tolerance;
                row.extend([r.cases.len().to_string(), r.violations.to_string(), num(r.worst_residual)]);
                row.extend([t.total, t.h, t.dt, t.h_term, t.dt_term, t.solver_term].map(num));
                let (label, params, loc) = match &r.witness {
                    Some(c) => (c.label.clone(), params_text(&c.params), c.location.clone().unwrap_or_default()),
                    None => Default::default(),
                };
                row.extend([label, params, loc, String::new()]);
            }
            None => {
                row.extend(std::iter::repeat_n(String::new(), 12));
                row.push(e.error.clone().unwrap_or_default());
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(dir, "summary.csv"))?;
    Ok(())
}

/// One row per case, one column per parameter name in order of first use.
fn write_cases(dir: &Path, name: &str, report: &VerificationReport) -> Result<(), CliError> {
    let mut keys: Vec<&str> = Vec::new();
    for c in &report.cases {
        for (k, _) in &c.params {
            if !keys.contains(&k.as_str()) {
                keys.push(k);
            }
        }
    }
    let mut w = csv::Writer::from_writer(file(dir, name)?);
    let mut header = vec!["label", "location"];
    header.extend(&keys);
    header.extend(["residual", "tolerance", "pass"]);
    w.write_record(&header)?;
    let tol = report.tolerance.total;
    for c in &report.cases {
        w.write_record(case_row(c, &keys, tol))?;
    }
    w.flush().map_err(io_err(dir, name))?;
    Ok(())
}

fn case_row(c: &CaseResult, keys: &[&str], tol: f64) -> Vec<String> {
    let mut row = vec![c.label.clone(), c.location.clone().unwrap_or_default()];
    for k in keys {
        row.push(
            c.params
                .iter()
                .find(|(name, _)| name == k)
                .map(|(_, v)| num(*v))
                .unwrap_or_default(),
        );
    }
    let pass = !c.residual.is_nan() && c.residual <= tol;
    row.extend([num(c.residual), num(tol), pass.to_string()]);
    row
}

pub fn write_series(dir: &Path, name: &str, s: &Series) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(file(dir, name)?);
    w.write_record(&s.columns)?;
    for r in &s.rows {
        w.write_record(r.iter().map(|&v| num(v)))?;
    }
    w.flush().map_err(io_err(dir, name))?;
    Ok(())
}

/// `(first index, multiplicity)` of each cluster of numerically equal
/// eigenvalues.
pub fn multiplicities(eigs: &[f64]) -> Vec<(usize, usize)> {
    let scale = eigs.iter().fold(1.0f64, |a, &l| a.max(l.abs()));
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (k, &l) in eigs.iter().enumerate() {
        match out.last_mut() {
            Some((start, m)) if (l - eigs[*start]).abs() <= 1e-8 * scale => *m += 1,
            _ => out.push((k, 1)),
        }
    }
    out
}

pub fn write_spectrum(dir: &Path, eigs: &[f64], groups: &[(usize, usize)]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(file(dir, "spectrum.csv")?);
    w.write_record(["k", "lambda", "multiplicity"])?;
    for &(start, m) in groups {
        for (k, &l) in eigs.iter().enumerate().skip(start).take(m) {
            w.write_record([k.to_string(), num(l), m.to_string()])?;
        }
    }
    w.flush().map_err(io_err(dir, "spectrum.csv"))?;
    Ok(())
}
