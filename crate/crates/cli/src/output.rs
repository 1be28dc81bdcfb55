//! Eigenvalue CSV and JSON emission.

use serde::Serialize;
use tspec_core::analysis::BranchedSpectrum;
use tspec_core::{Branch, EigenvalueRecord, Source, C64};

pub const CSV_HEADER: [&str; 7] = [
    "index",
    "branch",
    "re_lambda",
    "im_lambda",
    "multiplicity",
    "source",
    "residual",
];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn full_precision(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

pub fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::Branch1 => "branch1",
        Branch::Branch2 => "branch2",
        Branch::Single => "single",
    }
}

fn parse_branch(s: &str) -> Result<Branch, String> {
    match s {
        "branch1" => Ok(Branch::Branch1),
        "branch2" => Ok(Branch::Branch2),
        "single" => Ok(Branch::Single),
        other => Err(format!("unknown branch {other:?}")),
    }
}

pub fn source_name(s: Source) -> &'static str {
    match s {
        Source::Shooting => "shooting",
        Source::Matrix => "matrix",
    }
}

fn parse_source(s: &str) -> Result<Source, String> {
    match s {
        "shooting" => Ok(Source::Shooting),
        "matrix" => Ok(Source::Matrix),
        other => Err(format!("unknown source {other:?}")),
    }
}

/// Branch-indexed rows of one or more spectra, branch1 before branch2.
pub fn eigenvalue_csv(spectra: &[BranchedSpectrum]) -> Result<String, String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(|e| e.to_string())?;
    for s in spectra {
        for e in s.branch1.iter().chain(&s.branch2) {
            let r = &e.record;
            w.write_record([
                e.index.to_string(),
                branch_name(r.branch).to_string(),
                full_precision(r.value.re),
                full_precision(r.value.im),
                r.multiplicity.to_string(),
                source_name(r.source).to_string(),
                full_precision(r.residual),
            ])
            .map_err(|e| e.to_string())?;
        }
    }
    let bytes = w.into_inner().map_err(|e| e.to_string())?;
    String::from_utf8(bytes).map_err(|e| e.to_string())
}

/// Reads records back from [`eigenvalue_csv`] output. Indices are dropped;
/// they are recomputed by branch assignment.
pub fn read_eigenvalue_csv(text: &str) -> Result<Vec<EigenvalueRecord>, String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(format!("unexpected CSV header {header:?}"));
    }
    let mut out = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row.map_err(|e| e.to_string())?;
        let num = |k: usize| -> Result<f64, String> {
            row[k]
                .parse::<f64>()
                .map_err(|e| format!("row {}: column {}: {e}", line + 2, CSV_HEADER[k]))
        };
        out.push(EigenvalueRecord {
            value: C64::new(num(2)?, num(3)?),
            multiplicity: row[4]
                .parse()
                .map_err(|e| format!("row {}: multiplicity: {e}", line + 2))?,
            branch: parse_branch(&row[1])?,
            source: parse_source(&row[5])?,
            residual: num(6)?,
        });
    }
    Ok(out)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| e.to_string())
}
