//! File formats: P1 CIF, extended XYZ, JSONL datasets and reports.

pub mod cif;
pub mod extxyz;
pub mod jsonl;
pub mod report;

use crate::CrystalError;

pub use cif::{parse_cif_p1, write_cif_p1};
pub use extxyz::{parse_extxyz, write_extxyz};
pub use jsonl::{read_dataset_jsonl, write_dataset_jsonl, write_records, DatasetRecord, JsonlReader};
pub use report::{
    curves_csv, read_boundaries_csv, sweep_csv, write_report, write_split_files, BoundaryCsvWriter, ClustersReport,
    ReportFormat,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IoError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing required tag {0}")]
    MissingTag(String),
    #[error("line {line}: unsupported symmetry: {detail}")]
    UnsupportedSymmetry { line: usize, detail: String },
    #[error("line {line}: duplicate id '{id}'")]
    DuplicateId { line: usize, id: String },
    #[error("{path}: {msg}")]
    File { path: String, msg: String },
    #[error(transparent)]
    Crystal(#[from] CrystalError),
}

impl IoError {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        IoError::Parse { line, msg: msg.into() }
    }

    pub(crate) fn file(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        IoError::File {
            path: path.display().to_string(),
            msg: err.to_string(),
        }
    }
}

/// Parse a real number, ignoring a trailing standard uncertainty such as `(3)`.
pub(crate) fn parse_real(token: &str) -> Option<f64> {
    let t = match token.find('(') {
        Some(i) if token.ends_with(')') => &token[..i],
        _ => token,
    };
    t.parse::<f64>().ok().filter(|x| x.is_finite())
}
