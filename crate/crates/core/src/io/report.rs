//! JSON and CSV writers for metric reports, boundaries, curves, sweeps and splits.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::jsonl::write_records;
use super::IoError;
use crate::dedup::{BoundaryRecord, CurveRow, DedupThresholds, DuplicateCluster, EnantiomorphCheck};
use crate::metrics::{MetreReport, SweepRow};
use crate::splits::{SplitAssignment, SplitManifest, SPLIT_NAMES};
use crate::structure::Structure;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    /// CSV for a `.csv` extension, JSON otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => ReportFormat::Csv,
            _ => ReportFormat::Json,
        }
    }
}

/// Six significant digits, without exponent notation.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().unwrap_or(x);
    format!("{rounded}")
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    // writing into a Vec cannot fail
    w.write_record(header).expect("csv header");
    for r in rows {
        w.write_record(&r).expect("csv row");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("utf8")
}

pub const METRE_CSV_HEADER: [&str; 9] = [
    "metric",
    "ltol",
    "stol",
    "angle_tol",
    "n_test",
    "n_ref_match",
    "rate",
    "mean_rmse",
    "mean_crmse",
];

/// Pretty JSON with per-reference detail, or a one-row CSV summary.
pub fn write_report(report: &MetreReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let t = report.tolerances;
            let row = vec![
                report.metric.clone(),
                sig6(t.ltol),
                sig6(t.stol),
                sig6(t.angle_tol),
                report.n_test.to_string(),
                report.n_ref_match.to_string(),
                sig6(report.metre_rate),
                report.mean_rmse.map(sig6).unwrap_or_default(),
                sig6(report.mean_crmse),
            ];
            csv_string(&METRE_CSV_HEADER, [row])
        }
    }
}

pub const SWEEP_CSV_HEADER: [&str; 5] = ["ltol", "stol", "angle_tol", "metre_rate", "mean_crmse"];

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    csv_string(
        &SWEEP_CSV_HEADER,
        rows.iter().map(|r| {
            vec![
                sig6(r.ltol),
                sig6(r.stol),
                sig6(r.angle_tol),
                sig6(r.metre_rate),
                sig6(r.mean_crmse),
            ]
        }),
    )
}

pub const CURVE_CSV_HEADER: [&str; 4] = ["parameter", "tolerance", "fraction_unique", "density"];

pub fn curves_csv(rows: &[CurveRow]) -> String {
    csv_string(
        &CURVE_CSV_HEADER,
        rows.iter().map(|r| {
            vec![
                r.parameter.name().to_string(),
                sig6(r.tolerance),
                sig6(r.fraction_unique),
                sig6(r.density),
            ]
        }),
    )
}

pub const BOUNDARY_CSV_HEADER: [&str; 6] = ["id1", "id2", "b_stol", "b_ltol", "b_angle", "no_match"];

/// Streams boundary records as CSV. Boundaries keep full precision so they
/// can be re-thresholded later.
pub struct BoundaryCsvWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> BoundaryCsvWriter<W> {
    pub fn new(w: W) -> std::io::Result<Self> {
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(BOUNDARY_CSV_HEADER)?;
        Ok(BoundaryCsvWriter { inner })
    }

    pub fn write(&mut self, r: &BoundaryRecord) -> std::io::Result<()> {
        self.inner.write_record([
            r.id1.clone(),
            r.id2.clone(),
            format!("{}", r.b_stol),
            format!("{}", r.b_ltol),
            format!("{}", r.b_angle),
            r.no_match.to_string(),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

pub fn read_boundaries_csv<R: Read>(r: R) -> Result<Vec<BoundaryRecord>, IoError> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers().map_err(|e| IoError::parse(1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != BOUNDARY_CSV_HEADER {
        return Err(IoError::parse(
            1,
            format!("expected header {}", BOUNDARY_CSV_HEADER.join(",")),
        ));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| IoError::parse(line, e.to_string()))?;
        let num = |k: usize| -> Result<f64, IoError> {
            rec[k]
                .parse()
                .map_err(|_| IoError::parse(line, format!("'{}' is not a number", &rec[k])))
        };
        let no_match = match &rec[5] {
            "true" => true,
            "false" => false,
            other => {
                return Err(IoError::parse(
                    line,
                    format!("no_match must be true or false, found '{other}'"),
                ))
            }
        };
        out.push(BoundaryRecord {
            id1: rec[0].to_string(),
            id2: rec[1].to_string(),
            b_stol: num(2)?,
            b_ltol: num(3)?,
            b_angle: num(4)?,
            no_match,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClustersReport {
    pub clusters: Vec<DuplicateCluster>,
    pub thresholds: DedupThresholds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enantiomorph_pairs: Option<Vec<EnantiomorphCheck>>,
}

/// `<prefix>.<split>.jsonl` for each split.
pub fn split_paths(prefix: &Path) -> [PathBuf; 3] {
    SPLIT_NAMES.map(|n| {
        let mut p = prefix.as_os_str().to_owned();
        p.push(format!(".{n}.jsonl"));
        PathBuf::from(p)
    })
}

pub fn manifest_path(prefix: &Path) -> PathBuf {
    let mut p = prefix.as_os_str().to_owned();
    p.push(".manifest.json");
    PathBuf::from(p)
}

/// Write each split as a JSONL dataset plus the manifest.
pub fn write_split_files(
    prefix: &Path,
    dataset: &[Structure],
    assignment: &SplitAssignment,
    manifest: &SplitManifest,
) -> Result<(), IoError> {
    let by_id: HashMap<&str, &Structure> = dataset.iter().map(|s| (s.id.as_str(), s)).collect();
    for (path, ids) in split_paths(prefix).iter().zip(assignment.parts()) {
        let part: Vec<Structure> = ids.iter().map(|id| by_id[id.as_str()].clone()).collect();
        let file = File::create(path).map_err(|e| IoError::file(path, e))?;
        write_records(BufWriter::new(file), &part).map_err(|e| IoError::file(path, e))?;
    }
    let path = manifest_path(prefix);
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| IoError::file(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dedup::BoundaryParam;
    use crate::matcher::MatchTolerances;
    use crate::metrics::PerRefBest;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.123456789), "0.123457");
        assert_eq!(sig6(0.5), "0.5");
        assert_eq!(sig6(1234567.0), "1234570");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(2.5e-7), "0.00000025");
    }

    #[test]
    fn boundary_csv_round_trip() {
        let recs = vec![
            BoundaryRecord {
                id1: "a,1".into(),
                id2: "b".into(),
                b_stol: 0.1234567890123,
                b_ltol: 1e-9,
                b_angle: 3.0,
                no_match: false,
            },
            BoundaryRecord {
                id1: "c".into(),
                id2: "d".into(),
                b_stol: 0.5,
                b_ltol: 0.3,
                b_angle: 10.0,
                no_match: true,
            },
        ];
        let mut buf = Vec::new();
        let mut w = BoundaryCsvWriter::new(&mut buf).unwrap();
        for r in &recs {
            w.write(r).unwrap();
        }
        w.finish().unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("id1,id2,b_stol,b_ltol,b_angle,no_match\n\"a,1\",b,0.1234567890123,"));
        assert_eq!(read_boundaries_csv(buf.as_slice()).unwrap(), recs);
        assert!(matches!(
            read_boundaries_csv("x,y\n".as_bytes()),
            Err(IoError::Parse { line: 1, .. })
        ));
        let bad = "id1,id2,b_stol,b_ltol,b_angle,no_match\na,b,0.1,0.1,1,false\na,b,zz,0.1,1,false\n";
        assert!(matches!(
            read_boundaries_csv(bad.as_bytes()),
            Err(IoError::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn report_formats() {
        let r = MetreReport {
            metric: "metre".into(),
            tolerances: MatchTolerances::LOOSE,
            n_test: 3,
            n_ref_match: 0,
            metre_rate: 0.0,
            mean_rmse: None,
            mean_crmse: 0.5,
            stol_used: 0.5,
            per_ref: vec![PerRefBest {
                ref_id: "r".into(),
                gen_id: None,
                rmse: None,
            }],
        };
        assert_eq!(
            write_report(&r, ReportFormat::Csv),
            "metric,ltol,stol,angle_tol,n_test,n_ref_match,rate,mean_rmse,mean_crmse\nmetre,0.3,0.5,10,3,0,0,,0.5\n"
        );
        let v: serde_json::Value = serde_json::from_str(&write_report(&r, ReportFormat::Json)).unwrap();
        assert!(v["mean_rmse"].is_null());
        assert_eq!(ReportFormat::from_path(Path::new("x.CSV")), ReportFormat::Csv);
        assert_eq!(ReportFormat::from_path(Path::new("x.json")), ReportFormat::Json);
    }

    #[test]
    fn curve_and_sweep_headers() {
        let c = curves_csv(&[CurveRow {
            parameter: BoundaryParam::AngleTol,
            tolerance: 0.1,
            fraction_unique: 2.0 / 3.0,
            density: 0.0,
        }]);
        assert_eq!(
            c,
            "parameter,tolerance,fraction_unique,density\nangle_tol,0.1,0.666667,0\n"
        );
        let s = sweep_csv(&[]);
        assert_eq!(s, "ltol,stol,angle_tol,metre_rate,mean_crmse\n");
    }

    #[test]
    fn split_file_names() {
        let [a, b, c] = split_paths(Path::new("out/run"));
        assert_eq!(a, PathBuf::from("out/run.train.jsonl"));
        assert_eq!(b, PathBuf::from("out/run.val.jsonl"));
        assert_eq!(c, PathBuf::from("out/run.test.jsonl"));
        assert_eq!(
            manifest_path(Path::new("out/run")),
            PathBuf::from("out/run.manifest.json")
        );
    }
}
