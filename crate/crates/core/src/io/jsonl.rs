//! One JSON record per line.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::IoError;
use crate::lattice::Lattice;
use crate::structure::Structure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub id: String,
    /// Row-major basis, rows are lattice vectors in Å.
    pub lattice: [f64; 9],
    pub species: Vec<String>,
    /// Flattened `[x0, y0, z0, x1, ...]`.
    pub frac_coords: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tags: BTreeMap<String, String>,
}

impl DatasetRecord {
    pub fn from_structure(s: &Structure) -> Self {
        DatasetRecord {
            id: s.id.clone(),
            lattice: s.lattice().to_flat(),
            species: s.species().to_vec(),
            frac_coords: s.frac_coords().iter().flat_map(|f| [f.x, f.y, f.z]).collect(),
            energy: s.energy,
            tags: s.tags.clone(),
        }
    }

    pub fn to_structure(&self) -> Result<Structure, IoError> {
        if self.frac_coords.len() != 3 * self.species.len() {
            return Err(IoError::Crystal(crate::CrystalError::LengthMismatch {
                species: self.species.len(),
                coords: self.frac_coords.len() / 3,
            }));
        }
        let lattice = Lattice::from_flat(&self.lattice)?;
        let frac = self
            .frac_coords
            .chunks(3)
            .map(|c| Vector3::new(c[0], c[1], c[2]))
            .collect();
        let mut s = Structure::new(lattice, self.species.clone(), frac)?;
        s.id = self.id.clone();
        s.energy = self.energy;
        s.tags = self.tags.clone();
        Ok(s)
    }
}

/// Streaming reader that rejects repeated ids. Blank lines are skipped.
pub struct JsonlReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    seen: HashSet<String>,
}

impl<R: BufRead> JsonlReader<R> {
    pub fn new(reader: R) -> Self {
        JsonlReader {
            lines: reader.lines(),
            line_no: 0,
            seen: HashSet::new(),
        }
    }
}

impl<R: BufRead> Iterator for JsonlReader<R> {
    type Item = Result<Structure, IoError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = self.lines.next()?;
            self.line_no += 1;
            let line = match line {
                Ok(l) => l,
                Err(e) => return Some(Err(IoError::parse(self.line_no, e.to_string()))),
            };
            if line.trim().is_empty() {
                continue;
            }
            let no = self.line_no;
            let rec: DatasetRecord = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => return Some(Err(IoError::parse(no, format!("malformed record: {e}")))),
            };
            if !self.seen.insert(rec.id.clone()) {
                return Some(Err(IoError::DuplicateId { line: no, id: rec.id }));
            }
            return Some(rec.to_structure().map_err(|e| IoError::parse(no, e.to_string())));
        }
    }
}

pub fn read_dataset_jsonl(path: &Path) -> Result<Vec<Structure>, IoError> {
    let file = File::open(path).map_err(|e| IoError::file(path, e))?;
    JsonlReader::new(BufReader::new(file)).collect()
}

pub fn write_records<W: Write>(mut w: W, structures: &[Structure]) -> std::io::Result<()> {
    for s in structures {
        serde_json::to_writer(&mut w, &DatasetRecord::from_structure(s))?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn write_dataset_jsonl(path: &Path, structures: &[Structure]) -> Result<(), IoError> {
    let file = File::create(path).map_err(|e| IoError::file(path, e))?;
    write_records(BufWriter::new(file), structures).map_err(|e| IoError::file(path, e))
}
