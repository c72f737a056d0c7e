//! Input loading and argument parsing helpers.

use std::path::Path;

use anyhow::{bail, Context, Result};
use xtal_core::io::{parse_cif_p1, parse_extxyz, read_dataset_jsonl};
use xtal_core::Structure;

/// Structures from a `.cif`, `.xyz`/`.extxyz` or `.jsonl` file. Structures
/// without an id get one derived from the file name.
pub fn load_structures(path: &Path) -> Result<Vec<Structure>> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("structure")
        .to_string();
    let read = || std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()));
    let mut out = match ext.as_str() {
        "cif" => vec![parse_cif_p1(&read()?).with_context(|| format!("parsing {}", path.display()))?],
        "xyz" | "extxyz" => parse_extxyz(&read()?).with_context(|| format!("parsing {}", path.display()))?,
        "jsonl" => read_dataset_jsonl(path).with_context(|| format!("reading {}", path.display()))?,
        _ => bail!(
            "{}: unknown format (expected .cif, .xyz, .extxyz or .jsonl)",
            path.display()
        ),
    };
    let single = out.len() == 1;
    for (i, s) in out.iter_mut().enumerate() {
        if s.id.is_empty() {
            s.id = if single { stem.clone() } else { format!("{stem}-{i}") };
        }
    }
    Ok(out)
}

/// Exactly one structure from the file.
pub fn load_one(path: &Path) -> Result<Structure> {
    let mut v = load_structures(path)?;
    if v.len() != 1 {
        bail!("{}: expected one structure, found {}", path.display(), v.len());
    }
    Ok(v.remove(0))
}

/// A positive, finite real.
pub fn positive(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(format!("'{s}' must be positive"))
    }
}

pub fn non_negative(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if x.is_finite() && x >= 0.0 {
        Ok(x)
    } else {
        Err(format!("'{s}' must be non-negative"))
    }
}

/// Values of one tolerance axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

/// `start:stop:step` (stop included within 1e-12), a comma list, or one value.
pub fn grid(s: &str) -> Result<Grid, String> {
    grid_values(s).map(Grid)
}

fn grid_values(s: &str) -> Result<Vec<f64>, String> {
    let num = |t: &str| -> Result<f64, String> {
        let x: f64 = t.trim().parse().map_err(|_| format!("'{t}' is not a number"))?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(format!("'{t}' is not finite"))
        }
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if step <= 0.0 || stop < start {
                return Err(format!("'{s}': need step > 0 and start <= stop"));
            }
            let n = ((stop - start) / step + 1e-12).floor() as usize + 1;
            if n > 1_000_000 {
                return Err(format!("'{s}': more than 1e6 grid points"));
            }
            Ok((0..n).map(|i| start + i as f64 * step).collect())
        }
        [_] => s.split(',').map(num).collect(),
        _ => Err(format!("'{s}': expected start:stop:step, a comma list or a value")),
    }
}

/// Three comma-separated weights, normalized to sum to one.
pub fn ratios(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number")))
        .collect::<Result<_, _>>()?;
    if v.len() != 3 || v.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(format!("'{s}': expected three positive weights such as 60,20,20"));
    }
    let total: f64 = v.iter().sum();
    Ok([v[0] / total, v[1] / total, v[2] / total])
}
