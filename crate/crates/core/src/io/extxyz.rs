//! Extended XYZ frames with a `Lattice="..."` header.

use std::fmt::Write as _;

use nalgebra::Vector3;

use super::{parse_real, IoError};
use crate::lattice::Lattice;
use crate::structure::Structure;

/// Split the comment line into `key=value` pairs. Values may be double-quoted;
/// a bare key means `T`.
fn header_pairs(line: &str, line_no: usize) -> Result<Vec<(String, String)>, IoError> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let read_word = |i: &mut usize, stop_eq: bool| -> Result<String, IoError> {
        if chars.get(*i) == Some(&'"') {
            let start = *i + 1;
            let end = chars[start..]
                .iter()
                .position(|&c| c == '"')
                .map(|p| start + p)
                .ok_or_else(|| IoError::parse(line_no, "unterminated quote in header"))?;
            *i = end + 1;
            return Ok(chars[start..end].iter().collect());
        }
        let start = *i;
        while *i < chars.len() && !chars[*i].is_whitespace() && !(stop_eq && chars[*i] == '=') {
            *i += 1;
        }
        Ok(chars[start..*i].iter().collect())
    };
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let key = read_word(&mut i, true)?;
        if chars.get(i) == Some(&'=') {
            i += 1;
            let value = read_word(&mut i, false)?;
            out.push((key, value));
        } else {
            out.push((key, "T".to_string()));
        }
    }
    Ok(out)
}

struct Columns {
    species: usize,
    pos: usize,
    width: usize,
}

fn parse_properties(spec: &str, line_no: usize) -> Result<Columns, IoError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if !parts.len().is_multiple_of(3) {
        return Err(IoError::parse(line_no, format!("malformed Properties '{spec}'")));
    }
    let mut species = None;
    let mut pos = None;
    let mut col = 0;
    for p in parts.chunks(3) {
        let n: usize = p[2]
            .parse()
            .map_err(|_| IoError::parse(line_no, format!("bad column count in Properties '{spec}'")))?;
        match p[0] {
            "species" => species = Some(col),
            "pos" if n == 3 => pos = Some(col),
            "pos" => return Err(IoError::parse(line_no, "pos must have 3 columns")),
            _ => {}
        }
        col += n;
    }
    match (species, pos) {
        (Some(species), Some(pos)) => Ok(Columns {
            species,
            pos,
            width: col,
        }),
        _ => Err(IoError::parse(line_no, "Properties needs species and pos")),
    }
}

fn parse_frame(lines: &[&str], first_line: usize) -> Result<(Structure, usize), IoError> {
    let count_line = lines[0].trim();
    let n: usize = count_line
        .parse()
        .map_err(|_| IoError::parse(first_line, format!("expected atom count, found '{count_line}'")))?;
    let header = lines
        .get(1)
        .ok_or_else(|| IoError::parse(first_line + 1, "missing comment line"))?;
    let pairs = header_pairs(header, first_line + 1)?;

    let mut lattice = None;
    let mut columns = Columns {
        species: 0,
        pos: 1,
        width: 4,
    };
    let mut id = String::new();
    let mut energy = None;
    let mut tags = std::collections::BTreeMap::new();
    for (k, v) in pairs {
        match k.to_ascii_lowercase().as_str() {
            "lattice" => {
                let vals: Option<Vec<f64>> = v.split_whitespace().map(parse_real).collect();
                let vals = vals
                    .filter(|v| v.len() == 9)
                    .ok_or_else(|| IoError::parse(first_line + 1, "Lattice must hold 9 reals"))?;
                lattice = Some(Lattice::from_flat(&vals)?);
            }
            "properties" => columns = parse_properties(&v, first_line + 1)?,
            "pbc" => {}
            "id" => id = v,
            "energy" => {
                energy = Some(parse_real(&v).ok_or_else(|| IoError::parse(first_line + 1, "energy is not a number"))?)
            }
            _ => {
                tags.insert(k, v);
            }
        }
    }
    let lattice = lattice.ok_or_else(|| IoError::MissingTag("Lattice".to_string()))?;

    let mut species = Vec::with_capacity(n);
    let mut frac = Vec::with_capacity(n);
    for k in 0..n {
        let line_no = first_line + 2 + k;
        let line = lines
            .get(2 + k)
            .ok_or_else(|| IoError::parse(line_no, format!("expected {n} atoms, found {k}")))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < columns.width {
            return Err(IoError::parse(
                line_no,
                format!("expected {} columns, found {}", columns.width, fields.len()),
            ));
        }
        let mut cart = Vector3::zeros();
        for d in 0..3 {
            let f = fields[columns.pos + d];
            cart[d] = parse_real(f).ok_or_else(|| IoError::parse(line_no, format!("'{f}' is not a number")))?;
        }
        species.push(fields[columns.species].to_string());
        frac.push(lattice.to_fractional(&cart));
    }
    let mut s = Structure::new(lattice, species, frac)?;
    s.id = id;
    s.energy = energy;
    s.tags = tags;
    Ok((s, n + 2))
}

/// All frames in the text, in order.
pub fn parse_extxyz(text: &str) -> Result<Vec<Structure>, IoError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let (s, used) = parse_frame(&lines[i..], i + 1)?;
        out.push(s);
        i += used;
    }
    Ok(out)
}

fn quote(v: &str) -> String {
    if v.is_empty() || v.contains(|c: char| c.is_whitespace() || c == '=') {
        format!("\"{}\"", v.replace('"', "'"))
    } else {
        v.to_string()
    }
}

/// One frame per structure; reals use the shortest round-trip representation.
pub fn write_extxyz(structures: &[Structure]) -> String {
    let mut out = String::new();
    for s in structures {
        let flat = s.lattice().to_flat();
        let lat: Vec<String> = flat.iter().map(|x| format!("{x}")).collect();
        let _ = writeln!(out, "{}", s.len());
        let _ = write!(
            out,
            "Lattice=\"{}\" Properties=species:S:1:pos:R:3 pbc=\"T T T\"",
            lat.join(" ")
        );
        if !s.id.is_empty() {
            let _ = write!(out, " id={}", quote(&s.id));
        }
        if let Some(e) = s.energy {
            let _ = write!(out, " energy={e}");
        }
        for (k, v) in &s.tags {
            let _ = write!(out, " {}={}", quote(k), quote(v));
        }
        out.push('\n');
        for (sp, c) in s.species().iter().zip(s.cart_coords()) {
            let _ = writeln!(out, "{sp} {} {} {}", c.x, c.y, c.z);
        }
    }
    out
}
