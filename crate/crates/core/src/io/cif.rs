//! Minimal CIF reader/writer for fully expanded P1 cells.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::Vector3;

use super::{parse_real, IoError};
use crate::lattice::Lattice;
use crate::structure::Structure;

#[derive(Debug, Clone, PartialEq)]
struct Token {
    text: String,
    line: usize,
    /// Quoted strings and text fields are never keywords or tags.
    quoted: bool,
}

fn tokenize(text: &str) -> Result<Vec<Token>, IoError> {
    let mut tokens = Vec::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    while let Some((no, line)) = lines.next() {
        if let Some(first) = line.strip_prefix(';') {
            // text field up to the next line starting with ';'
            let mut value = first.to_string();
            let mut closed = false;
            for (_, l) in lines.by_ref() {
                if l.starts_with(';') {
                    closed = true;
                    break;
                }
                value.push('\n');
                value.push_str(l);
            }
            if !closed {
                return Err(IoError::parse(no, "unterminated ';' text field"));
            }
            tokens.push(Token {
                text: value,
                line: no,
                quoted: true,
            });
            continue;
        }
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
            } else if c == '#' {
                break;
            } else if c == '\'' || c == '"' {
                // a quote closes only when followed by whitespace or end of line
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && !(chars[j] == c && (j + 1 == chars.len() || chars[j + 1].is_whitespace())) {
                    j += 1;
                }
                if j >= chars.len() {
                    return Err(IoError::parse(no, "unterminated quoted string"));
                }
                tokens.push(Token {
                    text: chars[start..j].iter().collect(),
                    line: no,
                    quoted: true,
                });
                i = j + 1;
            } else {
                let start = i;
                while i < chars.len() && !chars[i].is_whitespace() {
                    i += 1;
                }
                tokens.push(Token {
                    text: chars[start..i].iter().collect(),
                    line: no,
                    quoted: false,
                });
            }
        }
    }
    Ok(tokens)
}

fn is_tag(t: &Token) -> bool {
    !t.quoted && t.text.starts_with('_')
}

fn is_keyword(t: &Token) -> bool {
    if t.quoted {
        return false;
    }
    let lower = t.text.to_ascii_lowercase();
    lower == "loop_"
        || lower.starts_with("data_")
        || lower.starts_with("save_")
        || lower == "global_"
        || lower == "stop_"
}

struct Loop {
    tags: Vec<String>,
    rows: Vec<Vec<Token>>,
}

struct Parsed {
    name: Option<String>,
    items: HashMap<String, Token>,
    loops: Vec<Loop>,
}

fn parse_blocks(tokens: &[Token]) -> Result<Parsed, IoError> {
    let mut out = Parsed {
        name: None,
        items: HashMap::new(),
        loops: Vec::new(),
    };
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        let lower = t.text.to_ascii_lowercase();
        if !t.quoted && lower.starts_with("data_") {
            if out.name.is_some() {
                // only the first data block is read
                break;
            }
            out.name = Some(t.text[5..].to_string());
            i += 1;
        } else if !t.quoted && lower == "loop_" {
            i += 1;
            let mut tags = Vec::new();
            while i < tokens.len() && is_tag(&tokens[i]) {
                tags.push(tokens[i].text.to_ascii_lowercase());
                i += 1;
            }
            if tags.is_empty() {
                return Err(IoError::parse(t.line, "loop_ without tags"));
            }
            let mut values = Vec::new();
            while i < tokens.len() && !is_tag(&tokens[i]) && !is_keyword(&tokens[i]) {
                values.push(tokens[i].clone());
                i += 1;
            }
            if values.len() % tags.len() != 0 {
                let row = values.len() / tags.len();
                let line = values.get(row * tags.len()).map_or(t.line, |v| v.line);
                return Err(IoError::parse(
                    line,
                    format!(
                        "malformed loop row: {} values for {} columns",
                        values.len() - row * tags.len(),
                        tags.len()
                    ),
                ));
            }
            let rows = values.chunks(tags.len()).map(|c| c.to_vec()).collect();
            out.loops.push(Loop { tags, rows });
        } else if is_tag(t) {
            let value = tokens
                .get(i + 1)
                .filter(|v| !is_tag(v) && !is_keyword(v))
                .ok_or_else(|| IoError::parse(t.line, format!("tag {} has no value", t.text)))?;
            out.items.insert(t.text.to_ascii_lowercase(), value.clone());
            i += 2;
        } else {
            return Err(IoError::parse(t.line, format!("unexpected token '{}'", t.text)));
        }
    }
    Ok(out)
}

const SYMOP_TAGS: [&str; 2] = ["_symmetry_equiv_pos_as_xyz", "_space_group_symop_operation_xyz"];
const SPACE_GROUP_TAGS: [&str; 2] = ["_symmetry_space_group_name_h-m", "_space_group_name_h-m_alt"];
const SG_NUMBER_TAGS: [&str; 2] = ["_symmetry_int_tables_number", "_space_group_it_number"];

fn is_identity_op(op: &str) -> bool {
    let compact: String = op
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .to_ascii_lowercase();
    matches!(compact.as_str(), "x,y,z" | "+x,+y,+z")
}

fn check_symmetry(p: &Parsed) -> Result<(), IoError> {
    for tag in SPACE_GROUP_TAGS {
        if let Some(v) = p.items.get(tag) {
            let compact: String = v.text.chars().filter(|c| !c.is_whitespace()).collect();
            if compact != "P1" && compact != "?" && compact != "." {
                return Err(IoError::UnsupportedSymmetry {
                    line: v.line,
                    detail: format!("space group '{}'", v.text),
                });
            }
        }
    }
    for tag in SG_NUMBER_TAGS {
        if let Some(v) = p.items.get(tag) {
            if v.text != "1" && v.text != "?" && v.text != "." {
                return Err(IoError::UnsupportedSymmetry {
                    line: v.line,
                    detail: format!("space group number {}", v.text),
                });
            }
        }
    }
    for tag in SYMOP_TAGS {
        if let Some(v) = p.items.get(tag) {
            if !is_identity_op(&v.text) {
                return Err(IoError::UnsupportedSymmetry {
                    line: v.line,
                    detail: format!("operation '{}'", v.text),
                });
            }
        }
        for l in &p.loops {
            if let Some(col) = l.tags.iter().position(|t| t == tag) {
                for row in &l.rows {
                    if !is_identity_op(&row[col].text) {
                        return Err(IoError::UnsupportedSymmetry {
                            line: row[col].line,
                            detail: format!("operation '{}'", row[col].text),
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

/// Element symbol from a type symbol or label such as `Fe2+` or `O12`.
fn element_symbol(raw: &str) -> Option<String> {
    let letters: String = raw.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
    let mut chars = letters.chars();
    let first = chars.next()?.to_ascii_uppercase();
    let second = chars.next().filter(|c| c.is_ascii_lowercase());
    Some(match second {
        Some(s) => format!("{first}{s}"),
        None => first.to_string(),
    })
}

/// Parse a CIF whose atoms are listed in P1 (no symmetry expansion).
pub fn parse_cif_p1(text: &str) -> Result<Structure, IoError> {
    let tokens = tokenize(text)?;
    let parsed = parse_blocks(&tokens)?;
    check_symmetry(&parsed)?;

    let cell_value = |tag: &str| -> Result<f64, IoError> {
        let t = parsed
            .items
            .get(tag)
            .ok_or_else(|| IoError::MissingTag(tag.to_string()))?;
        parse_real(&t.text).ok_or_else(|| IoError::parse(t.line, format!("{tag}: '{}' is not a number", t.text)))
    };
    let lattice = Lattice::from_parameters(
        cell_value("_cell_length_a")?,
        cell_value("_cell_length_b")?,
        cell_value("_cell_length_c")?,
        cell_value("_cell_angle_alpha")?,
        cell_value("_cell_angle_beta")?,
        cell_value("_cell_angle_gamma")?,
    )?;

    let atoms = parsed
        .loops
        .iter()
        .find(|l| l.tags.iter().any(|t| t == "_atom_site_fract_x"))
        .ok_or_else(|| IoError::MissingTag("_atom_site_fract_x".to_string()))?;
    let col = |tag: &str| atoms.tags.iter().position(|t| t == tag);
    let need = |tag: &str| col(tag).ok_or_else(|| IoError::MissingTag(tag.to_string()));
    let (cx, cy, cz) = (
        need("_atom_site_fract_x")?,
        need("_atom_site_fract_y")?,
        need("_atom_site_fract_z")?,
    );
    let species_col = col("_atom_site_type_symbol")
        .or_else(|| col("_atom_site_label"))
        .ok_or_else(|| IoError::MissingTag("_atom_site_type_symbol".to_string()))?;
    let occ_col = col("_atom_site_occupancy");

    let mut species = Vec::with_capacity(atoms.rows.len());
    let mut frac = Vec::with_capacity(atoms.rows.len());
    for row in &atoms.rows {
        let num = |c: usize| {
            parse_real(&row[c].text)
                .ok_or_else(|| IoError::parse(row[c].line, format!("'{}' is not a number", row[c].text)))
        };
        if let Some(oc) = occ_col {
            let occ = num(oc)?;
            if (occ - 1.0).abs() > 1e-6 {
                return Err(IoError::parse(
                    row[oc].line,
                    format!("partial occupancy {occ} is not supported"),
                ));
            }
        }
        let sym = element_symbol(&row[species_col].text).ok_or_else(|| {
            IoError::parse(
                row[species_col].line,
                format!("cannot read an element from '{}'", row[species_col].text),
            )
        })?;
        species.push(sym);
        frac.push(Vector3::new(num(cx)?, num(cy)?, num(cz)?));
    }
    if species.is_empty() {
        return Err(IoError::parse(
            tokens.last().map_or(1, |t| t.line),
            "atom_site loop has no rows",
        ));
    }
    let mut s = Structure::new(lattice, species, frac)?;
    if let Some(name) = parsed.name {
        s.id = name;
    }
    Ok(s)
}

/// P1 CIF text. The lattice is written as cell parameters, so the structure is
/// re-read in the standard orientation.
pub fn write_cif_p1(s: &Structure) -> String {
    let p = s.lattice().parameters();
    let name = if s.id.is_empty() { "structure" } else { s.id.as_str() };
    let name: String = name.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect();
    let mut out = String::new();
    let _ = writeln!(out, "data_{name}");
    let _ = writeln!(out, "_symmetry_space_group_name_H-M   'P 1'");
    for (tag, v) in [
        ("_cell_length_a", p.a),
        ("_cell_length_b", p.b),
        ("_cell_length_c", p.c),
        ("_cell_angle_alpha", p.alpha),
        ("_cell_angle_beta", p.beta),
        ("_cell_angle_gamma", p.gamma),
    ] {
        let _ = writeln!(out, "{tag}   {v}");
    }
    out.push_str("loop_\n _symmetry_equiv_pos_as_xyz\n  'x, y, z'\n");
    out.push_str("loop_\n _atom_site_label\n _atom_site_type_symbol\n _atom_site_fract_x\n _atom_site_fract_y\n _atom_site_fract_z\n _atom_site_occupancy\n");
    for (i, (sp, f)) in s.species().iter().zip(s.frac_coords()).enumerate() {
        let _ = writeln!(out, "  {sp}{} {sp} {} {} {} 1", i + 1, f.x, f.y, f.z);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const MINIMAL: &str = "data_test
_cell_length_a 2
_cell_length_b 2
_cell_length_c 2
_cell_angle_alpha 90
_cell_angle_beta 90
_cell_angle_gamma 90
loop_
_atom_site_label
_atom_site_fract_x
_atom_site_fract_y
_atom_site_fract_z
C1 0 0 0
";

    #[test]
    fn minimal_cubic() {
        let s = parse_cif_p1(MINIMAL).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.species(), ["C"]);
        assert_abs_diff_eq!(s.volume(), 8.0, epsilon = 1e-12);
        assert_eq!(s.id, "test");
    }

    #[test]
    fn p1_header_and_uncertainties() {
        let text = "# comment line
data_x
_symmetry_space_group_name_H-M   'P 1'
_symmetry_Int_Tables_number 1
_cell_length_a 3.5(2)
_cell_length_b 3.5
_cell_length_c 4.0
_cell_angle_alpha 90.0
_cell_angle_beta 90.0
_cell_angle_gamma 120.0
_journal_remark
;
free text with loop_ and _tags inside
;
loop_
 _symmetry_equiv_pos_as_xyz
  'x, y, z'
loop_
 _atom_site_type_symbol
 _atom_site_label
 _atom_site_fract_x
 _atom_site_fract_y
 _atom_site_fract_z
 _atom_site_occupancy
  Fe2+ Fe1 0.0 0.0 0.0 1.0
  O2- O1 0.3333 0.6667 1.25(3) 1
";
        let s = parse_cif_p1(text).unwrap();
        assert_eq!(s.species(), ["Fe", "O"]);
        assert_abs_diff_eq!(s.frac_coords()[1].z, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(s.lattice().parameters().gamma, 120.0, epsilon = 1e-10);
    }

    #[test]
    fn rejects_symmetry_operations() {
        let text = MINIMAL.replace(
            "loop_\n_atom_site_label",
            "loop_\n_symmetry_equiv_pos_as_xyz\n'x, y, z'\n'-x, -y, -z'\nloop_\n_atom_site_label",
        );
        let err = parse_cif_p1(&text).unwrap_err();
        assert!(matches!(err, IoError::UnsupportedSymmetry { line: 11, .. }), "{err:?}");
        assert!(err.to_string().contains("unsupported symmetry"));

        let text = MINIMAL.replace("data_test", "data_test\n_symmetry_space_group_name_H-M 'F m -3 m'");
        assert!(matches!(
            parse_cif_p1(&text),
            Err(IoError::UnsupportedSymmetry { line: 2, .. })
        ));
    }

    #[test]
    fn diagnostics() {
        let text = MINIMAL.replace("_cell_length_b 2\n", "");
        assert_eq!(
            parse_cif_p1(&text).unwrap_err(),
            IoError::MissingTag("_cell_length_b".into())
        );

        let text = MINIMAL.replace("C1 0 0 0\n", "C1 0 0 0\nC2 0.5 0.5\n");
        assert!(matches!(parse_cif_p1(&text), Err(IoError::Parse { line: 14, .. })));

        let text = MINIMAL.replace("C1 0 0 0", "C1 0 zero 0");
        assert!(matches!(parse_cif_p1(&text), Err(IoError::Parse { line: 13, .. })));

        let text = MINIMAL.replace(
            "_atom_site_fract_z\nC1 0 0 0",
            "_atom_site_fract_z\n_atom_site_occupancy\nC1 0 0 0 0.5",
        );
        assert!(parse_cif_p1(&text)
            .unwrap_err()
            .to_string()
            .contains("partial occupancy"));
    }

    #[test]
    fn write_then_parse() {
        let s = Structure::from_parts(
            Lattice::from_parameters(3.1, 4.2, 5.3, 80.0, 95.0, 101.0).unwrap(),
            &["Na", "Cl"],
            &[[0.1, 0.2, 0.3], [0.6, 0.7, 0.8]],
        )
        .unwrap()
        .with_id("nacl");
        let back = parse_cif_p1(&write_cif_p1(&s)).unwrap();
        assert_eq!(back.species(), s.species());
        assert_eq!(back.id, "nacl");
        assert!((back.lattice().basis() - s.lattice().basis()).abs().max() < 1e-10);
        for (a, b) in back.frac_coords().iter().zip(s.frac_coords()) {
            assert!((a - b).abs().max() < 1e-12);
        }
    }
}
