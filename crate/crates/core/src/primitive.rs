//! Primitive-cell search via pure translations.

use nalgebra::{Matrix3, Vector3};

use crate::lattice::Lattice;
use crate::structure::{wrap_vec, Structure};

/// Default position tolerance for translation detection, in Å.
pub const DEFAULT_SYMPREC: f64 = 1e-3;

/// Smallest cell that generates the same crystal.
///
/// The input is Niggli-reduced, pure translations are searched among the
/// inter-site vectors of the least-frequent species, and the lattice they
/// generate together with the original one becomes the new cell, again
/// Niggli-reduced. If anything is inconsistent (e.g. a translation that is not
/// a rational fraction of the cell) the Niggli-reduced input is returned.
pub fn primitive_cell(structure: &Structure, symprec: f64) -> Structure {
    let reduced = niggli_structure(structure);
    match find_primitive(&reduced, symprec) {
        Some(p) => niggli_structure(&p),
        None => reduced,
    }
}

pub(crate) fn niggli_structure(s: &Structure) -> Structure {
    match s.lattice().niggli_reduce() {
        Ok((_, m)) => s.apply_unimodular(&m),
        Err(e) => {
            log::warn!("niggli reduction failed for '{}': {e}", s.id);
            s.clone()
        }
    }
}

fn find_primitive(s: &Structure, symprec: f64) -> Option<Structure> {
    let n = s.len();
    let translations = pure_translations(s, symprec);
    let m = translations.len();
    if m <= 1 || !n.is_multiple_of(m) {
        return None;
    }
    let g = s.lattice().metric();
    let close = |d: &Vector3<f64>| crate::lattice::min_image_metric(&g, d).1.sqrt() <= symprec;

    // every translation of a group of order m is a multiple of 1/m
    let mut generators: Vec<[i64; 3]> = vec![[m as i64, 0, 0], [0, m as i64, 0], [0, 0, m as i64]];
    for t in translations.iter().skip(1) {
        let scaled = t * m as f64;
        let r = scaled.map(f64::round);
        if !close(&(t - r / m as f64)) {
            log::debug!("translation {t:?} is not a multiple of 1/{m}");
            return None;
        }
        generators.push([r.x as i64, r.y as i64, r.z as i64]);
    }
    let h = row_basis(generators)?;
    let det = int_det3(&h);
    if det != (m * m) as i64 {
        log::debug!("translation lattice has det {det}, expected {}", m * m);
        return None;
    }
    let p = Matrix3::from_fn(|i, j| h[i][j] as f64 / m as f64);
    let basis = p * s.lattice().basis();
    let lattice = Lattice::new(basis).ok()?;
    let pinv = p.try_inverse()?;

    let mut species = Vec::with_capacity(n / m);
    let mut frac: Vec<Vector3<f64>> = Vec::with_capacity(n / m);
    let g_new = lattice.metric();
    for (sp, f) in s.species().iter().zip(s.frac_coords()) {
        let fp = wrap_vec(&pinv.tr_mul(f));
        let duplicate = species.iter().zip(&frac).any(|(sq, q): (&String, &Vector3<f64>)| {
            sq == sp && crate::lattice::min_image_metric(&g_new, &(fp - q)).1.sqrt() <= symprec
        });
        if !duplicate {
            species.push(sp.clone());
            frac.push(fp);
        }
    }
    if species.len() * m != n {
        log::debug!("primitive cell has {} sites, expected {}", species.len(), n / m);
        return None;
    }
    Some(s.with_geometry(lattice, species, frac))
}

/// Pure translations mapping the structure onto itself, the zero vector first.
fn pure_translations(s: &Structure, symprec: f64) -> Vec<Vector3<f64>> {
    let comp = s.composition();
    let rare = comp
        .counts()
        .iter()
        .min_by(|a, b| a.1.cmp(b.1).then_with(|| a.0.cmp(b.0)))
        .map(|(k, _)| k.clone())
        .expect("non-empty structure");
    let sites: Vec<usize> = (0..s.len()).filter(|&i| s.species()[i] == rare).collect();
    let g = s.lattice().metric();
    let dist = |d: &Vector3<f64>| crate::lattice::min_image_metric(&g, d).1.sqrt();
    let frac = s.frac_coords();
    let species = s.species();

    let mut found: Vec<Vector3<f64>> = vec![Vector3::zeros()];
    let anchor = sites[0];
    for &j in &sites[1..] {
        let t = wrap_vec(&(frac[j] - frac[anchor]));
        if found.iter().any(|u| dist(&(t - u)) <= symprec) {
            continue;
        }
        let valid = (0..s.len()).all(|i| {
            let target = frac[i] + t;
            (0..s.len()).any(|k| species[k] == species[i] && dist(&(target - frac[k])) <= symprec)
        });
        if valid {
            found.push(t);
        }
    }
    found
}

/// Integer row reduction to a 3-row basis of the lattice spanned by `rows`.
fn row_basis(mut rows: Vec<[i64; 3]>) -> Option<[[i64; 3]; 3]> {
    for col in 0..3 {
        loop {
            let pivot = (col..rows.len())
                .filter(|&r| rows[r][col] != 0)
                .min_by_key(|&r| rows[r][col].abs())?;
            rows.swap(col, pivot);
            let p = rows[col];
            let mut done = true;
            for r in rows.iter_mut().skip(col + 1) {
                let q = r[col].div_euclid(p[col]);
                for c in 0..3 {
                    r[c] -= q * p[c];
                }
                if r[col] != 0 {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
    }
    let mut h = [rows[0], rows[1], rows[2]];
    if int_det3(&h) < 0 {
        h[0] = h[0].map(|x| -x);
    }
    Some(h)
}

fn int_det3(h: &[[i64; 3]; 3]) -> i64 {
    h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1]) - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
        + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unimodular::UnimodularTransform;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn simple_cubic() -> Structure {
        Structure::from_parts(Lattice::cubic(2.0), &["C"], &[[0.0, 0.0, 0.0]]).unwrap()
    }

    #[test]
    fn one_atom_cell_is_primitive() {
        let p = primitive_cell(&simple_cubic(), DEFAULT_SYMPREC);
        assert_eq!(p.len(), 1);
        assert_abs_diff_eq!(p.volume(), 8.0, epsilon = 1e-10);
    }

    #[test]
    fn supercell_halves() {
        let sc = simple_cubic().supercell([2, 1, 1]).unwrap();
        let p = primitive_cell(&sc, DEFAULT_SYMPREC);
        assert_eq!(p.len(), 1);
        assert_abs_diff_eq!(p.volume(), sc.volume() / 2.0, epsilon = 1e-10);
    }

    #[test]
    fn replicated_four_atom_cell() {
        let lattice = Lattice::from_parameters(3.1, 3.3, 3.7, 84.0, 97.0, 102.0).unwrap();
        let base = Structure::from_parts(
            lattice,
            &["Si", "Si", "C", "C"],
            &[[0.0, 0.0, 0.0], [0.27, 0.24, 0.22], [0.5, 0.1, 0.6], [0.8, 0.65, 0.35]],
        )
        .unwrap();
        let eight = base.supercell([1, 2, 1]).unwrap();
        assert_eq!(eight.len(), 8);
        let p = primitive_cell(&eight, DEFAULT_SYMPREC);
        assert_eq!(p.len(), 4);
        assert_abs_diff_eq!(p.volume(), base.volume(), epsilon = 1e-9);
        assert_eq!(p.composition(), base.composition());
        // inverse: the primitive cell of the base is the same cell
        let pb = primitive_cell(&base, DEFAULT_SYMPREC);
        assert!(pb.lattice().parameters().max_abs_diff(&p.lattice().parameters()) < 1e-8);
    }

    #[test]
    fn body_centred_cubic_reduces() {
        let s = Structure::from_parts(Lattice::cubic(3.0), &["Fe", "Fe"], &[[0.0, 0.0, 0.0], [0.5, 0.5, 0.5]]).unwrap();
        let p = primitive_cell(&s, DEFAULT_SYMPREC);
        assert_eq!(p.len(), 1);
        assert_abs_diff_eq!(p.volume(), 13.5, epsilon = 1e-10);
        let params = p.lattice().parameters();
        assert_abs_diff_eq!(params.a, 3.0 * 3f64.sqrt() / 2.0, epsilon = 1e-10);
    }

    #[test]
    fn random_supercells_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..60 {
            let lattice = Lattice::from_parameters(
                rng.random_range(3.0..5.0),
                rng.random_range(3.0..5.0),
                rng.random_range(3.0..5.0),
                rng.random_range(70.0..110.0),
                rng.random_range(70.0..110.0),
                rng.random_range(70.0..110.0),
            )
            .unwrap();
            let n = rng.random_range(1..5);
            let species: Vec<&str> = (0..n).map(|i| ["A", "B"][i % 2]).collect();
            let frac: Vec<[f64; 3]> = (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
            let base = Structure::from_parts(lattice, &species, &frac).unwrap();
            let mult = [rng.random_range(1..3), rng.random_range(1..3), rng.random_range(1..3)];
            let m = UnimodularTransform::random(&mut rng, 6, false);
            let big = base.supercell(mult).unwrap().apply_unimodular(&m);
            let p = primitive_cell(&big, DEFAULT_SYMPREC);
            assert_eq!(big.len() % p.len(), 0);
            assert_eq!(p.len(), base.len(), "mult {mult:?}");
            assert_abs_diff_eq!(p.volume(), base.volume(), epsilon = 1e-8);
            // fixed point, also after replicating back
            let again = primitive_cell(&p, DEFAULT_SYMPREC);
            assert_eq!(again, p);
            let back = primitive_cell(&p.supercell([2, 1, 1]).unwrap(), DEFAULT_SYMPREC);
            assert_eq!(back.len(), p.len());
            assert!(back.lattice().parameters().max_abs_diff(&p.lattice().parameters()) < 1e-8);
            for f in p.frac_coords() {
                assert!(f.iter().all(|x| (0.0..1.0).contains(x)));
            }
        }
    }

    #[test]
    fn row_basis_spans_generators() {
        let h = row_basis(vec![[2, 0, 0], [0, 2, 0], [0, 0, 2], [1, 1, 1]]).unwrap();
        assert_eq!(int_det3(&h), 4);
    }
}
