//! Enumeration of integer lattice correspondences within length/angle tolerances.

use nalgebra::{Matrix3, Vector3};

use crate::lattice::{vector_angle, Lattice};
use crate::unimodular::{int_det, UnimodularTransform};

/// Hard cap on the entries of enumerated matrices.
pub const MAX_ENTRY_BOUND: i32 = 3;

/// One lattice correspondence: `aligned = m · l2` has (up to rotation) the
/// lengths and angles of `l1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeFit {
    pub m: UnimodularTransform,
    pub aligned: Lattice,
    /// Largest `|Δlength| / max(length1, length2)` over the three vectors.
    pub len_dev: f64,
    /// Largest angle difference, degrees.
    pub ang_dev: f64,
}

/// Entry bound `ceil(longest / shortest) + 1` over both lattices, capped at 3.
pub fn entry_bound(l1: &Lattice, l2: &Lattice) -> i32 {
    let lens: Vec<f64> = l1.lengths().into_iter().chain(l2.lengths()).collect();
    let max = lens.iter().copied().fold(0.0, f64::max);
    let min = lens.iter().copied().fold(f64::INFINITY, f64::min);
    let b = (max / min).ceil() as i32 + 1;
    b.min(MAX_ENTRY_BOUND)
}

/// Fractional length deviation, symmetric in its arguments.
pub fn length_deviation(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.max(b)
}

/// Every unimodular `M` (entries bounded by [`entry_bound`]) such that the
/// rows of `M · l2` match the rows of `l1` within `ltol` (fractional) in
/// length and `angle_tol` (degrees) in pairwise angles. Sorted by the
/// row-major entries of `M`.
pub fn fit_lattices(l1: &Lattice, l2: &Lattice, ltol: f64, angle_tol: f64) -> Vec<LatticeFit> {
    let bound = entry_bound(l1, l2);
    let target_len = l1.lengths();
    let target = l1.parameters();
    let target_angles = [target.alpha, target.beta, target.gamma];

    // candidate rows per target vector: (integer row, Cartesian vector, length deviation)
    let mut rows: [Vec<([i32; 3], Vector3<f64>, f64)>; 3] = Default::default();
    for i in -bound..=bound {
        for j in -bound..=bound {
            for k in -bound..=bound {
                if (i, j, k) == (0, 0, 0) {
                    continue;
                }
                let v = l2.basis().tr_mul(&Vector3::new(i as f64, j as f64, k as f64));
                let len = v.norm();
                for (slot, &tl) in target_len.iter().enumerate() {
                    let dev = length_deviation(len, tl);
                    if dev <= ltol {
                        rows[slot].push(([i, j, k], v, dev));
                    }
                }
            }
        }
    }

    let mut fits = Vec::new();
    for (r0, v0, d0) in &rows[0] {
        for (r1, v1, d1) in &rows[1] {
            let gamma_dev = (vector_angle(v0, v1) - target_angles[2]).abs();
            if gamma_dev > angle_tol {
                continue;
            }
            for (r2, v2, d2) in &rows[2] {
                let alpha_dev = (vector_angle(v1, v2) - target_angles[0]).abs();
                if alpha_dev > angle_tol {
                    continue;
                }
                let beta_dev = (vector_angle(v0, v2) - target_angles[1]).abs();
                if beta_dev > angle_tol {
                    continue;
                }
                let mat = Matrix3::new(r0[0], r0[1], r0[2], r1[0], r1[1], r1[2], r2[0], r2[1], r2[2]);
                if int_det(&mat).abs() != 1 {
                    continue;
                }
                let m = UnimodularTransform::new(mat).expect("det checked");
                fits.push(LatticeFit {
                    aligned: l2.transformed(&m),
                    m,
                    len_dev: d0.max(*d1).max(*d2),
                    ang_dev: alpha_dev.max(beta_dev).max(gamma_dev),
                });
            }
        }
    }
    fits.sort_by_key(|f| f.m.entries());
    fits
}
