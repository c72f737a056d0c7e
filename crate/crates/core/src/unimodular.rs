//! Integer basis changes with determinant ±1.

use std::fmt;

use nalgebra::Matrix3;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::CrystalError;

/// A 3×3 integer matrix `M` with `det(M) = ±1`.
///
/// Acting on a lattice whose basis vectors are the rows of `B`, the new basis
/// is `M · B`; fractional coordinates transform as `f' = f · M⁻¹`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct UnimodularTransform {
    matrix: Matrix3<i32>,
}

impl UnimodularTransform {
    pub fn new(matrix: Matrix3<i32>) -> Result<Self, CrystalError> {
        let det = int_det(&matrix);
        if det.abs() != 1 {
            return Err(CrystalError::NotUnimodular { det });
        }
        Ok(UnimodularTransform { matrix })
    }

    pub fn from_rows(rows: [[i32; 3]; 3]) -> Result<Self, CrystalError> {
        Self::new(Matrix3::from_fn(|i, j| rows[i][j]))
    }

    pub fn identity() -> Self {
        UnimodularTransform {
            matrix: Matrix3::identity(),
        }
    }

    pub fn matrix(&self) -> &Matrix3<i32> {
        &self.matrix
    }

    pub fn to_f64(&self) -> Matrix3<f64> {
        self.matrix.map(f64::from)
    }

    pub fn det(&self) -> i32 {
        int_det(&self.matrix) as i32
    }

    pub fn is_proper(&self) -> bool {
        self.det() > 0
    }

    /// Exact integer inverse (adjugate divided by the ±1 determinant).
    pub fn inverse(&self) -> Self {
        let m = &self.matrix;
        let det = self.det();
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[(r0, c0)] * m[(r1, c1)] - m[(r0, c1)] * m[(r1, c0)];
        // adj(M)[i][j] = cofactor(j, i)
        let adj = Matrix3::new(
            cof(1, 2, 1, 2),
            -cof(0, 2, 1, 2),
            cof(0, 1, 1, 2),
            -cof(1, 2, 0, 2),
            cof(0, 2, 0, 2),
            -cof(0, 1, 0, 2),
            cof(1, 2, 0, 1),
            -cof(0, 2, 0, 1),
            cof(0, 1, 0, 1),
        );
        UnimodularTransform { matrix: adj * det }
    }

    /// `self · other`.
    pub fn compose(&self, other: &Self) -> Self {
        UnimodularTransform {
            matrix: self.matrix * other.matrix,
        }
    }

    /// Row-major entries, the ordering key used for deterministic tie-breaking.
    pub fn entries(&self) -> [i32; 9] {
        let m = &self.matrix;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn rows(&self) -> [[i32; 3]; 3] {
        let e = self.entries();
        [[e[0], e[1], e[2]], [e[3], e[4], e[5]], [e[6], e[7], e[8]]]
    }

    pub fn max_abs_entry(&self) -> i32 {
        self.matrix.iter().map(|x| x.abs()).max().unwrap_or(0)
    }

    /// Random transform built as a product of 1..=`max_factors` elementary
    /// shears, row swaps and row negations. With `proper` the result has
    /// determinant +1.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_factors: usize, proper: bool) -> Self {
        let n = rng.random_range(1..=max_factors.max(1));
        let mut acc = Matrix3::<i32>::identity();
        for _ in 0..n {
            let mut e = Matrix3::<i32>::identity();
            match rng.random_range(0..4) {
                // shears are twice as likely as the det -1 moves
                0 | 1 => {
                    let i = rng.random_range(0..3);
                    let j = (i + rng.random_range(1..3)) % 3;
                    e[(i, j)] = if rng.random_bool(0.5) { 1 } else { -1 };
                }
                2 => {
                    let i = rng.random_range(0..3);
                    let j = (i + rng.random_range(1..3)) % 3;
                    e.swap_rows(i, j);
                }
                _ => {
                    let i = rng.random_range(0..3);
                    e[(i, i)] = -1;
                }
            }
            acc = e * acc;
        }
        if proper && int_det(&acc) < 0 {
            let i = rng.random_range(0..3);
            for j in 0..3 {
                acc[(i, j)] = -acc[(i, j)];
            }
        }
        UnimodularTransform { matrix: acc }
    }
}

impl Default for UnimodularTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl fmt::Debug for UnimodularTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Unimodular{:?}", self.rows())
    }
}

impl Serialize for UnimodularTransform {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for UnimodularTransform {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = <[[i32; 3]; 3]>::deserialize(deserializer)?;
        UnimodularTransform::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn int_det(m: &Matrix3<i32>) -> i64 {
    let e = |i, j| i64::from(m[(i, j)]);
    e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1)) - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
        + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0))
}
