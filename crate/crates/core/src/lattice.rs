//! Lattices, cell parameters and Niggli reduction.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::unimodular::UnimodularTransform;
use crate::CrystalError;

/// Iteration cap of the Niggli reduction loop.
pub const NIGGLI_MAX_ITERATIONS: usize = 100;

/// A non-degenerate lattice. The rows of `basis` are the lattice vectors
/// a1, a2, a3 in Ångström.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    basis: Matrix3<f64>,
}

/// Lengths in Å, angles in degrees. `alpha` is the angle between b and c,
/// `beta` between a and c, `gamma` between a and b.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParameters {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl CellParameters {
    pub fn lengths(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn angles(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    /// Largest absolute componentwise difference (Å for lengths, degrees for angles).
    pub fn max_abs_diff(&self, other: &CellParameters) -> f64 {
        let l = self.lengths().into_iter().zip(other.lengths());
        let a = self.angles().into_iter().zip(other.angles());
        l.chain(a).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }
}

impl Lattice {
    pub fn new(basis: Matrix3<f64>) -> Result<Self, CrystalError> {
        if basis.iter().any(|x| !x.is_finite()) {
            return Err(CrystalError::NonFiniteLattice);
        }
        let volume = basis.determinant().abs();
        let scale: f64 = basis.row_iter().map(|r| r.norm()).product();
        if !(volume > 1e-10 * scale) || volume <= 0.0 {
            return Err(CrystalError::DegenerateLattice { volume });
        }
        Ok(Lattice { basis })
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self, CrystalError> {
        Self::new(Matrix3::from_fn(|i, j| rows[i][j]))
    }

    /// Row-major 9-vector (a1x, a1y, a1z, a2x, ...).
    pub fn from_flat(v: &[f64]) -> Result<Self, CrystalError> {
        if v.len() != 9 {
            return Err(CrystalError::InvalidParameters(format!(
                "expected 9 lattice entries, got {}",
                v.len()
            )));
        }
        Self::new(Matrix3::from_row_slice(v))
    }

    pub fn cubic(a: f64) -> Self {
        Lattice::new(Matrix3::identity() * a).expect("cubic lattice with a > 0")
    }

    /// Lattice in the conventional orientation: a along x, b in the xy-plane.
    pub fn from_parameters(a: f64, b: f64, c: f64, alpha: f64, beta: f64, gamma: f64) -> Result<Self, CrystalError> {
        let ok = [a, b, c].iter().all(|x| x.is_finite() && *x > 0.0)
            && [alpha, beta, gamma]
                .iter()
                .all(|x| x.is_finite() && *x > 0.0 && *x < 180.0);
        if !ok {
            return Err(CrystalError::InvalidParameters(format!(
                "a={a} b={b} c={c} alpha={alpha} beta={beta} gamma={gamma}"
            )));
        }
        let (ca, cb, cg) = (
            alpha.to_radians().cos(),
            beta.to_radians().cos(),
            gamma.to_radians().cos(),
        );
        let sg = gamma.to_radians().sin();
        let cy = (ca - cb * cg) / sg;
        let cz2 = 1.0 - cb * cb - cy * cy;
        if cz2 <= 0.0 {
            return Err(CrystalError::InvalidParameters(format!(
                "angles ({alpha}, {beta}, {gamma}) do not form a cell"
            )));
        }
        Lattice::from_rows([[a, 0.0, 0.0], [b * cg, b * sg, 0.0], [c * cb, c * cy, c * cz2.sqrt()]])
    }

    pub fn basis(&self) -> &Matrix3<f64> {
        &self.basis
    }

    /// Row-major 9-vector of the basis.
    pub fn to_flat(&self) -> [f64; 9] {
        let b = &self.basis;
        [
            b[(0, 0)],
            b[(0, 1)],
            b[(0, 2)],
            b[(1, 0)],
            b[(1, 1)],
            b[(1, 2)],
            b[(2, 0)],
            b[(2, 1)],
            b[(2, 2)],
        ]
    }

    pub fn vector(&self, i: usize) -> Vector3<f64> {
        self.basis.row(i).transpose()
    }

    pub fn determinant(&self) -> f64 {
        self.basis.determinant()
    }

    pub fn volume(&self) -> f64 {
        self.determinant().abs()
    }

    pub fn lengths(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.vector(i).norm())
    }

    /// Metric tensor `B Bᵀ`.
    pub fn metric(&self) -> Matrix3<f64> {
        self.basis * self.basis.transpose()
    }

    pub fn parameters(&self) -> CellParameters {
        let [a, b, c] = self.lengths();
        let angle = |i: usize, j: usize| vector_angle(&self.vector(i), &self.vector(j));
        CellParameters {
            a,
            b,
            c,
            alpha: angle(1, 2),
            beta: angle(0, 2),
            gamma: angle(0, 1),
        }
    }

    pub fn to_cartesian(&self, frac: &Vector3<f64>) -> Vector3<f64> {
        self.basis.tr_mul(frac)
    }

    pub fn to_fractional(&self, cart: &Vector3<f64>) -> Vector3<f64> {
        let inv = self
            .basis
            .transpose()
            .try_inverse()
            .expect("non-degenerate lattice is invertible");
        inv * cart
    }

    /// Basis `M · B`.
    pub fn transformed(&self, m: &UnimodularTransform) -> Lattice {
        Lattice {
            basis: m.to_f64() * self.basis,
        }
    }

    pub fn scaled(&self, factor: f64) -> Lattice {
        Lattice::new(self.basis * factor).expect("scaling by a positive factor")
    }

    /// Shortest Cartesian image of a fractional displacement, as
    /// (fractional vector, squared length). Exact for reasonably reduced cells.
    pub fn min_image(&self, dfrac: &Vector3<f64>) -> (Vector3<f64>, f64) {
        min_image_metric(&self.metric(), dfrac)
    }

    pub fn niggli_reduce(&self) -> Result<(Lattice, UnimodularTransform), CrystalError> {
        niggli_reduce(self, default_niggli_eps(self))
    }
}

/// Shortest image of `dfrac` under the quadratic form `g`.
pub(crate) fn min_image_metric(g: &Matrix3<f64>, dfrac: &Vector3<f64>) -> (Vector3<f64>, f64) {
    let base = dfrac.map(|x| x - x.round());
    let mut best = (base, f64::INFINITY);
    for i in -1..=1 {
        for j in -1..=1 {
            for k in -1..=1 {
                let d = base + Vector3::new(i as f64, j as f64, k as f64);
                let d2 = (g * d).dot(&d);
                if d2 < best.1 {
                    best = (d, d2);
                }
            }
        }
    }
    best
}

pub(crate) fn vector_angle(u: &Vector3<f64>, v: &Vector3<f64>) -> f64 {
    let c = (u.dot(v) / (u.norm() * v.norm())).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

/// Cell parameters (a, b, c in Å; α, β, γ in degrees).
pub fn cell_parameters(lattice: &Lattice) -> CellParameters {
    lattice.parameters()
}

/// Default stabilisation tolerance, `1e-5 · V^(1/3)`.
pub fn default_niggli_eps(lattice: &Lattice) -> f64 {
    1e-5 * lattice.volume().cbrt()
}

// G6 form: A = a·a, B = b·b, C = c·c, ξ = 2 b·c, η = 2 a·c, ζ = 2 a·b
struct G6 {
    a: f64,
    b: f64,
    c: f64,
    xi: f64,
    eta: f64,
    zeta: f64,
}

impl G6 {
    fn of(basis: &Matrix3<f64>) -> Self {
        let r = |i: usize| basis.row(i);
        G6 {
            a: r(0).dot(&r(0)),
            b: r(1).dot(&r(1)),
            c: r(2).dot(&r(2)),
            xi: 2.0 * r(1).dot(&r(2)),
            eta: 2.0 * r(0).dot(&r(2)),
            zeta: 2.0 * r(0).dot(&r(1)),
        }
    }
}

fn sign_eps(x: f64, eps: f64) -> i32 {
    if x > eps {
        1
    } else if x < -eps {
        -1
    } else {
        0
    }
}

fn sign(x: f64) -> i32 {
    if x < 0.0 {
        -1
    } else {
        1
    }
}

/// Multiple of the shorter vector to subtract so the off-diagonal term drops
/// to at most the diagonal one. At least one step so boundary cases progress.
fn shear_multiple(off: f64, diag: f64) -> i32 {
    let k = (off.abs() / (2.0 * diag)).round().max(1.0);
    sign(off) * k as i32
}

/// Niggli reduction (Křivý–Gruber with the eps-stabilised comparisons of
/// Grosse-Kunstleve et al.). Returns the reduced lattice and `M` with
/// `reduced.basis == M · lattice.basis`. Every applied step has det +1, so
/// the handedness of the basis is preserved.
pub fn niggli_reduce(lattice: &Lattice, eps: f64) -> Result<(Lattice, UnimodularTransform), CrystalError> {
    let original = lattice.basis;
    let mut m = Matrix3::<i32>::identity();
    let mut basis = original;

    let apply = |m: &mut Matrix3<i32>, basis: &mut Matrix3<f64>, step: Matrix3<i32>| {
        *m = step * *m;
        *basis = m.map(f64::from) * original;
    };

    for _ in 0..NIGGLI_MAX_ITERATIONS {
        let g = G6::of(&basis);

        // A1
        if g.a > g.b + eps || ((g.a - g.b).abs() <= eps && g.xi.abs() > g.eta.abs() + eps) {
            apply(&mut m, &mut basis, Matrix3::new(0, -1, 0, -1, 0, 0, 0, 0, -1));
            continue;
        }
        // A2
        if g.b > g.c + eps || ((g.b - g.c).abs() <= eps && g.eta.abs() > g.zeta.abs() + eps) {
            apply(&mut m, &mut basis, Matrix3::new(-1, 0, 0, 0, 0, -1, 0, -1, 0));
            continue;
        }

        // A3 / A4: make the off-diagonal signs uniform
        let (l, mm, n) = (sign_eps(g.xi, eps), sign_eps(g.eta, eps), sign_eps(g.zeta, eps));
        if l * mm * n == 1 {
            let f = |s: i32| if s == -1 { -1 } else { 1 };
            let step = Matrix3::from_diagonal(&Vector3::new(f(l), f(mm), f(n)));
            if step != Matrix3::identity() {
                apply(&mut m, &mut basis, step);
            }
        } else {
            let mut d = [1, 1, 1];
            let mut zero_slot = None;
            for (slot, s) in [l, mm, n].into_iter().enumerate() {
                if s == 1 {
                    d[slot] = -1;
                } else if s == 0 {
                    zero_slot = Some(slot);
                }
            }
            if d[0] * d[1] * d[2] == -1 {
                if let Some(z) = zero_slot {
                    d[z] = -1;
                }
            }
            let step = Matrix3::from_diagonal(&Vector3::new(d[0], d[1], d[2]));
            if step != Matrix3::identity() {
                apply(&mut m, &mut basis, step);
            }
        }

        let g = G6::of(&basis);
        // A5
        if g.xi.abs() > g.b + eps
            || ((g.xi - g.b).abs() <= eps && 2.0 * g.eta < g.zeta - eps)
            || ((g.xi + g.b).abs() <= eps && g.zeta < -eps)
        {
            let k = shear_multiple(g.xi, g.b);
            apply(&mut m, &mut basis, Matrix3::new(1, 0, 0, 0, 1, 0, 0, -k, 1));
            continue;
        }
        // A6
        if g.eta.abs() > g.a + eps
            || ((g.eta - g.a).abs() <= eps && 2.0 * g.xi < g.zeta - eps)
            || ((g.eta + g.a).abs() <= eps && g.zeta < -eps)
        {
            let k = shear_multiple(g.eta, g.a);
            apply(&mut m, &mut basis, Matrix3::new(1, 0, 0, 0, 1, 0, -k, 0, 1));
            continue;
        }
        // A7
        if g.zeta.abs() > g.a + eps
            || ((g.zeta - g.a).abs() <= eps && 2.0 * g.xi < g.eta - eps)
            || ((g.zeta + g.a).abs() <= eps && g.eta < -eps)
        {
            let k = shear_multiple(g.zeta, g.a);
            apply(&mut m, &mut basis, Matrix3::new(1, 0, 0, -k, 1, 0, 0, 0, 1));
            continue;
        }
        // A8
        let s = g.xi + g.eta + g.zeta + g.a + g.b;
        if s < -eps || (s.abs() <= eps && 2.0 * (g.a + g.eta) + g.zeta > eps) {
            apply(&mut m, &mut basis, Matrix3::new(1, 0, 0, 0, 1, 0, 1, 1, 1));
            continue;
        }

        let transform = UnimodularTransform::new(m).expect("product of det +1 steps");
        return Ok((Lattice::new(basis)?, transform));
    }
    Err(CrystalError::NiggliNotConverged {
        iterations: NIGGLI_MAX_ITERATIONS,
    })
}

/// Checks the Niggli conditions (main and special) within `eps`.
pub fn is_niggli_reduced(lattice: &Lattice, eps: f64) -> bool {
    let g = G6::of(lattice.basis());
    let le = |x: f64, y: f64| x <= y + eps;
    let eq = |x: f64, y: f64| (x - y).abs() <= eps;

    if !(le(g.a, g.b) && le(g.b, g.c)) {
        return false;
    }
    if eq(g.a, g.b) && g.xi.abs() > g.eta.abs() + eps {
        return false;
    }
    if eq(g.b, g.c) && g.eta.abs() > g.zeta.abs() + eps {
        return false;
    }
    let (l, m, n) = (sign_eps(g.xi, eps), sign_eps(g.eta, eps), sign_eps(g.zeta, eps));
    let type_one = l == 1 && m == 1 && n == 1;
    let type_two = l <= 0 && m <= 0 && n <= 0;
    if !(type_one || type_two) {
        return false;
    }
    if !(le(g.xi.abs(), g.b) && le(g.eta.abs(), g.a) && le(g.zeta.abs(), g.a)) {
        return false;
    }
    if !le(-(g.xi + g.eta + g.zeta), g.a + g.b) {
        return false;
    }
    if type_one {
        if eq(g.xi, g.b) && g.zeta > 2.0 * g.eta + eps {
            return false;
        }
        if eq(g.eta, g.a) && g.zeta > 2.0 * g.xi + eps {
            return false;
        }
        if eq(g.zeta, g.a) && g.eta > 2.0 * g.xi + eps {
            return false;
        }
    } else {
        if eq(g.xi, -g.b) && !eq(g.zeta, 0.0) {
            return false;
        }
        if eq(g.eta, -g.a) && !eq(g.zeta, 0.0) {
            return false;
        }
        if eq(g.zeta, -g.a) && !eq(g.eta, 0.0) {
            return false;
        }
        if eq(g.xi + g.eta + g.zeta + g.a + g.b, 0.0) && 2.0 * (g.a + g.eta) + g.zeta > eps {
            return false;
        }
    }
    true
}
