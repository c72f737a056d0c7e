//! Periodic structures and compositions.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::lattice::Lattice;
use crate::unimodular::UnimodularTransform;
use crate::CrystalError;

/// Wrap a fractional coordinate into `[0, 1)`.
pub fn wrap_frac(x: f64) -> f64 {
    let y = x - x.floor();
    if y >= 1.0 - 1e-12 {
        0.0
    } else {
        y
    }
}

pub fn wrap_vec(v: &Vector3<f64>) -> Vector3<f64> {
    v.map(wrap_frac)
}

/// A periodic crystal: lattice, species and fractional coordinates in `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    lattice: Lattice,
    species: Vec<String>,
    frac_coords: Vec<Vector3<f64>>,
    pub id: String,
    pub energy: Option<f64>,
    pub tags: BTreeMap<String, String>,
}

impl Structure {
    pub fn new(lattice: Lattice, species: Vec<String>, frac_coords: Vec<Vector3<f64>>) -> Result<Self, CrystalError> {
        if species.len() != frac_coords.len() {
            return Err(CrystalError::LengthMismatch {
                species: species.len(),
                coords: frac_coords.len(),
            });
        }
        if species.is_empty() {
            return Err(CrystalError::EmptyStructure);
        }
        if let Some(site) = frac_coords.iter().position(|f| f.iter().any(|x| !x.is_finite())) {
            return Err(CrystalError::NonFiniteCoordinate { site });
        }
        Ok(Structure {
            lattice,
            species,
            frac_coords: frac_coords.iter().map(wrap_vec).collect(),
            id: String::new(),
            energy: None,
            tags: BTreeMap::new(),
        })
    }

    /// Convenience constructor from plain arrays.
    pub fn from_parts<S: AsRef<str>>(
        lattice: Lattice,
        species: &[S],
        frac_coords: &[[f64; 3]],
    ) -> Result<Self, CrystalError> {
        Self::new(
            lattice,
            species.iter().map(|s| s.as_ref().to_string()).collect(),
            frac_coords.iter().map(|f| Vector3::from(*f)).collect(),
        )
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn frac_coords(&self) -> &[Vector3<f64>] {
        &self.frac_coords
    }

    pub fn len(&self) -> usize {
        self.species.len()
    }

    pub fn is_empty(&self) -> bool {
        self.species.is_empty()
    }

    pub fn volume(&self) -> f64 {
        self.lattice.volume()
    }

    pub fn cart_coords(&self) -> Vec<Vector3<f64>> {
        self.frac_coords.iter().map(|f| self.lattice.to_cartesian(f)).collect()
    }

    pub fn composition(&self) -> Composition {
        Composition::from_species(&self.species)
    }

    /// Copy with the same metadata but new geometry.
    fn rebuilt(&self, lattice: Lattice, species: Vec<String>, frac: Vec<Vector3<f64>>) -> Structure {
        let mut s = Structure::new(lattice, species, frac).expect("geometry derived from a valid structure");
        s.id = self.id.clone();
        s.energy = self.energy;
        s.tags = self.tags.clone();
        s
    }

    /// Re-express the structure in the basis `M · B`.
    pub fn apply_unimodular(&self, m: &UnimodularTransform) -> Structure {
        let minv = m.inverse().to_f64();
        let frac = self.frac_coords.iter().map(|f| minv.tr_mul(f)).collect();
        self.rebuilt(self.lattice.transformed(m), self.species.clone(), frac)
    }

    /// Diagonal supercell `na × nb × nc`.
    pub fn supercell(&self, mult: [usize; 3]) -> Result<Structure, CrystalError> {
        if mult.contains(&0) {
            return Err(CrystalError::InvalidSupercell);
        }
        let scale = Vector3::new(mult[0] as f64, mult[1] as f64, mult[2] as f64);
        let basis = Matrix3::from_diagonal(&scale) * self.lattice.basis();
        let mut species = Vec::with_capacity(self.len() * mult.iter().product::<usize>());
        let mut frac = Vec::with_capacity(species.capacity());
        for i in 0..mult[0] {
            for j in 0..mult[1] {
                for k in 0..mult[2] {
                    let shift = Vector3::new(i as f64, j as f64, k as f64);
                    for (sp, f) in self.species.iter().zip(&self.frac_coords) {
                        species.push(sp.clone());
                        frac.push((f + shift).component_div(&scale));
                    }
                }
            }
        }
        Ok(self.rebuilt(Lattice::new(basis)?, species, frac))
    }

    /// Rigid Cartesian rotation of the lattice; fractional coordinates are unchanged.
    pub fn rotated(&self, rotation: &Rotation3<f64>) -> Structure {
        let basis = self.lattice.basis() * rotation.matrix().transpose();
        let lattice = Lattice::new(basis).expect("rotation preserves volume");
        self.rebuilt(lattice, self.species.clone(), self.frac_coords.clone())
    }

    /// Mirror image through the plane `z = 0`.
    pub fn mirrored(&self) -> Structure {
        let reflect = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        let basis = self.lattice.basis() * reflect;
        let lattice = Lattice::new(basis).expect("reflection preserves volume");
        self.rebuilt(lattice, self.species.clone(), self.frac_coords.clone())
    }

    /// Point inversion `r -> -r`. Improper, like a mirror.
    pub fn inverted(&self) -> Structure {
        let frac = self.frac_coords.iter().map(|f| -f).collect();
        self.rebuilt(self.lattice.clone(), self.species.clone(), frac)
    }

    /// Shift all sites by a fractional vector.
    pub fn translated(&self, shift: &Vector3<f64>) -> Structure {
        let frac = self.frac_coords.iter().map(|f| f + shift).collect();
        self.rebuilt(self.lattice.clone(), self.species.clone(), frac)
    }

    /// Reorder sites: new site `i` is old site `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Structure {
        assert_eq!(order.len(), self.len(), "permutation length");
        let species = order.iter().map(|&i| self.species[i].clone()).collect();
        let frac = order.iter().map(|&i| self.frac_coords[i]).collect();
        self.rebuilt(self.lattice.clone(), species, frac)
    }

    /// Same crystal with the lattice scaled isotropically so the cell volume becomes `volume`.
    pub fn with_volume(&self, volume: f64) -> Structure {
        let factor = (volume / self.volume()).cbrt();
        self.rebuilt(
            self.lattice.scaled(factor),
            self.species.clone(),
            self.frac_coords.clone(),
        )
    }

    /// Cartesian displacements added to the sites.
    pub fn displaced(&self, cart: &[Vector3<f64>]) -> Structure {
        assert_eq!(cart.len(), self.len(), "displacement length");
        let frac = self
            .frac_coords
            .iter()
            .zip(cart)
            .map(|(f, d)| f + self.lattice.to_fractional(d))
            .collect();
        self.rebuilt(self.lattice.clone(), self.species.clone(), frac)
    }

    pub(crate) fn with_geometry(&self, lattice: Lattice, species: Vec<String>, frac: Vec<Vector3<f64>>) -> Structure {
        self.rebuilt(lattice, species, frac)
    }
}

/// Element counts and their gcd-reduced form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Composition {
    counts: BTreeMap<String, u32>,
    reduced: BTreeMap<String, u32>,
}

impl Composition {
    pub fn from_species<S: AsRef<str>>(species: &[S]) -> Self {
        let mut counts = BTreeMap::new();
        for s in species {
            *counts.entry(s.as_ref().to_string()).or_insert(0u32) += 1;
        }
        let g = counts.values().copied().fold(0, gcd);
        let reduced = counts
            .iter()
            .map(|(k, v)| (k.clone(), if g > 0 { v / g } else { *v }))
            .collect();
        Composition { counts, reduced }
    }

    pub fn counts(&self) -> &BTreeMap<String, u32> {
        &self.counts
    }

    pub fn reduced(&self) -> &BTreeMap<String, u32> {
        &self.reduced
    }

    pub fn n_arity(&self) -> usize {
        self.counts.len()
    }

    /// Canonical formula of the reduced composition, elements sorted by symbol,
    /// e.g. `Hf1N3Nb1`.
    pub fn reduced_formula(&self) -> String {
        self.reduced.iter().map(|(k, v)| format!("{k}{v}")).collect()
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn reduced_composition(structure: &Structure) -> Composition {
    structure.composition()
}
