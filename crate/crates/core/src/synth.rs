//! Generator of equivalent unit-cell representations of a crystal.

use nalgebra::{Quaternion, Rotation3, UnitQuaternion, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::structure::Structure;
use crate::unimodular::UnimodularTransform;

/// Tag recording whether the output is a proper or mirrored copy.
pub const ORIENTATION_TAG: &str = "orientation";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    /// Never mirror. When false, a mirror image is produced with probability 1/2.
    pub proper_only: bool,
    pub translate: bool,
    pub rotate: bool,
    pub permute: bool,
    /// Each supercell multiplier is drawn from `1..=supercell_max`.
    pub supercell_max: usize,
    /// Gaussian noise on Cartesian positions, Å.
    pub noise_std: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            proper_only: true,
            translate: true,
            rotate: true,
            permute: true,
            supercell_max: 1,
            noise_std: 0.0,
        }
    }
}

/// Maximum number of elementary factors in the random basis change.
const MAX_UNIMODULAR_FACTORS: usize = 6;

/// A different cell of the same crystal (up to `noise_std`), deterministic in
/// `(seed, opts)`. Steps: supercell, unimodular basis change, rotation,
/// optional mirror, translation, site permutation, noise.
pub fn synth_equivalent_cell(structure: &Structure, seed: u64, opts: &SynthOptions) -> Structure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let smax = opts.supercell_max.max(1);
    let mult = [0; 3].map(|_| rng.random_range(1..=smax));
    let mut s = structure.supercell(mult).expect("multipliers are >= 1");

    let m = UnimodularTransform::random(&mut rng, MAX_UNIMODULAR_FACTORS, opts.proper_only);
    s = s.apply_unimodular(&m);

    if opts.rotate {
        s = s.rotated(&random_rotation(&mut rng));
    }
    let mirror = !opts.proper_only && rng.random_bool(0.5);
    if mirror {
        s = s.mirrored();
    }
    if opts.translate {
        let shift = Vector3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
        s = s.translated(&shift);
    }
    if opts.permute {
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.shuffle(&mut rng);
        s = s.permuted(&order);
    }
    if opts.noise_std > 0.0 {
        let normal = Normal::new(0.0, opts.noise_std).expect("finite noise_std");
        let disp: Vec<Vector3<f64>> = (0..s.len())
            .map(|_| {
                Vector3::new(
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                )
            })
            .collect();
        s = s.displaced(&disp);
    }
    s.tags.insert(
        ORIENTATION_TAG.to_string(),
        if mirror { "improper" } else { "proper" }.to_string(),
    );
    s
}

/// Uniformly distributed rotation (normalised Gaussian quaternion).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation3<f64> {
    loop {
        let q: [f64; 4] = [0; 4].map(|_| StandardNormal.sample(rng));
        let quat = Quaternion::new(q[0], q[1], q[2], q[3]);
        if quat.norm() > 1e-6 {
            return UnitQuaternion::from_quaternion(quat).to_rotation_matrix();
        }
    }
}
