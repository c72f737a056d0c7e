//! Tolerance-gated periodic structure matching.
//!
//! Both structures are reduced to Niggli-reduced primitive cells and scaled to
//! a common volume. Every integer lattice correspondence within `ltol` and
//! `angle_tol` is enumerated in both directions; for each one the sites are
//! anchored on every same-species site of the target and assigned optimally
//! per species. The best candidate is the one with the smallest normalized
//! RMS displacement.

pub mod assignment;
pub mod lattice_fit;
pub mod rmsd;

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::lattice::{min_image_metric, Lattice};
use crate::primitive::{primitive_cell, DEFAULT_SYMPREC};
use crate::structure::Structure;
use crate::unimodular::UnimodularTransform;
use crate::CrystalError;

pub use assignment::hungarian;
pub use lattice_fit::{fit_lattices, LatticeFit};
pub use rmsd::normalized_rmsd;

/// Lattice-length, site and angle tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchTolerances {
    /// Fractional lattice-length tolerance.
    pub ltol: f64,
    /// Normalized RMS displacement tolerance.
    pub stol: f64,
    /// Lattice-angle tolerance, degrees.
    pub angle_tol: f64,
}

impl MatchTolerances {
    /// The loose defaults (0.3, 0.5, 10°), also used as search ceilings.
    pub const LOOSE: MatchTolerances = MatchTolerances {
        ltol: 0.3,
        stol: 0.5,
        angle_tol: 10.0,
    };

    pub fn new(ltol: f64, stol: f64, angle_tol: f64) -> Result<Self, CrystalError> {
        let t = MatchTolerances { ltol, stol, angle_tol };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), CrystalError> {
        let ok = [self.ltol, self.stol, self.angle_tol]
            .iter()
            .all(|x| x.is_finite() && *x > 0.0);
        if ok {
            Ok(())
        } else {
            Err(CrystalError::InvalidParameters(format!(
                "tolerances must be positive: ltol={} stol={} angle_tol={}",
                self.ltol, self.stol, self.angle_tol
            )))
        }
    }

    /// Componentwise maximum.
    pub fn max(&self, other: &MatchTolerances) -> MatchTolerances {
        MatchTolerances {
            ltol: self.ltol.max(other.ltol),
            stol: self.stol.max(other.stol),
            angle_tol: self.angle_tol.max(other.angle_tol),
        }
    }
}

impl Default for MatchTolerances {
    fn default() -> Self {
        Self::LOOSE
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchOptions {
    /// Accept alignments that need a mirror or roto-inversion.
    pub allow_improper: bool,
    /// Scale both cells to the geometric mean of their volumes before matching.
    pub scale_volumes: bool,
    /// Position tolerance of the primitive-cell search, Å.
    pub symprec: f64,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            allow_improper: true,
            scale_volumes: true,
            symprec: DEFAULT_SYMPREC,
        }
    }
}

impl MatchOptions {
    pub fn proper_only() -> Self {
        MatchOptions {
            allow_improper: false,
            ..Default::default()
        }
    }
}

/// Outcome of a successful match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub rmse: f64,
    pub max_dist: f64,
    /// `site_mapping[j]` is the site of the first primitive cell matched to
    /// site `j` of the second.
    pub site_mapping: Vec<usize>,
    /// `M` with `M · B2 ≈ B1` (primitive cells, up to rotation).
    pub lattice_map: UnimodularTransform,
    pub proper: bool,
}

/// A structure reduced once for repeated matching.
#[derive(Debug, Clone)]
pub struct PreparedStructure {
    primitive: Structure,
    reduced: BTreeMap<String, u32>,
    symbols: Vec<String>,
    species_of: Vec<usize>,
}

impl PreparedStructure {
    pub fn new(structure: &Structure, symprec: f64) -> Self {
        let primitive = primitive_cell(structure, symprec);
        let comp = primitive.composition();
        let symbols: Vec<String> = comp.counts().keys().cloned().collect();
        let species_of = primitive
            .species()
            .iter()
            .map(|s| symbols.binary_search(s).expect("symbol in composition"))
            .collect();
        PreparedStructure {
            reduced: comp.reduced().clone(),
            primitive,
            symbols,
            species_of,
        }
    }

    pub fn primitive(&self) -> &Structure {
        &self.primitive
    }

    pub fn reduced_composition(&self) -> &BTreeMap<String, u32> {
        &self.reduced
    }

    fn comparable(&self, other: &PreparedStructure) -> bool {
        self.reduced == other.reduced && self.primitive.len() == other.primitive.len() && self.symbols == other.symbols
    }

    fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.symbols.len()];
        for (i, &k) in self.species_of.iter().enumerate() {
            blocks[k].push(i);
        }
        blocks
    }
}

/// One evaluated lattice correspondence, in forward form.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub lattice_map: UnimodularTransform,
    /// Found while mapping the first structure onto the second.
    pub reverse: bool,
    /// Target site the anchor was placed on.
    pub anchor: usize,
    pub len_dev: f64,
    pub ang_dev: f64,
    pub proper: bool,
    pub rmse: f64,
    pub max_dist: f64,
    pub site_mapping: Vec<usize>,
}

impl Candidate {
    fn admissible(&self, ltol: f64, stol: f64, angle_tol: f64, allow_improper: bool) -> bool {
        self.len_dev <= ltol && self.ang_dev <= angle_tol && self.rmse <= stol && (allow_improper || self.proper)
    }
}

/// All candidates of a pair within some ceiling tolerances. Any query at
/// componentwise smaller tolerances gives the same answer as a fresh match.
#[derive(Debug, Clone, Default)]
pub struct PairAnalysis {
    candidates: Vec<Candidate>,
}

struct Side<'a> {
    lattice: Lattice,
    frac: &'a [Vector3<f64>],
    blocks: Vec<Vec<usize>>,
}

impl PairAnalysis {
    pub fn new(s1: &Structure, s2: &Structure, ceiling: &MatchTolerances, opts: &MatchOptions) -> Self {
        let p1 = PreparedStructure::new(s1, opts.symprec);
        let p2 = PreparedStructure::new(s2, opts.symprec);
        Self::from_prepared(&p1, &p2, ceiling, opts)
    }

    pub fn from_prepared(
        p1: &PreparedStructure,
        p2: &PreparedStructure,
        ceiling: &MatchTolerances,
        opts: &MatchOptions,
    ) -> Self {
        if !p1.comparable(p2) {
            return PairAnalysis::default();
        }
        let (mut l1, mut l2) = (p1.primitive.lattice().clone(), p2.primitive.lattice().clone());
        if opts.scale_volumes {
            let (v1, v2) = (l1.volume(), l2.volume());
            let v = (v1 * v2).sqrt();
            l1 = l1.scaled((v / v1).cbrt());
            l2 = l2.scaled((v / v2).cbrt());
        }
        let side1 = Side {
            lattice: l1,
            frac: p1.primitive.frac_coords(),
            blocks: p1.blocks(),
        };
        let side2 = Side {
            lattice: l2,
            frac: p2.primitive.frac_coords(),
            blocks: p2.blocks(),
        };

        let mut candidates = Vec::new();
        for (target, moving, reverse) in [(&side1, &side2, false), (&side2, &side1, true)] {
            for fit in fit_lattices(&target.lattice, &moving.lattice, ceiling.ltol, ceiling.angle_tol) {
                let proper = target.lattice.determinant() * fit.aligned.determinant() > 0.0;
                if !proper && !opts.allow_improper {
                    continue;
                }
                let Some(eval) = evaluate(target, moving, &fit) else {
                    continue;
                };
                let (lattice_map, site_mapping) = if reverse {
                    (fit.m.inverse(), invert_permutation(&eval.mapping))
                } else {
                    (fit.m, eval.mapping)
                };
                candidates.push(Candidate {
                    lattice_map,
                    reverse,
                    anchor: eval.anchor,
                    len_dev: fit.len_dev,
                    ang_dev: fit.ang_dev,
                    proper,
                    rmse: eval.rmse,
                    max_dist: eval.max_dist,
                    site_mapping,
                });
            }
        }
        candidates.sort_by(|a, b| {
            (a.lattice_map.entries(), a.reverse, a.anchor).cmp(&(b.lattice_map.entries(), b.reverse, b.anchor))
        });
        PairAnalysis { candidates }
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    /// Minimum-rmse admissible candidate. Among equal rmse a proper alignment
    /// wins, then the first in key order.
    pub fn best_candidate(&self, ltol: f64, stol: f64, angle_tol: f64, allow_improper: bool) -> Option<&Candidate> {
        let mut best: Option<&Candidate> = None;
        for c in &self.candidates {
            if !c.admissible(ltol, stol, angle_tol, allow_improper) {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => c.rmse < b.rmse || (c.rmse == b.rmse && c.proper && !b.proper),
            };
            if better {
                best = Some(c);
            }
        }
        best
    }

    pub fn best(&self, tol: &MatchTolerances, allow_improper: bool) -> Option<MatchResult> {
        self.best_candidate(tol.ltol, tol.stol, tol.angle_tol, allow_improper)
            .map(|c| MatchResult {
                rmse: c.rmse,
                max_dist: c.max_dist,
                site_mapping: c.site_mapping.clone(),
                lattice_map: c.lattice_map,
                proper: c.proper,
            })
    }

    pub fn is_match(&self, ltol: f64, stol: f64, angle_tol: f64, allow_improper: bool) -> bool {
        self.candidates
            .iter()
            .any(|c| c.admissible(ltol, stol, angle_tol, allow_improper))
    }
}

struct Evaluation {
    rmse: f64,
    max_dist: f64,
    mapping: Vec<usize>,
    anchor: usize,
}

/// Best site assignment of `moving` onto `target` under one lattice correspondence.
fn evaluate(target: &Side, moving: &Side, fit: &LatticeFit) -> Option<Evaluation> {
    let n = target.frac.len();
    let minv = fit.m.inverse().to_f64();
    let fm: Vec<Vector3<f64>> = moving.frac.iter().map(|f| minv.tr_mul(f)).collect();
    let g: Matrix3<f64> = (target.lattice.metric() + fit.aligned.metric()) * 0.5;
    let volume = g.determinant().max(0.0).sqrt();
    let norm = rmsd::free_length(volume, n);
    if !(norm > 0.0) {
        return None;
    }

    // least-frequent species, ties to the first symbol
    let rare = (0..target.blocks.len()).min_by_key(|&k| (target.blocks[k].len(), k))?;
    let a = moving.blocks[rare][0];

    let mut best: Option<Evaluation> = None;
    let mut disp = vec![Vector3::zeros(); n];
    let mut mapping = vec![0usize; n];
    for &b in &target.blocks[rare] {
        let shift = target.frac[b] - fm[a];
        for (tb, mb) in target.blocks.iter().zip(&moving.blocks) {
            let k = tb.len();
            let mut cost = vec![vec![0.0; k]; k];
            let mut vecs = vec![vec![Vector3::zeros(); k]; k];
            for (r, &j) in mb.iter().enumerate() {
                let p = fm[j] + shift;
                for (c, &i) in tb.iter().enumerate() {
                    let (d, d2) = min_image_metric(&g, &(target.frac[i] - p));
                    cost[r][c] = d2;
                    vecs[r][c] = d;
                }
            }
            let (col_of_row, _) = hungarian(&cost);
            for (r, &c) in col_of_row.iter().enumerate() {
                mapping[mb[r]] = tb[c];
                disp[mb[r]] = vecs[r][c];
            }
        }
        let mean = disp.iter().sum::<Vector3<f64>>() / n as f64;
        let sq: Vec<f64> = disp
            .iter()
            .map(|d| {
                let e = d - mean;
                (g * e).dot(&e).max(0.0)
            })
            .collect();
        let rmse = (sq.iter().sum::<f64>() / n as f64).sqrt() / norm;
        let max_dist = sq.iter().copied().fold(0.0, f64::max).sqrt() / norm;
        if best.as_ref().is_none_or(|e| rmse < e.rmse) {
            best = Some(Evaluation {
                rmse,
                max_dist,
                mapping: mapping.clone(),
                anchor: b,
            });
        }
    }
    best
}

fn invert_permutation(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &j) in p.iter().enumerate() {
        inv[j] = i;
    }
    inv
}

/// Match two structures. Returns `None` unless the reduced compositions agree
/// and some lattice correspondence within `ltol`/`angle_tol` has a site
/// assignment with normalized RMS displacement `<= stol`.
pub fn match_structures(
    s1: &Structure,
    s2: &Structure,
    tol: &MatchTolerances,
    opts: &MatchOptions,
) -> Option<MatchResult> {
    PairAnalysis::new(s1, s2, tol, opts).best(tol, opts.allow_improper)
}

/// [`match_structures`] on structures prepared in advance.
pub fn match_prepared(
    p1: &PreparedStructure,
    p2: &PreparedStructure,
    tol: &MatchTolerances,
    opts: &MatchOptions,
) -> Option<MatchResult> {
    PairAnalysis::from_prepared(p1, p2, tol, opts).best(tol, opts.allow_improper)
}
