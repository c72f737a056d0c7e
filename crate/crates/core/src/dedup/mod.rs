//! Dataset deduplication: match boundaries, threshold intersection,
//! clustering, enantiomorph screening and uniqueness curves.

pub mod boundary;
pub mod cluster;
pub mod curves;
pub mod enantiomorph;

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matcher::{MatchOptions, MatchTolerances, PreparedStructure};
use crate::structure::Structure;

pub use boundary::{
    all_pairs_boundaries, bisect_boundary, boundary_tolerance, for_each_boundary, BoundaryParam, BoundaryRecord,
    DEFAULT_THRESH,
};
pub use cluster::{cluster_and_deduplicate, cluster_ids, DuplicateCluster, UnionFind};
pub use curves::{uniqueness_curve, CurveRow};
pub use enantiomorph::{is_enantiomorph, EnantiomorphCheck};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DedupError {
    #[error("pair references unknown id '{0}'")]
    UnknownId(String),
    #[error("duplicate id '{0}' in dataset")]
    DuplicateId(String),
    #[error("{0}")]
    Sink(String),
}

/// Per-tolerance duplicate thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DedupThresholds {
    pub t_stol: f64,
    pub t_ltol: f64,
    pub t_angle: f64,
}

impl Default for DedupThresholds {
    fn default() -> Self {
        DedupThresholds {
            t_stol: 0.025,
            t_ltol: 0.002,
            t_angle: 0.4,
        }
    }
}

impl DedupThresholds {
    /// All three boundaries at or below their thresholds.
    pub fn qualifies(&self, r: &BoundaryRecord) -> bool {
        !r.no_match && r.b_stol <= self.t_stol && r.b_ltol <= self.t_ltol && r.b_angle <= self.t_angle
    }
}

/// Pairs whose boundaries fall under every threshold.
pub fn duplicate_pairs(records: &[BoundaryRecord], th: &DedupThresholds) -> Vec<(String, String)> {
    records
        .iter()
        .filter(|r| th.qualifies(r))
        .map(|r| (r.id1.clone(), r.id2.clone()))
        .collect()
}

fn prepared_by_id<'a>(
    dataset: &'a [Structure],
    ids: &HashSet<&str>,
    opts: &MatchOptions,
) -> Result<HashMap<&'a str, PreparedStructure>, DedupError> {
    let wanted: Vec<&Structure> = dataset.iter().filter(|s| ids.contains(s.id.as_str())).collect();
    let prepared: Vec<(&str, PreparedStructure)> = wanted
        .par_iter()
        .map(|s| (s.id.as_str(), PreparedStructure::new(s, opts.symprec)))
        .collect();
    let map: HashMap<&str, PreparedStructure> = prepared.into_iter().collect();
    if let Some(missing) = ids.iter().find(|id| !map.contains_key(*id)) {
        return Err(DedupError::UnknownId(missing.to_string()));
    }
    Ok(map)
}

/// Proper-only vs unconstrained rmse for each candidate pair at the loose
/// tolerances, flagging pairs under the tenfold rule.
pub fn enantiomorph_screen(
    candidate_pairs: &[(String, String)],
    dataset: &[Structure],
    opts: &MatchOptions,
) -> Result<Vec<EnantiomorphCheck>, DedupError> {
    let ids: HashSet<&str> = candidate_pairs
        .iter()
        .flat_map(|(a, b)| [a.as_str(), b.as_str()])
        .collect();
    let prepared = prepared_by_id(dataset, &ids, opts)?;
    Ok(candidate_pairs
        .par_iter()
        .map(|(a, b)| {
            enantiomorph::screen_pair(
                a,
                b,
                &prepared[a.as_str()],
                &prepared[b.as_str()],
                &MatchTolerances::LOOSE,
                opts,
            )
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DedupConfig {
    pub thresholds: DedupThresholds,
    /// Bracket width of the boundary searches.
    pub thresh: f64,
    /// Drop enantiomorph pairs from the duplicate graph.
    pub enantiomorphs: bool,
    pub opts: MatchOptions,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            thresholds: DedupThresholds::default(),
            thresh: DEFAULT_THRESH,
            enantiomorphs: false,
            opts: MatchOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DedupOutcome {
    pub unique: Vec<Structure>,
    pub clusters: Vec<DuplicateCluster>,
    /// Duplicate-candidate pairs after enantiomorph filtering.
    pub pairs: Vec<(String, String)>,
    /// Screening results, when enabled.
    pub enantiomorph_checks: Vec<EnantiomorphCheck>,
    pub n_records: usize,
}

/// Full pipeline. Every boundary record is passed to `on_record` as it is
/// produced (e.g. to stream it to disk); only qualifying pairs are kept.
pub fn deduplicate(
    dataset: &[Structure],
    cfg: &DedupConfig,
    mut on_record: impl FnMut(&BoundaryRecord) -> Result<(), DedupError>,
) -> Result<DedupOutcome, DedupError> {
    let mut seen = HashSet::new();
    for s in dataset {
        if !seen.insert(s.id.as_str()) {
            return Err(DedupError::DuplicateId(s.id.clone()));
        }
    }
    let mut pairs = Vec::new();
    let mut n_records = 0;
    for_each_boundary(dataset, cfg.thresh, &cfg.opts, |r| {
        n_records += 1;
        on_record(&r)?;
        if cfg.thresholds.qualifies(&r) {
            pairs.push((r.id1, r.id2));
        }
        Ok::<(), DedupError>(())
    })?;

    let mut checks = Vec::new();
    if cfg.enantiomorphs {
        checks = enantiomorph_screen(&pairs, dataset, &cfg.opts)?;
        let flagged: HashSet<(&str, &str)> = checks
            .iter()
            .filter(|c| c.flagged)
            .map(|c| (c.id1.as_str(), c.id2.as_str()))
            .collect();
        pairs.retain(|(a, b)| !flagged.contains(&(a.as_str(), b.as_str())));
    }
    let (unique, clusters) = cluster_and_deduplicate(dataset, &pairs)?;
    Ok(DedupOutcome {
        unique,
        clusters,
        pairs,
        enantiomorph_checks: checks,
        n_records,
    })
}
