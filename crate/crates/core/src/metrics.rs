//! Benchmark metrics: standard and k-match rates, METRe, cRMSE and tolerance sweeps.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matcher::{match_prepared, MatchOptions, MatchTolerances, PairAnalysis, PreparedStructure};
use crate::structure::Structure;
use crate::CrystalError;

/// Errors of the metric drivers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("{what}: {gen} generated vs {reference} reference entries")]
    LengthMismatch {
        what: &'static str,
        gen: usize,
        reference: usize,
    },
    #[error("group {group} has {size} members, expected k = {k}")]
    GroupSize { group: usize, size: usize, k: usize },
    #[error("reference set is empty")]
    EmptyReference,
    #[error("generated set is empty")]
    EmptyGenerated,
    #[error("k must be >= 1")]
    InvalidK,
    #[error("tolerance grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Crystal(#[from] CrystalError),
}

/// `rate · (mean_rmse − stol) + stol`: unmatched references count as `stol`.
pub fn crmse_combine(match_rate: f64, mean_rmse: f64, stol: f64) -> Result<f64, CrystalError> {
    if !(stol > 0.0 && stol.is_finite()) {
        return Err(CrystalError::InvalidParameters(format!(
            "stol must be positive, got {stol}"
        )));
    }
    if !(0.0..=1.0).contains(&match_rate) {
        return Err(CrystalError::InvalidParameters(format!(
            "match rate {match_rate} outside [0, 1]"
        )));
    }
    if match_rate == 0.0 {
        return Ok(stol);
    }
    if !(0.0..=stol).contains(&mean_rmse) {
        return Err(CrystalError::InvalidParameters(format!(
            "mean rmse {mean_rmse} outside [0, stol = {stol}]"
        )));
    }
    Ok(match_rate * (mean_rmse - stol) + stol)
}

/// Best match of one reference structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerRefBest {
    pub ref_id: String,
    pub gen_id: Option<String>,
    pub rmse: Option<f64>,
}

/// Result of a match-rate style metric. `metre_rate` holds the rate of the
/// metric named in `metric` (`metre`, `match_rate` or `k_match`).
///
/// `per_ref` allows recomputing cRMSE for any `stol` not above `stol_used`
/// (see [`MetreReport::crmse_at`]); larger values need re-matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetreReport {
    pub metric: String,
    pub tolerances: MatchTolerances,
    pub n_test: usize,
    pub n_ref_match: usize,
    pub metre_rate: f64,
    /// Mean best rmse over matched references; `None` when nothing matched.
    pub mean_rmse: Option<f64>,
    pub mean_crmse: f64,
    pub stol_used: f64,
    pub per_ref: Vec<PerRefBest>,
}

impl MetreReport {
    fn build(metric: &str, tol: &MatchTolerances, per_ref: Vec<PerRefBest>) -> Result<Self, CrystalError> {
        let n_test = per_ref.len();
        let (rate, mean, crmse) = summarize(per_ref.iter().map(|p| p.rmse), n_test, tol.stol)?;
        Ok(MetreReport {
            metric: metric.to_string(),
            tolerances: *tol,
            n_test,
            n_ref_match: per_ref.iter().filter(|p| p.rmse.is_some()).count(),
            metre_rate: rate,
            mean_rmse: mean,
            mean_crmse: crmse,
            stol_used: tol.stol,
            per_ref,
        })
    }

    /// cRMSE with a stricter site tolerance, from the stored per-reference rmse.
    pub fn crmse_at(&self, stol: f64) -> Result<f64, CrystalError> {
        if stol > self.stol_used {
            return Err(CrystalError::InvalidParameters(format!(
                "stol {stol} exceeds the {} used for matching",
                self.stol_used
            )));
        }
        let rmse = self.per_ref.iter().map(|p| p.rmse.filter(|r| *r <= stol));
        Ok(summarize(rmse, self.n_test, stol)?.2)
    }

    /// `METRe% / RMSE / cRMSE`, e.g. `98.2% / 0.231 / 0.236`.
    pub fn summary_line(&self) -> String {
        let rmse = self.mean_rmse.map_or_else(|| "-".to_string(), |r| format!("{r:.3}"));
        format!("{:.1}% / {} / {:.3}", 100.0 * self.metre_rate, rmse, self.mean_crmse)
    }
}

fn summarize(
    rmse: impl Iterator<Item = Option<f64>>,
    n_test: usize,
    stol: f64,
) -> Result<(f64, Option<f64>, f64), CrystalError> {
    let matched: Vec<f64> = rmse.flatten().collect();
    if n_test == 0 {
        return Ok((0.0, None, stol));
    }
    let rate = matched.len() as f64 / n_test as f64;
    let mean = if matched.is_empty() {
        None
    } else {
        Some(matched.iter().sum::<f64>() / matched.len() as f64)
    };
    let crmse = crmse_combine(rate, mean.unwrap_or(0.0).min(stol), stol)?;
    Ok((rate, mean, crmse))
}

fn prepare_all(structures: &[Structure], opts: &MatchOptions) -> Vec<PreparedStructure> {
    structures
        .par_iter()
        .map(|s| PreparedStructure::new(s, opts.symprec))
        .collect()
}

/// One-to-one rate: `gen[i]` is compared with `ref[i]` only.
pub fn standard_match_rate(
    gen: &[Structure],
    reference: &[Structure],
    tol: &MatchTolerances,
    opts: &MatchOptions,
) -> Result<MetreReport, MetricError> {
    if gen.len() != reference.len() {
        return Err(MetricError::LengthMismatch {
            what: "standard match rate",
            gen: gen.len(),
            reference: reference.len(),
        });
    }
    let groups: Vec<Vec<Structure>> = gen.iter().map(|g| vec![g.clone()]).collect();
    let mut report = k_match_rate(&groups, reference, 1, tol, opts)?;
    report.metric = "match_rate".to_string();
    Ok(report)
}

/// Per reference, success if any of its `k` candidates matches; the lowest
/// rmse counts (ties to the earlier candidate).
pub fn k_match_rate(
    gen_groups: &[Vec<Structure>],
    reference: &[Structure],
    k: usize,
    tol: &MatchTolerances,
    opts: &MatchOptions,
) -> Result<MetreReport, MetricError> {
    if k == 0 {
        return Err(MetricError::InvalidK);
    }
    if gen_groups.len() != reference.len() {
        return Err(MetricError::LengthMismatch {
            what: "k-match rate",
            gen: gen_groups.len(),
            reference: reference.len(),
        });
    }
    if let Some((group, g)) = gen_groups.iter().enumerate().find(|(_, g)| g.len() != k) {
        return Err(MetricError::GroupSize {
            group,
            size: g.len(),
            k,
        });
    }
    let per_ref: Vec<PerRefBest> = reference
        .par_iter()
        .zip(gen_groups.par_iter())
        .map(|(r, group)| {
            let pr = PreparedStructure::new(r, opts.symprec);
            let mut best: Option<(f64, &Structure)> = None;
            for g in group {
                let pg = PreparedStructure::new(g, opts.symprec);
                if let Some(m) = match_prepared(&pr, &pg, tol, opts) {
                    if best.is_none_or(|(b, _)| m.rmse < b) {
                        best = Some((m.rmse, g));
                    }
                }
            }
            PerRefBest {
                ref_id: r.id.clone(),
                gen_id: best.map(|(_, g)| g.id.clone()),
                rmse: best.map(|(r, _)| r),
            }
        })
        .collect();
    Ok(MetreReport::build("k_match", tol, per_ref)?)
}

/// Pairs (gen index, ref index) with equal reduced composition, gen-major.
fn comparable_pairs(gen: &[PreparedStructure], reference: &[PreparedStructure]) -> Vec<(usize, usize)> {
    let mut by_comp: HashMap<&std::collections::BTreeMap<String, u32>, Vec<usize>> = HashMap::new();
    for (j, r) in reference.iter().enumerate() {
        by_comp.entry(r.reduced_composition()).or_default().push(j);
    }
    let mut pairs = Vec::new();
    for (i, g) in gen.iter().enumerate() {
        if let Some(refs) = by_comp.get(g.reduced_composition()) {
            pairs.extend(refs.iter().map(|&j| (i, j)));
        }
    }
    pairs
}

/// Keep the best (rmse, gen id, gen index) per reference.
fn reduce_best(
    n_ref: usize,
    hits: impl Iterator<Item = (usize, usize, f64)>,
    gen: &[Structure],
) -> Vec<Option<(f64, usize)>> {
    let mut best: Vec<Option<(f64, usize)>> = vec![None; n_ref];
    for (gi, rj, rmse) in hits {
        let better = match best[rj] {
            None => true,
            Some((b, bi)) => rmse < b || (rmse == b && (&gen[gi].id, gi) < (&gen[bi].id, bi)),
        };
        if better {
            best[rj] = Some((rmse, gi));
        }
    }
    best
}

fn per_ref_table(reference: &[Structure], gen: &[Structure], best: &[Option<(f64, usize)>]) -> Vec<PerRefBest> {
    reference
        .iter()
        .zip(best)
        .map(|(r, b)| PerRefBest {
            ref_id: r.id.clone(),
            gen_id: b.map(|(_, gi)| gen[gi].id.clone()),
            rmse: b.map(|(rmse, _)| rmse),
        })
        .collect()
}

/// Match everyone to reference: every generated structure is compared with
/// every reference of the same reduced composition; each reference keeps its
/// best match.
pub fn metre(
    gen: &[Structure],
    reference: &[Structure],
    tol: &MatchTolerances,
    opts: &MatchOptions,
) -> Result<MetreReport, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    if gen.is_empty() {
        return Err(MetricError::EmptyGenerated);
    }
    let pg = prepare_all(gen, opts);
    let pr = prepare_all(reference, opts);
    let pairs = comparable_pairs(&pg, &pr);
    let hits: Vec<(usize, usize, f64)> = pairs
        .par_iter()
        .filter_map(|&(i, j)| match_prepared(&pr[j], &pg[i], tol, opts).map(|m| (i, j, m.rmse)))
        .collect();
    let best = reduce_best(reference.len(), hits.into_iter(), gen);
    Ok(MetreReport::build("metre", tol, per_ref_table(reference, gen, &best))?)
}

/// Values of each tolerance axis for a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceGrid {
    pub ltol: Vec<f64>,
    pub stol: Vec<f64>,
    pub angle_tol: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ltol: f64,
    pub stol: f64,
    pub angle_tol: f64,
    pub metre_rate: f64,
    pub mean_crmse: f64,
}

/// METRe at every grid point, sorted by (stol, ltol, angle_tol). Candidates
/// are computed once per pair at the largest tolerances and filtered per point.
pub fn tolerance_sweep(
    gen: &[Structure],
    reference: &[Structure],
    grid: &ToleranceGrid,
    opts: &MatchOptions,
) -> Result<Vec<SweepRow>, MetricError> {
    if grid.ltol.is_empty() || grid.stol.is_empty() || grid.angle_tol.is_empty() {
        return Err(MetricError::EmptyGrid);
    }
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    if gen.is_empty() {
        return Err(MetricError::EmptyGenerated);
    }
    let mut points = Vec::new();
    for &s in &grid.stol {
        for &l in &grid.ltol {
            for &a in &grid.angle_tol {
                MatchTolerances::new(l, s, a)?;
                points.push((l, s, a));
            }
        }
    }
    points.sort_by(|x, y| {
        (x.1, x.0, x.2)
            .partial_cmp(&(y.1, y.0, y.2))
            .expect("finite tolerances")
    });

    let fmax = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ceiling = MatchTolerances::new(fmax(&grid.ltol), fmax(&grid.stol), fmax(&grid.angle_tol))?;
    let pg = prepare_all(gen, opts);
    let pr = prepare_all(reference, opts);
    let pairs = comparable_pairs(&pg, &pr);
    let analyses: Vec<(usize, usize, PairAnalysis)> = pairs
        .par_iter()
        .map(|&(i, j)| (i, j, PairAnalysis::from_prepared(&pr[j], &pg[i], &ceiling, opts)))
        .filter(|(_, _, a)| !a.candidates().is_empty())
        .collect();

    points
        .par_iter()
        .map(|&(l, s, a)| {
            let tol = MatchTolerances::new(l, s, a)?;
            let hits = analyses.iter().filter_map(|(i, j, an)| {
                an.best_candidate(l, s, a, opts.allow_improper)
                    .map(|c| (*i, *j, c.rmse))
            });
            let best = reduce_best(reference.len(), hits, gen);
            let report = MetreReport::build("metre", &tol, per_ref_table(reference, gen, &best))?;
            Ok(SweepRow {
                ltol: l,
                stol: s,
                angle_tol: a,
                metre_rate: report.metre_rate,
                mean_crmse: report.mean_crmse,
            })
        })
        .collect()
}
