//! Match-boundary tolerances by binary search.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matcher::{MatchOptions, MatchTolerances, PairAnalysis, PreparedStructure};
use crate::structure::Structure;

/// Default bracket width at which the search stops.
pub const DEFAULT_THRESH: f64 = 1e-4;

/// Pairs evaluated in parallel before their records are emitted.
const BATCH_PAIRS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryParam {
    Stol,
    Ltol,
    AngleTol,
}

impl BoundaryParam {
    pub const ALL: [BoundaryParam; 3] = [BoundaryParam::Stol, BoundaryParam::Ltol, BoundaryParam::AngleTol];

    /// Loose value used as the search ceiling.
    pub fn ceiling(self) -> f64 {
        let t = MatchTolerances::LOOSE;
        match self {
            BoundaryParam::Stol => t.stol,
            BoundaryParam::Ltol => t.ltol,
            BoundaryParam::AngleTol => t.angle_tol,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundaryParam::Stol => "stol",
            BoundaryParam::Ltol => "ltol",
            BoundaryParam::AngleTol => "angle_tol",
        }
    }
}

/// Boundaries of one pair. When the pair does not match at the loose
/// ceilings, `no_match` is set and every boundary holds its ceiling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRecord {
    pub id1: String,
    pub id2: String,
    pub b_stol: f64,
    pub b_ltol: f64,
    pub b_angle: f64,
    pub no_match: bool,
}

impl BoundaryRecord {
    pub fn get(&self, param: BoundaryParam) -> f64 {
        match param {
            BoundaryParam::Stol => self.b_stol,
            BoundaryParam::Ltol => self.b_ltol,
            BoundaryParam::AngleTol => self.b_angle,
        }
    }

    /// Boundary, or `None` for a pair that never matches.
    pub fn boundary(&self, param: BoundaryParam) -> Option<f64> {
        (!self.no_match).then(|| self.get(param))
    }
}

/// Bisection on `[0, ceiling]` for the smallest value at which `matches`
/// holds, returning the right end of the final bracket. The caller must have
/// checked `matches(ceiling)`.
pub fn bisect_boundary(ceiling: f64, thresh: f64, matches: impl Fn(f64) -> bool) -> f64 {
    let (mut lo, mut hi) = (0.0f64, ceiling);
    while lo < hi {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= thresh {
            return hi;
        }
        if matches(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Boundaries of all three tolerances from one cached analysis built at the
/// loose ceilings. `None` when the pair fails at the ceilings.
pub fn boundaries_from_analysis(analysis: &PairAnalysis, thresh: f64, allow_improper: bool) -> Option<[f64; 3]> {
    let loose = MatchTolerances::LOOSE;
    let best = analysis.best(&loose, allow_improper)?;
    let b_ltol = bisect_boundary(loose.ltol, thresh, |x| {
        analysis.is_match(x, loose.stol, loose.angle_tol, allow_improper)
    });
    let b_angle = bisect_boundary(loose.angle_tol, thresh, |x| {
        analysis.is_match(loose.ltol, loose.stol, x, allow_improper)
    });
    Some([best.rmse, b_ltol, b_angle])
}

/// Boundary of one tolerance for a pair, other tolerances at their loose
/// values. For `stol` this is the match rmse. `None` means no match at the
/// ceilings.
pub fn boundary_tolerance(
    s1: &Structure,
    s2: &Structure,
    which: BoundaryParam,
    thresh: f64,
    opts: &MatchOptions,
) -> Option<f64> {
    let analysis = PairAnalysis::new(s1, s2, &MatchTolerances::LOOSE, opts);
    let b = boundaries_from_analysis(&analysis, thresh, opts.allow_improper)?;
    Some(match which {
        BoundaryParam::Stol => b[0],
        BoundaryParam::Ltol => b[1],
        BoundaryParam::AngleTol => b[2],
    })
}

fn record_for(
    id1: &str,
    id2: &str,
    p1: &PreparedStructure,
    p2: &PreparedStructure,
    thresh: f64,
    opts: &MatchOptions,
) -> BoundaryRecord {
    let analysis = PairAnalysis::from_prepared(p1, p2, &MatchTolerances::LOOSE, opts);
    let loose = MatchTolerances::LOOSE;
    match boundaries_from_analysis(&analysis, thresh, opts.allow_improper) {
        Some([s, l, a]) => BoundaryRecord {
            id1: id1.to_string(),
            id2: id2.to_string(),
            b_stol: s,
            b_ltol: l,
            b_angle: a,
            no_match: false,
        },
        None => BoundaryRecord {
            id1: id1.to_string(),
            id2: id2.to_string(),
            b_stol: loose.stol,
            b_ltol: loose.ltol,
            b_angle: loose.angle_tol,
            no_match: true,
        },
    }
}

/// Visit the boundary record of every unordered same-composition pair in
/// (id1, id2) order with `id1 < id2`. Pairs are evaluated in parallel batches
/// and handed to `sink` in order, so memory stays bounded by the batch size.
pub fn for_each_boundary<E>(
    dataset: &[Structure],
    thresh: f64,
    opts: &MatchOptions,
    mut sink: impl FnMut(BoundaryRecord) -> Result<(), E>,
) -> Result<(), E> {
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.sort_by(|&a, &b| dataset[a].id.cmp(&dataset[b].id));
    let prepared: Vec<PreparedStructure> = order
        .par_iter()
        .map(|&i| PreparedStructure::new(&dataset[i], opts.symprec))
        .collect();
    let ids: Vec<&str> = order.iter().map(|&i| dataset[i].id.as_str()).collect();

    // later members of the same composition bucket, per sorted position
    let mut buckets: HashMap<&std::collections::BTreeMap<String, u32>, Vec<usize>> = HashMap::new();
    for (pos, p) in prepared.iter().enumerate() {
        buckets.entry(p.reduced_composition()).or_default().push(pos);
    }
    let mut bucket_of = vec![0usize; prepared.len()];
    let mut rank_in_bucket = vec![0usize; prepared.len()];
    let bucket_list: Vec<Vec<usize>> = buckets.into_values().collect();
    for (b, members) in bucket_list.iter().enumerate() {
        for (r, &pos) in members.iter().enumerate() {
            bucket_of[pos] = b;
            rank_in_bucket[pos] = r;
        }
    }

    let mut batch: Vec<(usize, usize)> = Vec::with_capacity(BATCH_PAIRS);
    let flush = |batch: &mut Vec<(usize, usize)>, sink: &mut dyn FnMut(BoundaryRecord) -> Result<(), E>| {
        let records: Vec<BoundaryRecord> = batch
            .par_iter()
            .map(|&(i, j)| record_for(ids[i], ids[j], &prepared[i], &prepared[j], thresh, opts))
            .collect();
        batch.clear();
        records.into_iter().try_for_each(sink)
    };
    for i in 0..prepared.len() {
        let members = &bucket_list[bucket_of[i]];
        for &j in &members[rank_in_bucket[i] + 1..] {
            batch.push((i, j));
            if batch.len() >= BATCH_PAIRS {
                flush(&mut batch, &mut sink)?;
            }
        }
    }
    flush(&mut batch, &mut sink)
}

/// All boundary records, in memory.
pub fn all_pairs_boundaries(dataset: &[Structure], thresh: f64, opts: &MatchOptions) -> Vec<BoundaryRecord> {
    let mut out = Vec::new();
    for_each_boundary::<std::convert::Infallible>(dataset, thresh, opts, |r| {
        out.push(r);
        Ok(())
    })
    .expect("infallible sink");
    out
}
