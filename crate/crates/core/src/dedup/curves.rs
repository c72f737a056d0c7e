//! Fraction of unique structures and boundary densities as functions of one tolerance.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::boundary::{BoundaryParam, BoundaryRecord};
use super::cluster::UnionFind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub parameter: BoundaryParam,
    pub tolerance: f64,
    pub fraction_unique: f64,
    /// Tophat density of the boundaries of matching pairs, bandwidth = grid step.
    pub density: f64,
}

/// For each grid value `t`: the fraction of structures left if every pair
/// with boundary `<= t` on `param` is merged (other tolerances at their
/// ceilings), and the density of boundaries around `t`. Structures that
/// appear in no record still count towards `n_structures`.
pub fn uniqueness_curve(
    records: &[BoundaryRecord],
    n_structures: usize,
    param: BoundaryParam,
    grid: &[f64],
) -> Vec<CurveRow> {
    let mut edges: Vec<(f64, &str, &str)> = records
        .iter()
        .filter_map(|r| r.boundary(param).map(|b| (b, r.id1.as_str(), r.id2.as_str())))
        .collect();
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut index: HashMap<&str, usize> = HashMap::new();
    for (_, a, b) in &edges {
        for id in [a, b] {
            let next = index.len();
            index.entry(id).or_insert(next);
        }
    }
    let n = n_structures.max(index.len());
    let mut uf = UnionFind::new(index.len());

    let mut sorted_grid: Vec<(usize, f64)> = grid.iter().copied().enumerate().collect();
    sorted_grid.sort_by(|a, b| a.1.total_cmp(&b.1));
    let bandwidth = grid_step(grid);

    let mut removed = 0usize;
    let mut next_edge = 0usize;
    let mut fraction = vec![1.0; grid.len()];
    for &(gi, t) in &sorted_grid {
        while next_edge < edges.len() && edges[next_edge].0 <= t {
            let (_, a, b) = edges[next_edge];
            if uf.union(index[a], index[b]) {
                removed += 1;
            }
            next_edge += 1;
        }
        fraction[gi] = if n == 0 { 1.0 } else { (n - removed) as f64 / n as f64 };
    }

    let values: Vec<f64> = edges.iter().map(|e| e.0).collect();
    grid.iter()
        .enumerate()
        .map(|(gi, &t)| CurveRow {
            parameter: param,
            tolerance: t,
            fraction_unique: fraction[gi],
            density: tophat_density(&values, t, bandwidth),
        })
        .collect()
}

/// Smallest positive spacing of the grid (1 for a single point).
fn grid_step(grid: &[f64]) -> f64 {
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min)
        .min(1.0)
        .max(f64::MIN_POSITIVE)
}

/// Density at `t` of a tophat kernel of width `h`, with values in `[t - h/2, t + h/2)`.
fn tophat_density(sorted: &[f64], t: f64, h: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let lo = sorted.partition_point(|&x| x < t - 0.5 * h);
    let hi = sorted.partition_point(|&x| x < t + 0.5 * h);
    (hi - lo) as f64 / (sorted.len() as f64 * h)
}
