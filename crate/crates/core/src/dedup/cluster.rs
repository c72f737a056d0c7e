//! Duplicate clustering with a disjoint-set forest.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::DedupError;
use crate::structure::Structure;

/// Union-find with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns true if `a` and `b` were in different sets.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// A connected component of the duplicate graph with at least two members.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateCluster {
    pub representative: String,
    /// Sorted, includes the representative.
    pub members: Vec<String>,
}

/// Connected components of the graph on `ids` with edges `pairs`. Only
/// components with two or more members are returned, sorted by
/// representative, which is the smallest id.
pub fn cluster_ids(ids: &[String], pairs: &[(String, String)]) -> Result<Vec<DuplicateCluster>, DedupError> {
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut uf = UnionFind::new(ids.len());
    for (a, b) in pairs {
        let ia = *index.get(a.as_str()).ok_or_else(|| DedupError::UnknownId(a.clone()))?;
        let ib = *index.get(b.as_str()).ok_or_else(|| DedupError::UnknownId(b.clone()))?;
        uf.union(ia, ib);
    }
    let mut comps: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for i in 0..ids.len() {
        let r = uf.find(i);
        comps.entry(r).or_default().push(ids[i].clone());
    }
    let mut clusters: Vec<DuplicateCluster> = comps
        .into_values()
        .filter(|m| m.len() > 1)
        .map(|mut members| {
            members.sort();
            DuplicateCluster {
                representative: members[0].clone(),
                members,
            }
        })
        .collect();
    clusters.sort_by(|a, b| a.representative.cmp(&b.representative));
    Ok(clusters)
}

/// Keep one representative per cluster plus every structure not in a
/// cluster, preserving dataset order.
pub fn cluster_and_deduplicate(
    dataset: &[Structure],
    pairs: &[(String, String)],
) -> Result<(Vec<Structure>, Vec<DuplicateCluster>), DedupError> {
    let ids: Vec<String> = dataset.iter().map(|s| s.id.clone()).collect();
    let clusters = cluster_ids(&ids, pairs)?;
    let mut dropped: HashMap<&str, ()> = HashMap::new();
    for c in &clusters {
        for m in &c.members[1..] {
            dropped.insert(m.as_str(), ());
        }
    }
    let unique = dataset
        .iter()
        .filter(|s| !dropped.contains_key(s.id.as_str()))
        .cloned()
        .collect();
    Ok((unique, clusters))
}
