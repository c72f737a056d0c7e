//! Train/validation/test splits: random, polymorph-aware, n-arity stratified
//! and ordered by atom count.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::structure::Structure;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplitError {
    #[error("dataset is empty")]
    Empty,
    #[error("ratios must be positive and sum to 1, got {0:?}")]
    InvalidRatios([f64; 3]),
    #[error("composition group '{group}' has {size} structures, more than the largest target split ({max_target})")]
    GroupTooLarge {
        group: String,
        size: usize,
        max_target: usize,
    },
    #[error("ordered split needs at least 3 distinct atom counts, found {0}")]
    TooFewBuckets(usize),
    #[error("duplicate id '{0}'")]
    DuplicateId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    Random,
    Polymorph,
    PolymorphStratified,
    NOrdered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    LowToHigh,
    HighToLow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub ratios: [f64; 3],
    pub seed: u64,
    pub mode: SplitMode,
    pub direction: Direction,
}

impl SplitSpec {
    pub fn new(mode: SplitMode, seed: u64) -> Self {
        SplitSpec {
            ratios: [0.6, 0.2, 0.2],
            seed,
            mode,
            direction: Direction::LowToHigh,
        }
    }

    fn validate(&self) -> Result<(), SplitError> {
        let ok = self.ratios.iter().all(|r| r.is_finite() && *r > 0.0)
            && (self.ratios.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        if ok {
            Ok(())
        } else {
            Err(SplitError::InvalidRatios(self.ratios))
        }
    }
}

/// Ids per split, each list in dataset order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    pub warnings: Vec<String>,
}

impl SplitAssignment {
    pub fn parts(&self) -> [&Vec<String>; 3] {
        [&self.train, &self.val, &self.test]
    }

    pub fn sizes(&self) -> [usize; 3] {
        self.parts().map(|p| p.len())
    }

    fn from_labels(dataset: &[Structure], label: &[usize], warnings: Vec<String>) -> Self {
        let mut out = SplitAssignment {
            warnings,
            ..Default::default()
        };
        for (s, &l) in dataset.iter().zip(label) {
            match l {
                0 => out.train.push(s.id.clone()),
                1 => out.val.push(s.id.clone()),
                _ => out.test.push(s.id.clone()),
            }
        }
        out
    }
}

pub const SPLIT_NAMES: [&str; 3] = ["train", "val", "test"];

/// `floor(r_train·n)`, `floor(r_val·n)` and the remainder.
pub fn target_sizes(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    // the small slack keeps e.g. 0.6 * 10 from flooring to 5
    let train = ((ratios[0] * n as f64) + 1e-9).floor() as usize;
    let val = ((ratios[1] * n as f64) + 1e-9).floor() as usize;
    let train = train.min(n);
    let val = val.min(n - train);
    [train, val, n - train - val]
}

fn check_dataset(dataset: &[Structure], spec: &SplitSpec) -> Result<(), SplitError> {
    spec.validate()?;
    if dataset.is_empty() {
        return Err(SplitError::Empty);
    }
    let mut seen = HashSet::new();
    for s in dataset {
        if !seen.insert(s.id.as_str()) {
            return Err(SplitError::DuplicateId(s.id.clone()));
        }
    }
    Ok(())
}

pub fn split(dataset: &[Structure], spec: &SplitSpec) -> Result<SplitAssignment, SplitError> {
    match spec.mode {
        SplitMode::Random => random_split(dataset, spec),
        SplitMode::Polymorph => polymorph_split(dataset, spec),
        SplitMode::PolymorphStratified => stratified_polymorph_split(dataset, spec),
        SplitMode::NOrdered => n_ordered_split(dataset, spec),
    }
}

/// Seeded shuffle, then contiguous cuts at the target sizes.
pub fn random_split(dataset: &[Structure], spec: &SplitSpec) -> Result<SplitAssignment, SplitError> {
    check_dataset(dataset, spec)?;
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let [train, val, _] = target_sizes(dataset.len(), &spec.ratios);
    let mut label = vec![2usize; dataset.len()];
    for (pos, &i) in order.iter().enumerate() {
        label[i] = if pos < train {
            0
        } else if pos < train + val {
            1
        } else {
            2
        };
    }
    Ok(SplitAssignment::from_labels(dataset, &label, Vec::new()))
}

struct Group {
    key: String,
    members: Vec<usize>,
    arity: usize,
}

/// Composition groups in order of first appearance, then shuffled.
fn shuffled_groups(dataset: &[Structure], seed: u64) -> Vec<Group> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<Group> = Vec::new();
    for (i, s) in dataset.iter().enumerate() {
        let comp = s.composition();
        let key = comp.reduced_formula();
        let g = *index.entry(key.clone()).or_insert_with(|| {
            groups.push(Group {
                key,
                members: Vec::new(),
                arity: comp.n_arity(),
            });
            groups.len() - 1
        });
        groups[g].members.push(i);
    }
    groups.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    groups
}

/// Put each group into the split with the largest remaining deficit (ties to
/// the earlier split).
fn greedy_assign(groups: &[&Group], targets: [usize; 3], label: &mut [usize]) -> [usize; 3] {
    let mut filled = [0usize; 3];
    for g in groups {
        let deficit = |k: usize| targets[k] as i64 - filled[k] as i64;
        let k = (0..3)
            .max_by_key(|&k| (deficit(k), std::cmp::Reverse(k)))
            .expect("three splits");
        for &i in &g.members {
            label[i] = k;
        }
        filled[k] += g.members.len();
    }
    filled
}

fn check_group_sizes(groups: &[Group], targets: [usize; 3]) -> Result<(), SplitError> {
    let max_target = targets.into_iter().max().unwrap_or(0);
    match groups.iter().find(|g| g.members.len() > max_target) {
        Some(g) => Err(SplitError::GroupTooLarge {
            group: g.key.clone(),
            size: g.members.len(),
            max_target,
        }),
        None => Ok(()),
    }
}

/// Whole composition groups are assigned to splits, never divided.
pub fn polymorph_split(dataset: &[Structure], spec: &SplitSpec) -> Result<SplitAssignment, SplitError> {
    check_dataset(dataset, spec)?;
    let groups = shuffled_groups(dataset, spec.seed);
    let targets = target_sizes(dataset.len(), &spec.ratios);
    check_group_sizes(&groups, targets)?;
    let mut label = vec![0usize; dataset.len()];
    let refs: Vec<&Group> = groups.iter().collect();
    greedy_assign(&refs, targets, &mut label);
    Ok(SplitAssignment::from_labels(dataset, &label, Vec::new()))
}

/// Polymorph split done separately within each n-arity stratum, so every
/// split inherits the n-arity distribution of the whole dataset.
pub fn stratified_polymorph_split(dataset: &[Structure], spec: &SplitSpec) -> Result<SplitAssignment, SplitError> {
    check_dataset(dataset, spec)?;
    let groups = shuffled_groups(dataset, spec.seed);
    check_group_sizes(&groups, target_sizes(dataset.len(), &spec.ratios))?;

    let mut strata: BTreeMap<usize, Vec<&Group>> = BTreeMap::new();
    for g in &groups {
        strata.entry(g.arity).or_default().push(g);
    }
    let mut label = vec![0usize; dataset.len()];
    let mut warnings = Vec::new();
    for (arity, members) in &strata {
        let n: usize = members.iter().map(|g| g.members.len()).sum();
        let targets = target_sizes(n, &spec.ratios);
        let filled = greedy_assign(members, targets, &mut label);
        for k in 0..3 {
            if targets[k] > 0 && filled[k] == 0 {
                warnings.push(format!(
                    "n-arity {arity}: {n} structures in {} groups leave {} empty",
                    members.len(),
                    SPLIT_NAMES[k]
                ));
            }
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(SplitAssignment::from_labels(dataset, &label, warnings))
}

/// Structures bucketed by atom count and ordered by it; the cuts fall on
/// bucket boundaries closest to the cumulative targets.
pub fn n_ordered_split(dataset: &[Structure], spec: &SplitSpec) -> Result<SplitAssignment, SplitError> {
    check_dataset(dataset, spec)?;
    let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in dataset.iter().enumerate() {
        buckets.entry(s.len()).or_default().push(i);
    }
    let mut ordered: Vec<Vec<usize>> = buckets.into_values().collect();
    if spec.direction == Direction::HighToLow {
        ordered.reverse();
    }
    let sizes: Vec<usize> = ordered.iter().map(|b| b.len()).collect();
    let (c1, c2) = ordered_cuts(&sizes, &spec.ratios)?;
    let mut label = vec![0usize; dataset.len()];
    for (b, members) in ordered.iter().enumerate() {
        let k = if b < c1 {
            0
        } else if b < c2 {
            1
        } else {
            2
        };
        for &i in members {
            label[i] = k;
        }
    }
    Ok(SplitAssignment::from_labels(dataset, &label, Vec::new()))
}

/// Cut points `c1 < c2` (train = buckets `..c1`, val = `c1..c2`, test =
/// `c2..`) chosen by a forward scan: `c1` minimises the distance of the
/// cumulative count to `r_train·n`, then `c2` to `(r_train + r_val)·n`. Every
/// split keeps at least one bucket; ties go to the earlier cut.
pub fn ordered_cuts(sizes: &[usize], ratios: &[f64; 3]) -> Result<(usize, usize), SplitError> {
    let b = sizes.len();
    if b < 3 {
        return Err(SplitError::TooFewBuckets(b));
    }
    let n: usize = sizes.iter().sum();
    let cum: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, &s| {
            *acc += s;
            Some(*acc)
        })
        .collect();
    let pick = |range: std::ops::RangeInclusive<usize>, target: f64| -> usize {
        let mut best = *range.start();
        let mut best_dev = f64::INFINITY;
        for c in range {
            let dev = (cum[c - 1] as f64 - target).abs();
            if dev < best_dev {
                best = c;
                best_dev = dev;
            }
        }
        best
    };
    let c1 = pick(1..=b - 2, ratios[0] * n as f64);
    let c2 = pick(c1 + 1..=b - 1, (ratios[0] + ratios[1]) * n as f64);
    Ok((c1, c2))
}

/// Fraction of structures per n-arity.
pub fn n_arity_distribution<'a>(structures: impl IntoIterator<Item = &'a Structure>) -> BTreeMap<usize, f64> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut n = 0usize;
    for s in structures {
        *counts.entry(s.composition().n_arity()).or_default() += 1;
        n += 1;
    }
    counts.into_iter().map(|(k, c)| (k, c as f64 / n as f64)).collect()
}

/// L1 distance between two distributions over the same key space.
pub fn l1_distance(a: &BTreeMap<usize, f64>, b: &BTreeMap<usize, f64>) -> f64 {
    let keys: HashSet<usize> = a.keys().chain(b.keys()).copied().collect();
    keys.iter()
        .map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs())
        .sum()
}

/// Manifest written next to the id lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub mode: SplitMode,
    pub seed: u64,
    pub ratios: [f64; 3],
    pub direction: Option<Direction>,
    pub sizes: BTreeMap<String, usize>,
    /// n-arity → fraction, per split and for `all`.
    pub n_arity_distributions: BTreeMap<String, BTreeMap<usize, f64>>,
    pub warnings: Vec<String>,
}

impl SplitManifest {
    pub fn new(dataset: &[Structure], spec: &SplitSpec, assignment: &SplitAssignment) -> Self {
        let by_id: HashMap<&str, &Structure> = dataset.iter().map(|s| (s.id.as_str(), s)).collect();
        let mut sizes = BTreeMap::new();
        let mut dists = BTreeMap::new();
        for (name, ids) in SPLIT_NAMES.iter().zip(assignment.parts()) {
            sizes.insert(name.to_string(), ids.len());
            dists.insert(
                name.to_string(),
                n_arity_distribution(ids.iter().map(|id| by_id[id.as_str()])),
            );
        }
        dists.insert("all".to_string(), n_arity_distribution(dataset));
        SplitManifest {
            mode: spec.mode,
            seed: spec.seed,
            ratios: spec.ratios,
            direction: (spec.mode == SplitMode::NOrdered).then_some(spec.direction),
            sizes,
            n_arity_distributions: dists,
            warnings: assignment.warnings.clone(),
        }
    }
}
