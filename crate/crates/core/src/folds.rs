//! Patient-grouped, stratified k-fold assignment.
//!
//! Cases are grouped by patient. Each group belongs to the (age group,
//! severity) stratum of its most severe case. Within a stratum, groups are
//! shuffled with the seed and placed one by one on the fold that holds the
//! fewest cases of that stratum (then the fewest cases overall, then the lowest
//! index). For singleton groups this is round-robin; larger groups keep every
//! fold within one group size of its share.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    k: usize,
    assignment: Vec<usize>,
}

impl FoldPlan {
    /// Build from explicit per-case fold indices.
    pub fn from_assignment(k: usize, assignment: Vec<usize>) -> Result<Self> {
        if k < 2 {
            return Err(Error::FoldPlan(format!("k must be at least 2, got {k}")));
        }
        if let Some(&f) = assignment.iter().find(|&&f| f >= k) {
            return Err(Error::FoldPlan(format!("fold index {f} out of range for k={k}")));
        }
        Ok(FoldPlan { k, assignment })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn fold_of(&self, case: usize) -> usize {
        self.assignment[case]
    }

    /// Case indices in fold `f`, ascending.
    pub fn test_indices(&self, f: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == f).collect()
    }

    /// Case indices outside fold `f`, ascending.
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != f).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

pub fn build_fold_plan(dataset: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::FoldPlan(format!("k must be at least 2, got {k}")));
    }
    if dataset.is_empty() {
        return Err(Error::FoldPlan("dataset is empty".into()));
    }

    // Patient groups in order of first appearance.
    let mut group_of: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, r) in dataset.records().iter().enumerate() {
        let g = *group_of.entry(r.patient_id.as_str()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    if k > groups.len() {
        return Err(Error::FoldPlan(format!("k={k} exceeds the number of distinct patients ({})", groups.len())));
    }

    // Stratum of a group: age group and severity of its most severe case (first on ties).
    let mut strata: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (g, members) in groups.iter().enumerate() {
        let lead = members
            .iter()
            .copied()
            .reduce(|a, b| if dataset.records()[b].outcome > dataset.records()[a].outcome { b } else { a })
            .expect("groups are nonempty");
        let r = &dataset.records()[lead];
        let age = dataset.age_group_of(r).unwrap_or(0);
        strata.entry((age, r.outcome.index())).or_default().push(g);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_total = vec![0usize; k];
    let mut assignment = vec![usize::MAX; dataset.len()];
    for (_, mut members) in strata {
        members.shuffle(&mut rng);
        let mut in_stratum = vec![0usize; k];
        for g in members {
            let f = (0..k).min_by_key(|&f| (in_stratum[f], fold_total[f], f)).expect("k >= 2");
            let size = groups[g].len();
            in_stratum[f] += size;
            fold_total[f] += size;
            for &i in &groups[g] {
                assignment[i] = f;
            }
        }
    }
    FoldPlan::from_assignment(k, assignment)
}
