//! Edge weights for tree learning.

use serde::{Deserialize, Serialize};

use super::counts::CountCube;
use super::mst::WeightMatrix;
use crate::par;

/// Which information measure scores a feature pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeWeight {
    /// I(X_i; X_j | C), the tree-augmented naive Bayes score.
    #[default]
    ConditionalMutualInformation,
    /// I(X_i; X_j), ignoring the class.
    MutualInformation,
}

/// I(X_i; X_j | C) in nats from raw empirical frequencies.
///
/// Cells with a zero joint count contribute nothing. The sum always runs over
/// the pair in ascending index order, so swapping `i` and `j` gives the same bits.
pub fn conditional_mutual_information(counts: &CountCube, i: usize, j: usize) -> f64 {
    assert_ne!(i, j, "conditional mutual information needs two distinct features");
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    let n = counts.total() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for c in 0..2 {
        let nc = counts.class_count(c) as f64;
        for xa in 0..counts.cardinality(a) {
            let nca = counts.single(a, c, xa) as f64;
            for xb in 0..counts.cardinality(b) {
                let ncab = counts.joint(a, b, c, xa, xb);
                if ncab == 0 {
                    continue;
                }
                let ncab = ncab as f64;
                let ncb = counts.single(b, c, xb) as f64;
                sum += ncab / n * (ncab * nc / (nca * ncb)).ln();
            }
        }
    }
    sum.max(0.0)
}

/// I(X_i; X_j) in nats, pooling both classes.
pub fn mutual_information(counts: &CountCube, i: usize, j: usize) -> f64 {
    assert_ne!(i, j, "mutual information needs two distinct features");
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    let n = counts.total() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let marg = |f: usize, x: usize| (counts.single(f, 0, x) + counts.single(f, 1, x)) as f64;
    let mut sum = 0.0;
    for xa in 0..counts.cardinality(a) {
        let na = marg(a, xa);
        for xb in 0..counts.cardinality(b) {
            let nab = counts.joint(a, b, 0, xa, xb) + counts.joint(a, b, 1, xa, xb);
            if nab == 0 {
                continue;
            }
            let nab = nab as f64;
            sum += nab / n * (nab * n / (na * marg(b, xb))).ln();
        }
    }
    sum.max(0.0)
}

/// Pairwise weights for every feature pair, computed in parallel over pairs.
pub fn weight_matrix(counts: &CountCube, kind: EdgeWeight) -> WeightMatrix {
    let n = counts.n_features();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let weights = par::map_range(pairs.len(), |p| {
        let (i, j) = pairs[p];
        match kind {
            EdgeWeight::ConditionalMutualInformation => conditional_mutual_information(counts, i, j),
            EdgeWeight::MutualInformation => mutual_information(counts, i, j),
        }
    });
    let mut m = WeightMatrix::zeros(n);
    for (&(i, j), w) in pairs.iter().zip(weights) {
        m.set(i, j, w);
    }
    m
}
