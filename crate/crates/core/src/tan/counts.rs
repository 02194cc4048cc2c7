//! Exact contingency counts over (class, feature) and (class, feature, feature).

use crate::dataset::Dataset;
use crate::labels::{derive_class, Task};
use crate::par;

/// Class, per-feature and per-feature-pair counts of a training set.
///
/// Pair tables are stored once per unordered pair `i < j`, laid out as
/// `[class][x_i][x_j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountCube {
    cards: Vec<usize>,
    total: u64,
    class: [u64; 2],
    single: Vec<Vec<u64>>,
    pairs: Vec<Vec<u64>>,
}

fn pair_slot(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl CountCube {
    /// Count from column-major data: `columns[f][row]` is the state of feature `f`,
    /// `classes[row]` is 0 (negative) or 1 (positive).
    pub fn from_columns(cards: &[usize], classes: &[usize], columns: &[Vec<usize>]) -> Self {
        let n = cards.len();
        assert_eq!(columns.len(), n, "one column per feature");
        let mut class = [0u64; 2];
        for &c in classes {
            class[c] += 1;
        }
        let single = par::map_range(n, |f| {
            let r = cards[f];
            let mut t = vec![0u64; 2 * r];
            for (&c, &x) in classes.iter().zip(&columns[f]) {
                t[c * r + x] += 1;
            }
            t
        });
        let pair_list: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let pairs = par::map_range(pair_list.len(), |p| {
            let (i, j) = pair_list[p];
            let (ri, rj) = (cards[i], cards[j]);
            let mut t = vec![0u64; 2 * ri * rj];
            for ((&c, &xi), &xj) in classes.iter().zip(&columns[i]).zip(&columns[j]) {
                t[(c * ri + xi) * rj + xj] += 1;
            }
            t
        });
        CountCube { cards: cards.to_vec(), total: classes.len() as u64, class, single, pairs }
    }

    pub fn n_features(&self) -> usize {
        self.cards.len()
    }

    pub fn cardinality(&self, f: usize) -> usize {
        self.cards[f]
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cards
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn class_count(&self, c: usize) -> u64 {
        self.class[c]
    }

    /// N[c, x_f].
    pub fn single(&self, f: usize, c: usize, x: usize) -> u64 {
        self.single[f][c * self.cards[f] + x]
    }

    /// N[c, x_i, x_j] for any `i != j`.
    pub fn joint(&self, i: usize, j: usize, c: usize, xi: usize, xj: usize) -> u64 {
        assert_ne!(i, j, "joint counts need two distinct features");
        let (a, b, xa, xb) = if i < j { (i, j, xi, xj) } else { (j, i, xj, xi) };
        let (ra, rb) = (self.cards[a], self.cards[b]);
        self.pairs[pair_slot(self.cards.len(), a, b)][(c * ra + xa) * rb + xb]
    }
}

/// Count a dataset under the binary class of `task`.
pub fn tabulate_counts(dataset: &Dataset, task: Task) -> CountCube {
    let cards = dataset.schema().cardinalities();
    let classes: Vec<usize> = dataset.records().iter().map(|r| derive_class(r.outcome, task).index()).collect();
    let columns: Vec<Vec<usize>> =
        (0..cards.len()).map(|f| dataset.records().iter().map(|r| r.states[f]).collect()).collect();
    CountCube::from_columns(&cards, &classes, &columns)
}
