//! Maximum-weight spanning tree over the complete feature graph.

/// Dense symmetric matrix of pair weights with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn zeros(n: usize) -> Self {
        WeightMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i + 1..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both (i, j) and (j, i). Weights must be finite.
    pub fn set(&mut self, i: usize, j: usize, w: f64) {
        assert!(w.is_finite(), "edge weight ({i}, {j}) is not finite: {w}");
        assert_ne!(i, j, "no self edges");
        self.data[i * self.n + j] = w;
        self.data[j * self.n + i] = w;
    }
}

/// Undirected edge stored as `(min, max)`.
pub type Edge = (usize, usize);

fn key(a: usize, b: usize) -> Edge {
    (a.min(b), a.max(b))
}

/// Prim's algorithm grown from feature 0.
///
/// Ties between equal weights go to the edge with the smaller `(min, max)`
/// index pair, both when updating a vertex's best connection and when picking
/// the next vertex. Edges are returned in the order they join the tree.
pub fn max_weight_spanning_tree(weights: &WeightMatrix) -> Vec<Edge> {
    let n = weights.len();
    if n <= 1 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best: Vec<Option<(f64, usize)>> = vec![None; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut u = 0;
    in_tree[0] = true;
    for _ in 1..n {
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let w = weights.get(u, v);
            let better = match best[v] {
                None => true,
                Some((bw, from)) => w > bw || (w == bw && key(u, v) < key(from, v)),
            };
            if better {
                best[v] = Some((w, u));
            }
        }
        let mut pick: Option<(f64, Edge, usize)> = None;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let (w, from) = best[v].expect("every outside vertex has a candidate");
            let k = key(from, v);
            let take = match pick {
                None => true,
                Some((pw, pk, _)) => w > pw || (w == pw && k < pk),
            };
            if take {
                pick = Some((w, k, v));
            }
        }
        let (_, edge, v) = pick.expect("an outside vertex remains");
        in_tree[v] = true;
        edges.push(edge);
        u = v;
    }
    edges
}

pub fn tree_weight(weights: &WeightMatrix, edges: &[Edge]) -> f64 {
    edges.iter().map(|&(i, j)| weights.get(i, j)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive maximum over all (n-1)-edge subsets that form a spanning tree.
    pub(crate) fn brute_force_max(weights: &WeightMatrix) -> f64 {
        let n = weights.len();
        let all: Vec<Edge> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let mut best = f64::NEG_INFINITY;
        for mask in 0u32..(1 << all.len()) {
            if mask.count_ones() as usize != n - 1 {
                continue;
            }
            let mut parent: Vec<usize> = (0..n).collect();
            fn find(p: &mut [usize], x: usize) -> usize {
                let mut r = x;
                while p[r] != r {
                    r = p[r];
                }
                r
            }
            let mut ok = true;
            let mut w = 0.0;
            for (e, &(a, b)) in all.iter().enumerate() {
                if mask >> e & 1 == 1 {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    if ra == rb {
                        ok = false;
                        break;
                    }
                    parent[ra] = rb;
                    w += weights.get(a, b);
                }
            }
            if ok {
                best = best.max(w);
            }
        }
        best
    }

    #[test]
    fn two_features() {
        let w = WeightMatrix::from_fn(2, |_, _| 0.3);
        assert_eq!(max_weight_spanning_tree(&w), vec![(0, 1)]);
    }

    #[test]
    fn single_feature() {
        assert!(max_weight_spanning_tree(&WeightMatrix::zeros(1)).is_empty());
    }

    #[test]
    fn k4_random_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let w = WeightMatrix::from_fn(4, |_, _| rng.random::<f64>());
            let t = max_weight_spanning_tree(&w);
            assert_eq!(t.len(), 3);
            assert!((tree_weight(&w, &t) - brute_force_max(&w)).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_pick_least_edges() {
        let w = WeightMatrix::from_fn(5, |_, _| 1.0);
        assert_eq!(max_weight_spanning_tree(&w), vec![(0, 1), (0, 2), (0, 3), (0, 4)]);
        let w = WeightMatrix::zeros(4);
        assert_eq!(max_weight_spanning_tree(&w), vec![(0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn chain_weights() {
        // Strong 0-1, 1-2, 2-3; weak elsewhere.
        let w = WeightMatrix::from_fn(4, |i, j| if j == i + 1 { 1.0 } else { 0.1 });
        let mut t = max_weight_spanning_tree(&w);
        t.sort();
        assert_eq!(t, vec![(0, 1), (1, 2), (2, 3)]);
    }
}
