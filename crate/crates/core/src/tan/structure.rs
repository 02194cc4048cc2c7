//! Directed feature tree of a TAN model. The class is an implicit parent of every feature.

use std::collections::VecDeque;

use super::mst::Edge;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TanStructure {
    root: usize,
    parents: Vec<Option<usize>>,
    order: Vec<usize>,
}

impl TanStructure {
    /// Validate a parent list: `root` has no feature parent, every other feature has
    /// one, and following parents from any feature reaches `root`.
    pub fn new(root: usize, parents: Vec<Option<usize>>) -> Result<Self> {
        let n = parents.len();
        if root >= n {
            return Err(Error::Structure(format!("root {root} out of range for {n} features")));
        }
        if parents[root].is_some() {
            return Err(Error::Structure(format!("root {root} has a feature parent")));
        }
        let mut children = vec![Vec::new(); n];
        for (f, p) in parents.iter().enumerate() {
            match *p {
                None if f != root => {
                    return Err(Error::Structure(format!("feature {f} has no parent but is not the root")))
                }
                Some(p) if p >= n || p == f => {
                    return Err(Error::Structure(format!("feature {f} has invalid parent {p}")))
                }
                Some(p) => children[p].push(f),
                None => {}
            }
        }
        let order = bfs(root, &children);
        if order.len() != n {
            return Err(Error::Structure("parent links contain a cycle".into()));
        }
        Ok(TanStructure { root, parents, order })
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, f: usize) -> Option<usize> {
        self.parents[f]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    pub fn n_features(&self) -> usize {
        self.parents.len()
    }

    /// Features in breadth-first order from the root; every parent precedes its children.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    /// Undirected tree edges as sorted `(min, max)` pairs.
    pub fn undirected_edges(&self) -> Vec<Edge> {
        let mut e: Vec<Edge> =
            self.parents.iter().enumerate().filter_map(|(f, p)| p.map(|p| (p.min(f), p.max(f)))).collect();
        e.sort_unstable();
        e
    }
}

fn bfs(root: usize, children: &[Vec<usize>]) -> Vec<usize> {
    let mut order = Vec::with_capacity(children.len());
    let mut queue = VecDeque::from([root]);
    let mut seen = vec![false; children.len()];
    seen[root] = true;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &v in &children[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    order
}

/// Direct an undirected spanning tree away from `root` by breadth-first search.
pub fn orient_tree(edges: &[Edge], root: usize, n_features: usize) -> Result<TanStructure> {
    if root >= n_features {
        return Err(Error::Structure(format!("root {root} out of range for {n_features} features")));
    }
    if edges.len() + 1 != n_features {
        return Err(Error::Structure(format!("{} edges cannot span {n_features} features as a tree", edges.len())));
    }
    let mut adj = vec![Vec::new(); n_features];
    for &(a, b) in edges {
        if a >= n_features || b >= n_features || a == b {
            return Err(Error::Structure(format!("invalid edge ({a}, {b})")));
        }
        adj[a].push(b);
        adj[b].push(a);
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    let mut parents = vec![None; n_features];
    let mut seen = vec![false; n_features];
    seen[root] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                parents[v] = Some(u);
                queue.push_back(v);
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Structure("edges do not connect every feature (cycle or disconnection)".into()));
    }
    TanStructure::new(root, parents)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_rooted_at_end() {
        let s = orient_tree(&[(0, 1), (1, 2)], 0, 3).unwrap();
        assert_eq!(s.parents(), &[None, Some(0), Some(1)]);
        assert_eq!(s.topological_order(), &[0, 1, 2]);
    }

    #[test]
    fn star_rooted_off_center() {
        let s = orient_tree(&[(0, 2), (1, 2), (2, 3)], 0, 4).unwrap();
        assert_eq!(s.parents(), &[None, Some(2), Some(0), Some(2)]);
    }

    #[test]
    fn single_node() {
        let s = orient_tree(&[], 0, 1).unwrap();
        assert_eq!(s.parents(), &[None]);
        assert!(s.undirected_edges().is_empty());
    }

    #[test]
    fn rejects_cycles_and_forests() {
        assert!(orient_tree(&[(0, 1), (1, 2), (0, 2)], 0, 4).is_err(), "cycle plus isolated node");
        assert!(orient_tree(&[(0, 1)], 0, 3).is_err());
        assert!(orient_tree(&[(0, 1), (0, 1)], 0, 3).is_err());
    }

    #[test]
    fn new_rejects_bad_parents() {
        assert!(TanStructure::new(0, vec![None, Some(2), Some(1)]).is_err());
        assert!(TanStructure::new(0, vec![Some(1), None]).is_err());
        assert!(TanStructure::new(0, vec![None, None]).is_err());
        assert!(TanStructure::new(1, vec![Some(1), None, Some(0)]).is_ok());
    }
}
