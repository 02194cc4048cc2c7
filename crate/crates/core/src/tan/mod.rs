//! Tree-augmented naive Bayes: structure learning, parameter estimation, inference.

pub mod cmi;
pub mod counts;
pub mod model;
pub mod mst;
pub mod structure;

pub use cmi::{conditional_mutual_information, mutual_information, weight_matrix, EdgeWeight};
pub use counts::{tabulate_counts, CountCube};
pub use model::{estimate_cpts, Cpt, ModelFile, TanModel, DEFAULT_ALPHA};
pub use mst::{max_weight_spanning_tree, Edge, WeightMatrix};
pub use structure::{orient_tree, TanStructure};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::labels::Task;

/// Root of every learned tree: the first feature in schema order.
pub const ROOT_FEATURE: usize = 0;

/// Pairwise weights, maximum spanning tree, orientation away from the root.
pub fn learn_structure_from_counts(counts: &CountCube, weight: EdgeWeight) -> Result<TanStructure> {
    if counts.n_features() == 0 {
        return Err(Error::Structure("no features".into()));
    }
    let weights = weight_matrix(counts, weight);
    let edges = max_weight_spanning_tree(&weights);
    orient_tree(&edges, ROOT_FEATURE, counts.n_features())
}

pub fn learn_structure(dataset: &Dataset, task: Task) -> Result<TanStructure> {
    learn_structure_from_counts(&tabulate_counts(dataset, task), EdgeWeight::default())
}

/// Training options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub alpha: f64,
    pub weight: EdgeWeight,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { alpha: DEFAULT_ALPHA, weight: EdgeWeight::default() }
    }
}

/// Learn structure and parameters from one training set.
pub fn train(dataset: &Dataset, task: Task, options: TrainOptions) -> Result<TanModel> {
    if dataset.is_empty() {
        return Err(Error::Model("training set is empty".into()));
    }
    let counts = tabulate_counts(dataset, task);
    let structure = learn_structure_from_counts(&counts, options.weight)?;
    estimate_cpts(&counts, &structure, options.alpha, dataset.schema().hash(), task)
}
