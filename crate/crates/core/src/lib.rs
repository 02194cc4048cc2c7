//! Tree-augmented naive Bayes workbench.
//!
//! Learns TAN classifiers from categorical exam records, scores cases by
//! patient-grouped cross-validation, sweeps biopsy thresholds into confusion
//! tables, builds ROC and precision-recall curves, fits cubic regressions with
//! full ANOVA output, and samples synthetic datasets from known TAN models.

#![allow(clippy::needless_range_loop)]

pub mod dataset;
pub mod episode;
pub mod error;
pub mod eval;
pub mod folds;
pub mod labels;
pub mod par;
pub mod regression;
pub mod schema;
pub mod synthetic;
pub mod tan;

pub use dataset::{parse_dataset, summarize, write_dataset, CaseRecord, Dataset, Summary};
pub use error::{Error, Result};
pub use folds::{build_fold_plan, FoldPlan};
pub use labels::{derive_class, BinaryClass, OutcomeLabel, Task};
pub use schema::{load_schema, Role, Schema, Variable};
pub use tan::{learn_structure, train, TanModel, TanStructure, TrainOptions};
