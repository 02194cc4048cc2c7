use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema: {0}")]
    Schema(String),

    #[error("dataset row {row}, column {column:?}: {message}")]
    Cell { row: usize, column: String, message: String },

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("episode: {0}")]
    Episode(String),

    #[error("fold plan: {0}")]
    FoldPlan(String),

    #[error("structure: {0}")]
    Structure(String),

    #[error("model: {0}")]
    Model(String),

    #[error("inference: {0}")]
    Inference(String),

    #[error("evaluation: {0}")]
    Evaluation(String),

    #[error("regression: {0}")]
    Regression(String),

    #[error("synthetic: {0}")]
    Synthetic(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
