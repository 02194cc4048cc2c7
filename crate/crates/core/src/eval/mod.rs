//! Cross-validated scoring, biopsy-threshold analysis and operating-point curves.

pub mod confusion;
pub mod curves;
pub mod io;

pub use confusion::{
    confusion_at_threshold, metrics_from_counts, threshold_grid, threshold_sweep, ConfusionCounts, Metrics, SweepRow,
    ThresholdReport,
};
pub use curves::{area_under_curve, per_fold_areas, pr_curve, roc_curve, CurveKind, CurvePoint, FoldAreas};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::folds::FoldPlan;
use crate::labels::{OutcomeLabel, Task};
use crate::par;
use crate::tan::{train, TrainOptions};

/// A held-out prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCase {
    /// Row position in the source dataset.
    pub case_index: usize,
    pub patient_id: String,
    pub probability: f64,
    pub positive: bool,
    pub severity: OutcomeLabel,
    pub age_group: Option<String>,
    pub fold: usize,
}

/// Train on all folds but `f`, score fold `f`, for every fold (in parallel).
///
/// Output is in dataset order and covers every case exactly once.
pub fn run_cross_validation(
    dataset: &Dataset,
    plan: &FoldPlan,
    task: Task,
    options: TrainOptions,
) -> Result<Vec<ScoredCase>> {
    if plan.assignment().len() != dataset.len() {
        return Err(Error::Evaluation(format!(
            "fold plan covers {} cases, dataset has {}",
            plan.assignment().len(),
            dataset.len()
        )));
    }
    let per_fold = par::try_map_range(plan.k(), |f| -> Result<Vec<ScoredCase>> {
        let test = plan.test_indices(f);
        if test.is_empty() {
            return Ok(Vec::new());
        }
        let training = dataset.subset(&plan.train_indices(f));
        let positives = training.records().iter().filter(|r| task.is_positive(r.outcome)).count();
        if positives == 0 || positives == training.len() {
            return Err(Error::Evaluation(format!(
                "training set for fold {f} has only {} cases",
                if positives == 0 { "negative" } else { "positive" }
            )));
        }
        let model = train(&training, task, options)?;
        test.into_iter()
            .map(|i| {
                let r = &dataset.records()[i];
                Ok(ScoredCase {
                    case_index: i,
                    patient_id: r.patient_id.clone(),
                    probability: model.posterior(&r.states)?,
                    positive: task.is_positive(r.outcome),
                    severity: r.outcome,
                    age_group: dataset.age_group_label(r).map(str::to_string),
                    fold: f,
                })
            })
            .collect()
    })?;
    let mut scored: Vec<ScoredCase> = per_fold.into_iter().flatten().collect();
    scored.sort_by_key(|s| s.case_index);
    Ok(scored)
}

/// Cases of one age group, order preserved.
pub fn filter_subpopulation(scored: &[ScoredCase], age_group: &str) -> Vec<ScoredCase> {
    scored.iter().filter(|s| s.age_group.as_deref() == Some(age_group)).cloned().collect()
}

/// How held-out scores from different fold models are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolingMode {
    /// One evaluation over all held-out predictions.
    #[default]
    Pooled,
    /// One evaluation per fold, summarized by mean and range.
    PerFold,
}

impl PoolingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PoolingMode::Pooled => "pooled",
            PoolingMode::PerFold => "per_fold",
        }
    }
}

impl std::str::FromStr for PoolingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(PoolingMode::Pooled),
            "per_fold" | "per-fold" => Ok(PoolingMode::PerFold),
            _ => Err(Error::Evaluation(format!("unknown pooling mode {s:?}"))),
        }
    }
}
