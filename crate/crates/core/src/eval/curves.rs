//! ROC and precision-recall curves and their trapezoidal areas.

use serde::{Deserialize, Serialize};

use super::ScoredCase;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
    /// Score cut that produces this point (cases at or above it are called positive).
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Roc,
    Pr,
}

impl CurveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveKind::Roc => "roc",
            CurveKind::Pr => "pr",
        }
    }

    /// Integration method recorded next to every reported area.
    pub fn area_method(self) -> &'static str {
        match self {
            CurveKind::Roc => "trapezoid over false positive rate",
            CurveKind::Pr => "trapezoid over recall between achieved points (linear interpolation)",
        }
    }
}

/// Cumulative (tp, fp) after each distinct score, scores descending.
fn operating_points(scored: &[ScoredCase]) -> Vec<(f64, u64, u64)> {
    let mut order: Vec<(f64, bool)> = scored.iter().map(|s| (s.probability, s.positive)).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out: Vec<(f64, u64, u64)> = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    for (i, &(p, pos)) in order.iter().enumerate() {
        if pos {
            tp += 1
        } else {
            fp += 1
        }
        let last_of_tie = order.get(i + 1).is_none_or(|next| next.0 != p);
        if last_of_tie {
            out.push((p, tp, fp));
        }
    }
    out
}

fn class_totals(scored: &[ScoredCase]) -> (u64, u64) {
    let pos = scored.iter().filter(|s| s.positive).count() as u64;
    (pos, scored.len() as u64 - pos)
}

/// (false positive rate, sensitivity) at each distinct score, from (0, 0) to (1, 1).
pub fn roc_curve(scored: &[ScoredCase]) -> Result<Vec<CurvePoint>> {
    let (n_pos, n_neg) = class_totals(scored);
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Evaluation("ROC curve needs both positive and negative cases".into()));
    }
    let mut points = vec![CurvePoint { x: 0.0, y: 0.0, threshold: f64::INFINITY }];
    points.extend(operating_points(scored).into_iter().map(|(t, tp, fp)| CurvePoint {
        x: fp as f64 / n_neg as f64,
        y: tp as f64 / n_pos as f64,
        threshold: t,
    }));
    Ok(points)
}

/// (recall, precision) at each distinct score; the last point has recall 1 and
/// precision equal to the positive prevalence.
pub fn pr_curve(scored: &[ScoredCase]) -> Result<Vec<CurvePoint>> {
    let (n_pos, _) = class_totals(scored);
    if n_pos == 0 {
        return Err(Error::Evaluation("PR curve needs at least one positive case".into()));
    }
    Ok(operating_points(scored)
        .into_iter()
        .map(|(t, tp, fp)| CurvePoint { x: tp as f64 / n_pos as f64, y: tp as f64 / (tp + fp) as f64, threshold: t })
        .collect())
}

/// Trapezoidal area over x, accumulated left to right.
pub fn area_under_curve(points: &[CurvePoint], kind: CurveKind) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Evaluation(format!("{} area needs at least 2 points, got {}", kind.as_str(), points.len())));
    }
    let mut area = 0.0;
    for w in points.windows(2) {
        let dx = w[1].x - w[0].x;
        if dx < 0.0 || dx.is_nan() {
            return Err(Error::Evaluation(format!(
                "{} curve x values are not sorted: {} then {}",
                kind.as_str(),
                w[0].x,
                w[1].x
            )));
        }
        area += dx * (w[0].y + w[1].y) / 2.0;
    }
    Ok(area)
}

/// Per-fold areas with their mean and range. Folds whose cases cannot form the
/// curve (one class only, or a single PR point) are skipped and counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAreas {
    pub per_fold: Vec<Option<f64>>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub skipped: usize,
}

pub fn per_fold_areas(scored: &[ScoredCase], kind: CurveKind) -> Result<FoldAreas> {
    let k = scored.iter().map(|s| s.fold + 1).max().unwrap_or(0);
    let per_fold: Vec<Option<f64>> = (0..k)
        .map(|f| {
            let fold: Vec<ScoredCase> = scored.iter().filter(|s| s.fold == f).cloned().collect();
            let curve = match kind {
                CurveKind::Roc => roc_curve(&fold),
                CurveKind::Pr => pr_curve(&fold),
            };
            curve.and_then(|c| area_under_curve(&c, kind)).ok()
        })
        .collect();
    let areas: Vec<f64> = per_fold.iter().flatten().copied().collect();
    if areas.is_empty() {
        return Err(Error::Evaluation(format!("no fold supports a {} curve", kind.as_str())));
    }
    Ok(FoldAreas {
        mean: areas.iter().sum::<f64>() / areas.len() as f64,
        min: areas.iter().copied().fold(f64::INFINITY, f64::min),
        max: areas.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        skipped: per_fold.len() - areas.len(),
        per_fold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::OutcomeLabel;

    fn cases(v: &[(f64, bool)]) -> Vec<ScoredCase> {
        v.iter()
            .enumerate()
            .map(|(i, &(p, pos))| ScoredCase {
                case_index: i,
                patient_id: format!("p{i}"),
                probability: p,
                positive: pos,
                severity: if pos { OutcomeLabel::Invasive } else { OutcomeLabel::Benign },
                age_group: None,
                fold: i % 2,
            })
            .collect()
    }

    fn xy(points: &[CurvePoint]) -> Vec<(f64, f64)> {
        points.iter().map(|p| (p.x, p.y)).collect()
    }

    #[test]
    fn perfect_separation() {
        let s = cases(&[(0.9, true), (0.8, true), (0.3, false), (0.1, false)]);
        let roc = roc_curve(&s).unwrap();
        assert!(roc.iter().any(|p| p.x == 0.0 && p.y == 1.0));
        assert_eq!(area_under_curve(&roc, CurveKind::Roc).unwrap(), 1.0);
        let pr = pr_curve(&s).unwrap();
        for r in pr.iter().map(|p| p.x) {
            let best = pr.iter().filter(|p| p.x == r).map(|p| p.y).fold(0.0, f64::max);
            assert_eq!(best, 1.0, "recall {r}");
        }
    }

    #[test]
    fn all_tied() {
        let s = cases(&[(0.4, true), (0.4, false), (0.4, false)]);
        assert_eq!(xy(&roc_curve(&s).unwrap()), vec![(0.0, 0.0), (1.0, 1.0)]);
        let pr = pr_curve(&s).unwrap();
        assert_eq!(xy(&pr), vec![(1.0, 1.0 / 3.0)]);
        assert!(area_under_curve(&pr, CurveKind::Pr).is_err());
    }

    #[test]
    fn six_case_fixture() {
        // scores desc: .9+ .8- .7+ .7- .4+ .2-
        let s = cases(&[(0.9, true), (0.8, false), (0.7, true), (0.7, false), (0.4, true), (0.2, false)]);
        let roc = xy(&roc_curve(&s).unwrap());
        let t = 1.0 / 3.0;
        assert_eq!(roc, vec![(0.0, 0.0), (0.0, t), (t, t), (2.0 * t, 2.0 * t), (2.0 * t, 1.0), (1.0, 1.0)]);
        let pr = xy(&pr_curve(&s).unwrap());
        assert_eq!(pr, vec![(t, 1.0), (t, 0.5), (2.0 * t, 0.5), (1.0, 0.6), (1.0, 0.5)]);
        // pairwise wins: 3 + 1.5 + 1 out of 9
        let auc = area_under_curve(&roc_curve(&s).unwrap(), CurveKind::Roc).unwrap();
        assert!((auc - 5.5 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn reversed_ordering() {
        let s = cases(&[(0.1, true), (0.2, true), (0.8, false), (0.9, false)]);
        assert_eq!(area_under_curve(&roc_curve(&s).unwrap(), CurveKind::Roc).unwrap(), 0.0);
    }

    #[test]
    fn area_rejects_unsorted_and_short() {
        let p = |x, y| CurvePoint { x, y, threshold: 0.0 };
        assert!(area_under_curve(&[p(0.5, 1.0), p(0.2, 1.0)], CurveKind::Roc).is_err());
        assert!(area_under_curve(&[p(0.5, 1.0)], CurveKind::Roc).is_err());
        assert_eq!(area_under_curve(&[p(0.0, 0.0), p(1.0, 1.0)], CurveKind::Roc).unwrap(), 0.5);
        assert_eq!(area_under_curve(&[p(0.0, 0.0), p(0.0, 1.0), p(1.0, 1.0)], CurveKind::Roc).unwrap(), 1.0);
    }

    #[test]
    fn single_class_errors() {
        assert!(roc_curve(&cases(&[(0.3, true), (0.4, true)])).is_err());
        assert!(pr_curve(&cases(&[(0.3, false)])).is_err());
    }

    #[test]
    fn per_fold_summary() {
        let s = cases(&[(0.9, true), (0.8, true), (0.3, false), (0.1, false), (0.5, true), (0.6, false)]);
        let fa = per_fold_areas(&s, CurveKind::Roc).unwrap();
        assert_eq!(fa.per_fold.len(), 2);
        assert!(fa.min <= fa.mean && fa.mean <= fa.max);
    }
}
