//! Cubic least-squares regression with ANOVA, sequential and partial sums of squares.

mod dist;
mod qr;
mod render;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::confusion::ThresholdReport;
use crate::eval::curves::CurvePoint;
use crate::eval::io::SweepTable;

pub use dist::{f_upper_p, ln_gamma, reg_inc_beta, t_two_sided_p};
pub use qr::{householder, QrFit};

pub const MIN_OBSERVATIONS: usize = 5;
const DEGREE: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub term: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub t_value: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSs {
    pub term: String,
    pub df: usize,
    pub ss: f64,
    pub f_value: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub response: String,
    pub regressor: String,
    pub n: usize,
    pub coefficients: Vec<Coefficient>,
    pub model_ss: f64,
    pub error_ss: f64,
    pub total_ss: f64,
    pub model_df: usize,
    pub error_df: usize,
    pub total_df: usize,
    pub model_ms: f64,
    pub error_ms: f64,
    pub f_value: Option<f64>,
    pub f_p_value: Option<f64>,
    pub r_square: f64,
    pub coeff_var: Option<f64>,
    pub root_mse: f64,
    pub mean_of_response: f64,
    pub type1: Vec<TermSs>,
    pub type3: Vec<TermSs>,
}

impl RegressionReport {
    pub fn estimates(&self) -> [f64; 4] {
        let mut b = [0.0; 4];
        for (slot, c) in b.iter_mut().zip(&self.coefficients) {
            *slot = c.estimate;
        }
        b
    }

    pub fn render_text(&self) -> String {
        render::render(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Labels in the order Intercept, x, x*x, x*x*x.
pub fn term_labels(regressor: &str) -> Vec<String> {
    vec![
        "Intercept".to_string(),
        regressor.to_string(),
        format!("{regressor}*{regressor}"),
        format!("{regressor}*{regressor}*{regressor}"),
    ]
}

/// Horner evaluation of b0 + b1 x + b2 x² + b3 x³.
pub fn predict_poly(coefficients: &[f64; 4], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, &b| acc * x + b)
}

pub fn fit_cubic(x: &[f64], y: &[f64]) -> Result<RegressionReport> {
    fit_cubic_labeled(x, y, "x", "y")
}

pub fn fit_cubic_labeled(x: &[f64], y: &[f64], regressor: &str, response: &str) -> Result<RegressionReport> {
    if x.len() != y.len() {
        return Err(Error::Regression(format!("x has {} values but y has {}", x.len(), y.len())));
    }
    let n = x.len();
    if n < MIN_OBSERVATIONS {
        return Err(Error::Regression(format!(
            "need at least {MIN_OBSERVATIONS} observations for a cubic fit, got {n}"
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Regression("non-finite value in regression input".into()));
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::Regression("rank deficient design: all x values are identical".into()));
    }
    let design = design_columns(x);
    let full = householder(&design, y)?;

    let mean = y.iter().sum::<f64>() / n as f64;
    let constant = y.iter().all(|&v| v == y[0]);
    let labels = term_labels(regressor);
    let error_df = n - (DEGREE + 1);
    let total_df = n - 1;

    let (b, type1_ss, type3_ss, error_ss, total_ss) = if constant {
        (vec![y[0], 0.0, 0.0, 0.0], [0.0; 3], [0.0; 3], 0.0, 0.0)
    } else {
        let b = full.coefficients();
        let t1 = [1, 2, 3].map(|k| full.effects[k] * full.effects[k]);
        let mut t3 = [0.0; 3];
        for (slot, k) in t3.iter_mut().zip(1..=DEGREE) {
            *slot = last_term_ss(&design, y, k)?;
        }
        let total = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        (b, t1, t3, full.residual_ss(), total)
    };
    let model_ss: f64 = type1_ss.iter().sum();
    let error_ms = error_ss / error_df as f64;
    let model_ms = model_ss / DEGREE as f64;
    let root_mse = error_ms.sqrt();
    let testable = total_ss > 0.0 && error_ms > 0.0;
    let ed = error_df as f64;

    let (f_value, f_p_value) = if testable {
        let f = model_ms / error_ms;
        (Some(f), Some(f_upper_p(f, DEGREE as f64, ed)))
    } else {
        (None, None)
    };
    let r_inv = full.r_inverse();
    let coefficients = labels
        .iter()
        .enumerate()
        .map(|(k, term)| {
            let (std_error, t_value, p_value) = if testable {
                let v: f64 = r_inv[k].iter().map(|r| r * r).sum();
                let se = (v * error_ms).sqrt();
                let t = b[k] / se;
                (Some(se), Some(t), Some(t_two_sided_p(t, ed)))
            } else {
                (None, None, None)
            };
            Coefficient { term: term.clone(), estimate: b[k], std_error, t_value, p_value }
        })
        .collect();
    let term_table = |ss: [f64; 3]| -> Vec<TermSs> {
        ss.iter()
            .zip(&labels[1..])
            .map(|(&ss, term)| {
                let (f_value, p_value) = if testable {
                    let f = ss / error_ms;
                    (Some(f), Some(f_upper_p(f, 1.0, ed)))
                } else {
                    (None, None)
                };
                TermSs { term: term.clone(), df: 1, ss, f_value, p_value }
            })
            .collect()
    };

    Ok(RegressionReport {
        response: response.to_string(),
        regressor: regressor.to_string(),
        n,
        coefficients,
        model_ss,
        error_ss,
        total_ss,
        model_df: DEGREE,
        error_df,
        total_df,
        model_ms,
        error_ms,
        f_value,
        f_p_value,
        r_square: if total_ss > 0.0 { model_ss / total_ss } else { 0.0 },
        coeff_var: if mean != 0.0 { Some(100.0 * root_mse / mean) } else { None },
        root_mse,
        mean_of_response: mean,
        type1: term_table(type1_ss),
        type3: term_table(type3_ss),
    })
}

fn design_columns(x: &[f64]) -> Vec<Vec<f64>> {
    vec![vec![1.0; x.len()], x.to_vec(), x.iter().map(|v| v * v).collect(), x.iter().map(|v| v * v * v).collect()]
}

/// Partial SS of term `k`: refit with it entered last and take its effect.
fn last_term_ss(design: &[Vec<f64>], y: &[f64], k: usize) -> Result<f64> {
    let mut cols: Vec<Vec<f64>> = (0..design.len()).filter(|&j| j != k).map(|j| design[j].clone()).collect();
    cols.push(design[k].clone());
    let fit = householder(&cols, y)?;
    let e = fit.effects[design.len() - 1];
    Ok(e * e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relationship {
    PrecisionOnRecall,
    FprOnPrecision,
}

impl Relationship {
    pub fn as_str(self) -> &'static str {
        match self {
            Relationship::PrecisionOnRecall => "precision_on_recall",
            Relationship::FprOnPrecision => "fpr_on_precision",
        }
    }

    /// (regressor, response) labels.
    pub fn labels(self) -> (&'static str, &'static str) {
        match self {
            Relationship::PrecisionOnRecall => ("Recall", "Precision"),
            Relationship::FprOnPrecision => ("Precision", "FPR"),
        }
    }

    fn point(self, threshold: f64, ppv: Option<f64>, sens: Option<f64>, spec: Option<f64>) -> Option<CurvePoint> {
        let (x, y) = match self {
            Relationship::PrecisionOnRecall => (sens?, ppv?),
            Relationship::FprOnPrecision => (ppv?, 1.0 - spec?),
        };
        Some(CurvePoint { x, y, threshold })
    }
}

impl std::str::FromStr for Relationship {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "precision_on_recall" => Ok(Relationship::PrecisionOnRecall),
            "fpr_on_precision" => Ok(Relationship::FprOnPrecision),
            other => Err(Error::Regression(format!(
                "unknown relationship {other:?} (expected precision_on_recall or fpr_on_precision)"
            ))),
        }
    }
}

/// One (x, y) point per sweep row; rows with an undefined coordinate are dropped.
pub fn relationship_points(report: &ThresholdReport, relationship: Relationship) -> Vec<CurvePoint> {
    report
        .rows
        .iter()
        .filter_map(|r| {
            let m = &r.metrics;
            relationship.point(r.counts.threshold, m.ppv, m.sensitivity, m.specificity)
        })
        .collect()
}

/// Same as [`relationship_points`] but from a sweep CSV, recomputing each metric from the row counts.
pub fn relationship_points_from_table(table: &SweepTable, relationship: Relationship) -> Vec<CurvePoint> {
    table
        .rows
        .iter()
        .filter_map(|r| {
            let tp = r.positive_biopsies;
            let fp = r.negative_biopsies;
            let fn_: u64 = r.missed.values().sum();
            let tn: u64 = r.avoided.values().sum();
            let ratio = |a: u64, b: u64| (b > 0).then(|| a as f64 / b as f64);
            relationship.point(r.threshold, ratio(tp, tp + fp), ratio(tp, tp + fn_), ratio(tn, tn + fp))
        })
        .collect()
}

pub fn fit_curve_relationship(points: &[CurvePoint], relationship: Relationship) -> Result<RegressionReport> {
    if points.is_empty() {
        return Err(Error::Regression("curve has no points".into()));
    }
    let x: Vec<f64> = points.iter().map(|p| p.x).collect();
    let y: Vec<f64> = points.iter().map(|p| p.y).collect();
    let (regressor, response) = relationship.labels();
    fit_cubic_labeled(&x, &y, regressor, response)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300) || (a - b).abs() <= tol
    }

    #[test]
    fn horner() {
        assert_eq!(predict_poly(&[0.0, 1.0, 0.0, 0.0], 0.3), 0.3);
        assert_eq!(predict_poly(&[1.0, 0.0, 0.0, 0.0], 123.0), 1.0);
        assert_eq!(predict_poly(&[1.0, 2.0, 3.0, 4.0], 2.0), 1.0 + 4.0 + 12.0 + 32.0);
        // fitted precision model evaluated at recall 0 is its intercept
        let fitted = [0.909503979, 0.432564855, -1.261288606, 0.266724594];
        assert_eq!(format!("{:.4}", predict_poly(&fitted, 0.0)), "0.9095");
    }

    #[test]
    fn exact_cubic_recovered() {
        let b = [0.7, -1.3, 2.1, -0.4];
        let x: Vec<f64> = (0..50).map(|i| i as f64 / 49.0).collect();
        let y: Vec<f64> = x.iter().map(|&v| predict_poly(&b, v)).collect();
        let r = fit_cubic(&x, &y).unwrap();
        assert!(r.error_ss <= 1e-18 * r.total_ss, "{} vs {}", r.error_ss, r.total_ss);
        assert!((r.r_square - 1.0).abs() < 1e-12);
        for (got, want) in r.estimates().iter().zip(b) {
            assert!((got - want).abs() < 1e-9);
        }
        assert_eq!(r.type1[2].ss.to_bits(), r.type3[2].ss.to_bits());
    }

    #[test]
    fn constant_response() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let r = fit_cubic(&x, &[0.1; 10]).unwrap();
        let b = r.estimates();
        assert!(b[1].abs() < 1e-12 && b[2].abs() < 1e-12 && b[3].abs() < 1e-12);
        assert_eq!(r.r_square, 0.0);
        assert_eq!(r.total_ss, 0.0);
        assert!(r.f_value.is_none() && r.coefficients.iter().all(|c| c.t_value.is_none()));
    }

    #[test]
    fn preconditions() {
        let err = fit_cubic(&[0.0, 1.0], &[1.0, 2.0]).unwrap_err();
        assert!(err.to_string().contains("at least 5"));
        let err = fit_cubic(&[2.0; 6], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap_err();
        assert!(err.to_string().contains("rank deficient"));
        // only three distinct x values cannot carry a cubic
        let x = [0.0, 0.0, 1.0, 1.0, 2.0, 2.0];
        let err = fit_cubic(&x, &[1.0, 2.0, 3.0, 4.0, 5.0, 7.0]).unwrap_err();
        assert!(err.to_string().contains("rank deficient"));
        let pts = [CurvePoint { x: 0.1, y: 0.2, threshold: 0.0 }, CurvePoint { x: 0.3, y: 0.4, threshold: 0.5 }];
        assert!(fit_curve_relationship(&pts, Relationship::PrecisionOnRecall).is_err());
    }

    #[test]
    fn additivity_and_t_ratio() {
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.731).sin().abs()).collect();
        let y: Vec<f64> =
            x.iter().enumerate().map(|(i, v)| 0.3 + v - v * v + 0.01 * ((i * 7 % 11) as f64 - 5.0)).collect();
        let r = fit_cubic(&x, &y).unwrap();
        assert!(close(r.model_ss + r.error_ss, r.total_ss, 1e-9));
        assert!(close(r.type1.iter().map(|t| t.ss).sum(), r.model_ss, 1e-9));
        assert!(close(r.r_square, r.model_ss / r.total_ss, 1e-15));
        for c in &r.coefficients {
            assert!(close(c.t_value.unwrap(), c.estimate / c.std_error.unwrap(), 1e-12));
        }
        assert_eq!(r.type1[2].ss, r.type3[2].ss);
        assert_eq!((r.model_df, r.error_df, r.total_df), (3, 36, 39));
    }

    #[test]
    fn labels_follow_relationship() {
        let pts: Vec<CurvePoint> =
            (0..8).map(|i| CurvePoint { x: i as f64 / 7.0, y: 1.0 / (1.0 + i as f64), threshold: 0.0 }).collect();
        let r = fit_curve_relationship(&pts, Relationship::FprOnPrecision).unwrap();
        assert_eq!(r.response, "FPR");
        assert_eq!(r.coefficients[3].term, "Precision*Precision*Precision");
        let text = r.render_text();
        assert!(text.starts_with("Dependent Variable: FPR"));
    }
}
