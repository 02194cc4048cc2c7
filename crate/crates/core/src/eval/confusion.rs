//! Confusion counts at biopsy thresholds.
//!
//! A case is biopsied (predicted positive) when its probability is at or above
//! the threshold; strictly below means no biopsy.

use super::ScoredCase;
use crate::labels::OutcomeLabel;
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionCounts {
    pub threshold: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
    /// Positives below the threshold, by severity.
    pub missed_by_severity: [u64; 5],
    /// Negatives below the threshold, by severity.
    pub avoided_by_severity: [u64; 5],
}

impl ConfusionCounts {
    pub fn avoided_negatives(&self) -> u64 {
        self.tn
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.fp + self.tn
    }

    pub fn missed(&self, severity: OutcomeLabel) -> u64 {
        self.missed_by_severity[severity.index()]
    }

    pub fn avoided(&self, severity: OutcomeLabel) -> u64 {
        self.avoided_by_severity[severity.index()]
    }
}

/// Direct scan over every case.
pub fn confusion_at_threshold(scored: &[ScoredCase], threshold: f64) -> ConfusionCounts {
    let mut c = ConfusionCounts {
        threshold,
        tp: 0,
        fp: 0,
        tn: 0,
        fn_: 0,
        missed_by_severity: [0; 5],
        avoided_by_severity: [0; 5],
    };
    for s in scored {
        let biopsy = s.probability >= threshold;
        match (s.positive, biopsy) {
            (true, true) => c.tp += 1,
            (true, false) => {
                c.fn_ += 1;
                c.missed_by_severity[s.severity.index()] += 1;
            }
            (false, true) => c.fp += 1,
            (false, false) => {
                c.tn += 1;
                c.avoided_by_severity[s.severity.index()] += 1;
            }
        }
    }
    c
}

/// PPV, sensitivity and specificity; `None` where the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub ppv: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics_from_counts(c: &ConfusionCounts) -> Metrics {
    Metrics {
        ppv: ratio(c.tp, c.tp + c.fp),
        sensitivity: ratio(c.tp, c.tp + c.fn_),
        specificity: ratio(c.tn, c.tn + c.fp),
    }
}

/// Four-decimal rendering used in threshold tables; undefined values print as `undefined`.
pub fn format_metric(m: Option<f64>) -> String {
    match m {
        Some(v) => format!("{v:.4}"),
        None => "undefined".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub rows: Vec<SweepRow>,
    pub n_positive: u64,
    pub n_negative: u64,
}

/// `grid_points` evenly spaced thresholds from 0 to 1 inclusive.
pub fn threshold_grid(grid_points: usize) -> Vec<f64> {
    assert!(grid_points >= 2, "a threshold grid needs at least 2 points");
    let last = (grid_points - 1) as f64;
    (0..grid_points).map(|k| k as f64 / last).collect()
}

/// Confusion counts and metrics at every grid threshold.
///
/// Scores are sorted once per (class, severity) group and each row counts the
/// cases below its threshold by binary search; rows are computed in parallel.
pub fn threshold_sweep(scored: &[ScoredCase], grid_points: usize) -> ThresholdReport {
    let mut groups: [[Vec<f64>; 5]; 2] = Default::default();
    for s in scored {
        groups[usize::from(s.positive)][s.severity.index()].push(s.probability);
    }
    for g in groups.iter_mut().flatten() {
        g.sort_by(f64::total_cmp);
    }
    let grid = threshold_grid(grid_points);
    let rows = par::map_range(grid.len(), |k| {
        let t = grid[k];
        let mut c = ConfusionCounts {
            threshold: t,
            tp: 0,
            fp: 0,
            tn: 0,
            fn_: 0,
            missed_by_severity: [0; 5],
            avoided_by_severity: [0; 5],
        };
        for sev in 0..5 {
            let neg = &groups[0][sev];
            let below = neg.partition_point(|&p| p < t) as u64;
            c.avoided_by_severity[sev] = below;
            c.tn += below;
            c.fp += neg.len() as u64 - below;
            let pos = &groups[1][sev];
            let below = pos.partition_point(|&p| p < t) as u64;
            c.missed_by_severity[sev] = below;
            c.fn_ += below;
            c.tp += pos.len() as u64 - below;
        }
        let metrics = metrics_from_counts(&c);
        SweepRow { counts: c, metrics }
    });
    let n_positive = scored.iter().filter(|s| s.positive).count() as u64;
    ThresholdReport { rows, n_positive, n_negative: scored.len() as u64 - n_positive }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::OutcomeLabel::*;

    fn case(p: f64, positive: bool, severity: OutcomeLabel) -> ScoredCase {
        ScoredCase {
            case_index: 0,
            patient_id: String::new(),
            probability: p,
            positive,
            severity,
            age_group: None,
            fold: 0,
        }
    }

    fn counts(tp: u64, fp: u64, tn: u64, fn_: u64) -> ConfusionCounts {
        ConfusionCounts { threshold: 0.0, tp, fp, tn, fn_, missed_by_severity: [0; 5], avoided_by_severity: [0; 5] }
    }

    #[test]
    fn hand_evaluated_threshold() {
        let s = [case(0.005, false, Benign), case(0.02, false, Benign), case(0.9, true, Invasive)];
        let c = confusion_at_threshold(&s, 0.01);
        assert_eq!((c.fp, c.tp, c.avoided_negatives(), c.fn_), (1, 1, 1, 0));
    }

    #[test]
    fn equality_means_biopsy() {
        let s = [case(0.02, true, HG)];
        assert_eq!(confusion_at_threshold(&s, 0.02).tp, 1);
    }

    #[test]
    fn zero_threshold_is_baseline() {
        let s = [case(0.0, false, Benign), case(0.3, true, LG), case(0.7, true, Invasive)];
        let c = confusion_at_threshold(&s, 0.0);
        assert_eq!((c.tp, c.fp, c.tn, c.fn_), (2, 1, 0, 0));
    }

    #[test]
    fn top_threshold_misses_all() {
        let s = [case(0.4, false, Benign), case(0.99, true, LG), case(0.7, true, Invasive)];
        let c = confusion_at_threshold(&s, 1.0);
        assert_eq!((c.tp, c.fp, c.fn_), (0, 0, 2));
        assert_eq!(c.missed(LG) + c.missed(Invasive), 2);
        assert_eq!(metrics_from_counts(&c).ppv, None);
    }

    #[test]
    fn table_baseline_metrics() {
        let m = metrics_from_counts(&counts(2038, 3569, 0, 0));
        assert_eq!(format_metric(m.ppv), "0.3635");
        assert_eq!(format_metric(m.sensitivity), "1.0000");
        assert_eq!(format_metric(m.specificity), "0.0000");
        let m = metrics_from_counts(&counts(2038, 3547, 22, 0));
        assert_eq!(format_metric(m.specificity), "0.0062");
        assert_eq!(format_metric(m.ppv), "0.3649");
        let m = metrics_from_counts(&counts(0, 0, 5, 5));
        assert_eq!(m.ppv, None);
        assert_eq!(format_metric(m.ppv), "undefined");
    }

    #[test]
    fn grid_shapes() {
        let g = threshold_grid(5001);
        assert_eq!(g.len(), 5001);
        assert_eq!((g[0], g[5000]), (0.0, 1.0));
        assert!((g[1] - 0.0002).abs() < 1e-18);
        assert_eq!(g[2500], 0.5);
        let g = threshold_grid(2001);
        assert!((g[1] - 0.0005).abs() < 1e-18);
        assert_eq!(threshold_grid(2), vec![0.0, 1.0]);
    }

    #[test]
    fn sweep_agrees_with_direct_scan() {
        let mut s = Vec::new();
        for i in 0..200u32 {
            let p = ((i * 7919) % 1000) as f64 / 1000.0;
            let sev = OutcomeLabel::ALL[(i % 5) as usize];
            s.push(case(p, sev != Benign, sev));
        }
        let report = threshold_sweep(&s, 101);
        for row in &report.rows {
            assert_eq!(row.counts, confusion_at_threshold(&s, row.counts.threshold));
        }
        assert_eq!(report.n_positive, 160);
    }
}
