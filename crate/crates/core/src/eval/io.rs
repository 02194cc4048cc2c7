//! CSV and JSON artifacts: scored cases, threshold tables, curves.
//!
//! Every CSV starts with `# key=value` provenance lines; readers collect them
//! and skip them when parsing rows.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::confusion::{format_metric, ThresholdReport};
use super::curves::{CurveKind, CurvePoint, FoldAreas};
use super::{PoolingMode, ScoredCase};
use crate::error::{Error, Result};
use crate::labels::{OutcomeLabel, Task};

/// Run configuration echoed into artifacts.
pub type Provenance = BTreeMap<String, String>;

fn write_provenance<W: Write>(out: &mut W, provenance: &Provenance) -> Result<()> {
    for (k, v) in provenance {
        writeln!(out, "# {k}={v}")?;
    }
    Ok(())
}

fn split_provenance(text: &str) -> Provenance {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| {
            let (k, v) = l.trim_start_matches('#').trim().split_once('=')?;
            Some((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes())
}

const SCORED_HEADER: [&str; 7] = ["case_index", "patient_id", "fold", "age_group", "severity", "class", "probability"];

pub fn write_scored_csv<W: Write>(scored: &[ScoredCase], provenance: &Provenance, mut out: W) -> Result<()> {
    write_provenance(&mut out, provenance)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCORED_HEADER)?;
    for s in scored {
        w.write_record([
            s.case_index.to_string(),
            s.patient_id.clone(),
            s.fold.to_string(),
            s.age_group.clone().unwrap_or_default(),
            s.severity.to_string(),
            u8::from(s.positive).to_string(),
            s.probability.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scored_csv<R: Read>(mut input: R) -> Result<(Vec<ScoredCase>, Provenance)> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let provenance = split_provenance(&text);
    let mut rdr = csv_reader(&text);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(SCORED_HEADER) {
        return Err(Error::Evaluation(format!("unexpected scored-case header {headers:?}")));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |what: &str| Error::Evaluation(format!("scored cases line {line}: bad {what}"));
        let probability: f64 = row[6].parse().map_err(|_| bad("probability"))?;
        if !(0.0..=1.0).contains(&probability) {
            return Err(bad("probability (outside [0, 1])"));
        }
        out.push(ScoredCase {
            case_index: row[0].parse().map_err(|_| bad("case_index"))?,
            patient_id: row[1].to_string(),
            fold: row[2].parse().map_err(|_| bad("fold"))?,
            age_group: (!row[3].is_empty()).then(|| row[3].to_string()),
            severity: row[4].parse().map_err(|_| bad("severity"))?,
            positive: match &row[5] {
                "1" => true,
                "0" => false,
                _ => return Err(bad("class")),
            },
            probability,
        });
    }
    Ok((out, provenance))
}

fn join(labels: &[OutcomeLabel]) -> String {
    labels.iter().map(|l| l.as_str()).collect::<Vec<_>>().join("/")
}

/// Column headers of a threshold table for `task`.
pub fn sweep_header(task: Task) -> Vec<String> {
    let neg = task.negative_severities();
    let pos = task.positive_severities();
    let mut h = vec![
        "threshold".to_string(),
        "Biopsy threshold (%)".to_string(),
        format!("{} biopsies", join(&neg)),
        format!("{} biopsies", join(&pos)),
    ];
    h.extend(neg.iter().map(|l| format!("{l} biopsies avoided")));
    h.extend(pos.iter().map(|l| format!("{l} biopsies missed")));
    h.extend(["PPV", "Sensitivity", "Specificity"].map(String::from));
    h
}

pub fn write_sweep_csv<W: Write>(
    report: &ThresholdReport,
    task: Task,
    provenance: &Provenance,
    mut out: W,
) -> Result<()> {
    write_provenance(&mut out, provenance)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(sweep_header(task))?;
    let neg = task.negative_severities();
    let pos = task.positive_severities();
    for row in &report.rows {
        let c = &row.counts;
        let mut rec =
            vec![c.threshold.to_string(), format!("{:.4}", c.threshold * 100.0), c.fp.to_string(), c.tp.to_string()];
        rec.extend(neg.iter().map(|&l| c.avoided(l).to_string()));
        rec.extend(pos.iter().map(|&l| c.missed(l).to_string()));
        rec.push(format_metric(row.metrics.ppv));
        rec.push(format_metric(row.metrics.sensitivity));
        rec.push(format_metric(row.metrics.specificity));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One row of an emitted threshold table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub threshold: f64,
    pub threshold_pct: String,
    pub negative_biopsies: u64,
    pub positive_biopsies: u64,
    pub avoided: BTreeMap<OutcomeLabel, u64>,
    pub missed: BTreeMap<OutcomeLabel, u64>,
    pub ppv: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub provenance: Provenance,
    pub task: Task,
    pub rows: Vec<SweepRecord>,
}

impl SweepTable {
    /// Row of the largest grid threshold at or below `t`.
    pub fn lookup(&self, t: f64) -> Option<&SweepRecord> {
        let n = self.rows.partition_point(|r| r.threshold <= t);
        n.checked_sub(1).map(|i| &self.rows[i])
    }
}

fn parse_metric(s: &str) -> std::result::Result<Option<f64>, ()> {
    if s == "undefined" {
        Ok(None)
    } else {
        s.parse().map(Some).map_err(|_| ())
    }
}

pub fn read_sweep_csv<R: Read>(mut input: R) -> Result<SweepTable> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let provenance = split_provenance(&text);
    let mut rdr = csv_reader(&text);
    let headers = rdr.headers()?.clone();
    let task = [Task::Bm, Task::B1m1]
        .into_iter()
        .find(|&t| headers.iter().eq(sweep_header(t).iter().map(String::as_str)))
        .ok_or_else(|| Error::Evaluation(format!("unrecognized threshold table header {headers:?}")))?;
    let neg = task.negative_severities();
    let pos = task.positive_severities();
    let mut rows: Vec<SweepRecord> = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |what: &str| Error::Evaluation(format!("threshold table line {line}: bad {what}"));
        let count = |i: usize| row[i].parse::<u64>().map_err(|_| bad(&headers[i]));
        let m = neg.len() + pos.len() + 4;
        let rec = SweepRecord {
            threshold: row[0].parse().map_err(|_| bad("threshold"))?,
            threshold_pct: row[1].to_string(),
            negative_biopsies: count(2)?,
            positive_biopsies: count(3)?,
            avoided: neg.iter().enumerate().map(|(k, &l)| Ok((l, count(4 + k)?))).collect::<Result<_>>()?,
            missed: pos.iter().enumerate().map(|(k, &l)| Ok((l, count(4 + neg.len() + k)?))).collect::<Result<_>>()?,
            ppv: parse_metric(&row[m]).map_err(|_| bad("PPV"))?,
            sensitivity: parse_metric(&row[m + 1]).map_err(|_| bad("Sensitivity"))?,
            specificity: parse_metric(&row[m + 2]).map_err(|_| bad("Specificity"))?,
        };
        if rows.last().is_some_and(|prev| prev.threshold >= rec.threshold) {
            return Err(bad("threshold order (must increase)"));
        }
        rows.push(rec);
    }
    if rows.is_empty() {
        return Err(Error::Evaluation("threshold table has no rows".into()));
    }
    Ok(SweepTable { provenance, task, rows })
}

pub fn write_curve_csv<W: Write>(points: &[CurvePoint], provenance: &Provenance, mut out: W) -> Result<()> {
    write_provenance(&mut out, provenance)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["threshold", "x", "y"])?;
    for p in points {
        w.write_record([p.threshold.to_string(), p.x.to_string(), p.y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Sidecar JSON written next to each curve CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub kind: CurveKind,
    /// Pooled area, or the mean of per-fold areas in per-fold mode.
    pub area: f64,
    pub method: String,
    pub n_pos: u64,
    pub n_neg: u64,
    pub mode: PoolingMode,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fold_areas: Option<FoldAreas>,
    pub config: Provenance,
}
