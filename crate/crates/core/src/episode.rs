//! Biopsy episodes of care.
//!
//! Biopsies of the same breast are grouped into episodes: an episode starts at
//! its earliest biopsy and takes in every later biopsy dated at most
//! [`EPISODE_WINDOW_DAYS`] after that start. An episode is labeled with its most
//! severe outcome.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;

use crate::dataset::{DATE_FORMAT, EXAM_DATE, OUTCOME, PATIENT_ID};
use crate::error::{Error, Result};
use crate::labels::OutcomeLabel;

/// Six months, anchored at the first biopsy of the episode.
pub const EPISODE_WINDOW_DAYS: i64 = 183;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BreastSide {
    Left,
    Right,
}

impl FromStr for BreastSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(BreastSide::Left),
            "right" | "r" => Ok(BreastSide::Right),
            _ => Err(Error::Episode(format!("unknown breast side {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BiopsyEvent {
    pub patient_id: String,
    pub side: BreastSide,
    pub date: NaiveDate,
    pub severity: OutcomeLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Episode {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub label: OutcomeLabel,
}

fn check_same_breast(events: &[BiopsyEvent]) -> Result<()> {
    let first = events.first().ok_or_else(|| Error::Episode("no biopsy events".into()))?;
    if let Some(e) = events.iter().find(|e| e.patient_id != first.patient_id || e.side != first.side) {
        return Err(Error::Episode(format!(
            "events mix breasts: ({}, {:?}) and ({}, {:?})",
            first.patient_id, first.side, e.patient_id, e.side
        )));
    }
    Ok(())
}

/// Split one breast's biopsies into consecutive episodes.
pub fn episodes(events: &[BiopsyEvent]) -> Result<Vec<Episode>> {
    check_same_breast(events)?;
    let mut sorted: Vec<&BiopsyEvent> = events.iter().collect();
    sorted.sort_by_key(|e| e.date);
    let mut out: Vec<Episode> = Vec::new();
    for e in sorted {
        match out.last_mut() {
            Some(ep) if (e.date - ep.start).num_days() <= EPISODE_WINDOW_DAYS => {
                ep.end = e.date;
                ep.label = ep.label.max(e.severity);
            }
            _ => out.push(Episode { start: e.date, end: e.date, label: e.severity }),
        }
    }
    Ok(out)
}

/// Label of the earliest episode among one breast's biopsies.
pub fn resolve_episode_label(events: &[BiopsyEvent]) -> Result<OutcomeLabel> {
    Ok(episodes(events)?[0].label)
}

/// Read a biopsy-events CSV (`patient_id,breast_side,date,severity`).
pub fn parse_events<R: Read>(reader: R) -> Result<Vec<BiopsyEvent>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Episode(format!("events file lacks column {name:?}")))
    };
    let (pid, side, date, sev) = (col(PATIENT_ID)?, col("breast_side")?, col("date")?, col("severity")?);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let at = |m: String| Error::Episode(format!("events line {line}: {m}"));
        out.push(BiopsyEvent {
            patient_id: row[pid].to_string(),
            side: row[side].parse().map_err(|e: Error| at(e.to_string()))?,
            date: NaiveDate::parse_from_str(&row[date], DATE_FORMAT)
                .map_err(|e| at(format!("malformed date {:?}: {e}", &row[date])))?,
            severity: row[sev].parse().map_err(|e| at(format!("severity: {e}")))?,
        });
    }
    Ok(out)
}

/// Episodes of every (patient, breast) in an event list.
pub fn episodes_by_patient(events: &[BiopsyEvent]) -> Result<BTreeMap<String, Vec<Episode>>> {
    let mut groups: BTreeMap<(String, BreastSide), Vec<BiopsyEvent>> = BTreeMap::new();
    for e in events {
        groups.entry((e.patient_id.clone(), e.side)).or_default().push(e.clone());
    }
    let mut out: BTreeMap<String, Vec<Episode>> = BTreeMap::new();
    for ((pid, _), evs) in groups {
        out.entry(pid).or_default().extend(episodes(&evs)?);
    }
    Ok(out)
}

/// Outcome for an exam: the first episode (either breast) starting on or after
/// the exam date; episodes starting the same day are merged by severity.
pub fn outcome_for_exam(episodes: &[Episode], exam_date: NaiveDate) -> Option<OutcomeLabel> {
    let start = episodes.iter().filter(|e| e.start >= exam_date).map(|e| e.start).min()?;
    episodes.iter().filter(|e| e.start == start).map(|e| e.label).max()
}

/// Rewrite an exam CSV, filling its `outcome` column (appended if absent) from biopsy events.
/// Returns the number of exams labeled.
pub fn label_exams<R: Read, W: Write>(exams: R, events: &[BiopsyEvent], out: W) -> Result<usize> {
    let by_patient = episodes_by_patient(events)?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(exams);
    let mut headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let pid = col(PATIENT_ID).ok_or_else(|| Error::Episode("exam file lacks patient_id".into()))?;
    let date = col(EXAM_DATE).ok_or_else(|| Error::Episode("exam file lacks exam_date".into()))?;
    let outcome = col(OUTCOME);
    if outcome.is_none() {
        headers.push_field(OUTCOME);
    }
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(&headers)?;
    let mut n = 0;
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let d = NaiveDate::parse_from_str(&row[date], DATE_FORMAT)
            .map_err(|e| Error::Episode(format!("exam line {line}: malformed date: {e}")))?;
        let label = by_patient.get(&row[pid]).and_then(|eps| outcome_for_exam(eps, d)).ok_or_else(|| {
            Error::Episode(format!(
                "exam line {line}: no biopsy episode for patient {:?} on or after {}",
                &row[pid], &row[date]
            ))
        })?;
        let mut fields: Vec<&str> = row.iter().collect();
        match outcome {
            Some(o) => fields[o] = label.as_str(),
            None => fields.push(label.as_str()),
        }
        wtr.write_record(&fields)?;
        n += 1;
    }
    wtr.flush()?;
    Ok(n)
}
