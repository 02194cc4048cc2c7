//! Case records and CSV ingestion.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::sync::Arc;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::labels::OutcomeLabel;
use crate::schema::Schema;

pub const PATIENT_ID: &str = "patient_id";
pub const EXAM_DATE: &str = "exam_date";
pub const OUTCOME: &str = "outcome";

pub(crate) const DATE_FORMAT: &str = "%Y-%m-%d";

/// One diagnostic exam: feature states by schema feature index plus the resolved outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseRecord {
    pub patient_id: String,
    pub exam_date: NaiveDate,
    pub states: Vec<usize>,
    pub outcome: OutcomeLabel,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Arc<Schema>,
    records: Vec<CaseRecord>,
}

impl Dataset {
    pub fn new(schema: Arc<Schema>, records: Vec<CaseRecord>) -> Result<Self> {
        let cards = schema.cardinalities();
        for (n, r) in records.iter().enumerate() {
            if r.states.len() != cards.len() {
                return Err(Error::Dataset(format!(
                    "record {n} has {} states, schema has {} features",
                    r.states.len(),
                    cards.len()
                )));
            }
            if let Some(f) = r.states.iter().zip(&cards).position(|(&s, &c)| s >= c) {
                return Err(Error::Dataset(format!(
                    "record {n}: state index {} out of range for {:?}",
                    r.states[f],
                    schema.feature(f).name
                )));
            }
        }
        Ok(Dataset { schema, records })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn records(&self) -> &[CaseRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records at the given positions, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: Arc::clone(&self.schema),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    /// Age-group state index of a record, when the schema has an age-group feature.
    pub fn age_group_of(&self, record: &CaseRecord) -> Option<usize> {
        self.schema.age_group_feature().map(|f| record.states[f])
    }

    pub fn age_group_label(&self, record: &CaseRecord) -> Option<&str> {
        let f = self.schema.age_group_feature()?;
        Some(self.schema.feature(f).states[record.states[f]].as_str())
    }
}

#[derive(Debug, Clone, Copy)]
enum Column {
    PatientId,
    ExamDate,
    Outcome,
    Feature(usize),
}

/// Parse a dataset CSV against a schema.
///
/// Lines starting with `#` are skipped. An empty feature cell maps to the
/// variable's `missing` state when it declares one; any other unknown or empty
/// value is rejected with its line number and column.
pub fn parse_dataset<R: Read>(reader: R, schema: Arc<Schema>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut columns = Vec::with_capacity(headers.len());
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (pos, name) in headers.iter().enumerate() {
        if let Some(prev) = seen.insert(name, pos) {
            return Err(Error::Dataset(format!("column {name:?} appears twice (positions {prev} and {pos})")));
        }
        let col = match name {
            PATIENT_ID => Column::PatientId,
            EXAM_DATE => Column::ExamDate,
            OUTCOME => Column::Outcome,
            other => Column::Feature(
                schema.feature_index(other).ok_or_else(|| Error::Dataset(format!("unknown column {other:?}")))?,
            ),
        };
        columns.push(col);
    }
    let mut required: Vec<&str> = vec![PATIENT_ID, EXAM_DATE, OUTCOME];
    required.extend(schema.features().map(|v| v.name.as_str()));
    let absent: Vec<&str> = required.into_iter().filter(|n| !seen.contains_key(n)).collect();
    if !absent.is_empty() {
        return Err(Error::Dataset(format!("missing column(s): {}", absent.join(", "))));
    }

    let n_features = schema.n_features();
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let cell_err = |column: &str, message: String| Error::Cell { row: line, column: column.to_string(), message };
        let mut patient_id = String::new();
        let mut exam_date = None;
        let mut outcome = None;
        let mut states = vec![usize::MAX; n_features];
        for (value, (col, name)) in row.iter().zip(columns.iter().zip(headers.iter())) {
            match *col {
                Column::PatientId => {
                    if value.is_empty() {
                        return Err(cell_err(name, "empty patient id".into()));
                    }
                    patient_id = value.to_string();
                }
                Column::ExamDate => {
                    let d = NaiveDate::parse_from_str(value, DATE_FORMAT)
                        .map_err(|e| cell_err(name, format!("malformed date {value:?}: {e}")))?;
                    exam_date = Some(d);
                }
                Column::Outcome => {
                    let o = value.parse::<OutcomeLabel>().map_err(|e| cell_err(name, format!("outcome: {e}")))?;
                    outcome = Some(o);
                }
                Column::Feature(f) => {
                    let var = schema.feature(f);
                    let idx = if value.is_empty() {
                        var.missing_index().ok_or_else(|| {
                            cell_err(name, "empty cell and the variable declares no \"missing\" state".into())
                        })?
                    } else {
                        var.state_index(value).ok_or_else(|| {
                            cell_err(name, format!("unknown state {value:?}; expected one of {:?}", var.states))
                        })?
                    };
                    states[f] = idx;
                }
            }
        }
        records.push(CaseRecord {
            patient_id,
            exam_date: exam_date.expect("exam_date column present"),
            states,
            outcome: outcome.expect("outcome column present"),
        });
    }
    Dataset::new(schema, records)
}

/// Write a dataset as CSV; `comments` are emitted first as `# ` lines.
pub fn write_dataset<W: Write>(dataset: &Dataset, mut out: W, comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let schema = dataset.schema();
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec![PATIENT_ID.to_string(), EXAM_DATE.to_string()];
    header.extend(schema.features().map(|v| v.name.clone()));
    header.push(OUTCOME.to_string());
    wtr.write_record(&header)?;
    for r in dataset.records() {
        let mut row = Vec::with_capacity(header.len());
        row.push(r.patient_id.clone());
        row.push(r.exam_date.format(DATE_FORMAT).to_string());
        for (f, &s) in r.states.iter().enumerate() {
            row.push(schema.feature(f).states[s].clone());
        }
        row.push(r.outcome.as_str().to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Per-variable state counts and outcome breakdowns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    pub instances: usize,
    pub variables: Vec<VariableSummary>,
    /// Outcome counts in severity order.
    pub outcomes: [usize; 5],
    /// Outcome counts per age-group state, empty when the schema has no age group.
    pub outcomes_by_age_group: Vec<(String, [usize; 5])>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableSummary {
    pub name: String,
    pub counts: Vec<(String, usize)>,
}

pub fn summarize(dataset: &Dataset) -> Summary {
    let schema = dataset.schema();
    let mut counts: Vec<Vec<usize>> = schema.features().map(|v| vec![0; v.cardinality()]).collect();
    let mut outcomes = [0usize; 5];
    let age = schema.age_group_feature();
    let mut by_age = age.map(|f| vec![[0usize; 5]; schema.feature(f).cardinality()]).unwrap_or_default();
    for r in dataset.records() {
        for (f, &s) in r.states.iter().enumerate() {
            counts[f][s] += 1;
        }
        outcomes[r.outcome.index()] += 1;
        if let Some(f) = age {
            by_age[r.states[f]][r.outcome.index()] += 1;
        }
    }
    let variables = schema
        .features()
        .zip(counts)
        .map(|(v, c)| VariableSummary { name: v.name.clone(), counts: v.states.iter().cloned().zip(c).collect() })
        .collect();
    let outcomes_by_age_group = match age {
        Some(f) => schema.feature(f).states.iter().cloned().zip(by_age).collect(),
        None => Vec::new(),
    };
    Summary { instances: dataset.len(), variables, outcomes, outcomes_by_age_group }
}

impl Summary {
    /// Tab-separated text in the layout of the variable summary table.
    pub fn render(&self) -> String {
        let mut s = String::new();
        writeln!(s, "Variables\tInstances").unwrap();
        writeln!(s, "{}\t{}", self.variables.len(), self.instances).unwrap();
        for v in &self.variables {
            write!(s, "{}", v.name).unwrap();
            for (state, c) in &v.counts {
                write!(s, "\t{state} {c}").unwrap();
            }
            s.push('\n');
        }
        s.push('\n');
        write!(s, "Outcome").unwrap();
        for l in OutcomeLabel::ALL {
            write!(s, "\t{l}").unwrap();
        }
        s.push('\n');
        write!(s, "All").unwrap();
        for c in self.outcomes {
            write!(s, "\t{c}").unwrap();
        }
        s.push('\n');
        for (group, counts) in &self.outcomes_by_age_group {
            write!(s, "{group}").unwrap();
            for c in counts {
                write!(s, "\t{c}").unwrap();
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::Schema;

    fn schema() -> Arc<Schema> {
        Arc::new(
            Schema::from_json(
                r#"{"variables":[
                {"name":"Age Group","states":["Younger","Middle","Older"],"role":"demographic"},
                {"name":"Personal History","states":["No","Yes"],"role":"demographic"},
                {"name":"Palpable Lump","states":["missing","No","Yes"],"role":"imaging"},
                {"name":"Outcome","states":["Benign","LG","IntG","HG","Invasive"],"role":"class"}],
                "class_variable":"Outcome"}"#,
            )
            .unwrap(),
        )
    }

    const GOOD: &str = "patient_id,exam_date,Age Group,Personal History,Palpable Lump,outcome
p1,2006-01-02,Older,No,Yes,Invasive
p2,2007-03-04,Younger,Yes,,Benign
p1,2008-05-06,Older,No,No,HG
";

    #[test]
    fn parses_rows_and_empty_missing() {
        let d = parse_dataset(GOOD.as_bytes(), schema()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.records()[0].states, vec![2, 0, 2]);
        assert_eq!(d.records()[1].states[2], 0, "empty Palpable Lump -> missing");
        assert_eq!(d.records()[2].outcome, OutcomeLabel::HG);
        assert_eq!(d.age_group_label(&d.records()[1]), Some("Younger"));
    }

    #[test]
    fn rejects_unknown_state_with_position() {
        let bad = "patient_id,exam_date,Age Group,Personal History,Palpable Lump,outcome
p1,2006-01-02,Older,No,Yes,Invasive
p2,2006-01-02,Older,Maybe,Yes,Invasive
";
        match parse_dataset(bad.as_bytes(), schema()) {
            Err(Error::Cell { row, column, message }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "Personal History");
                assert!(message.contains("Maybe"));
            }
            other => panic!("expected cell error, got {other:?}"),
        }
    }

    #[test]
    fn empty_cell_without_missing_state_is_an_error() {
        let bad = "patient_id,exam_date,Age Group,Personal History,Palpable Lump,outcome
p1,2006-01-02,Older,,Yes,Invasive
";
        assert!(
            matches!(parse_dataset(bad.as_bytes(), schema()), Err(Error::Cell { column, .. }) if column == "Personal History")
        );
    }

    #[test]
    fn header_errors() {
        let unknown = "patient_id,exam_date,Age Group,Personal History,Palpable Lump,outcome,Extra\n";
        assert!(
            matches!(parse_dataset(unknown.as_bytes(), schema()), Err(Error::Dataset(m)) if m.contains("unknown column"))
        );
        let absent = "patient_id,exam_date,Age Group,Personal History,outcome\n";
        assert!(
            matches!(parse_dataset(absent.as_bytes(), schema()), Err(Error::Dataset(m)) if m.contains("Palpable Lump"))
        );
    }

    #[test]
    fn malformed_date() {
        let bad = "patient_id,exam_date,Age Group,Personal History,Palpable Lump,outcome
p1,2006/01/02,Older,No,Yes,Invasive
";
        assert!(
            matches!(parse_dataset(bad.as_bytes(), schema()), Err(Error::Cell { column, .. }) if column == "exam_date")
        );
    }

    #[test]
    fn summary_hand_counts() {
        let d = parse_dataset(GOOD.as_bytes(), schema()).unwrap();
        let s = summarize(&d);
        assert_eq!(s.instances, 3);
        assert_eq!(s.variables[0].counts, vec![("Younger".into(), 1), ("Middle".into(), 0), ("Older".into(), 2)]);
        assert_eq!(s.variables[2].counts, vec![("missing".into(), 1), ("No".into(), 1), ("Yes".into(), 1)]);
        assert_eq!(s.outcomes, [1, 0, 0, 1, 1]);
        assert_eq!(s.outcomes_by_age_group[2], ("Older".to_string(), [0, 0, 0, 1, 1]));
        assert!(s.render().starts_with("Variables\tInstances\n3\t3\n"));
    }

    #[test]
    fn all_missing_column_counts_full_size() {
        let text = "patient_id,exam_date,Age Group,Personal History,Palpable Lump,outcome
a,2006-01-02,Older,No,,Benign
b,2006-01-02,Older,No,,Benign
c,2006-01-02,Middle,Yes,missing,LG
";
        let s = summarize(&parse_dataset(text.as_bytes(), schema()).unwrap());
        assert_eq!(s.variables[2].counts[0], ("missing".to_string(), 3));
    }

    #[test]
    fn render_then_parse_preserves_summary() {
        let d = parse_dataset(GOOD.as_bytes(), schema()).unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf, &["seed=1".into()]).unwrap();
        let back = parse_dataset(buf.as_slice(), schema()).unwrap();
        assert_eq!(summarize(&back), summarize(&d));
        assert_eq!(back.records(), d.records());
    }
}
