//! Biopsy outcome severities and the two binary classification tasks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Pathology outcome of a biopsy episode, ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OutcomeLabel {
    Benign,
    LG,
    IntG,
    HG,
    Invasive,
}

impl OutcomeLabel {
    pub const ALL: [OutcomeLabel; 5] =
        [OutcomeLabel::Benign, OutcomeLabel::LG, OutcomeLabel::IntG, OutcomeLabel::HG, OutcomeLabel::Invasive];

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeLabel::Benign => "Benign",
            OutcomeLabel::LG => "LG",
            OutcomeLabel::IntG => "IntG",
            OutcomeLabel::HG => "HG",
            OutcomeLabel::Invasive => "Invasive",
        }
    }

    /// Position in [`OutcomeLabel::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for OutcomeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseLabelError(pub String);

impl fmt::Display for ParseLabelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unrecognized value {:?}", self.0)
    }
}

impl std::error::Error for ParseLabelError {}

impl FromStr for OutcomeLabel {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OutcomeLabel::ALL.into_iter().find(|l| l.as_str() == s).ok_or_else(|| ParseLabelError(s.to_string()))
    }
}

/// Which severities count as the positive ("malignant") class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Benign vs. LG/IntG/HG/Invasive.
    Bm,
    /// Benign/LG vs. IntG/HG/Invasive.
    B1m1,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Bm => "bm",
            Task::B1m1 => "b1m1",
        }
    }

    pub fn is_positive(self, outcome: OutcomeLabel) -> bool {
        derive_class(outcome, self) == BinaryClass::Positive
    }

    /// Severities mapped to the negative class, in severity order.
    pub fn negative_severities(self) -> Vec<OutcomeLabel> {
        OutcomeLabel::ALL.into_iter().filter(|&l| !self.is_positive(l)).collect()
    }

    pub fn positive_severities(self) -> Vec<OutcomeLabel> {
        OutcomeLabel::ALL.into_iter().filter(|&l| self.is_positive(l)).collect()
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bm" => Ok(Task::Bm),
            "b1m1" => Ok(Task::B1m1),
            _ => Err(ParseLabelError(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryClass {
    Negative,
    Positive,
}

impl BinaryClass {
    /// 0 for negative, 1 for positive.
    pub fn index(self) -> usize {
        match self {
            BinaryClass::Negative => 0,
            BinaryClass::Positive => 1,
        }
    }
}

pub fn derive_class(outcome: OutcomeLabel, task: Task) -> BinaryClass {
    use OutcomeLabel::*;
    let positive = match task {
        Task::Bm => !matches!(outcome, Benign),
        Task::B1m1 => matches!(outcome, IntG | HG | Invasive),
    };
    if positive {
        BinaryClass::Positive
    } else {
        BinaryClass::Negative
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn severity_order_is_total() {
        for w in OutcomeLabel::ALL.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn task_mapping() {
        assert_eq!(derive_class(OutcomeLabel::LG, Task::Bm), BinaryClass::Positive);
        assert_eq!(derive_class(OutcomeLabel::LG, Task::B1m1), BinaryClass::Negative);
        assert_eq!(derive_class(OutcomeLabel::Benign, Task::Bm), BinaryClass::Negative);
        assert_eq!(derive_class(OutcomeLabel::IntG, Task::B1m1), BinaryClass::Positive);
    }

    #[test]
    fn b1m1_negatives_contain_bm_negatives() {
        let bm = Task::Bm.negative_severities();
        let b1 = Task::B1m1.negative_severities();
        assert!(bm.iter().all(|l| b1.contains(l)));
        for task in [Task::Bm, Task::B1m1] {
            assert_eq!(task.negative_severities().len() + task.positive_severities().len(), 5);
        }
    }

    #[test]
    fn cohort_counts_partition() {
        // Whole-population severity counts: 3569 / 134 / 179 / 216 / 1509.
        let counts = [3569usize, 134, 179, 216, 1509];
        for (task, neg, pos) in [(Task::Bm, 3569, 2038), (Task::B1m1, 3703, 1904)] {
            let (mut n, mut p) = (0, 0);
            for (label, c) in OutcomeLabel::ALL.into_iter().zip(counts) {
                if task.is_positive(label) {
                    p += c
                } else {
                    n += c
                }
            }
            assert_eq!((n, p), (neg, pos));
        }
    }

    #[test]
    fn parse_round_trip() {
        for l in OutcomeLabel::ALL {
            assert_eq!(l.as_str().parse::<OutcomeLabel>().unwrap(), l);
        }
        assert!("DCIS".parse::<OutcomeLabel>().is_err());
        assert_eq!("B1M1".parse::<Task>().unwrap(), Task::B1m1);
    }
}
