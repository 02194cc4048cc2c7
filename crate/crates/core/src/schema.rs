//! Categorical variable schema.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::labels::OutcomeLabel;

/// Label of the state that marks "no such finding".
pub const MISSING: &str = "missing";

/// Default name of the age-group feature used for stratification and subpopulations.
pub const DEFAULT_AGE_GROUP: &str = "Age Group";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Demographic,
    Imaging,
    Class,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub states: Vec<String>,
    pub role: Role,
}

impl Variable {
    pub fn new(name: impl Into<String>, states: &[&str], role: Role) -> Self {
        Variable { name: name.into(), states: states.iter().map(|s| s.to_string()).collect(), role }
    }

    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    pub fn missing_index(&self) -> Option<usize> {
        self.state_index(MISSING)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SchemaFile {
    variables: Vec<Variable>,
    class_variable: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    age_group_variable: Option<String>,
}

/// Ordered variable list with exactly one class variable.
///
/// Features are every non-class variable, in file order; feature indices used
/// throughout the crate refer to that order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    variables: Vec<Variable>,
    class_index: usize,
    features: Vec<usize>,
    age_group: Option<usize>,
}

impl Schema {
    pub fn new(variables: Vec<Variable>, class_variable: &str) -> Result<Self> {
        Self::build(variables, class_variable, None)
    }

    fn build(variables: Vec<Variable>, class_variable: &str, age_group: Option<&str>) -> Result<Self> {
        let mut seen = HashSet::new();
        for v in &variables {
            if !seen.insert(v.name.as_str()) {
                return Err(Error::Schema(format!("duplicate variable name {:?}", v.name)));
            }
            if v.states.len() < 2 {
                return Err(Error::Schema(format!(
                    "variable {:?} declares {} state(s); at least 2 required",
                    v.name,
                    v.states.len()
                )));
            }
            let mut states = HashSet::new();
            for s in &v.states {
                if !states.insert(s.as_str()) {
                    return Err(Error::Schema(format!("variable {:?} repeats state {s:?}", v.name)));
                }
            }
        }
        let class_index = variables
            .iter()
            .position(|v| v.name == class_variable)
            .ok_or_else(|| Error::Schema(format!("class variable {class_variable:?} is not declared")))?;
        let class_roles = variables.iter().filter(|v| v.role == Role::Class).count();
        if variables[class_index].role != Role::Class || class_roles != 1 {
            return Err(Error::Schema(format!(
                "exactly one variable must have role \"class\" and it must be {class_variable:?}"
            )));
        }
        for s in &variables[class_index].states {
            s.parse::<OutcomeLabel>()
                .map_err(|_| Error::Schema(format!("class state {s:?} is not one of Benign|LG|IntG|HG|Invasive")))?;
        }
        let features: Vec<usize> = (0..variables.len()).filter(|&i| i != class_index).collect();
        if features.is_empty() {
            return Err(Error::Schema("schema declares no feature variables".into()));
        }
        let age_group = match age_group {
            Some(name) => Some(
                features
                    .iter()
                    .position(|&i| variables[i].name == name)
                    .ok_or_else(|| Error::Schema(format!("age group variable {name:?} is not a feature")))?,
            ),
            None => features.iter().position(|&i| variables[i].name == DEFAULT_AGE_GROUP),
        };
        Ok(Schema { variables, class_index, features, age_group })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SchemaFile = serde_json::from_str(text)?;
        Self::build(file.variables, &file.class_variable, file.age_group_variable.as_deref())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.file()).expect("schema serializes")
    }

    fn file(&self) -> SchemaFile {
        let age_group_variable =
            self.age_group.map(|f| self.feature(f).name.clone()).filter(|n| n != DEFAULT_AGE_GROUP);
        SchemaFile {
            variables: self.variables.clone(),
            class_variable: self.class_variable().name.clone(),
            age_group_variable,
        }
    }

    /// Hex SHA-256 of the compact canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&self.file()).expect("schema serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn class_variable(&self) -> &Variable {
        &self.variables[self.class_index]
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn feature(&self, i: usize) -> &Variable {
        &self.variables[self.features[i]]
    }

    pub fn features(&self) -> impl ExactSizeIterator<Item = &Variable> + '_ {
        self.features.iter().map(|&i| &self.variables[i])
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|&i| self.variables[i].name == name)
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.features().map(Variable::cardinality).collect()
    }

    /// Feature index of the age-group variable, if the schema has one.
    pub fn age_group_feature(&self) -> Option<usize> {
        self.age_group
    }
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<Schema> {
    let text = std::fs::read_to_string(path.as_ref())?;
    Schema::from_json(&text)
}

/// One feature of the mammography schema with its whole-population state counts.
#[derive(Debug, Clone, Copy)]
pub struct CohortVariable {
    pub name: &'static str,
    pub role: Role,
    pub states: &'static [(&'static str, u32)],
}

macro_rules! binary {
    ($name:expr, $missing:expr, $present:expr) => {
        CohortVariable { name: $name, role: Role::Imaging, states: &[(MISSING, $missing), ("present", $present)] }
    };
}

/// The 31 feature variables of the diagnostic-mammography dataset and their
/// state counts over 5607 cases.
pub const COHORT_VARIABLES: &[CohortVariable] = &[
    CohortVariable {
        name: "Age Group",
        role: Role::Demographic,
        states: &[("Younger", 2091), ("Middle", 2141), ("Older", 1375)],
    },
    CohortVariable { name: "Personal History", role: Role::Demographic, states: &[("No", 4697), ("Yes", 910)] },
    CohortVariable {
        name: "Family History",
        role: Role::Demographic,
        states: &[("None", 3888), ("Minor", 1014), ("Major", 416), (MISSING, 289)],
    },
    CohortVariable {
        name: "BIRADS Category",
        role: Role::Imaging,
        states: &[("0", 440), ("1", 0), ("2", 2), ("3", 2), ("4", 4513), ("5", 650), ("7", 0), ("8", 0), ("9", 0)],
    },
    CohortVariable {
        name: "Breast Density",
        role: Role::Imaging,
        states: &[
            ("Predominantly Fatty", 484),
            ("Scattered Fibroglandular", 2164),
            ("Heterogeneously Dense", 2384),
            ("Extremely Dense", 574),
            (MISSING, 1),
        ],
    },
    binary!("Mass Margin Circumscribed", 4927, 680),
    binary!("Mass Margin Obscured", 5195, 412),
    binary!("Mass Margin Microlobulated", 5561, 46),
    binary!("Mass Margin Spiculated", 5116, 491),
    binary!("Mass Margin Indistinct", 4825, 782),
    binary!("Mass Shape Oval", 5065, 542),
    binary!("Mass Shape Round", 5425, 182),
    binary!("Mass Shape Lobular", 5167, 440),
    binary!("Mass Shape Irregular", 5012, 595),
    binary!("Mass Density Fat", 5598, 9),
    binary!("Mass Density Low", 5578, 29),
    binary!("Mass Density Equal", 5201, 406),
    binary!("Mass Density High", 5373, 234),
    binary!("Calcification Morphology Round", 5566, 41),
    binary!("Calcification Morphology Punctate", 5490, 117),
    binary!("Calcification Morphology Amorphous", 4950, 657),
    binary!("Calcification Morphology Pleomorphic", 4696, 911),
    binary!("Calcification Morphology Fine Linear", 5323, 284),
    binary!("Calcification Distribution Diffuse", 5434, 173),
    binary!("Calcification Distribution Regional", 5576, 31),
    binary!("Calcification Distribution Clustered", 3693, 1914),
    binary!("Calcification Distribution Segmental", 5521, 86),
    binary!("Calcification Distribution Linear", 5441, 166),
    binary!("Asymmetric Density", 5116, 491),
    binary!("Architectural Distortion", 5140, 467),
    CohortVariable {
        name: "Palpable Lump",
        role: Role::Imaging,
        states: &[(MISSING, 1376), ("No", 2560), ("Yes", 1671)],
    },
];

/// Name of the class variable in the built-in mammography schema.
pub const COHORT_CLASS: &str = "Outcome";

/// Built-in mammography schema: the [`COHORT_VARIABLES`] features plus the outcome class.
pub fn cohort_schema() -> Schema {
    let mut variables: Vec<Variable> = COHORT_VARIABLES
        .iter()
        .map(|e| Variable {
            name: e.name.to_string(),
            states: e.states.iter().map(|(s, _)| s.to_string()).collect(),
            role: e.role,
        })
        .collect();
    variables.push(Variable {
        name: COHORT_CLASS.to_string(),
        states: OutcomeLabel::ALL.iter().map(|l| l.as_str().to_string()).collect(),
        role: Role::Class,
    });
    Schema::new(variables, COHORT_CLASS).expect("built-in schema is valid")
}
