//! TAN parameters, exact posterior inference and the JSON model format.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::counts::CountCube;
use super::structure::TanStructure;
use crate::error::{Error, Result};
use crate::labels::Task;

/// Default additive-smoothing pseudo-count.
pub const DEFAULT_ALPHA: f64 = 0.5;

/// P(x_f | class, parent state), laid out as `[class][parent_state][x]`.
///
/// The root feature has a single parent configuration. Rows that are undefined
/// (no observations and zero smoothing) hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    parent_states: usize,
    states: usize,
    probs: Vec<f64>,
}

impl Cpt {
    pub fn new(parent_states: usize, states: usize, probs: Vec<f64>) -> Result<Self> {
        if parent_states == 0 || states == 0 || probs.len() != 2 * parent_states * states {
            return Err(Error::Model(format!(
                "table of {} values does not fit 2 x {parent_states} x {states}",
                probs.len()
            )));
        }
        Ok(Cpt { parent_states, states, probs })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn parent_states(&self) -> usize {
        self.parent_states
    }

    pub fn prob(&self, class: usize, parent_state: usize, x: usize) -> f64 {
        self.probs[(class * self.parent_states + parent_state) * self.states + x]
    }

    pub fn row(&self, class: usize, parent_state: usize) -> &[f64] {
        let start = (class * self.parent_states + parent_state) * self.states;
        &self.probs[start..start + self.states]
    }

    fn is_defined(&self) -> bool {
        self.probs.iter().all(|p| p.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TanModel {
    schema_hash: String,
    task: Task,
    alpha: f64,
    structure: TanStructure,
    prior: [f64; 2],
    cpts: Vec<Cpt>,
}

fn smoothed(count: u64, total: u64, alpha: f64, states: usize) -> f64 {
    let denom = total as f64 + alpha * states as f64;
    if denom == 0.0 {
        f64::NAN
    } else {
        (count as f64 + alpha) / denom
    }
}

/// Additive-smoothing estimates for every CPT and the class prior:
/// `(N[s, parents] + alpha) / (N[parents] + alpha * |states|)`.
pub fn estimate_cpts(
    counts: &CountCube,
    structure: &TanStructure,
    alpha: f64,
    schema_hash: impl Into<String>,
    task: Task,
) -> Result<TanModel> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Model(format!("smoothing alpha must be finite and nonnegative, got {alpha}")));
    }
    if structure.n_features() != counts.n_features() {
        return Err(Error::Model(format!(
            "structure has {} features, counts have {}",
            structure.n_features(),
            counts.n_features()
        )));
    }
    let prior = [
        smoothed(counts.class_count(0), counts.total(), alpha, 2),
        smoothed(counts.class_count(1), counts.total(), alpha, 2),
    ];
    let cpts = (0..counts.n_features())
        .map(|f| {
            let r = counts.cardinality(f);
            let probs: Vec<f64> = match structure.parent(f) {
                None => (0..2)
                    .flat_map(|c| {
                        let n = counts.class_count(c);
                        (0..r).map(move |x| smoothed(counts.single(f, c, x), n, alpha, r))
                    })
                    .collect(),
                Some(p) => {
                    let rp = counts.cardinality(p);
                    (0..2)
                        .flat_map(|c| {
                            (0..rp).flat_map(move |xp| {
                                let n = counts.single(p, c, xp);
                                (0..r).map(move |x| smoothed(counts.joint(p, f, c, xp, x), n, alpha, r))
                            })
                        })
                        .collect()
                }
            };
            let parent_states = structure.parent(f).map_or(1, |p| counts.cardinality(p));
            Cpt::new(parent_states, r, probs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TanModel { schema_hash: schema_hash.into(), task, alpha, structure: structure.clone(), prior, cpts })
}

impl TanModel {
    /// Assemble a model from explicit parameters, checking shapes.
    pub fn from_parts(
        schema_hash: impl Into<String>,
        task: Task,
        alpha: f64,
        structure: TanStructure,
        prior: [f64; 2],
        cpts: Vec<Cpt>,
    ) -> Result<Self> {
        if cpts.len() != structure.n_features() {
            return Err(Error::Model(format!("{} tables for {} features", cpts.len(), structure.n_features())));
        }
        for (f, cpt) in cpts.iter().enumerate() {
            let expected = structure.parent(f).map_or(1, |p| cpts[p].states);
            if cpt.parent_states != expected {
                return Err(Error::Model(format!(
                    "feature {f}: table has {} parent configurations, parent has {expected} states",
                    cpt.parent_states
                )));
            }
        }
        Ok(TanModel { schema_hash: schema_hash.into(), task, alpha, structure, prior, cpts })
    }

    pub fn schema_hash(&self) -> &str {
        &self.schema_hash
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn structure(&self) -> &TanStructure {
        &self.structure
    }

    pub fn prior(&self) -> [f64; 2] {
        self.prior
    }

    pub fn cpt(&self, f: usize) -> &Cpt {
        &self.cpts[f]
    }

    pub fn n_features(&self) -> usize {
        self.cpts.len()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.cpts.iter().map(Cpt::states).collect()
    }

    /// False when some distribution is undefined (unseen parent configuration with alpha = 0).
    pub fn is_valid(&self) -> bool {
        self.prior.iter().all(|p| p.is_finite()) && self.cpts.iter().all(Cpt::is_defined)
    }

    fn check_record(&self, states: &[usize]) -> Result<()> {
        if states.len() != self.cpts.len() {
            return Err(Error::Inference(format!(
                "record has {} states, model has {} features",
                states.len(),
                self.cpts.len()
            )));
        }
        for (f, (&s, cpt)) in states.iter().zip(&self.cpts).enumerate() {
            if s >= cpt.states {
                return Err(Error::Inference(format!(
                    "feature {f}: state index {s} out of range ({} states)",
                    cpt.states
                )));
            }
        }
        Ok(())
    }

    /// ln P(class, x) for both classes.
    pub fn log_joint(&self, states: &[usize]) -> Result<[f64; 2]> {
        self.check_record(states)?;
        let mut out = [0.0; 2];
        for (c, slot) in out.iter_mut().enumerate() {
            let mut acc = self.prior[c].ln();
            for (f, cpt) in self.cpts.iter().enumerate() {
                let p = self.structure.parent(f).map_or(0, |p| states[p]);
                acc += cpt.prob(c, p, states[f]).ln();
            }
            *slot = acc;
        }
        if out.iter().any(|v| v.is_nan()) {
            return Err(Error::Inference(
                "record reaches an undefined distribution (unseen parent configuration with alpha = 0)".into(),
            ));
        }
        Ok(out)
    }

    /// P(positive | x), normalized over both classes in log space.
    pub fn posterior(&self, states: &[usize]) -> Result<f64> {
        let [l0, l1] = self.log_joint(states)?;
        let m = l0.max(l1);
        if m == f64::NEG_INFINITY {
            return Err(Error::Inference("record has zero probability under both classes".into()));
        }
        let (e0, e1) = ((l0 - m).exp(), (l1 - m).exp());
        Ok(e1 / (e0 + e1))
    }
}

/// Exact decimal rendering with 17 significant digits.
pub fn encode_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn decode_f64(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|e| Error::Model(format!("bad probability {s:?}: {e}")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureFile {
    pub root: usize,
    pub parents: Vec<Option<usize>>,
}

/// Serialized model. CPTs are `[feature][class][parent_state][state]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub schema_hash: String,
    pub task: Task,
    pub alpha: f64,
    pub structure: StructureFile,
    pub prior: [String; 2],
    pub cpts: Vec<Vec<Vec<Vec<String>>>>,
    /// Run configuration that produced the model; not part of the parameters.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub provenance: BTreeMap<String, String>,
}

pub const MODEL_FORMAT: &str = "tanwb-model/1";

impl TanModel {
    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            schema_hash: self.schema_hash.clone(),
            task: self.task,
            alpha: self.alpha,
            structure: StructureFile { root: self.structure.root(), parents: self.structure.parents().to_vec() },
            prior: self.prior.map(encode_f64),
            cpts: self
                .cpts
                .iter()
                .map(|cpt| {
                    (0..2)
                        .map(|c| {
                            (0..cpt.parent_states)
                                .map(|p| cpt.row(c, p).iter().map(|&v| encode_f64(v)).collect())
                                .collect()
                        })
                        .collect()
                })
                .collect(),
            provenance: BTreeMap::new(),
        }
    }

    pub fn from_file(file: &ModelFile) -> Result<Self> {
        if file.format != MODEL_FORMAT {
            return Err(Error::Model(format!("unsupported model format {:?}", file.format)));
        }
        let structure = TanStructure::new(file.structure.root, file.structure.parents.clone())?;
        let prior = [decode_f64(&file.prior[0])?, decode_f64(&file.prior[1])?];
        let cpts = file
            .cpts
            .iter()
            .enumerate()
            .map(|(f, table)| {
                if table.len() != 2 {
                    return Err(Error::Model(format!("feature {f}: expected 2 class blocks")));
                }
                let parent_states = table[0].len();
                let states = table[0].first().map_or(0, Vec::len);
                let mut probs = Vec::with_capacity(2 * parent_states * states);
                for block in table {
                    if block.len() != parent_states {
                        return Err(Error::Model(format!("feature {f}: ragged parent dimension")));
                    }
                    for row in block {
                        if row.len() != states {
                            return Err(Error::Model(format!("feature {f}: ragged state dimension")));
                        }
                        for v in row {
                            probs.push(decode_f64(v)?);
                        }
                    }
                }
                Cpt::new(parent_states, states, probs)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(file.schema_hash.clone(), file.task, file.alpha, structure, prior, cpts)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(text)?)
    }
}
