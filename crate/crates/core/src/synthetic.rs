//! Ground-truth TAN models and ancestral sampling of synthetic datasets.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{CaseRecord, Dataset};
use crate::error::{Error, Result};
use crate::labels::{derive_class, OutcomeLabel, Task};
use crate::par;
use crate::schema::{cohort_schema, Role, Schema, Variable, COHORT_CLASS, COHORT_VARIABLES};
use crate::tan::model::{decode_f64, encode_f64, Cpt, ModelFile, TanModel};
use crate::tan::mst::Edge;
use crate::tan::structure::TanStructure;

/// Records drawn per independent random stream.
pub const SAMPLE_CHUNK: usize = 8192;

/// Case counts of the reference mammography population by severity.
pub const COHORT_SEVERITY_COUNTS: [(OutcomeLabel, u32); 5] = [
    (OutcomeLabel::Benign, 3569),
    (OutcomeLabel::LG, 134),
    (OutcomeLabel::IntG, 179),
    (OutcomeLabel::HG, 216),
    (OutcomeLabel::Invasive, 1509),
];
pub const COHORT_CASES: u32 = 5607;
/// "Older" cases among negatives and among positives (B vs. M).
pub const COHORT_OLDER_BY_CLASS: [u32; 2] = [636, 739];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationInfo {
    pub seed: u64,
    #[serde(default)]
    pub target_size: Option<usize>,
    /// Desired per-state marginal of each feature, by variable name.
    #[serde(default)]
    pub marginal_targets: BTreeMap<String, Vec<f64>>,
}

/// A TAN model used as a data-generating process, with P(severity | class).
#[derive(Debug, Clone)]
pub struct GroundTruthModel {
    schema: Arc<Schema>,
    model: TanModel,
    severity_mix: [[f64; 5]; 2],
    generation: GenerationInfo,
}

#[derive(Serialize, Deserialize)]
struct GenerationBlock {
    #[serde(flatten)]
    info: GenerationInfo,
    severity_mix: [BTreeMap<OutcomeLabel, String>; 2],
}

#[derive(Serialize, Deserialize)]
struct GroundTruthFile {
    #[serde(flatten)]
    model: ModelFile,
    schema: serde_json::Value,
    generation: GenerationBlock,
}

impl GroundTruthModel {
    pub fn new(
        schema: Arc<Schema>,
        model: TanModel,
        severity_mix: [[f64; 5]; 2],
        generation: GenerationInfo,
    ) -> Result<Self> {
        if model.cardinalities() != schema.cardinalities() {
            return Err(Error::Synthetic("model state spaces do not match the schema".into()));
        }
        if model.schema_hash() != schema.hash() {
            return Err(Error::Synthetic("model was built for a different schema".into()));
        }
        if !model.is_valid() || !valid_distribution(&model.prior()) {
            return Err(Error::Synthetic("model has undefined or unnormalized parameters".into()));
        }
        for f in 0..model.n_features() {
            let cpt = model.cpt(f);
            for c in 0..2 {
                for p in 0..cpt.parent_states() {
                    if !valid_distribution(cpt.row(c, p)) {
                        return Err(Error::Synthetic(format!("feature {f}: row ({c}, {p}) is not a distribution")));
                    }
                }
            }
        }
        let declared: HashSet<&str> = schema.class_variable().states.iter().map(String::as_str).collect();
        for (c, row) in severity_mix.iter().enumerate() {
            if !valid_distribution(row) {
                return Err(Error::Synthetic(format!("severity mix for class {c} is not a distribution")));
            }
            for (sev, &w) in OutcomeLabel::ALL.iter().zip(row) {
                if w > 0.0 && derive_class(*sev, model.task()).index() != c {
                    return Err(Error::Synthetic(format!(
                        "severity {sev} cannot belong to class {c} under task {}",
                        model.task().as_str()
                    )));
                }
                if w > 0.0 && !declared.contains(sev.as_str()) {
                    return Err(Error::Synthetic(format!("severity {sev} is not a declared class state")));
                }
            }
        }
        Ok(GroundTruthModel { schema, model, severity_mix, generation })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn model(&self) -> &TanModel {
        &self.model
    }

    pub fn severity_mix(&self) -> &[[f64; 5]; 2] {
        &self.severity_mix
    }

    pub fn generation(&self) -> &GenerationInfo {
        &self.generation
    }

    pub fn to_json(&self) -> String {
        let severity_mix = self.severity_mix.map(|row| {
            OutcomeLabel::ALL.iter().zip(row).filter(|(_, w)| *w > 0.0).map(|(s, w)| (*s, encode_f64(w))).collect()
        });
        let file = GroundTruthFile {
            model: self.model.to_file(),
            schema: serde_json::from_str(&self.schema.to_json()).expect("schema json"),
            generation: GenerationBlock { info: self.generation.clone(), severity_mix },
        };
        serde_json::to_string_pretty(&file).expect("ground truth serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GroundTruthFile = serde_json::from_str(text)?;
        let schema = Arc::new(Schema::from_json(&file.schema.to_string())?);
        let model = TanModel::from_file(&file.model)?;
        let mut mix = [[0.0; 5]; 2];
        for (row, entries) in mix.iter_mut().zip(&file.generation.severity_mix) {
            for (sev, w) in entries {
                row[sev.index()] = decode_f64(w)?;
            }
        }
        Self::new(schema, model, mix, file.generation.info)
    }

    /// Exact P(x_f | class) for every feature, by propagation down the tree.
    pub fn class_conditional_marginals(&self) -> [Vec<Vec<f64>>; 2] {
        let m = &self.model;
        let structure = m.structure();
        [0, 1].map(|c| {
            let mut out: Vec<Vec<f64>> = vec![Vec::new(); m.n_features()];
            for &f in structure.topological_order() {
                let cpt = m.cpt(f);
                out[f] = match structure.parent(f) {
                    None => cpt.row(c, 0).to_vec(),
                    Some(p) => {
                        let mut dist = vec![0.0; cpt.states()];
                        for (ps, &w) in out[p].iter().enumerate() {
                            for (d, &q) in dist.iter_mut().zip(cpt.row(c, ps)) {
                                *d += w * q;
                            }
                        }
                        dist
                    }
                };
            }
            out
        })
    }

    /// Exact P(x_f) for every feature.
    pub fn feature_marginals(&self) -> Vec<Vec<f64>> {
        let prior = self.model.prior();
        let [m0, m1] = self.class_conditional_marginals();
        m0.iter().zip(&m1).map(|(a, b)| a.iter().zip(b).map(|(x, y)| prior[0] * x + prior[1] * y).collect()).collect()
    }

    /// P(severity) implied by the prior and the mix.
    pub fn severity_marginal(&self) -> [f64; 5] {
        let prior = self.model.prior();
        std::array::from_fn(|s| prior[0] * self.severity_mix[0][s] + prior[1] * self.severity_mix[1][s])
    }

    /// Exact I(X_f; X_parent | C) for every tree edge, as (parent, child).
    pub fn edge_cmi(&self) -> Vec<(Edge, f64)> {
        let m = &self.model;
        let prior = m.prior();
        let cond = self.class_conditional_marginals();
        let mut out = Vec::new();
        for f in 0..m.n_features() {
            let Some(p) = m.structure().parent(f) else { continue };
            let cpt = m.cpt(f);
            let mut total = 0.0;
            for c in 0..2 {
                for (ps, &wp) in cond[c][p].iter().enumerate() {
                    for (x, &q) in cpt.row(c, ps).iter().enumerate() {
                        if wp > 0.0 && q > 0.0 {
                            total += prior[c] * wp * q * (q / cond[c][f][x]).ln();
                        }
                    }
                }
            }
            out.push(((p, f), total));
        }
        out
    }
}

fn valid_distribution(row: &[f64]) -> bool {
    row.iter().all(|p| p.is_finite() && *p >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() < 1e-9
}

fn draw(rng: &mut ChaCha8Rng, row: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

fn base_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2005, 1, 1).expect("valid date")
}

/// Ancestral sampling: class, then features in tree order, then severity given class.
///
/// Record `i` belongs to chunk `i / SAMPLE_CHUNK`, and each chunk draws from its own
/// ChaCha stream keyed by `seed`, so the output does not depend on thread count.
pub fn sample_dataset(truth: &GroundTruthModel, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Synthetic("sample size must be at least 1".into()));
    }
    let model = &truth.model;
    let order = model.structure().topological_order();
    let chunks = n.div_ceil(SAMPLE_CHUNK);
    let parts = par::map_range(chunks, |chunk| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk as u64);
        let lo = chunk * SAMPLE_CHUNK;
        let hi = (lo + SAMPLE_CHUNK).min(n);
        let mut records = Vec::with_capacity(hi - lo);
        for i in lo..hi {
            let class = draw(&mut rng, &model.prior());
            let mut states = vec![0usize; model.n_features()];
            for &f in order {
                let ps = model.structure().parent(f).map_or(0, |p| states[p]);
                states[f] = draw(&mut rng, model.cpt(f).row(class, ps));
            }
            let outcome = OutcomeLabel::ALL[draw(&mut rng, &truth.severity_mix[class])];
            records.push(CaseRecord {
                patient_id: format!("P{:07}", i + 1),
                exam_date: base_date() + Days::new((i % 3653) as u64),
                states,
                outcome,
            });
        }
        records
    });
    Dataset::new(truth.schema.clone(), parts.into_iter().flatten().collect())
}

/// Fraction of the truth's undirected edges present in the learned tree.
pub fn structure_recovery_score(learned: &TanStructure, truth: &TanStructure) -> Result<f64> {
    if learned.n_features() != truth.n_features() {
        return Err(Error::Synthetic(format!(
            "learned structure has {} features, truth has {}",
            learned.n_features(),
            truth.n_features()
        )));
    }
    let want = truth.undirected_edges();
    if want.is_empty() {
        return Ok(1.0);
    }
    let have: HashSet<Edge> = learned.undirected_edges().into_iter().collect();
    let hits = want.iter().filter(|e| have.contains(e)).count();
    Ok(hits as f64 / want.len() as f64)
}

/// Largest absolute difference over the prior and every CPT entry of two models with the same structure.
pub fn max_parameter_error(estimate: &TanModel, truth: &TanModel) -> Result<f64> {
    if estimate.structure() != truth.structure() || estimate.cardinalities() != truth.cardinalities() {
        return Err(Error::Synthetic("models differ in structure or state spaces".into()));
    }
    let mut worst = (0..2).map(|c| (estimate.prior()[c] - truth.prior()[c]).abs()).fold(0.0, f64::max);
    for f in 0..truth.n_features() {
        let (a, b) = (estimate.cpt(f), truth.cpt(f));
        for c in 0..2 {
            for p in 0..b.parent_states() {
                for (x, y) in a.row(c, p).iter().zip(b.row(c, p)) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
    }
    Ok(worst)
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
}

fn build_cpt(parent_states: usize, states: usize, row: impl Fn(usize, usize) -> Vec<f64>) -> Cpt {
    let mut probs = Vec::with_capacity(2 * parent_states * states);
    for c in 0..2 {
        for p in 0..parent_states {
            probs.extend(row(c, p));
        }
    }
    Cpt::new(parent_states, states, probs).expect("shape is consistent")
}

/// A model over the mammography schema whose severity mix, age-by-class split and
/// per-feature state spaces follow the reference population (B vs. M task).
pub fn make_cohort_model(seed: u64) -> GroundTruthModel {
    let schema = Arc::new(cohort_schema());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = COHORT_VARIABLES.len();
    let total = COHORT_CASES as f64;
    let positives: u32 =
        COHORT_SEVERITY_COUNTS.iter().filter(|(s, _)| *s != OutcomeLabel::Benign).map(|(_, c)| c).sum();
    let class_n = [(COHORT_CASES - positives) as f64, positives as f64];
    let prior = [class_n[0] / total, class_n[1] / total];

    let mut mix = [[0.0; 5]; 2];
    for (sev, count) in COHORT_SEVERITY_COUNTS {
        let c = derive_class(sev, Task::Bm).index();
        mix[c][sev.index()] = count as f64 / class_n[c];
    }

    let targets: Vec<Vec<f64>> = COHORT_VARIABLES
        .iter()
        .map(|e| {
            let mut v: Vec<f64> = e.states.iter().map(|(_, c)| *c as f64 + 0.5).collect();
            normalize(&mut v);
            v
        })
        .collect();

    let mut parents = vec![None; n];
    for (f, slot) in parents.iter_mut().enumerate().skip(1) {
        *slot = Some(rng.random_range(0..f));
    }
    let structure = TanStructure::new(0, parents).expect("random recursive tree");

    // Age group: exact "Older" share per class, Younger/Middle split in population proportion.
    let age = COHORT_VARIABLES[0].states;
    let older = age.iter().position(|(s, _)| *s == "Older").expect("Older state");
    let rest: f64 = age.iter().enumerate().filter(|(i, _)| *i != older).map(|(_, (_, c))| *c as f64).sum();
    let age_cpt = build_cpt(1, age.len(), |c, _| {
        let older_n = COHORT_OLDER_BY_CLASS[c] as f64;
        age.iter()
            .enumerate()
            .map(|(i, (_, cnt))| {
                if i == older {
                    older_n / class_n[c]
                } else {
                    (class_n[c] - older_n) * (*cnt as f64 / rest) / class_n[c]
                }
            })
            .collect()
    });

    let mut cpts = vec![age_cpt];
    let cards: Vec<usize> = COHORT_VARIABLES.iter().map(|e| e.states.len()).collect();
    for f in 1..n {
        let k = cards[f];
        let ps = structure.parent(f).map_or(1, |p| cards[p]);
        let beta: f64 = rng.random_range(0.15..0.8);
        let gamma: f64 = rng.random_range(0.1..0.5);
        let class_score: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let parent_score: Vec<f64> = (0..ps * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let target = &targets[f];
        cpts.push(build_cpt(ps, k, |c, p| {
            let sign = if c == 1 { 1.0 } else { -1.0 };
            let mut row: Vec<f64> = (0..k)
                .map(|x| target[x] * (sign * beta * class_score[x] + gamma * parent_score[p * k + x]).exp())
                .collect();
            normalize(&mut row);
            row
        }));
    }
    let mut model =
        TanModel::from_parts(schema.hash(), Task::Bm, 0.0, structure, prior, cpts).expect("consistent parts");
    model = fit_marginals(&schema, model, &targets);

    let generation = GenerationInfo {
        seed,
        target_size: Some(COHORT_CASES as usize),
        marginal_targets: schema.features().map(|v| v.name.clone()).zip(targets).collect(),
    };
    GroundTruthModel::new(schema, model, mix, generation).expect("cohort model is valid")
}

/// Rescale non-root rows so the feature marginals approach the targets.
fn fit_marginals(schema: &Arc<Schema>, mut model: TanModel, targets: &[Vec<f64>]) -> TanModel {
    const ROUNDS: usize = 25;
    let task = model.task();
    for _ in 0..ROUNDS {
        let truth = GroundTruthModel {
            schema: schema.clone(),
            model,
            severity_mix: [[0.0; 5]; 2],
            generation: GenerationInfo::default(),
        };
        let marg = truth.feature_marginals();
        model = truth.model;
        let mut cpts = Vec::with_capacity(model.n_features());
        for f in 0..model.n_features() {
            let cpt = model.cpt(f);
            if model.structure().parent(f).is_none() {
                cpts.push(cpt.clone());
                continue;
            }
            let w: Vec<f64> = targets[f].iter().zip(&marg[f]).map(|(t, m)| t / m).collect();
            cpts.push(build_cpt(cpt.parent_states(), cpt.states(), |c, p| {
                let mut row: Vec<f64> = cpt.row(c, p).iter().zip(&w).map(|(q, w)| q * w).collect();
                normalize(&mut row);
                row
            }));
        }
        model = TanModel::from_parts(model.schema_hash(), task, 0.0, model.structure().clone(), model.prior(), cpts)
            .expect("shapes unchanged");
    }
    model
}

/// Smallest exact tree-edge CMI of a [`make_recovery_model`] truth.
pub const RECOVERY_CMI_FLOOR: f64 = 0.05;

/// A mostly-binary model with strong parent-child coupling, every tree edge
/// carrying at least [`RECOVERY_CMI_FLOOR`] nats of conditional mutual information.
/// Ternary features only appear as leaves, so every parent state keeps a sizeable
/// share of each class.
pub fn make_recovery_model(n_features: usize, seed: u64) -> GroundTruthModel {
    assert!(n_features >= 2, "need at least two features");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut parents = vec![None; n_features];
        for (f, slot) in parents.iter_mut().enumerate().skip(1) {
            *slot = Some(rng.random_range(0..f));
        }
        let has_child: Vec<bool> = (0..n_features).map(|f| parents.contains(&Some(f))).collect();
        let cards: Vec<usize> =
            (0..n_features).map(|f| if f > 0 && !has_child[f] && rng.random_bool(0.25) { 3 } else { 2 }).collect();
        let mut variables: Vec<Variable> = Vec::with_capacity(n_features + 1);
        for (f, &k) in cards.iter().enumerate() {
            let states: Vec<String> = (0..k).map(|s| format!("s{s}")).collect();
            let refs: Vec<&str> = states.iter().map(String::as_str).collect();
            variables.push(Variable::new(format!("F{:02}", f + 1), &refs, Role::Imaging));
        }
        variables.push(Variable::new(COHORT_CLASS, &["Benign", "Invasive"], Role::Class));
        let schema = Arc::new(Schema::new(variables, COHORT_CLASS).expect("valid schema"));

        let structure = TanStructure::new(0, parents).expect("random recursive tree");
        let root_cpt = build_cpt(1, 2, |c, _| if c == 0 { vec![0.7, 0.3] } else { vec![0.3, 0.7] });
        let mut cpts = vec![root_cpt];
        for f in 1..n_features {
            let k = cards[f];
            let p = structure.parent(f).expect("non-root");
            let eps = [rng.random_range(0.05..0.2), rng.random_range(0.05..0.2)];
            let shift = rng.random_range(0..k);
            cpts.push(build_cpt(cards[p], k, |c, ps| {
                let copy = (ps + c * shift) % k;
                (0..k).map(|x| if x == copy { 1.0 - eps[c] } else { eps[c] / (k - 1) as f64 }).collect()
            }));
        }
        let model =
            TanModel::from_parts(schema.hash(), Task::Bm, 0.0, structure, [0.5, 0.5], cpts).expect("consistent parts");
        let mut mix = [[0.0; 5]; 2];
        mix[0][OutcomeLabel::Benign.index()] = 1.0;
        mix[1][OutcomeLabel::Invasive.index()] = 1.0;
        let truth = GroundTruthModel::new(schema, model, mix, GenerationInfo { seed, ..Default::default() })
            .expect("recovery model is valid");
        if truth.edge_cmi().iter().all(|(_, v)| *v >= RECOVERY_CMI_FLOOR) {
            return truth;
        }
    }
}
