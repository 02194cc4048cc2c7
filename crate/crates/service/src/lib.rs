//! HTTP decision service: posterior prediction, threshold-tradeoff lookup and
//! model/schema description for a loaded artifact set.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tanwb_core::eval::confusion::format_metric;
use tanwb_core::eval::io::{read_sweep_csv, SweepRecord, SweepTable};
use tanwb_core::{load_schema, Schema, TanModel};

/// Hex SHA-256 of a serialized model; identifies the model in responses.
pub fn model_id(model_json: &[u8]) -> String {
    Sha256::digest(model_json).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: TanModel,
    pub id: String,
}

/// Immutable set of everything a request can read.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    schema: Option<Arc<Schema>>,
    model: Option<LoadedModel>,
    /// Keyed by subpopulation; the whole population uses the empty key.
    sweeps: BTreeMap<String, SweepTable>,
}

impl Artifacts {
    pub fn new(
        schema: Option<Arc<Schema>>,
        model: Option<LoadedModel>,
        sweeps: BTreeMap<String, SweepTable>,
    ) -> Result<Self, String> {
        if let Some(m) = &model {
            let schema = schema.as_ref().ok_or("a model needs a schema")?;
            if m.model.schema_hash() != schema.hash() {
                return Err(format!(
                    "model schema hash {} does not match schema {}",
                    m.model.schema_hash(),
                    schema.hash()
                ));
            }
        }
        Ok(Artifacts { schema, model, sweeps })
    }

    pub fn load(paths: &ArtifactPaths) -> Result<Self, String> {
        let schema = match &paths.schema {
            Some(p) => Some(Arc::new(load_schema(p).map_err(|e| format!("{}: {e}", p.display()))?)),
            None => None,
        };
        let model = match &paths.model {
            Some(p) => {
                let bytes = std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()))?;
                let text = String::from_utf8(bytes.clone()).map_err(|e| format!("{}: {e}", p.display()))?;
                let model = TanModel::from_json(&text).map_err(|e| format!("{}: {e}", p.display()))?;
                Some(LoadedModel { model, id: model_id(&bytes) })
            }
            None => None,
        };
        let mut sweeps = BTreeMap::new();
        for (key, p) in &paths.sweeps {
            let file = std::fs::File::open(p).map_err(|e| format!("{}: {e}", p.display()))?;
            let table = read_sweep_csv(file).map_err(|e| format!("{}: {e}", p.display()))?;
            sweeps.insert(key.clone(), table);
        }
        Self::new(schema, model, sweeps)
    }

    pub fn schema(&self) -> Option<&Arc<Schema>> {
        self.schema.as_ref()
    }

    pub fn model(&self) -> Option<&LoadedModel> {
        self.model.as_ref()
    }

    pub fn sweeps(&self) -> &BTreeMap<String, SweepTable> {
        &self.sweeps
    }
}

/// Files an artifact set is read from; kept for reloads.
#[derive(Debug, Clone, Default)]
pub struct ArtifactPaths {
    pub schema: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub sweeps: Vec<(String, PathBuf)>,
}

#[derive(Clone)]
pub struct AppState {
    current: Arc<RwLock<Arc<Artifacts>>>,
    paths: Option<Arc<ArtifactPaths>>,
}

impl AppState {
    pub fn new(artifacts: Artifacts) -> Self {
        AppState { current: Arc::new(RwLock::new(Arc::new(artifacts))), paths: None }
    }

    pub fn from_paths(paths: ArtifactPaths) -> Result<Self, String> {
        let artifacts = Artifacts::load(&paths)?;
        Ok(AppState { paths: Some(Arc::new(paths)), ..Self::new(artifacts) })
    }

    pub fn snapshot(&self) -> Arc<Artifacts> {
        self.current.read().expect("artifact lock poisoned").clone()
    }

    /// Swap in a new artifact set; in-flight requests keep the one they started with.
    pub fn replace(&self, artifacts: Artifacts) {
        *self.current.write().expect("artifact lock poisoned") = Arc::new(artifacts);
    }

    /// Re-read the configured files and swap them in.
    pub fn reload(&self) -> Result<(), String> {
        let paths = self.paths.as_ref().ok_or("service was not started from files")?;
        self.replace(Artifacts::load(paths)?);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldProblem {
    pub feature: String,
    pub message: String,
}

/// JSON error body `{error, details[]}` with a status code.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub error: String,
    pub details: Vec<FieldProblem>,
}

impl ApiError {
    fn new(status: StatusCode, error: impl Into<String>) -> Self {
        ApiError { status, error: error.into(), details: Vec::new() }
    }

    fn unavailable(what: &str) -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, format!("no {what} loaded"))
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.error)?;
        for d in &self.details {
            write!(f, "\n  {}: {}", d.feature, d.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ApiError {}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.error, "details": self.details }))).into_response()
    }
}

/// Map feature names to state indices. Every schema feature must be present with
/// a declared state; every problem is reported, in schema order then unknown names.
pub fn resolve_features(schema: &Schema, request: &BTreeMap<String, Value>) -> Result<Vec<usize>, Vec<FieldProblem>> {
    let mut problems = Vec::new();
    let mut states = Vec::with_capacity(schema.n_features());
    for v in schema.features() {
        match request.get(&v.name) {
            None => problems.push(FieldProblem { feature: v.name.clone(), message: "missing feature".into() }),
            Some(Value::String(label)) => match v.state_index(label) {
                Some(s) => states.push(s),
                None => problems.push(FieldProblem {
                    feature: v.name.clone(),
                    message: format!("illegal state {label:?}; expected one of {:?}", v.states),
                }),
            },
            Some(other) => problems.push(FieldProblem {
                feature: v.name.clone(),
                message: format!("state must be a string, got {other}"),
            }),
        }
    }
    for name in request.keys() {
        if schema.feature_index(name).is_none() {
            problems.push(FieldProblem { feature: name.clone(), message: "unknown feature".into() });
        }
    }
    if problems.is_empty() {
        Ok(states)
    } else {
        Err(problems)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub probability: f64,
    pub task: String,
    pub model_id: String,
}

/// Posterior for one feature mapping; shared by the HTTP handler and the command line.
pub fn predict_case(art: &Artifacts, request: &BTreeMap<String, Value>) -> Result<PredictResponse, ApiError> {
    let (Some(schema), Some(loaded)) = (art.schema(), art.model()) else {
        return Err(ApiError::unavailable("model"));
    };
    let states = resolve_features(schema, request).map_err(|details| ApiError {
        status: StatusCode::BAD_REQUEST,
        error: "invalid features".into(),
        details,
    })?;
    let probability =
        loaded.model.posterior(&states).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    Ok(PredictResponse { probability, task: loaded.model.task().as_str().into(), model_id: loaded.id.clone() })
}

async fn predict(State(state): State<AppState>, body: Bytes) -> Result<Json<PredictResponse>, ApiError> {
    let art = state.snapshot();
    if art.model().is_none() {
        return Err(ApiError::unavailable("model"));
    }
    let request: BTreeMap<String, Value> = serde_json::from_slice(&body).map_err(|e| {
        ApiError::new(StatusCode::BAD_REQUEST, format!("request must be a JSON object of feature -> state: {e}"))
    })?;
    predict_case(&art, &request).map(Json)
}

#[derive(Debug, Deserialize)]
struct ThresholdQuery {
    t: Option<String>,
    subpop: Option<String>,
}

/// One sweep row as served to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub requested: f64,
    pub threshold: f64,
    pub threshold_pct: String,
    pub subpopulation: Option<String>,
    pub task: String,
    pub negative_biopsies: u64,
    pub positive_biopsies: u64,
    pub avoided: BTreeMap<String, u64>,
    pub missed: BTreeMap<String, u64>,
    pub ppv: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv_text: String,
    pub sensitivity_text: String,
    pub specificity_text: String,
}

fn subpop_key(s: Option<&str>) -> String {
    match s.map(str::trim) {
        None | Some("") => String::new(),
        Some(s) if s.eq_ignore_ascii_case("all") => String::new(),
        Some(s) => s.to_string(),
    }
}

fn threshold_row(requested: f64, key: &str, table: &SweepTable, row: &SweepRecord) -> ThresholdRow {
    let names = |m: &BTreeMap<_, u64>| {
        m.iter().map(|(k, v): (&tanwb_core::OutcomeLabel, &u64)| (k.as_str().to_string(), *v)).collect()
    };
    ThresholdRow {
        requested,
        threshold: row.threshold,
        threshold_pct: row.threshold_pct.clone(),
        subpopulation: (!key.is_empty()).then(|| key.to_string()),
        task: table.task.as_str().into(),
        negative_biopsies: row.negative_biopsies,
        positive_biopsies: row.positive_biopsies,
        avoided: names(&row.avoided),
        missed: names(&row.missed),
        ppv: row.ppv,
        sensitivity: row.sensitivity,
        specificity: row.specificity,
        ppv_text: format_metric(row.ppv),
        sensitivity_text: format_metric(row.sensitivity),
        specificity_text: format_metric(row.specificity),
    }
}

async fn threshold(
    State(state): State<AppState>,
    Query(q): Query<ThresholdQuery>,
) -> Result<Json<ThresholdRow>, ApiError> {
    let art = state.snapshot();
    if art.sweeps().is_empty() {
        return Err(ApiError::unavailable("sweep"));
    }
    let raw = q.t.ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "query parameter t is required"))?;
    let t: f64 = raw
        .trim()
        .parse()
        .map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, format!("threshold {raw:?} is not a number")))?;
    if !(0.0..=1.0).contains(&t) {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, format!("threshold {t} is outside [0, 1]")));
    }
    let key = subpop_key(q.subpop.as_deref());
    let table = art.sweeps().get(&key).ok_or_else(|| {
        let have: Vec<&str> = art.sweeps().keys().map(|k| if k.is_empty() { "all" } else { k }).collect();
        ApiError::new(StatusCode::NOT_FOUND, format!("no sweep for subpopulation {key:?}; loaded: {have:?}"))
    })?;
    let row = table
        .lookup(t)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("sweep has no row at or below {t}")))?;
    Ok(Json(threshold_row(t, &key, table, row)))
}

async fn model_info(State(state): State<AppState>) -> Result<Json<Value>, ApiError> {
    let art = state.snapshot();
    let (Some(schema), Some(loaded)) = (art.schema(), art.model()) else {
        return Err(ApiError::unavailable("model"));
    };
    let m = &loaded.model;
    let name = |f: usize| schema.feature(f).name.clone();
    let edges: Vec<Value> = m
        .structure()
        .parents()
        .iter()
        .enumerate()
        .filter_map(|(child, p)| {
            p.map(|p| json!({ "parent": p, "child": child, "parent_name": name(p), "child_name": name(child) }))
        })
        .collect();
    let variables: Vec<Value> =
        schema.features().map(|v| json!({ "name": v.name, "states": v.states, "role": v.role })).collect();
    Ok(Json(json!({
        "model_id": loaded.id,
        "task": m.task().as_str(),
        "alpha": m.alpha(),
        "schema_hash": m.schema_hash(),
        "root": m.structure().root(),
        "root_name": name(m.structure().root()),
        "edges": edges,
        "variables": variables,
        "class_variable": schema.class_variable().name,
    })))
}

async fn schema_info(State(state): State<AppState>) -> Result<Json<Value>, ApiError> {
    let art = state.snapshot();
    let schema = art.schema().ok_or_else(|| ApiError::unavailable("schema"))?;
    let mut body: Value = serde_json::from_str(&schema.to_json()).expect("schema json");
    body["hash"] = json!(schema.hash());
    body["subpopulations"] = json!(art.sweeps().keys().filter(|k| !k.is_empty()).collect::<Vec<_>>());
    Ok(Json(body))
}

async fn reload(State(state): State<AppState>) -> Result<Json<Value>, ApiError> {
    state.reload().map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))?;
    let art = state.snapshot();
    Ok(Json(json!({ "model_id": art.model().map(|m| m.id.clone()) })))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/predict", post(predict))
        .route("/api/threshold", get(threshold))
        .route("/api/model", get(model_info))
        .route("/api/schema", get(schema_info))
        .route("/api/reload", post(reload))
        .with_state(state)
}

/// Bind and serve until the process is stopped.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
