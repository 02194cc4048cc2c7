//! `tanwb`: reproducible runs of the TAN workbench pipeline.

mod artifacts;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use tanwb_core::episode::{label_exams, parse_events};
use tanwb_core::eval::io::{
    read_scored_csv, read_sweep_csv, write_curve_csv, write_scored_csv, write_sweep_csv, CurveSummary, Provenance,
};
use tanwb_core::eval::{
    area_under_curve, filter_subpopulation, per_fold_areas, pr_curve, roc_curve, run_cross_validation, threshold_sweep,
    CurveKind, PoolingMode, ScoredCase,
};
use tanwb_core::regression::{fit_curve_relationship, relationship_points_from_table, Relationship};
use tanwb_core::synthetic::{make_cohort_model, make_recovery_model, sample_dataset, GroundTruthModel};
use tanwb_core::{build_fold_plan, summarize, train, write_dataset, Task, TrainOptions};
use tanwb_service::{predict_case, AppState, ArtifactPaths, Artifacts};

use artifacts::{load_data, load_schema_file, read_file, read_text, sha256_hex, write_file};

const DEFAULT_SEED: u64 = 1;
const FULL_GRID: usize = 5001;
const SUBPOP_GRID: usize = 2001;

#[derive(Parser)]
#[command(name = "tanwb", version, about = "Tree-augmented naive Bayes workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic dataset from a ground-truth TAN model.
    Synth(SynthArgs),
    /// Fit a TAN model on a whole dataset.
    Train(TrainArgs),
    /// Patient-grouped cross-validation; writes held-out scores.
    Crossval(CrossvalArgs),
    /// Biopsy-threshold table from held-out scores.
    Sweep(SweepArgs),
    /// ROC and precision-recall curves with their areas.
    Curves(CurvesArgs),
    /// Cubic regression between operating-point metrics of a sweep.
    Fitpoly(FitpolyArgs),
    /// Per-variable state counts by outcome.
    Summarize(SummarizeArgs),
    /// Fill exam outcomes from biopsy events.
    Label(LabelArgs),
    /// Posterior for one case, as the service would answer it.
    Predict(PredictArgs),
    /// Start the decision service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct OutArg {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct DataArgs {
    /// Schema JSON [default: <out>/schema.json].
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Case CSV [default: <out>/data.csv].
    #[arg(long)]
    data: Option<PathBuf>,
}

impl DataArgs {
    fn paths(&self, out: &Path) -> (PathBuf, PathBuf) {
        (
            self.schema.clone().unwrap_or_else(|| out.join("schema.json")),
            self.data.clone().unwrap_or_else(|| out.join("data.csv")),
        )
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    out: OutArg,
    /// Number of cases.
    #[arg(long, default_value_t = 5607)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Ground-truth model JSON; a cohort model is built from the seed otherwise.
    #[arg(long, conflicts_with = "features")]
    truth: Option<PathBuf>,
    /// Build a well-separated recovery model with this many features instead.
    #[arg(long)]
    features: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    out: OutArg,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "bm")]
    task: Task,
    /// Additive smoothing pseudo-count.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct CrossvalArgs {
    #[command(flatten)]
    out: OutArg,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "bm")]
    task: Task,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
}

#[derive(Args)]
struct ScoredArgs {
    /// Held-out scores [default: <out>/scored.csv].
    #[arg(long)]
    scored: Option<PathBuf>,
    /// Restrict to one age group (e.g. Older).
    #[arg(long)]
    subpop: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    out: OutArg,
    #[command(flatten)]
    input: ScoredArgs,
    /// Grid points over [0, 1] [default: 5001, or 2001 with --subpop].
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args)]
struct CurvesArgs {
    #[command(flatten)]
    out: OutArg,
    #[command(flatten)]
    input: ScoredArgs,
    /// pooled | per_fold
    #[arg(long, default_value = "pooled")]
    mode: PoolingMode,
}

#[derive(Args)]
struct FitpolyArgs {
    #[command(flatten)]
    out: OutArg,
    /// Threshold table [default: <out>/sweep.csv, or <out>/sweep_<subpop>.csv].
    #[arg(long)]
    sweep: Option<PathBuf>,
    #[arg(long)]
    subpop: Option<String>,
    /// precision_on_recall | fpr_on_precision | both
    #[arg(long, default_value = "both")]
    relationship: String,
}

#[derive(Args)]
struct SummarizeArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Also write summary.txt here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LabelArgs {
    #[command(flatten)]
    out: OutArg,
    /// Exam CSV (patient_id, exam_date, features).
    #[arg(long)]
    exams: PathBuf,
    /// Biopsy events CSV (patient_id, breast_side, date, severity).
    #[arg(long)]
    events: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Feature mapping: inline JSON, a JSON file, or `-` for stdin.
    #[arg(long)]
    case: String,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Threshold table, as PATH or SUBPOP=PATH; repeatable.
    #[arg(long = "sweep")]
    sweeps: Vec<String>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| run(cli.command));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(feature = "parallel")]
fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("TANWB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow!("TANWB_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")
}

#[cfg(not(feature = "parallel"))]
fn configure_threads() -> Result<()> {
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train_cmd(a),
        Command::Crossval(a) => crossval(a),
        Command::Sweep(a) => sweep(a),
        Command::Curves(a) => curves(a),
        Command::Fitpoly(a) => fitpoly(a),
        Command::Summarize(a) => summarize_cmd(a),
        Command::Label(a) => label(a),
        Command::Predict(a) => predict(a),
        Command::Serve(a) => serve(a),
    }
}

fn base_provenance(command: &str) -> Provenance {
    let mut p = Provenance::new();
    p.insert("command".into(), command.into());
    p.insert("tanwb_version".into(), env!("CARGO_PKG_VERSION").into());
    p
}

fn suffix(subpop: Option<&str>) -> String {
    subpop.map(|s| format!("_{}", s.replace(|c: char| !c.is_ascii_alphanumeric(), "-"))).unwrap_or_default()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        bail!("--alpha must be a finite non-negative number, got {alpha}");
    }
    Ok(())
}

/// Sampling seed kept apart from the seed that draws the model itself.
fn sample_seed(seed: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1)
}

fn synth(a: SynthArgs) -> Result<()> {
    if a.n == 0 {
        bail!("--n must be positive");
    }
    let mut prov = base_provenance("synth");
    let truth = match (&a.truth, a.features) {
        (Some(path), _) => {
            let text = read_text(path)?;
            prov.insert("truth_sha256".into(), sha256_hex(text.as_bytes()));
            GroundTruthModel::from_json(&text)
                .with_context(|| format!("invalid ground-truth model {}", path.display()))?
        }
        (None, Some(f)) => {
            if f < 2 {
                bail!("--features must be at least 2");
            }
            prov.insert("truth".into(), format!("recovery/{f}"));
            make_recovery_model(f, a.seed)
        }
        (None, None) => {
            prov.insert("truth".into(), "cohort".into());
            make_cohort_model(a.seed)
        }
    };
    let seed = sample_seed(a.seed);
    prov.insert("seed".into(), a.seed.to_string());
    prov.insert("sample_seed".into(), seed.to_string());
    prov.insert("n".into(), a.n.to_string());
    prov.insert("schema_hash".into(), truth.schema().hash());
    let dataset = sample_dataset(&truth, a.n, seed)?;

    let out = &a.out.out;
    let comments: Vec<String> = prov.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let mut data = Vec::new();
    write_dataset(&dataset, &mut data, &comments)?;
    write_file(&out.join("data.csv"), &data)?;

    let mut schema: Value = serde_json::from_str(&truth.schema().to_json())?;
    schema["provenance"] = json!(prov);
    write_file(&out.join("schema.json"), pretty(&schema)?.as_bytes())?;
    write_file(&out.join("truth.json"), truth.to_json().as_bytes())?;
    eprintln!("wrote {} cases to {}", a.n, out.display());
    Ok(())
}

fn pretty(v: &Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    check_alpha(a.alpha)?;
    let out = &a.out.out;
    let (schema_path, data_path) = a.data.paths(out);
    let schema = load_schema_file(&schema_path)?;
    let (dataset, data_sha) = load_data(&data_path, &schema_path, schema.clone())?;
    let model = train(&dataset, a.task, TrainOptions { alpha: a.alpha, ..Default::default() })?;
    let mut file = model.to_file();
    file.provenance = base_provenance("train");
    file.provenance.extend([
        ("task".to_string(), a.task.to_string()),
        ("alpha".to_string(), a.alpha.to_string()),
        ("seed".to_string(), a.seed.to_string()),
        ("data_sha256".to_string(), data_sha),
        ("n_cases".to_string(), dataset.len().to_string()),
    ]);
    let text = serde_json::to_string_pretty(&file)? + "\n";
    write_file(&out.join("model.json"), text.as_bytes())?;
    eprintln!("trained on {} cases; model in {}", dataset.len(), out.join("model.json").display());
    Ok(())
}

fn crossval(a: CrossvalArgs) -> Result<()> {
    check_alpha(a.alpha)?;
    if a.folds < 2 {
        bail!("--folds must be at least 2");
    }
    let out = &a.out.out;
    let (schema_path, data_path) = a.data.paths(out);
    let schema = load_schema_file(&schema_path)?;
    let (dataset, data_sha) = load_data(&data_path, &schema_path, schema.clone())?;
    let plan = build_fold_plan(&dataset, a.folds, a.seed)?;
    let scored = run_cross_validation(&dataset, &plan, a.task, TrainOptions { alpha: a.alpha, ..Default::default() })?;

    let mut prov = base_provenance("crossval");
    prov.extend([
        ("task".to_string(), a.task.to_string()),
        ("folds".to_string(), a.folds.to_string()),
        ("seed".to_string(), a.seed.to_string()),
        ("alpha".to_string(), a.alpha.to_string()),
        ("schema_hash".to_string(), schema.hash()),
        ("data_sha256".to_string(), data_sha),
        ("n_cases".to_string(), dataset.len().to_string()),
    ]);
    let mut buf = Vec::new();
    write_scored_csv(&scored, &prov, &mut buf)?;
    write_file(&out.join("scored.csv"), &buf)?;
    eprintln!("scored {} cases in {} folds", scored.len(), a.folds);
    Ok(())
}

/// Held-out scores (optionally one age group) with provenance for derived files.
fn load_scored(out: &Path, input: &ScoredArgs, command: &str) -> Result<(Vec<ScoredCase>, Provenance, Task)> {
    let path = input.scored.clone().unwrap_or_else(|| out.join("scored.csv"));
    let bytes = read_file(&path)?;
    let (scored, upstream) =
        read_scored_csv(bytes.as_slice()).with_context(|| format!("invalid scored-case file {}", path.display()))?;
    let task: Task = match upstream.get("task") {
        Some(t) => t.parse().map_err(|_| anyhow!("{}: unknown task {t:?} in provenance", path.display()))?,
        None => Task::Bm,
    };
    let mut prov = upstream;
    prov.extend(base_provenance(command));
    prov.insert("scored_sha256".into(), sha256_hex(&bytes));
    prov.insert("subpop".into(), input.subpop.clone().unwrap_or_else(|| "all".into()));
    let scored = match &input.subpop {
        Some(s) => {
            let sub = filter_subpopulation(&scored, s);
            if sub.is_empty() {
                bail!("no scored cases in subpopulation {s:?}");
            }
            sub
        }
        None => scored,
    };
    if scored.is_empty() {
        bail!("{} has no scored cases", path.display());
    }
    Ok((scored, prov, task))
}

fn sweep(a: SweepArgs) -> Result<()> {
    let out = &a.out.out;
    let (scored, mut prov, task) = load_scored(out, &a.input, "sweep")?;
    let grid = a.grid.unwrap_or(if a.input.subpop.is_some() { SUBPOP_GRID } else { FULL_GRID });
    if grid < 2 {
        bail!("--grid must be at least 2");
    }
    prov.insert("grid".into(), grid.to_string());
    let report = threshold_sweep(&scored, grid);
    let mut buf = Vec::new();
    write_sweep_csv(&report, task, &prov, &mut buf)?;
    let name = format!("sweep{}.csv", suffix(a.input.subpop.as_deref()));
    write_file(&out.join(&name), &buf)?;
    eprintln!("wrote {} thresholds over {} cases to {name}", grid, scored.len());
    Ok(())
}

fn curves(a: CurvesArgs) -> Result<()> {
    let out = &a.out.out;
    let (scored, mut prov, _) = load_scored(out, &a.input, "curves")?;
    prov.insert("mode".into(), a.mode.as_str().into());
    let n_pos = scored.iter().filter(|s| s.positive).count() as u64;
    let n_neg = scored.len() as u64 - n_pos;
    let sfx = suffix(a.input.subpop.as_deref());
    let mut summaries = BTreeMap::new();
    for kind in [CurveKind::Roc, CurveKind::Pr] {
        let points = match kind {
            CurveKind::Roc => roc_curve(&scored)?,
            CurveKind::Pr => pr_curve(&scored)?,
        };
        let (area, fold_areas) = match a.mode {
            PoolingMode::Pooled => (area_under_curve(&points, kind)?, None),
            PoolingMode::PerFold => {
                let f = per_fold_areas(&scored, kind)?;
                (f.mean, Some(f))
            }
        };
        let mut buf = Vec::new();
        write_curve_csv(&points, &prov, &mut buf)?;
        write_file(&out.join(format!("{}{sfx}.csv", kind.as_str())), &buf)?;
        eprintln!("{} area {area:.4} ({})", kind.as_str(), a.mode.as_str());
        summaries.insert(
            kind.as_str(),
            CurveSummary {
                kind,
                area,
                method: kind.area_method().into(),
                n_pos,
                n_neg,
                mode: a.mode,
                fold_areas,
                config: prov.clone(),
            },
        );
    }
    write_file(&out.join(format!("curves{sfx}.json")), pretty(&serde_json::to_value(&summaries)?)?.as_bytes())?;
    Ok(())
}

fn fitpoly(a: FitpolyArgs) -> Result<()> {
    let out = &a.out.out;
    let relationships = match a.relationship.as_str() {
        "both" => vec![Relationship::PrecisionOnRecall, Relationship::FprOnPrecision],
        r => vec![r.parse::<Relationship>()?],
    };
    let path = a.sweep.clone().unwrap_or_else(|| out.join(format!("sweep{}.csv", suffix(a.subpop.as_deref()))));
    let bytes = read_file(&path)?;
    let table =
        read_sweep_csv(bytes.as_slice()).with_context(|| format!("invalid threshold table {}", path.display()))?;
    let subpop = a.subpop.clone().or_else(|| table.provenance.get("subpop").filter(|s| *s != "all").cloned());
    let sfx = suffix(subpop.as_deref());
    let mut prov = table.provenance.clone();
    prov.extend(base_provenance("fitpoly"));
    prov.insert("sweep_sha256".into(), sha256_hex(&bytes));
    for rel in relationships {
        let points = relationship_points_from_table(&table, rel);
        let report = fit_curve_relationship(&points, rel).with_context(|| format!("fitting {}", rel.as_str()))?;
        let mut prov = prov.clone();
        prov.insert("relationship".into(), rel.as_str().into());
        let mut text: String = prov.iter().map(|(k, v)| format!("# {k}={v}\n")).collect();
        text.push_str(&report.render_text());
        let stem = format!("fitpoly_{}{sfx}", rel.as_str());
        write_file(&out.join(format!("{stem}.txt")), text.as_bytes())?;
        let doc = json!({ "config": prov, "report": report });
        write_file(&out.join(format!("{stem}.json")), pretty(&doc)?.as_bytes())?;
        eprintln!("{}: R-Square {:.6} over {} thresholds", rel.as_str(), report.r_square, report.n);
    }
    Ok(())
}

fn summarize_cmd(a: SummarizeArgs) -> Result<()> {
    let default_dir = a.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let (schema_path, data_path) = a.data.paths(&default_dir);
    let schema = load_schema_file(&schema_path)?;
    let (dataset, data_sha) = load_data(&data_path, &schema_path, schema)?;
    let text = summarize(&dataset).render();
    print!("{text}");
    if let Some(out) = &a.out {
        let mut prov = base_provenance("summarize");
        prov.insert("data_sha256".into(), data_sha);
        let mut body: String = prov.iter().map(|(k, v)| format!("# {k}={v}\n")).collect();
        body.push_str(&text);
        write_file(&out.join("summary.txt"), body.as_bytes())?;
    }
    Ok(())
}

fn label(a: LabelArgs) -> Result<()> {
    let events_bytes = read_file(&a.events)?;
    let events = parse_events(events_bytes.as_slice())
        .with_context(|| format!("invalid biopsy events {}", a.events.display()))?;
    let exams = read_file(&a.exams)?;
    let mut prov = base_provenance("label");
    prov.insert("exams_sha256".into(), sha256_hex(&exams));
    prov.insert("events_sha256".into(), sha256_hex(&events_bytes));
    let mut buf: Vec<u8> = prov.iter().flat_map(|(k, v)| format!("# {k}={v}\n").into_bytes()).collect();
    let n =
        label_exams(exams.as_slice(), &events, &mut buf).with_context(|| format!("labeling {}", a.exams.display()))?;
    write_file(&a.out.out.join("labeled.csv"), &buf)?;
    eprintln!("labeled {n} exams");
    Ok(())
}

fn artifacts_for(schema: &Path, model: Option<&Path>, sweeps: Vec<(String, PathBuf)>) -> ArtifactPaths {
    ArtifactPaths { schema: Some(schema.to_path_buf()), model: model.map(Path::to_path_buf), sweeps }
}

fn predict(a: PredictArgs) -> Result<()> {
    let text = if a.case == "-" {
        std::io::read_to_string(std::io::stdin()).context("reading the case from stdin")?
    } else if a.case.trim_start().starts_with('{') {
        a.case.clone()
    } else {
        read_text(Path::new(&a.case))?
    };
    let request: BTreeMap<String, Value> =
        serde_json::from_str(&text).context("the case must be a JSON object of feature -> state")?;
    let art = Artifacts::load(&artifacts_for(&a.schema, Some(&a.model), Vec::new())).map_err(|e| anyhow!(e))?;
    let response = predict_case(&art, &request)?;
    println!("{}", serde_json::to_string(&response)?);
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let sweeps = a
        .sweeps
        .iter()
        .map(|s| match s.split_once('=') {
            Some((k, p)) => (if k == "all" { String::new() } else { k.to_string() }, PathBuf::from(p)),
            None => (String::new(), PathBuf::from(s)),
        })
        .collect();
    let state = AppState::from_paths(artifacts_for(&a.schema, a.model.as_deref(), sweeps)).map_err(|e| anyhow!(e))?;
    let runtime = tokio::runtime::Runtime::new().context("starting the async runtime")?;
    eprintln!("serving on http://{}", a.bind);
    runtime.block_on(tanwb_service::serve(state, a.bind)).with_context(|| format!("serving on {}", a.bind))
}
