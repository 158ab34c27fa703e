use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tracing::info;

use gnn_designer::evaluator::{EvalRequest, EvalResult, Evaluator, ExternalEvaluator, Hyperparams, TrainerConfig};
use gnn_designer::graph_data::load_dataset;
use gnn_designer::knowledge_base::{build_confidence, exclude_dataset, BenchmarkTable, ConfidenceTable, ErMode};
use gnn_designer::llm::{LlmBridge, LlmKind, ANON_TOKEN};
use gnn_designer::pipeline::{Designer, EvaluatorKind, PipelineConfig, UnseenTask};
use gnn_designer::properties::{compute_properties, Property, PropertyVector};
use gnn_designer::search_space::Architecture;
use gnn_designer::similarity::rank_sources;
use gnn_designer::{Error, Result};

#[derive(Parser)]
#[command(name = "gnn-designer", version, about = "Design GNN architectures for a new graph from benchmark knowledge")]
struct Cli {
    /// Random seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON pipeline config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for every output file.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Log verbosity (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute the 16 graph properties of a dataset directory.
    Properties(PropertiesArgs),
    /// Property confidences over a benchmark bank.
    Confidence(ConfidenceArgs),
    /// Rank benchmark sources by similarity to a graph.
    Similar(SimilarArgs),
    /// Run the design pipeline.
    Design(DesignArgs),
    /// Re-evaluate one architecture over several seeds with the external trainer.
    Reeval(ReevalArgs),
    /// Validate a benchmark CSV and write it in canonical form.
    ImportBench(ImportArgs),
}

#[derive(Args)]
struct SamplingArgs {
    /// Node cap for sampled properties.
    #[arg(long)]
    max_nodes: Option<usize>,
    /// Node pairs sampled for feature diversity.
    #[arg(long)]
    pair_samples: Option<usize>,
}

#[derive(Args)]
struct PropertiesArgs {
    dataset_dir: PathBuf,
    #[command(flatten)]
    sampling: SamplingArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark CSV (dataset,macro,ops,valid_perf,test_perf).
    #[arg(long)]
    bench: PathBuf,
    /// Directory of per-dataset property JSON files.
    #[arg(long)]
    props: Option<PathBuf>,
    /// Drop a benchmark dataset entirely (repeatable).
    #[arg(long)]
    exclude: Vec<String>,
}

#[derive(Args)]
struct ConfidenceArgs {
    #[command(flatten)]
    bench: BenchArgs,
    #[arg(long)]
    n_f: Option<usize>,
    #[arg(long)]
    n_m: Option<usize>,
    /// Transfer proxy: best or mean.
    #[arg(long)]
    er_mode: Option<ErMode>,
}

#[derive(Args)]
struct LlmArgs {
    /// Controller backend: stub or http.
    #[arg(long)]
    llm: Option<String>,
    /// Chat-completions endpoint for the http backend.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Directory overriding the bundled prompt templates.
    #[arg(long)]
    prompts: Option<PathBuf>,
}

#[derive(Args)]
struct UnseenArgs {
    /// Dataset directory of the new graph.
    #[arg(long, conflicts_with = "leave_one_out")]
    dataset: Option<PathBuf>,
    /// Treat a benchmark dataset as the new graph.
    #[arg(long)]
    leave_one_out: Option<String>,
}

#[derive(Args)]
struct SimilarArgs {
    #[command(flatten)]
    bench: BenchArgs,
    #[command(flatten)]
    unseen: UnseenArgs,
    /// Precomputed confidence.json; rebuilt from the bank when absent.
    #[arg(long)]
    confidence: Option<PathBuf>,
    #[command(flatten)]
    llm: LlmArgs,
    #[arg(long)]
    n_f: Option<usize>,
    #[command(flatten)]
    sampling: SamplingArgs,
}

#[derive(Args)]
struct TrainerArgs {
    /// Trainer command line, whitespace separated (e.g. "python3 -m gnn_trainer").
    #[arg(long, conflicts_with = "trainer_url")]
    trainer_cmd: Option<String>,
    /// HTTP trainer endpoint.
    #[arg(long)]
    trainer_url: Option<String>,
    /// Seconds before a trainer request is abandoned.
    #[arg(long)]
    trainer_timeout: Option<f64>,
}

#[derive(Args)]
struct DesignArgs {
    #[command(flatten)]
    bench: BenchArgs,
    #[command(flatten)]
    unseen: UnseenArgs,
    /// Hold out NAME and evaluate against its own records.
    #[arg(long, conflicts_with_all = ["dataset", "leave_one_out"])]
    simulate: Option<String>,
    /// Stop after the initial suggestions.
    #[arg(long)]
    init_only: bool,
    #[arg(long)]
    n_f: Option<usize>,
    #[arg(long)]
    n_s: Option<usize>,
    #[arg(long)]
    n_m: Option<usize>,
    #[arg(long)]
    n_c: Option<usize>,
    #[arg(long)]
    max_trials: Option<usize>,
    #[arg(long)]
    er_mode: Option<ErMode>,
    /// Evaluator: lookup or external.
    #[arg(long)]
    evaluator: Option<String>,
    #[command(flatten)]
    trainer: TrainerArgs,
    /// Allow proposals outside the benchmark's recorded architectures.
    #[arg(long)]
    unrestricted: bool,
    /// Self-evaluation bank file to update.
    #[arg(long)]
    bank: Option<PathBuf>,
    #[command(flatten)]
    llm: LlmArgs,
    #[command(flatten)]
    sampling: SamplingArgs,
}

#[derive(Args)]
struct ReevalArgs {
    /// Architecture key, e.g. "macro:[0,0,0,0]|ops:[gcn,gcn,gcn,gcn]".
    #[arg(long, conflicts_with = "summary")]
    arch: Option<Architecture>,
    /// Take best_arch from a design summary.json.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Dataset directory passed to the trainer.
    #[arg(long)]
    dataset: PathBuf,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8,9")]
    seeds: Vec<u64>,
    #[command(flatten)]
    trainer: TrainerArgs,
}

#[derive(Args)]
struct ImportArgs {
    csv: PathBuf,
    /// Multiplier applied to every perf value (0.01 for percentages).
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Property directory to validate alongside.
    #[arg(long)]
    props: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_backend() { 3 } else { 2 })
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| level.into());
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).with_target(false).init();
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            serde_json::from_str::<PipelineConfig>(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display())))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
        cfg.sampling.seed = s;
        cfg.llm.seed = s;
    }
    let out = cli.out_dir.as_path();
    match cli.cmd {
        Cmd::Properties(a) => cmd_properties(cfg, out, a),
        Cmd::Confidence(a) => cmd_confidence(cfg, out, a),
        Cmd::Similar(a) => cmd_similar(cfg, out, a),
        Cmd::Design(a) => cmd_design(cfg, out, a),
        Cmd::Reeval(a) => cmd_reeval(cfg, out, a),
        Cmd::ImportBench(a) => cmd_import(out, a),
    }
}

fn io_err(p: &Path, e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::NotFound {
        Error::MissingFile(p.to_path_buf())
    } else {
        Error::Io { path: p.to_path_buf(), source: e }
    }
}

fn write_out(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let p = dir.join(name);
    fs::write(&p, text).map_err(|e| io_err(&p, e))?;
    Ok(p)
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn apply_sampling(cfg: &mut PipelineConfig, s: &SamplingArgs) {
    if let Some(n) = s.max_nodes {
        cfg.sampling.max_nodes = n;
    }
    if let Some(n) = s.pair_samples {
        cfg.sampling.pair_samples = n;
    }
}

fn apply_llm(cfg: &mut PipelineConfig, a: &LlmArgs) -> Result<()> {
    if let Some(k) = &a.llm {
        cfg.llm.kind = match k.as_str() {
            "stub" => LlmKind::Stub,
            "http" => LlmKind::Http,
            other => return Err(Error::InvalidInput(format!("unknown llm backend {other:?} (stub, http)"))),
        };
    }
    if let Some(e) = &a.endpoint {
        cfg.llm.endpoint = Some(e.clone());
    }
    if let Some(m) = &a.model {
        cfg.llm.model_id = m.clone();
    }
    if let Some(p) = &a.prompts {
        cfg.llm.prompts_dir = Some(p.clone());
    }
    Ok(())
}

fn apply_trainer(cfg: &mut PipelineConfig, a: &TrainerArgs) {
    if let Some(c) = &a.trainer_cmd {
        cfg.trainer = Some(TrainerConfig::Process { command: c.split_whitespace().map(String::from).collect() });
    }
    if let Some(u) = &a.trainer_url {
        cfg.trainer = Some(TrainerConfig::Http { url: u.clone() });
    }
    if let Some(t) = a.trainer_timeout {
        cfg.trainer_timeout_s = t;
    }
}

fn load_bench(a: &BenchArgs) -> Result<BenchmarkTable> {
    if !a.bench.exists() {
        return Err(Error::MissingFile(a.bench.clone()));
    }
    let mut t = BenchmarkTable::load(&a.bench, a.props.as_deref())?;
    for name in &a.exclude {
        t = exclude_dataset(&t, name)?;
    }
    Ok(t)
}

fn property_table(pv: &PropertyVector) -> String {
    let mut s = String::new();
    for p in Property::ALL {
        let _ = writeln!(s, "{:<24} {}", p.name(), pv.get(p));
    }
    s
}

fn cmd_properties(mut cfg: PipelineConfig, out: &Path, a: PropertiesArgs) -> Result<()> {
    apply_sampling(&mut cfg, &a.sampling);
    cfg.sampling.check()?;
    let g = load_dataset(&a.dataset_dir)?;
    let pv = compute_properties(&g, &cfg.sampling)?;
    let p = write_out(out, "properties.json", &(pv.to_json() + "\n"))?;
    print!("{}", property_table(&pv));
    info!(path = %p.display(), "wrote properties");
    Ok(())
}

fn cmd_confidence(mut cfg: PipelineConfig, out: &Path, a: ConfidenceArgs) -> Result<()> {
    cfg.n_f = a.n_f.unwrap_or(cfg.n_f);
    cfg.n_m = a.n_m.unwrap_or(cfg.n_m);
    cfg.er_mode = a.er_mode.unwrap_or(cfg.er_mode);
    let t = load_bench(&a.bench)?;
    let conf = build_confidence(&t, cfg.n_f, cfg.n_m, cfg.er_mode)?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    conf.save(out.join("confidence.json"))?;
    write_out(out, "confidence_bars.csv", &gnn_designer::pipeline::confidence_bars_csv(&conf))?;
    for p in &conf.selected {
        println!("{:<24} {:.4}", p.name(), conf.averaged(*p));
    }
    Ok(())
}

/// Resolves the unseen graph and the retrieval table. A dataset whose name is in the
/// benchmark is held out automatically.
fn resolve_unseen(cfg: &PipelineConfig, t: &BenchmarkTable, u: &UnseenArgs) -> Result<(Option<UnseenTask>, Option<String>)> {
    match (&u.dataset, &u.leave_one_out) {
        (Some(dir), _) => {
            let g = load_dataset(dir)?;
            let properties = compute_properties(&g, &cfg.sampling)?;
            let hold = t.contains(&g.name).then(|| g.name.clone());
            Ok((Some(UnseenTask { name: g.name.clone(), properties, dataset_path: Some(dir.clone()) }), hold))
        }
        (None, Some(name)) => {
            if !t.contains(name) {
                return Err(Error::UnknownDataset(name.clone()));
            }
            Ok((None, Some(name.clone())))
        }
        (None, None) => Err(Error::InvalidInput("give --dataset DIR or --leave-one-out NAME".into())),
    }
}

fn cmd_similar(mut cfg: PipelineConfig, out: &Path, a: SimilarArgs) -> Result<()> {
    apply_sampling(&mut cfg, &a.sampling);
    apply_llm(&mut cfg, &a.llm)?;
    cfg.n_f = a.n_f.unwrap_or(cfg.n_f);
    let full = load_bench(&a.bench)?;
    let (task, hold) = resolve_unseen(&cfg, &full, &a.unseen)?;
    let (view, unseen_pv, name) = match (&task, &hold) {
        (_, Some(h)) => {
            let pv = match &task {
                Some(t) => t.properties.clone(),
                None => full
                    .properties(h)
                    .cloned()
                    .ok_or_else(|| Error::InvalidInput(format!("no property vector for {h}")))?,
            };
            (exclude_dataset(&full, h)?, pv, h.clone())
        }
        (Some(t), None) => (full.clone(), t.properties.clone(), t.name.clone()),
        (None, None) => unreachable!(),
    };
    let conf = match &a.confidence {
        Some(p) => {
            let c = ConfidenceTable::load(p)?;
            if a.n_f.is_some() { c.reselect(cfg.n_f)? } else { c }
        }
        None => build_confidence(&view, cfg.n_f, cfg.n_m, cfg.er_mode)?,
    };
    let mut anon = unseen_pv;
    anon.dataset = ANON_TOKEN.into();
    let excluded: Vec<String> = view.excluded().iter().cloned().chain([name]).collect();
    let mut bridge = LlmBridge::new(cfg.llm.clone(), &excluded)?;
    if !bridge.is_stub() {
        fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
        bridge = bridge.with_log(&out.join("llm_log.jsonl"))?;
    }
    let sources: Vec<&PropertyVector> = view.bank().iter().filter_map(|d| view.properties(d)).collect();
    let w = bridge.elicit_weights(&anon, &sources, &conf);
    let ranking = rank_sources(&anon, &view, &conf, &w.value)?;
    write_out(out, "similarity_report.json", &to_json(&ranking))?;
    for s in &ranking.scores {
        println!("{:<24} {:.6}", s.source, s.score);
    }
    Ok(())
}

fn cmd_design(mut cfg: PipelineConfig, out: &Path, a: DesignArgs) -> Result<()> {
    apply_sampling(&mut cfg, &a.sampling);
    apply_llm(&mut cfg, &a.llm)?;
    apply_trainer(&mut cfg, &a.trainer);
    cfg.n_f = a.n_f.unwrap_or(cfg.n_f);
    cfg.n_s = a.n_s.unwrap_or(cfg.n_s);
    cfg.n_m = a.n_m.unwrap_or(cfg.n_m);
    cfg.n_c = a.n_c.unwrap_or(cfg.n_c);
    cfg.max_trials = a.max_trials.unwrap_or(cfg.max_trials);
    cfg.er_mode = a.er_mode.unwrap_or(cfg.er_mode);
    if let Some(e) = &a.evaluator {
        cfg.evaluator = match e.as_str() {
            "lookup" => EvaluatorKind::Lookup,
            "external" => EvaluatorKind::External,
            other => return Err(Error::InvalidInput(format!("unknown evaluator {other:?} (lookup, external)"))),
        };
    } else if cfg.trainer.is_some() && a.simulate.is_none() {
        cfg.evaluator = EvaluatorKind::External;
    }
    if a.unrestricted {
        cfg.restrict_to_bench_space = false;
    }
    if let Some(b) = &a.bank {
        cfg.bank_path = Some(b.clone());
    }
    let full = load_bench(&a.bench)?;
    let task = if let Some(name) = &a.simulate {
        if !full.contains(name) {
            return Err(Error::UnknownDataset(name.clone()));
        }
        cfg.leave_one_out = Some(name.clone());
        cfg.simulate = true;
        None
    } else {
        let (task, hold) = resolve_unseen(&cfg, &full, &a.unseen)?;
        if hold.is_some() {
            cfg.leave_one_out = hold;
        }
        task
    };
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let d = Designer::new(cfg, Arc::new(full), task, Some(out.join("llm_log.jsonl")))?;
    let o = d.run(Some(out), a.init_only)?;
    let s = &o.summary;
    match (&s.best_arch, s.best_valid_perf) {
        (Some(b), Some(p)) => println!("best {b} valid_perf {p:.4} after {} evaluations", s.eval_count),
        _ => println!("no architecture evaluated"),
    }
    Ok(())
}

#[derive(Serialize)]
struct SeedResult {
    seed: u64,
    #[serde(flatten)]
    result: EvalResult,
}

#[derive(Serialize)]
struct Reeval {
    arch: Architecture,
    dataset: String,
    runs: Vec<SeedResult>,
    valid_mean: f64,
    valid_std: f64,
    test_mean: Option<f64>,
    test_std: Option<f64>,
}

/// Mean and sample standard deviation.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, var.sqrt())
}

fn cmd_reeval(mut cfg: PipelineConfig, out: &Path, a: ReevalArgs) -> Result<()> {
    apply_trainer(&mut cfg, &a.trainer);
    let trainer = cfg
        .trainer
        .clone()
        .ok_or_else(|| Error::InvalidInput("reeval needs --trainer-cmd, --trainer-url or a trainer in the config".into()))?;
    if a.seeds.is_empty() {
        return Err(Error::InvalidInput("no seeds given".into()));
    }
    let arch = match (&a.arch, &a.summary) {
        (Some(x), _) => *x,
        (None, Some(p)) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display())))?;
            serde_json::from_value::<Architecture>(v["best_arch"].clone())
                .map_err(|e| Error::InvalidInput(format!("{}: best_arch: {e}", p.display())))?
        }
        (None, None) => return Err(Error::InvalidInput("give --arch or --summary".into())),
    };
    let meta_name = load_dataset(&a.dataset)?.name;
    let ev = ExternalEvaluator::new(trainer, Duration::from_secs_f64(cfg.trainer_timeout_s));
    let mut runs = Vec::with_capacity(a.seeds.len());
    for &seed in &a.seeds {
        let mut req = EvalRequest::new(&meta_name, arch, seed);
        req.dataset_path = Some(a.dataset.clone());
        req.hyperparams = Hyperparams::resolve(&meta_name, cfg.hyperparams.as_ref());
        runs.push(SeedResult { seed, result: ev.evaluate(&req)? });
    }
    let valid: Vec<f64> = runs.iter().map(|r| r.result.valid_perf).collect();
    let test: Option<Vec<f64>> = runs.iter().map(|r| r.result.test_perf).collect();
    let (valid_mean, valid_std) = mean_std(&valid);
    let ts = test.map(|t| mean_std(&t));
    let report = Reeval {
        arch,
        dataset: meta_name,
        runs,
        valid_mean,
        valid_std,
        test_mean: ts.map(|t| t.0),
        test_std: ts.map(|t| t.1),
    };
    write_out(out, "reeval.json", &to_json(&report))?;
    println!("{arch} valid {valid_mean:.4} +- {valid_std:.4} over {} seeds", a.seeds.len());
    Ok(())
}

fn cmd_import(out: &Path, a: ImportArgs) -> Result<()> {
    if !a.csv.exists() {
        return Err(Error::MissingFile(a.csv.clone()));
    }
    let mut t = BenchmarkTable::read_bench_csv(&a.csv, a.scale)?;
    if let Some(d) = &a.props {
        t.load_property_dir(d)?;
    }
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    t.write_bench_csv(out.join("bench.csv"))?;
    for d in t.datasets() {
        let n = t.records(d).map_or(0, |r| r.len());
        let props = if t.properties(d).is_some() { "properties" } else { "no properties" };
        println!("{d:<24} {n:>7} records  {props}");
    }
    println!("{} records over {} datasets", t.num_records(), t.datasets().len());
    Ok(())
}
