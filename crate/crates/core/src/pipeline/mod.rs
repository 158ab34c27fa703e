//! End-to-end design for one unseen graph: property filter, source retrieval, initial
//! proposals and knowledge-driven refinement.

mod refine;
mod report;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tracing::{info, warn};

pub use refine::{promote, repair};
pub use report::{confidence_bars_csv, rank_percentile, write_report, Summary};

use crate::error::{Error, Result};
use crate::evaluator::{EvalRequest, Evaluator, ExternalEvaluator, Hyperparams, LookupEvaluator, TrainerConfig};
use crate::knowledge_base::{
    build_confidence, exclude_dataset, upsert_self_eval, BenchmarkTable, ConfidenceTable, ErMode, Observation,
};
use crate::llm::{LlmBridge, LlmConfig, ANON_TOKEN};
use crate::properties::{PropertyVector, SamplingConfig};
use crate::search_space::Architecture;
use crate::similarity::{build_pool, rank_sources, KnowledgePool, SourceRanking, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluatorKind {
    #[default]
    Lookup,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub n_f: usize,
    pub n_s: usize,
    pub n_m: usize,
    pub n_c: usize,
    pub max_trials: usize,
    pub er_mode: ErMode,
    pub seed: u64,
    pub llm: LlmConfig,
    pub evaluator: EvaluatorKind,
    pub trainer: Option<TrainerConfig>,
    pub trainer_timeout_s: f64,
    /// Benchmark dataset to hold out and treat as the unseen graph.
    pub leave_one_out: Option<String>,
    /// Allow lookups of the held-out dataset's own records.
    pub simulate: bool,
    /// Keep proposals inside the set of architectures recorded in the benchmark.
    pub restrict_to_bench_space: bool,
    pub sampling: SamplingConfig,
    pub hyperparams: Option<Hyperparams>,
    /// Self-evaluation bank file; not written when unset or when holding out.
    pub bank_path: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            n_f: 8,
            n_s: 3,
            n_m: 30,
            n_c: 30,
            max_trials: 30,
            er_mode: ErMode::Best,
            seed: 0,
            llm: LlmConfig::default(),
            evaluator: EvaluatorKind::Lookup,
            trainer: None,
            trainer_timeout_s: 3600.0,
            leave_one_out: None,
            simulate: false,
            restrict_to_bench_space: true,
            sampling: SamplingConfig::default(),
            hyperparams: None,
            bank_path: None,
        }
    }
}

impl PipelineConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.n_f == 0 || self.n_f > crate::properties::NUM_PROPERTIES {
            return bad(format!("n_f = {} must be in 1..=16", self.n_f));
        }
        if self.n_s == 0 || self.n_m == 0 || self.n_c == 0 {
            return bad("n_s, n_m and n_c must be positive".into());
        }
        if self.max_trials < self.n_s {
            return bad(format!("max_trials = {} is below n_s = {}", self.max_trials, self.n_s));
        }
        if self.evaluator == EvaluatorKind::External && self.trainer.is_none() {
            return bad("external evaluator needs a trainer config".into());
        }
        if let Some(h) = &self.hyperparams {
            h.check()?;
        }
        self.sampling.check()?;
        self.llm.check()
    }

    /// The config as written to reports, with the held-out name anonymized.
    pub fn anonymized(&self) -> Self {
        let mut c = self.clone();
        if c.leave_one_out.is_some() {
            c.leave_one_out = Some(ANON_TOKEN.into());
        }
        c
    }
}

/// The graph being designed for. `name` is only used to address the evaluator.
#[derive(Debug, Clone, PartialEq)]
pub struct UnseenTask {
    pub name: String,
    pub properties: PropertyVector,
    pub dataset_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Initial,
    Refined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub trial: usize,
    pub arch: Architecture,
    pub valid_perf: f64,
    pub test_perf: Option<f64>,
    pub origin: Origin,
    /// Pool source for initial proposals; the top re-ranked source for refined ones.
    pub source: Option<String>,
    pub best_so_far: f64,
    pub llm_fallback: bool,
    pub repaired: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub entries: Vec<TrajectoryEntry>,
}

impl Trajectory {
    pub fn eval_count(&self) -> usize {
        self.entries.len()
    }

    pub fn best(&self) -> Option<&TrajectoryEntry> {
        self.entries.iter().fold(None, |b: Option<&TrajectoryEntry>, e| match b {
            Some(b) if b.valid_perf >= e.valid_perf => Some(b),
            _ => Some(e),
        })
    }

    pub fn contains(&self, a: &Architecture) -> bool {
        self.entries.iter().any(|e| e.arch == *a)
    }

    pub fn pairs(&self) -> Vec<(Architecture, f64)> {
        self.entries.iter().map(|e| (e.arch, e.valid_perf)).collect()
    }

    pub(crate) fn push(&mut self, arch: Architecture, valid_perf: f64, test_perf: Option<f64>, origin: Origin) -> &mut TrajectoryEntry {
        let best = self.best().map_or(valid_perf, |b| b.valid_perf.max(valid_perf));
        self.entries.push(TrajectoryEntry {
            trial: self.entries.len() + 1,
            arch,
            valid_perf,
            test_perf,
            origin,
            source: None,
            best_so_far: best,
            llm_fallback: false,
            repaired: false,
        });
        self.entries.last_mut().unwrap()
    }

    pub fn to_jsonl(&self) -> String {
        self.entries.iter().map(|e| serde_json::to_string(e).unwrap() + "\n").collect()
    }
}

/// One pool entry's initial suggestion and its evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub source: String,
    pub arch: Architecture,
    pub valid_perf: Option<f64>,
    pub llm_fallback: bool,
    pub repaired: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialPhase {
    pub weights: WeightVector,
    pub ranking: SourceRanking,
    pub pool: KnowledgePool,
    pub proposals: Vec<Proposal>,
    pub trajectory: Trajectory,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignOutcome {
    pub confidence: ConfidenceTable,
    pub initial: InitialPhase,
    pub trajectory: Trajectory,
    pub summary: Summary,
}

/// Pipeline state for one unseen graph.
pub struct Designer {
    cfg: PipelineConfig,
    full: Arc<BenchmarkTable>,
    view: BenchmarkTable,
    unseen: UnseenTask,
    anon: PropertyVector,
    confidence: ConfidenceTable,
    bridge: LlmBridge,
    evaluator: Box<dyn Evaluator>,
    universe: Option<BTreeSet<Architecture>>,
}

impl Designer {
    /// Builds the retrieval view, confidence table, controller and evaluator.
    ///
    /// With `leave_one_out` set, `unseen` may be `None` and is taken from the table.
    pub fn new(cfg: PipelineConfig, table: Arc<BenchmarkTable>, unseen: Option<UnseenTask>, llm_log: Option<PathBuf>) -> Result<Self> {
        cfg.check()?;
        let (view, unseen) = match (&cfg.leave_one_out, unseen) {
            (Some(name), u) => {
                let view = exclude_dataset(&table, name)?;
                let u = match u {
                    Some(u) => u,
                    None => UnseenTask {
                        name: name.clone(),
                        properties: table
                            .properties(name)
                            .cloned()
                            .ok_or_else(|| Error::InvalidInput(format!("no property vector for {name}")))?,
                        dataset_path: None,
                    },
                };
                (view, u)
            }
            (None, Some(u)) => {
                if table.contains(&u.name) {
                    return Err(Error::InvalidInput(format!(
                        "{} is a benchmark dataset; hold it out with leave_one_out",
                        u.name
                    )));
                }
                ((*table).clone(), u)
            }
            (None, None) => return Err(Error::InvalidInput("no unseen dataset given".into())),
        };
        let mut anon = unseen.properties.clone();
        anon.dataset = ANON_TOKEN.into();
        let confidence = build_confidence(&view, cfg.n_f, cfg.n_m, cfg.er_mode)?;
        let excluded: Vec<String> = view.excluded().iter().cloned().chain([unseen.name.clone()]).collect();
        let mut bridge = LlmBridge::new(cfg.llm.clone(), &excluded)?;
        if let Some(p) = llm_log.filter(|_| !bridge.is_stub()) {
            bridge = bridge.with_log(&p)?;
        }
        let evaluator: Box<dyn Evaluator> = match cfg.evaluator {
            EvaluatorKind::Lookup => {
                let mut ev = LookupEvaluator::new(table.clone());
                if cfg.leave_one_out.is_some() {
                    ev = ev.guard(&unseen.name, cfg.simulate);
                }
                Box::new(ev)
            }
            EvaluatorKind::External => Box::new(ExternalEvaluator::new(
                cfg.trainer.clone().unwrap(),
                Duration::from_secs_f64(cfg.trainer_timeout_s),
            )),
        };
        let universe = cfg.restrict_to_bench_space.then(|| view.architectures());
        Ok(Self { cfg, full: table, view, unseen, anon, confidence, bridge, evaluator, universe })
    }

    /// Replaces the controller, e.g. with a scripted chat client.
    pub fn with_bridge(mut self, bridge: LlmBridge) -> Self {
        self.bridge = bridge;
        self
    }

    /// Replaces the evaluator.
    pub fn with_evaluator(mut self, evaluator: Box<dyn Evaluator>) -> Self {
        self.evaluator = evaluator;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn confidence(&self) -> &ConfidenceTable {
        &self.confidence
    }

    pub fn view(&self) -> &BenchmarkTable {
        &self.view
    }

    pub fn evaluator(&self) -> &dyn Evaluator {
        self.evaluator.as_ref()
    }

    pub fn anonymized_properties(&self) -> &PropertyVector {
        &self.anon
    }

    fn evaluate(&self, arch: &Architecture) -> Result<crate::evaluator::EvalResult> {
        let mut req = EvalRequest::new(&self.unseen.name, *arch, self.cfg.seed);
        req.dataset_path = self.unseen.dataset_path.clone();
        req.hyperparams = Hyperparams::resolve(&self.unseen.name, self.cfg.hyperparams.as_ref());
        self.evaluator.evaluate(&req)
    }

    /// Weights, source ranking, pool, and one evaluated suggestion per pool entry.
    pub fn run_initial(&self) -> Result<InitialPhase> {
        let sources: Vec<&PropertyVector> = self.view.bank().iter().filter_map(|d| self.view.properties(d)).collect();
        let w = self.bridge.elicit_weights(&self.anon, &sources, &self.confidence);
        let ranking = rank_sources(&self.anon, &self.view, &self.confidence, &w.value)?;
        let pairs: Vec<(String, f64)> = ranking.scores.iter().map(|s| (s.source.clone(), s.score)).collect();
        let pool = build_pool(&pairs, &self.view, self.cfg.n_s, self.cfg.n_m)?;

        let mut traj = Trajectory::default();
        let mut proposals = Vec::with_capacity(pool.entries.len());
        let mut rng = refine::stream_rng(self.cfg.seed, refine::STREAM_REPAIR_INITIAL);
        let mut failures = Vec::new();
        for entry in &pool.entries {
            let s = self.bridge.suggest_initial(entry, &self.anon, &self.confidence)?;
            let mut arch = s.value;
            let mut repaired = false;
            if self.universe.as_ref().is_some_and(|u| !u.contains(&arch)) {
                if let Some(r) = repair(&arch, &BTreeSet::new(), self.universe.as_ref(), &mut rng) {
                    warn!(proposal = %arch, repaired = %r, "initial proposal outside the benchmark space; repaired");
                    arch = r;
                    repaired = true;
                }
            }
            if let Some(e) = traj.entries.iter().find(|e| e.arch == arch) {
                info!(source = entry.source, arch = %arch, "duplicate initial proposal; reusing its evaluation");
                proposals.push(Proposal { source: entry.source.clone(), arch, valid_perf: Some(e.valid_perf), llm_fallback: s.fallback, repaired });
                continue;
            }
            match self.evaluate(&arch) {
                Ok(r) => {
                    let e = traj.push(arch, r.valid_perf, r.test_perf, Origin::Initial);
                    e.source = Some(entry.source.clone());
                    e.llm_fallback = s.fallback;
                    e.repaired = repaired;
                    proposals.push(Proposal { source: entry.source.clone(), arch, valid_perf: Some(r.valid_perf), llm_fallback: s.fallback, repaired });
                }
                Err(e @ Error::Leakage(_)) => return Err(e),
                Err(e) => {
                    warn!(source = entry.source, arch = %arch, error = %e, "initial proposal evaluation failed");
                    failures.push(e.to_string());
                    proposals.push(Proposal { source: entry.source.clone(), arch, valid_perf: None, llm_fallback: s.fallback, repaired });
                }
            }
        }
        if traj.entries.is_empty() {
            return Err(Error::Trainer(format!("every initial proposal failed to evaluate: {}", failures.join("; "))));
        }
        self.record_bank(&traj)?;
        Ok(InitialPhase { weights: w.value, ranking, pool, proposals, trajectory: traj })
    }

    fn record_bank(&self, traj: &Trajectory) -> Result<()> {
        let Some(path) = &self.cfg.bank_path else { return Ok(()) };
        if self.cfg.leave_one_out.is_some() {
            info!("held-out run; self-evaluation bank not updated");
            return Ok(());
        }
        let obs = traj.entries.iter().map(|e| Observation { arch: e.arch, perf: e.valid_perf }).collect();
        upsert_self_eval(path, &self.unseen.name, self.unseen.properties.clone(), obs)?;
        Ok(())
    }

    /// Continues from the initial phase until `max_trials` evaluations.
    pub fn run_refinement(&self, init: &InitialPhase) -> Result<Trajectory> {
        refine::run(self, init)
    }

    /// Both phases plus the report bundle under `out_dir`.
    pub fn run(&self, out_dir: Option<&std::path::Path>, init_only: bool) -> Result<DesignOutcome> {
        let initial = self.run_initial()?;
        let trajectory = if init_only { initial.trajectory.clone() } else { self.run_refinement(&initial)? };
        if !init_only {
            let fresh = Trajectory { entries: trajectory.entries[initial.trajectory.entries.len()..].to_vec() };
            self.record_bank(&fresh)?;
        }
        let summary = report::summarize(self, &initial, &trajectory, init_only);
        if let Some(dir) = out_dir {
            write_report(dir, &self.cfg.anonymized(), &self.confidence, &initial, &trajectory, &summary)?;
        }
        Ok(DesignOutcome { confidence: self.confidence.clone(), initial, trajectory, summary })
    }
}
