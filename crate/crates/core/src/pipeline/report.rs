use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Designer, InitialPhase, PipelineConfig, Proposal, Trajectory};
use crate::error::{Error, Result};
use crate::knowledge_base::{select_top, ConfidenceTable, ErMode, PerfRecord};
use crate::search_space::Architecture;
use crate::similarity::WeightSource;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub best_arch: Option<Architecture>,
    pub best_valid_perf: Option<f64>,
    pub best_test_perf: Option<f64>,
    pub eval_count: usize,
    pub max_trials: usize,
    pub init_only: bool,
    pub initial_best_arch: Option<Architecture>,
    pub initial_best_valid_perf: Option<f64>,
    /// Percent of recorded architectures on the unseen graph strictly better than the best
    /// initial proposal. Simulation mode only.
    pub initial_rank_percentile: Option<f64>,
    pub proposals: Vec<Proposal>,
    pub proposal_rank_percentiles: Vec<Option<f64>>,
    pub pool_sources: Vec<String>,
    pub weight_source: WeightSource,
    pub llm_fallbacks: usize,
    pub repairs: usize,
    /// True when no co-parent source exists and refinement only mutates the best design.
    pub mutation_only: bool,
    pub er_mode: ErMode,
    pub er_proxy: bool,
}

/// `100 * #(records strictly better than perf) / #records`.
pub fn rank_percentile(records: &BTreeMap<Architecture, PerfRecord>, perf: f64) -> f64 {
    if records.is_empty() {
        return f64::NAN;
    }
    let better = records.values().filter(|r| r.valid_perf > perf).count();
    100.0 * better as f64 / records.len() as f64
}

pub(crate) fn summarize(d: &Designer, init: &InitialPhase, traj: &Trajectory, init_only: bool) -> Summary {
    let best = traj.best();
    let ib = init.trajectory.best();
    let sim_records = match (&d.cfg.leave_one_out, d.cfg.simulate) {
        (Some(_), true) => d.full.records(&d.unseen.name),
        _ => None,
    };
    let pct = |p: Option<f64>| match (sim_records, p) {
        (Some(r), Some(p)) => Some(rank_percentile(r, p)),
        _ => None,
    };
    Summary {
        best_arch: best.map(|b| b.arch),
        best_valid_perf: best.map(|b| b.valid_perf),
        best_test_perf: best.and_then(|b| b.test_perf),
        eval_count: traj.eval_count(),
        max_trials: d.cfg.max_trials,
        init_only,
        initial_best_arch: ib.map(|b| b.arch),
        initial_best_valid_perf: ib.map(|b| b.valid_perf),
        initial_rank_percentile: pct(ib.map(|b| b.valid_perf)),
        proposal_rank_percentiles: init.proposals.iter().map(|p| pct(p.valid_perf)).collect(),
        proposals: init.proposals.clone(),
        pool_sources: init.pool.entries.iter().map(|e| e.source.clone()).collect(),
        weight_source: init.weights.source,
        llm_fallbacks: init.proposals.iter().filter(|p| p.llm_fallback).count()
            + traj.entries[init.trajectory.entries.len()..].iter().filter(|e| e.llm_fallback).count(),
        repairs: traj.entries.iter().filter(|e| e.repaired).count(),
        mutation_only: init.pool.entries.len() < 2,
        er_mode: d.confidence.er_mode,
        er_proxy: d.confidence.er_proxy,
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let p = dir.join(name);
    fs::write(&p, text).map_err(|e| Error::io(p, e))
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:?}")
    }
}

pub fn confidence_bars_csv(conf: &ConfidenceTable) -> String {
    let order = select_top(&conf.averaged.0, crate::properties::NUM_PROPERTIES).unwrap();
    let mut s = String::from("property,averaged,rank,selected\n");
    for p in crate::properties::Property::ALL {
        let rank = order.iter().position(|q| *q == p).unwrap() + 1;
        let _ = writeln!(s, "{},{},{rank},{}", p.name(), num(conf.averaged(p)), conf.selected.contains(&p));
    }
    s
}

/// Writes the report bundle: run config, confidence, similarity, pool, trajectory, best-so-far
/// curve and summary.
pub fn write_report(
    dir: &Path,
    cfg: &PipelineConfig,
    conf: &ConfidenceTable,
    init: &InitialPhase,
    traj: &Trajectory,
    summary: &Summary,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(dir, "run_config.json", &json(cfg))?;
    write(dir, "confidence.json", &json(conf))?;
    write(dir, "confidence_bars.csv", &confidence_bars_csv(conf))?;
    write(dir, "similarity_report.json", &json(&init.ranking))?;

    let mut sim = String::from("source,score");
    for p in &conf.selected {
        let _ = write!(sim, ",{}", p.name());
    }
    sim.push('\n');
    for s in &init.ranking.scores {
        let _ = write!(sim, "{},{}", s.source, num(s.score));
        for p in &conf.selected {
            let t = s.terms.iter().find(|t| t.property == *p).map_or(String::new(), |t| num(t.term));
            let _ = write!(sim, ",{t}");
        }
        sim.push('\n');
    }
    write(dir, "similarity.csv", &sim)?;
    write(dir, "pool.json", &json(&init.pool))?;
    write(dir, "trajectory.jsonl", &traj.to_jsonl())?;

    let mut curve = String::from("trial,arch,origin,valid_perf,best_so_far\n");
    for e in &traj.entries {
        let origin = match e.origin {
            super::Origin::Initial => "initial",
            super::Origin::Refined => "refined",
        };
        let _ = writeln!(curve, "{},{},{origin},{},{}", e.trial, e.arch, num(e.valid_perf), num(e.best_so_far));
    }
    write(dir, "best_so_far.csv", &curve)?;
    write(dir, "summary.json", &json(summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search_space::enumerate_space;

    #[test]
    fn percentile_counts_strictly_better() {
        let recs: BTreeMap<_, _> = enumerate_space()
            .take(10)
            .enumerate()
            .map(|(i, a)| (a, PerfRecord::new(i as f64 / 10.0, 0.0).unwrap()))
            .collect();
        assert_eq!(rank_percentile(&recs, 0.9), 0.0);
        assert_eq!(rank_percentile(&recs, 0.0), 90.0);
        assert_eq!(rank_percentile(&recs, 0.45), 50.0);
    }
}
