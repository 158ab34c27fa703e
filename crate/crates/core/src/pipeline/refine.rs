use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tracing::warn;

use super::{Designer, InitialPhase, Origin, Trajectory};
use crate::error::Result;
use crate::knowledge_base::BenchmarkTable;
use crate::search_space::{crossover, enumerate_space, Architecture};

pub(crate) const STREAM_COPARENT: u64 = 2;
pub(crate) const STREAM_CROSSOVER: u64 = 3;
pub(crate) const STREAM_PROMOTE: u64 = 4;
pub(crate) const STREAM_REPAIR: u64 = 5;
pub(crate) const STREAM_REPAIR_INITIAL: u64 = 6;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// The candidate with the best recorded validation performance on `k1_source`; ties go to
/// the smaller key. Candidates without a record are skipped; if none has one, a seeded
/// random candidate is returned. `None` only for an empty list.
pub fn promote(candidates: &[Architecture], k1_source: &str, table: &BenchmarkTable, rng: &mut impl Rng) -> Option<Architecture> {
    if candidates.is_empty() {
        return None;
    }
    let best = candidates
        .iter()
        .filter_map(|a| table.get(k1_source, a).map(|r| (a, r.valid_perf)))
        .fold(None, |best: Option<(&Architecture, f64)>, (a, p)| match best {
            Some((b, bp)) if bp > p || (bp == p && b < a) => Some((b, bp)),
            _ => Some((a, p)),
        });
    match best {
        Some((a, _)) => Some(*a),
        None => {
            warn!(k1_source, candidates = candidates.len(), "no candidate has a record on the top source; picking at random");
            Some(candidates[rng.random_range(0..candidates.len())])
        }
    }
}

/// The closest architecture by Hamming distance that is not in `evaluated`, drawn at random
/// among equally close ones. Searches `universe`, or the whole space when `None`.
pub fn repair(
    arch: &Architecture,
    evaluated: &BTreeSet<Architecture>,
    universe: Option<&BTreeSet<Architecture>>,
    rng: &mut impl Rng,
) -> Option<Architecture> {
    let mut best_d = usize::MAX;
    let mut pool = Vec::new();
    let mut consider = |a: Architecture| {
        if evaluated.contains(&a) {
            return;
        }
        let d = a.hamming(arch);
        if d < best_d {
            best_d = d;
            pool.clear();
        }
        if d == best_d {
            pool.push(a);
        }
    };
    match universe {
        Some(u) => u.iter().copied().for_each(&mut consider),
        None => enumerate_space().for_each(&mut consider),
    }
    if pool.is_empty() {
        None
    } else {
        Some(pool[rng.random_range(0..pool.len())])
    }
}

pub(crate) fn run(d: &Designer, init: &InitialPhase) -> Result<Trajectory> {
    let cfg = &d.cfg;
    let pool = &init.pool;
    let score = |i: usize| {
        init.proposals
            .get(i)
            .and_then(|p| p.valid_perf)
            .unwrap_or(f64::NEG_INFINITY)
    };
    let mut order: Vec<usize> = (0..pool.entries.len()).collect();
    order.sort_by(|&a, &b| score(b).total_cmp(&score(a)));
    let k1 = &pool.entries[order[0]];

    let mut coparents = Vec::new();
    let mut seen = BTreeSet::new();
    for &i in &order[1..] {
        for m in &pool.entries[i].top_models {
            if seen.insert(m.arch) {
                coparents.push(m.arch);
            }
        }
    }
    if coparents.is_empty() {
        warn!("no co-parent sources; refinement mutates the best design directly");
    }

    let mut rng_co = stream_rng(cfg.seed, STREAM_COPARENT);
    let mut rng_cross = stream_rng(cfg.seed, STREAM_CROSSOVER);
    let mut rng_promote = stream_rng(cfg.seed, STREAM_PROMOTE);
    let mut rng_repair = stream_rng(cfg.seed, STREAM_REPAIR);

    let mut traj = init.trajectory.clone();
    let mut evaluated: BTreeSet<Architecture> = traj.entries.iter().map(|e| e.arch).collect();
    while traj.eval_count() < cfg.max_trials {
        let theta = traj.best().expect("non-empty trajectory").arch;

        let mut parents = coparents.clone();
        parents.shuffle(&mut rng_co);
        let mut cands = Vec::with_capacity(cfg.n_c);
        let mut cand_set = BTreeSet::new();
        for p in &parents {
            if cands.len() >= cfg.n_c {
                break;
            }
            for c in crossover(&theta, p, cfg.n_c - cands.len(), rng_cross.random()) {
                if !evaluated.contains(&c) && cand_set.insert(c) {
                    cands.push(c);
                }
            }
        }
        let promoted = promote(&cands, &k1.source, &d.view, &mut rng_promote).unwrap_or(theta);
        let m = d.bridge.refine_mutate(&promoted, &traj.pairs(), k1, &d.anon, &d.confidence);
        let mut arch = m.value;
        let mut repaired = false;
        let outside = d.universe.as_ref().is_some_and(|u| !u.contains(&arch));
        if evaluated.contains(&arch) || outside {
            match repair(&arch, &evaluated, d.universe.as_ref(), &mut rng_repair) {
                Some(r) => {
                    arch = r;
                    repaired = true;
                }
                None => {
                    warn!(evaluated = evaluated.len(), "search space exhausted; stopping early");
                    break;
                }
            }
        }
        let r = d.evaluate(&arch)?;
        evaluated.insert(arch);
        let e = traj.push(arch, r.valid_perf, r.test_perf, Origin::Refined);
        e.source = Some(k1.source.clone());
        e.llm_fallback = m.fallback;
        e.repaired = repaired;
    }
    Ok(traj)
}
