//! Deterministic synthetic benchmark banks with known answers.
//!
//! * [`confidence_bank`]: five datasets over fifty architectures where the transfer ranking
//!   of every anchor is exactly the ordering by `density`.
//! * [`hit_rate_bank`]: eight datasets where property similarity retrieves the best
//!   transfer source for exactly three anchors.
//! * [`planted_bank`]: a 200-architecture product space with a planted optimum on the unseen
//!   dataset and sources whose optima lie on a Hamming path away from it.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::knowledge_base::{BenchmarkTable, PerfRecord};
use crate::properties::{Property, PropertyVector, NUM_PROPERTIES};
use crate::search_space::{Architecture, Op, MACRO_PATTERNS, SPACE_SIZE};

pub const CONFIDENCE_BANK: [&str; 5] = ["alder", "birch", "cedar", "dogwood", "elm"];
pub const CONFIDENCE_POSITIONS: [f64; 5] = [0.0, 0.25, 0.45, 0.7, 1.0];

pub const HIT_RATE_BANK: [&str; 8] = ["amber", "beryl", "mica", "topaz", "jade", "onyx", "opal", "ruby"];
pub const HIT_RATE_POSITIONS: [f64; 8] = [0.0, 1.0, 3.0, 6.0, 10.0, 15.0, 21.0, 28.0];
/// Anchors (indices into [`HIT_RATE_BANK`]) whose best transfer source is the nearest one.
pub const HIT_RATE_HITS: [usize; 3] = [0, 1, 2];

pub const PLANTED_UNSEEN: &str = "planted_target";
pub const PLANTED_SOURCES: [&str; 5] = ["planted_s1", "planted_s2", "planted_s3", "planted_s4", "planted_s5"];

fn rec(v: f64) -> PerfRecord {
    PerfRecord::new(v, (v - 0.02).max(0.0)).expect("synthetic perf in range")
}

/// Property values that are all increasing affine functions of `x`.
pub fn affine_properties(x: f64) -> [f64; NUM_PROPERTIES] {
    [
        0.1 + 0.02 * x,
        0.001 + 0.0005 * x,
        0.001 + 0.0002 * x,
        0.002 + 0.0004 * x,
        0.1 + 0.01 * x,
        2.0 + 0.5 * x,
        1000.0 + 250.0 * x,
        5.0 + x,
        3.0 + 0.25 * x,
        -0.3 + 0.02 * x,
        0.01 + 0.001 * x,
        100.0 + 20.0 * x,
        500.0 + 100.0 * x,
        0.2 + 0.02 * x,
        1.0 + x,
        0.2 + 0.025 * x,
    ]
}

fn pv(name: &str, values: [f64; NUM_PROPERTIES]) -> PropertyVector {
    PropertyVector { dataset: name.to_string(), values, sample_seed: 0, sample_size: 0 }
}

fn random_properties(rng: &mut ChaCha8Rng) -> [f64; NUM_PROPERTIES] {
    let mut v = [0.0; NUM_PROPERTIES];
    for (k, slot) in v.iter_mut().enumerate() {
        let u: f64 = rng.random();
        *slot = match Property::ALL[k] {
            Property::EdgeCount => (1000.0 + 9000.0 * u).round(),
            Property::NodeCount => (500.0 + 4500.0 * u).round(),
            Property::FeatureDim => (50.0 + 950.0 * u).round(),
            Property::ConnectedComponents => (1.0 + 40.0 * u).round(),
            Property::GraphDiameter => (4.0 + 20.0 * u).round(),
            Property::AvgDegree => 1.0 + 9.0 * u,
            Property::AvgShortestPath => 2.0 + 8.0 * u,
            Property::Assortativity => -0.5 + u,
            _ => 0.01 + 0.5 * u,
        };
    }
    v
}

fn sample_archs(n: usize, rng: &mut ChaCha8Rng) -> Vec<Architecture> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let i = rng.random_range(0..SPACE_SIZE);
        if seen.insert(i) {
            out.push(arch_at(i));
        }
    }
    out
}

fn arch_at(mut i: usize) -> Architecture {
    let mut ops = [Op::Arma; 4];
    for slot in (0..4).rev() {
        ops[slot] = Op::ALL[i % 9];
        i /= 9;
    }
    Architecture::new(MACRO_PATTERNS[i], ops).expect("every encoding is admissible")
}

/// Five datasets, fifty architectures in five blocks of ten. Block `b` belongs to dataset
/// `b`; on dataset `i` an architecture of block `b` with in-block rank `r` scores
/// `0.7 + 0.05 i - 0.1 |x_i - x_b| - 0.001 r`. For `n_m <= 10` the transfer ranking of
/// each anchor follows `|x_i - x_j|`, and `density` is affine in `x`, so its confidence is
/// exactly 1. The other properties are seeded noise.
pub fn confidence_bank(seed: u64) -> BenchmarkTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let archs = sample_archs(50, &mut rng);
    let mut t = BenchmarkTable::new();
    for (i, name) in CONFIDENCE_BANK.iter().enumerate() {
        let xi = CONFIDENCE_POSITIONS[i];
        for (a, arch) in archs.iter().enumerate() {
            let (b, r) = (a / 10, a % 10);
            let v = 0.7 + 0.05 * i as f64 - 0.1 * (xi - CONFIDENCE_POSITIONS[b]).abs() - 0.001 * r as f64;
            t.insert(name, *arch, rec(v));
        }
        let mut values = random_properties(&mut rng);
        values[Property::Density.index()] = 0.05 + 0.4 * xi;
        t.set_properties(pv(name, values));
    }
    t
}

/// Eight datasets at triangular positions with identical affine properties, so similarity
/// retrieves the positional nearest neighbour. Dataset `j` owns one signature architecture
/// scoring 0.99 on `j` and `0.9 - 0.001 |x_u - x_j|` elsewhere. For every anchor outside
/// [`HIT_RATE_HITS`] a far source's signature is boosted to 0.95, so the nearest source is
/// not the best transfer source. With `n_m = 1` and `n_s = 1` the hit rate is 3/8.
pub fn hit_rate_bank() -> BenchmarkTable {
    let n = HIT_RATE_BANK.len();
    let far = |u: usize| if u == 3 { 7 } else { 0 };
    let archs: Vec<Architecture> = (0..n).map(|j| arch_at(j * 7919 + 11)).collect();
    let mut t = BenchmarkTable::new();
    for u in 0..n {
        let name = HIT_RATE_BANK[u];
        for j in 0..n {
            let v = if j == u {
                0.99
            } else if !HIT_RATE_HITS.contains(&u) && j == far(u) {
                0.95
            } else {
                0.9 - 0.001 * (HIT_RATE_POSITIONS[u] - HIT_RATE_POSITIONS[j]).abs()
            };
            t.insert(name, archs[j], rec(v));
        }
        t.set_properties(pv(name, affine_properties(HIT_RATE_POSITIONS[u])));
    }
    t
}

/// A planted-optimum bank with its ground truth.
#[derive(Debug, Clone)]
pub struct Planted {
    pub table: BenchmarkTable,
    /// The 200-architecture product space every dataset is recorded on.
    pub universe: BTreeSet<Architecture>,
    pub optimum: Architecture,
    /// Source optima in source order.
    pub source_optima: Vec<Architecture>,
}

impl Planted {
    /// Validation performance on the unseen dataset.
    pub fn unseen_perf(&self, a: &Architecture) -> f64 {
        planted_unseen_perf(a.hamming(&self.optimum))
    }
}

pub fn planted_unseen_perf(h: usize) -> f64 {
    0.95 - 0.08 * h as f64
}

/// Universe: two macro patterns times operation sets of sizes 5, 5, 2 and 2, all drawn from
/// `seed`. The unseen optimum `o` is a random member. Source `k` (1-based) has optimum
/// `p_k`, the k-th step of a random Hamming path from `o` that changes each coordinate once,
/// and scores `0.9 - 0.05 h(a, p_k) - 0.01 h(a, o)`. The unseen scores
/// `0.95 - 0.08 h(a, o)`. Source `k` sits at property position `k`, the unseen at 0.
///
/// With `optimum_at_nearest` the first source's optimum is `o` itself.
pub fn planted_bank(seed: u64, optimum_at_nearest: bool) -> Planted {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut macros: Vec<usize> = (0..MACRO_PATTERNS.len()).collect();
    macros.shuffle(&mut rng);
    let macros: Vec<[u8; 4]> = macros[..2].iter().map(|&i| MACRO_PATTERNS[i]).collect();
    let slot_sets: Vec<Vec<Op>> = [5usize, 5, 2, 2]
        .iter()
        .map(|&k| {
            let mut ops = Op::ALL.to_vec();
            ops.shuffle(&mut rng);
            ops.truncate(k);
            ops
        })
        .collect();

    // coordinate 0 is the macro pattern, 1..=4 the operation slots
    let choices: Vec<usize> = std::iter::once(macros.len()).chain(slot_sets.iter().map(Vec::len)).collect();
    let build = |c: &[usize; 5]| {
        let ops: [Op; 4] = std::array::from_fn(|s| slot_sets[s][c[s + 1]]);
        Architecture::new(macros[c[0]], ops).expect("admissible")
    };
    let mut universe = BTreeSet::new();
    let mut c = [0usize; 5];
    loop {
        universe.insert(build(&c));
        let mut k = 4;
        loop {
            c[k] += 1;
            if c[k] < choices[k] {
                break;
            }
            c[k] = 0;
            if k == 0 {
                break;
            }
            k -= 1;
        }
        if c == [0; 5] {
            break;
        }
    }

    let mut o = [0usize; 5];
    for (k, slot) in o.iter_mut().enumerate() {
        *slot = rng.random_range(0..choices[k]);
    }
    let mut order: Vec<usize> = (0..5).collect();
    order.shuffle(&mut rng);
    let mut path = vec![o];
    let mut cur = o;
    for &k in &order {
        let others: Vec<usize> = (0..choices[k]).filter(|&v| v != cur[k]).collect();
        cur[k] = *others.choose(&mut rng).expect("every coordinate has two values");
        path.push(cur);
    }
    let optimum = build(&o);
    let source_optima: Vec<Architecture> = (1..=PLANTED_SOURCES.len())
        .map(|k| if optimum_at_nearest && k == 1 { optimum } else { build(&path[k]) })
        .collect();

    let mut table = BenchmarkTable::new();
    for a in &universe {
        table.insert(PLANTED_UNSEEN, *a, rec(planted_unseen_perf(a.hamming(&optimum))));
        for (k, name) in PLANTED_SOURCES.iter().enumerate() {
            let v = 0.9 - 0.05 * a.hamming(&source_optima[k]) as f64 - 0.01 * a.hamming(&optimum) as f64;
            table.insert(name, *a, rec(v));
        }
    }
    table.set_properties(pv(PLANTED_UNSEEN, affine_properties(0.0)));
    for (k, name) in PLANTED_SOURCES.iter().enumerate() {
        table.set_properties(pv(name, affine_properties((k + 1) as f64)));
    }
    Planted { table, universe, optimum, source_optima }
}
