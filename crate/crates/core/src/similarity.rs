//! Confidence-weighted property similarity between an unseen graph and benchmark sources,
//! and the knowledge pool built from the most similar sources.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{Error, Result};
use crate::knowledge_base::{build_confidence, exclude_dataset, BenchmarkTable, ConfidenceTable, ErMode};
use crate::properties::{NormBounds, Property, PropertyVector};
use crate::search_space::Architecture;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightSource {
    Uniform,
    Llm,
}

/// Importance of each selected property for one unseen graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub weights: BTreeMap<Property, f64>,
    pub source: WeightSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_response: Option<String>,
}

impl WeightVector {
    pub fn uniform(conf: &ConfidenceTable) -> Self {
        Self {
            weights: conf.selected.iter().map(|p| (*p, 1.0)).collect(),
            source: WeightSource::Uniform,
            raw_response: None,
        }
    }

    /// Weights for exactly the selected properties, each clamped to `[0, 1]`.
    pub fn from_llm(conf: &ConfidenceTable, parsed: &BTreeMap<Property, f64>, raw: String) -> Result<Self> {
        let mut weights = BTreeMap::new();
        for p in &conf.selected {
            let w = parsed
                .get(p)
                .copied()
                .ok_or_else(|| Error::InvalidInput(format!("no weight for {p}")))?;
            if !w.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite weight for {p}")));
            }
            weights.insert(*p, w.clamp(0.0, 1.0));
        }
        Ok(Self { weights, source: WeightSource::Llm, raw_response: Some(raw) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTerm {
    pub property: Property,
    pub weight: f64,
    pub confidence: f64,
    pub distance: f64,
    pub term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub unseen: String,
    pub source: String,
    pub score: f64,
    pub terms: Vec<SimilarityTerm>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<Property>,
}

/// `(1/N) * sum_k w_k * conf_k / (1 + d_k)` over the selected properties, where `d_k` is
/// the min-max normalized distance. Properties that are NaN on either side are skipped
/// and `N` shrinks accordingly.
pub fn similarity_score(
    unseen: &PropertyVector,
    source: &PropertyVector,
    conf: &ConfidenceTable,
    w: &WeightVector,
    bounds: &NormBounds,
) -> Result<SimilarityScore> {
    let mut terms = Vec::with_capacity(conf.selected.len());
    let mut skipped = Vec::new();
    for &p in &conf.selected {
        let weight = *w
            .weights
            .get(&p)
            .ok_or_else(|| Error::InvalidInput(format!("weight vector lacks selected property {p}")))?;
        let confidence = conf.averaged(p);
        let (x, y) = (unseen.get(p), source.get(p));
        if x.is_nan() || y.is_nan() || confidence.is_nan() {
            warn!(unseen = unseen.dataset, source = source.dataset, property = p.name(), "NaN term skipped");
            skipped.push(p);
            continue;
        }
        if confidence < 0.0 {
            warn!(property = p.name(), confidence, "negative confidence in a selected property");
        }
        let distance = bounds.distance(p.index(), x, y);
        terms.push(SimilarityTerm { property: p, weight, confidence, distance, term: weight * confidence / (1.0 + distance) });
    }
    let score = if terms.is_empty() {
        warn!(unseen = unseen.dataset, source = source.dataset, "no valid similarity terms; score set to 0");
        0.0
    } else {
        terms.iter().map(|t| t.term).sum::<f64>() / terms.len() as f64
    };
    Ok(SimilarityScore { unseen: unseen.dataset.clone(), source: source.dataset.clone(), score, terms, skipped })
}

/// Every source scored against the unseen graph, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRanking {
    pub bounds: NormBounds,
    pub weights: WeightVector,
    pub scores: Vec<SimilarityScore>,
}

impl SourceRanking {
    pub fn names(&self) -> Vec<&str> {
        self.scores.iter().map(|s| s.source.as_str()).collect()
    }
}

/// Scores all bank datasets of `table` against `unseen`. Bounds span the bank and the
/// unseen vector. The unseen graph must already be excluded from `table`.
pub fn rank_sources(
    unseen: &PropertyVector,
    table: &BenchmarkTable,
    conf: &ConfidenceTable,
    w: &WeightVector,
) -> Result<SourceRanking> {
    if table.contains(&unseen.dataset) {
        return Err(Error::InvalidInput(format!(
            "unseen dataset {} is present in the benchmark table; exclude it first",
            unseen.dataset
        )));
    }
    let bank = table.bank();
    if bank.is_empty() {
        return Err(Error::InvalidInput("benchmark table has no usable sources".into()));
    }
    let vectors: Vec<&PropertyVector> = bank.iter().filter_map(|d| table.properties(d)).collect();
    let bounds = NormBounds::from_vectors(vectors.iter().copied().chain([unseen]));
    let mut scores = vectors
        .iter()
        .map(|s| similarity_score(unseen, s, conf, w, &bounds))
        .collect::<Result<Vec<_>>>()?;
    scores.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.source.cmp(&b.source)));
    Ok(SourceRanking { bounds, weights: w.clone(), scores })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolModel {
    pub arch: Architecture,
    pub valid_perf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub source: String,
    pub similarity: f64,
    pub top_models: Vec<PoolModel>,
}

/// Top architectures of the most similar sources.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KnowledgePool {
    pub entries: Vec<PoolEntry>,
}

impl KnowledgePool {
    pub fn models(&self) -> impl Iterator<Item = &PoolModel> {
        self.entries.iter().flat_map(|e| &e.top_models)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pool serializes")
    }
}

/// The first `n_s` sources of `ranking`, each with its `n_m` best recorded architectures.
pub fn build_pool(ranking: &[(String, f64)], table: &BenchmarkTable, n_s: usize, n_m: usize) -> Result<KnowledgePool> {
    if n_s == 0 || n_m == 0 {
        return Err(Error::InvalidInput("n_s and n_m must be positive".into()));
    }
    if ranking.len() < n_s {
        return Err(Error::InvalidInput(format!("ranking has {} sources, need {n_s}", ranking.len())));
    }
    let mut entries = Vec::with_capacity(n_s);
    for (source, similarity) in &ranking[..n_s] {
        let top = table.top_models(source, n_m);
        if top.is_empty() {
            return Err(Error::NotFound { dataset: source.clone(), arch: None });
        }
        if top.len() < n_m {
            warn!(source, available = top.len(), n_m, "source has fewer records than n_m");
        }
        entries.push(PoolEntry {
            source: source.clone(),
            similarity: *similarity,
            top_models: top.into_iter().map(|(arch, r)| PoolModel { arch, valid_perf: r.valid_perf }).collect(),
        });
    }
    Ok(KnowledgePool { entries })
}

/// Uniform-weight property similarity that, for each unseen dataset, rebuilds the
/// confidence table on the benchmark with that dataset removed.
pub struct LeaveOneOutSimilarity<'a> {
    table: &'a BenchmarkTable,
    n_f: usize,
    n_m: usize,
    mode: ErMode,
    cache: Mutex<HashMap<String, SourceRanking>>,
}

impl<'a> LeaveOneOutSimilarity<'a> {
    pub fn new(table: &'a BenchmarkTable, n_f: usize, n_m: usize, mode: ErMode) -> Self {
        Self { table, n_f, n_m, mode, cache: Mutex::new(HashMap::new()) }
    }

    pub fn ranking(&self, unseen: &str) -> Result<SourceRanking> {
        if let Some(r) = self.cache.lock().unwrap().get(unseen) {
            return Ok(r.clone());
        }
        let props = self
            .table
            .properties(unseen)
            .ok_or_else(|| Error::InvalidInput(format!("no property vector for {unseen}")))?
            .clone();
        let view = exclude_dataset(self.table, unseen)?;
        let conf = build_confidence(&view, self.n_f, self.n_m, self.mode)?;
        let r = rank_sources(&props, &view, &conf, &WeightVector::uniform(&conf))?;
        self.cache.lock().unwrap().insert(unseen.to_string(), r.clone());
        Ok(r)
    }

    pub fn score(&self, unseen: &str, source: &str) -> Result<f64> {
        self.ranking(unseen)?
            .scores
            .iter()
            .find(|s| s.source == source)
            .map(|s| s.score)
            .ok_or_else(|| Error::UnknownDataset(source.to_string()))
    }
}
