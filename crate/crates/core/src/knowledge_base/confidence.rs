use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::rank::{kendall_tau, property_distances, transfer_scores, ErMode};
use super::BenchmarkTable;
use crate::error::{Error, Result};
use crate::properties::{NormBounds, Property, PropertyValues, NUM_PROPERTIES};

/// Per-anchor and averaged predictive confidence of each property, plus the Top-N_f filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceTable {
    pub anchors: Vec<String>,
    pub per_anchor: BTreeMap<String, PropertyValues>,
    pub averaged: PropertyValues,
    pub selected: Vec<Property>,
    pub n_m: usize,
    pub er_mode: ErMode,
    /// Always true: transfer performance is a recorded-lookup proxy.
    pub er_proxy: bool,
}

impl ConfidenceTable {
    pub fn averaged(&self, p: Property) -> f64 {
        self.averaged.0[p.index()]
    }

    pub fn n_f(&self) -> usize {
        self.selected.len()
    }

    /// A copy with a different filter size.
    pub fn reselect(&self, n_f: usize) -> Result<Self> {
        let mut t = self.clone();
        t.selected = select_top(&self.averaged.0, n_f)?;
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("confidence table serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Indices of the `n_f` highest values, NaN last, ties by canonical order.
pub fn select_top(averaged: &[f64; NUM_PROPERTIES], n_f: usize) -> Result<Vec<Property>> {
    if n_f > NUM_PROPERTIES {
        return Err(Error::InvalidInput(format!("n_f = {n_f} exceeds {NUM_PROPERTIES}")));
    }
    let mut idx: Vec<usize> = (0..NUM_PROPERTIES).collect();
    idx.sort_by(|&a, &b| {
        let (x, y) = (averaged[a], averaged[b]);
        match (x.is_nan(), y.is_nan()) {
            (false, false) => y.total_cmp(&x).then(a.cmp(&b)),
            (true, true) => a.cmp(&b),
            (nx, _) => nx.cmp(&!nx),
        }
    });
    Ok(idx.into_iter().take(n_f).map(|i| Property::ALL[i]).collect())
}

/// Kendall correlation between each property's statistical ranking and the empirical
/// ranking, for every anchor in the bank; averaged over anchors with NaN skipped.
pub fn build_confidence(table: &BenchmarkTable, n_f: usize, n_m: usize, mode: ErMode) -> Result<ConfidenceTable> {
    if n_f > NUM_PROPERTIES {
        return Err(Error::InvalidInput(format!("n_f = {n_f} exceeds {NUM_PROPERTIES}")));
    }
    if n_m == 0 {
        return Err(Error::InvalidInput("n_m must be positive".into()));
    }
    let bank = table.bank();
    if bank.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "confidence needs at least 3 datasets with properties and records, found {}",
            bank.len()
        )));
    }
    let bounds = NormBounds::from_vectors(bank.iter().filter_map(|d| table.properties(d)));
    let mut per_anchor = BTreeMap::new();
    for &anchor in &bank {
        let others: Vec<&str> = bank.iter().copied().filter(|d| *d != anchor).collect();
        let er: BTreeMap<String, f64> =
            transfer_scores(table, anchor, &others, n_m, mode)?.into_iter().map(|r| (r.name, r.score)).collect();
        let mut row = [f64::NAN; NUM_PROPERTIES];
        for k in Property::ALL {
            let Ok(d) = property_distances(table, anchor, k, &others, &bounds) else {
                warn!(anchor, property = k.name(), "NaN anchor property; confidence undefined");
                continue;
            };
            if d.len() < 2 {
                continue;
            }
            let x: Vec<f64> = d.iter().map(|r| r.score).collect();
            let y: Vec<f64> = d.iter().map(|r| -er[&r.name]).collect();
            row[k.index()] = kendall_tau(&x, &y)?;
        }
        per_anchor.insert(anchor.to_string(), PropertyValues(row));
    }
    let mut averaged = [f64::NAN; NUM_PROPERTIES];
    for (k, avg) in averaged.iter_mut().enumerate() {
        let vals: Vec<f64> = per_anchor.values().map(|r| r.0[k]).filter(|v| !v.is_nan()).collect();
        if !vals.is_empty() {
            *avg = vals.iter().sum::<f64>() / vals.len() as f64;
        }
    }
    Ok(ConfidenceTable {
        anchors: bank.iter().map(|s| s.to_string()).collect(),
        per_anchor,
        selected: select_top(&averaged, n_f)?,
        averaged: PropertyValues(averaged),
        n_m,
        er_mode: mode,
        er_proxy: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitRate {
    pub rate: f64,
    pub hits: usize,
    pub anchors: usize,
    pub per_anchor: Vec<HitDetail>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitDetail {
    pub anchor: String,
    pub true_best: String,
    pub retrieved: Vec<String>,
    pub hit: bool,
}

/// Leave-one-out retrieval accuracy: the fraction of anchors whose best transfer source
/// is among the `n_s` sources ranked highest by `similarity`.
///
/// `similarity(unseen, source)` must not consult the unseen dataset's records.
pub fn hit_rate(
    table: &BenchmarkTable,
    similarity: &dyn Fn(&str, &str) -> Result<f64>,
    n_s: usize,
    n_m: usize,
    mode: ErMode,
) -> Result<HitRate> {
    let bank = table.bank();
    if n_s == 0 {
        return Err(Error::InvalidInput("n_s must be positive".into()));
    }
    if n_s >= bank.len() {
        return Err(Error::InvalidInput(format!("n_s = {n_s} must be below the dataset count {}", bank.len())));
    }
    let mut details = Vec::with_capacity(bank.len());
    for &u in &bank {
        let others: Vec<&str> = bank.iter().copied().filter(|d| *d != u).collect();
        let mut er = transfer_scores(table, u, &others, n_m, mode)?;
        er.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.name.cmp(&b.name)));
        let truth = er[0].name.clone();
        let mut sims = Vec::with_capacity(others.len());
        for &j in &others {
            sims.push((j, similarity(u, j)?));
        }
        sims.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
        let retrieved: Vec<String> = sims.iter().take(n_s).map(|s| s.0.to_string()).collect();
        let hit = retrieved.contains(&truth);
        details.push(HitDetail { anchor: u.to_string(), true_best: truth, retrieved, hit });
    }
    let hits = details.iter().filter(|d| d.hit).count();
    Ok(HitRate { rate: hits as f64 / details.len() as f64, hits, anchors: details.len(), per_anchor: details })
}
