//! The 16-value topological signature of a graph.
//!
//! Twelve values are computed exactly on the full graph. Betweenness, closeness, diameter
//! and average shortest path run on the induced subgraph of a seeded uniform node sample
//! (all nodes when the graph is small enough); diameter and average shortest path use the
//! largest connected component of that sample.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph_data::GraphDataset;

pub const NUM_PROPERTIES: usize = 16;

const EIGEN_MAX_ITER: usize = 1000;
const EIGEN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Property {
    AvgClustering,
    AvgBetweenness,
    Density,
    AvgDegreeCentrality,
    AvgCloseness,
    AvgDegree,
    EdgeCount,
    GraphDiameter,
    AvgShortestPath,
    Assortativity,
    AvgEigenvector,
    FeatureDim,
    NodeCount,
    FeatureDiversity,
    ConnectedComponents,
    LabelHomophily,
}

impl Property {
    /// Canonical order.
    pub const ALL: [Property; NUM_PROPERTIES] = [
        Property::AvgClustering,
        Property::AvgBetweenness,
        Property::Density,
        Property::AvgDegreeCentrality,
        Property::AvgCloseness,
        Property::AvgDegree,
        Property::EdgeCount,
        Property::GraphDiameter,
        Property::AvgShortestPath,
        Property::Assortativity,
        Property::AvgEigenvector,
        Property::FeatureDim,
        Property::NodeCount,
        Property::FeatureDiversity,
        Property::ConnectedComponents,
        Property::LabelHomophily,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Property> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Property::AvgClustering => "avg_clustering",
            Property::AvgBetweenness => "avg_betweenness",
            Property::Density => "density",
            Property::AvgDegreeCentrality => "avg_degree_centrality",
            Property::AvgCloseness => "avg_closeness",
            Property::AvgDegree => "avg_degree",
            Property::EdgeCount => "edge_count",
            Property::GraphDiameter => "graph_diameter",
            Property::AvgShortestPath => "avg_shortest_path",
            Property::Assortativity => "assortativity",
            Property::AvgEigenvector => "avg_eigenvector",
            Property::FeatureDim => "feature_dim",
            Property::NodeCount => "node_count",
            Property::FeatureDiversity => "feature_diversity",
            Property::ConnectedComponents => "connected_components",
            Property::LabelHomophily => "label_homophily",
        }
    }

    /// Computed on the sampled subgraph rather than the full graph.
    pub fn is_sampled(self) -> bool {
        matches!(
            self,
            Property::AvgBetweenness
                | Property::AvgCloseness
                | Property::GraphDiameter
                | Property::AvgShortestPath
        )
    }

    pub fn describe(self) -> &'static str {
        match self {
            Property::AvgClustering => "average local clustering coefficient",
            Property::AvgBetweenness => "average normalized betweenness centrality",
            Property::Density => "edge density",
            Property::AvgDegreeCentrality => "average degree centrality",
            Property::AvgCloseness => "average closeness centrality",
            Property::AvgDegree => "average node degree",
            Property::EdgeCount => "number of undirected edges",
            Property::GraphDiameter => "diameter of the largest component",
            Property::AvgShortestPath => "average shortest path length in the largest component",
            Property::Assortativity => "degree assortativity",
            Property::AvgEigenvector => "average eigenvector centrality",
            Property::FeatureDim => "node feature dimensionality",
            Property::NodeCount => "number of nodes",
            Property::FeatureDiversity => "mean cosine dissimilarity between node features",
            Property::ConnectedComponents => "number of connected components",
            Property::LabelHomophily => "fraction of edges joining same-label nodes",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Property {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Property::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| Error::InvalidInput(format!("unknown property {s:?}")))
    }
}

impl Serialize for Property {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Property {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub max_nodes: usize,
    pub pair_samples: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            max_nodes: 1000,
            pair_samples: 10_000,
            seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn check(&self) -> Result<()> {
        if self.max_nodes < 2 {
            return Err(Error::InvalidInput("max_nodes must be >= 2".into()));
        }
        if self.pair_samples < 1 {
            return Err(Error::InvalidInput("pair_samples must be >= 1".into()));
        }
        Ok(())
    }
}

/// Property values for one dataset, in canonical order. `NaN` marks an undefined value.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyVector {
    pub dataset: String,
    pub values: [f64; NUM_PROPERTIES],
    pub sample_seed: u64,
    pub sample_size: usize,
}

impl PropertyVector {
    pub fn get(&self, p: Property) -> f64 {
        self.values[p.index()]
    }

    pub fn bit_eq(&self, other: &PropertyVector) -> bool {
        self.dataset == other.dataset
            && self.sample_seed == other.sample_seed
            && self.sample_size == other.sample_size
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("property vector serializes")
    }
}

/// Serializes NaN as the string `"NaN"`.
pub(crate) struct JsonNumber(pub f64);

impl Serialize for JsonNumber {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_nan() {
            s.serialize_str("NaN")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for JsonNumber {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(JsonNumber(v)),
            Raw::Str(s) if s == "NaN" => Ok(JsonNumber(f64::NAN)),
            Raw::Str(s) => Err(de::Error::custom(format!("expected number or \"NaN\", got {s:?}"))),
        }
    }
}

/// Canonical-order map of the 16 property names to values, as used in JSON files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropertyValues(pub [f64; NUM_PROPERTIES]);

impl Serialize for PropertyValues {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(NUM_PROPERTIES))?;
        for p in Property::ALL {
            m.serialize_entry(p.name(), &JsonNumber(self.0[p.index()]))?;
        }
        m.end()
    }
}

struct ValuesVisitor;

impl<'de> Visitor<'de> for ValuesVisitor {
    type Value = PropertyValues;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a map of the 16 property names to numbers")
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
        let mut values = [f64::NAN; NUM_PROPERTIES];
        let mut seen = [false; NUM_PROPERTIES];
        while let Some(k) = map.next_key::<String>()? {
            let p: Property = k.parse().map_err(de::Error::custom)?;
            values[p.index()] = map.next_value::<JsonNumber>()?.0;
            seen[p.index()] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(de::Error::custom(format!("missing property {}", Property::ALL[i].name())));
        }
        Ok(PropertyValues(values))
    }
}

impl<'de> Deserialize<'de> for PropertyValues {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_map(ValuesVisitor)
    }
}

impl Serialize for PropertyVector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(4))?;
        m.serialize_entry("dataset", &self.dataset)?;
        m.serialize_entry("seed", &self.sample_seed)?;
        m.serialize_entry("sample_size", &self.sample_size)?;
        m.serialize_entry("values", &PropertyValues(self.values))?;
        m.end()
    }
}

impl<'de> Deserialize<'de> for PropertyVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            dataset: String,
            seed: u64,
            sample_size: usize,
            values: PropertyValues,
        }
        let r = Raw::deserialize(d)?;
        Ok(PropertyVector {
            dataset: r.dataset,
            values: r.values.0,
            sample_seed: r.seed,
            sample_size: r.sample_size,
        })
    }
}

/// Per-property min/max over a set of vectors, ignoring NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBounds {
    pub min: PropertyValues,
    pub max: PropertyValues,
}

impl NormBounds {
    pub fn from_vectors<'a>(vectors: impl IntoIterator<Item = &'a PropertyVector>) -> Self {
        let mut min = [f64::NAN; NUM_PROPERTIES];
        let mut max = [f64::NAN; NUM_PROPERTIES];
        for v in vectors {
            for k in 0..NUM_PROPERTIES {
                let x = v.values[k];
                if x.is_nan() {
                    continue;
                }
                if min[k].is_nan() || x < min[k] {
                    min[k] = x;
                }
                if max[k].is_nan() || x > max[k] {
                    max[k] = x;
                }
            }
        }
        Self { min: PropertyValues(min), max: PropertyValues(max) }
    }

    /// Min-max normalized value in `[0, 1]`; 0 when the range is degenerate.
    pub fn normalize(&self, k: usize, x: f64) -> f64 {
        let (lo, hi) = (self.min.0[k], self.max.0[k]);
        if x.is_nan() || lo.is_nan() {
            return f64::NAN;
        }
        if hi > lo {
            ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    /// Normalized absolute difference `|x - y| / (max - min)`.
    pub fn distance(&self, k: usize, x: f64, y: f64) -> f64 {
        (self.normalize(k, x) - self.normalize(k, y)).abs()
    }
}

pub fn compute_properties(g: &GraphDataset, cfg: &SamplingConfig) -> Result<PropertyVector> {
    cfg.check()?;
    let n = g.num_nodes;
    if n == 0 {
        return Err(Error::InvalidInput(format!("dataset {} has no nodes", g.name)));
    }
    let adj = g.adjacency();
    let m = g.num_edges();
    let nf = n as f64;
    let mut v = [f64::NAN; NUM_PROPERTIES];
    let set = |v: &mut [f64; NUM_PROPERTIES], p: Property, x: f64| v[p.index()] = x;

    set(&mut v, Property::AvgClustering, avg_clustering(&adj));
    let pairs = nf * (nf - 1.0);
    set(&mut v, Property::Density, if n > 1 { 2.0 * m as f64 / pairs } else { 0.0 });
    set(
        &mut v,
        Property::AvgDegreeCentrality,
        if n > 1 { 2.0 * m as f64 / nf / (nf - 1.0) } else { 0.0 },
    );
    set(&mut v, Property::AvgDegree, 2.0 * m as f64 / nf);
    set(&mut v, Property::EdgeCount, m as f64);
    set(&mut v, Property::Assortativity, degree_assortativity(&adj));
    set(&mut v, Property::AvgEigenvector, avg_eigenvector_centrality(&adj));
    set(&mut v, Property::FeatureDim, g.feature_dim() as f64);
    set(&mut v, Property::NodeCount, nf);
    set(
        &mut v,
        Property::FeatureDiversity,
        if n >= 2 && g.feature_dim() >= 1 { feature_diversity(g, cfg)? } else { f64::NAN },
    );
    set(&mut v, Property::ConnectedComponents, components(&adj).1 as f64);
    set(&mut v, Property::LabelHomophily, label_homophily(g));

    let sample = sample_nodes(n, cfg);
    let sub = induced_subgraph(&adj, &sample);
    let paths = path_statistics(&sub);
    set(&mut v, Property::AvgBetweenness, paths.avg_betweenness);
    set(&mut v, Property::AvgCloseness, paths.avg_closeness);
    set(&mut v, Property::GraphDiameter, paths.diameter);
    set(&mut v, Property::AvgShortestPath, paths.avg_shortest_path);

    Ok(PropertyVector {
        dataset: g.name.clone(),
        values: v,
        sample_seed: cfg.seed,
        sample_size: sample.len(),
    })
}

/// Fraction of fully labeled edges whose endpoints share a label; `NaN` without any.
pub fn label_homophily(g: &GraphDataset) -> f64 {
    let Some(labels) = &g.labels else {
        tracing::warn!(dataset = %g.name, "no labels; label_homophily is NaN");
        return f64::NAN;
    };
    let (mut same, mut total) = (0usize, 0usize);
    for &(u, v) in &g.edges {
        if labels[u] >= 0 && labels[v] >= 0 {
            total += 1;
            same += usize::from(labels[u] == labels[v]);
        }
    }
    if total == 0 {
        tracing::warn!(dataset = %g.name, "no edge with two labeled endpoints; label_homophily is NaN");
        return f64::NAN;
    }
    same as f64 / total as f64
}

/// Mean cosine dissimilarity over seeded node pairs, or over all pairs when
/// `pair_samples` covers them.
pub fn feature_diversity(g: &GraphDataset, cfg: &SamplingConfig) -> Result<f64> {
    let n = g.num_nodes;
    if n < 2 {
        return Err(Error::InvalidInput("feature diversity needs at least 2 nodes".into()));
    }
    if g.feature_dim() == 0 {
        return Err(Error::InvalidInput("feature diversity needs feature_dim >= 1".into()));
    }
    let norms: Vec<f64> = (0..n)
        .map(|i| g.features.row(i).iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let dissim = |i: usize, j: usize| -> f64 {
        match (norms[i] == 0.0, norms[j] == 0.0) {
            (true, true) => 0.0,
            (true, false) | (false, true) => 1.0,
            (false, false) => {
                let dot: f64 = g.features.row(i).iter().zip(g.features.row(j)).map(|(a, b)| a * b).sum();
                1.0 - dot / (norms[i] * norms[j])
            }
        }
    };
    let total_pairs = n * (n - 1) / 2;
    if cfg.pair_samples >= total_pairs {
        let mut sum = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                sum += dissim(i, j);
            }
        }
        return Ok(sum / total_pairs as f64);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut sum = 0.0;
    for _ in 0..cfg.pair_samples {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        sum += dissim(i, j);
    }
    Ok(sum / cfg.pair_samples as f64)
}

fn avg_clustering(adj: &[Vec<usize>]) -> f64 {
    let n = adj.len();
    let mut total = 0.0;
    for u in 0..n {
        let d = adj[u].len();
        if d < 2 {
            continue;
        }
        let mut links = 0usize;
        for &v in &adj[u] {
            links += sorted_intersection(&adj[u], &adj[v]);
        }
        // each triangle edge among neighbours was counted twice
        total += links as f64 / (d * (d - 1)) as f64;
    }
    total / n as f64
}

fn sorted_intersection(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

/// Pearson correlation of endpoint degrees over both orientations of every edge.
fn degree_assortativity(adj: &[Vec<usize>]) -> f64 {
    let (mut s, mut s2, mut sxy, mut cnt) = (0.0, 0.0, 0.0, 0.0);
    for nbrs in adj {
        let du = nbrs.len() as f64;
        for &v in nbrs {
            let dv = adj[v].len() as f64;
            s += du;
            s2 += du * du;
            sxy += du * dv;
            cnt += 1.0;
        }
    }
    if cnt == 0.0 {
        return f64::NAN;
    }
    let mean = s / cnt;
    let var = s2 / cnt - mean * mean;
    if var <= 1e-12 * mean.max(1.0).powi(2) {
        return f64::NAN;
    }
    ((sxy / cnt - mean * mean) / var).clamp(-1.0, 1.0)
}

/// Power iteration on `A + I` from a uniform start, L2-normalized.
fn avg_eigenvector_centrality(adj: &[Vec<usize>]) -> f64 {
    let n = adj.len();
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut y = vec![0.0; n];
    for _ in 0..EIGEN_MAX_ITER {
        for u in 0..n {
            y[u] = x[u] + adj[u].iter().map(|&v| x[v]).sum::<f64>();
        }
        let norm = y.iter().map(|a| a * a).sum::<f64>().sqrt();
        let mut residual: f64 = 0.0;
        for u in 0..n {
            y[u] /= norm;
            residual = residual.max((y[u] - x[u]).abs());
        }
        std::mem::swap(&mut x, &mut y);
        if residual <= EIGEN_TOL {
            return x.iter().sum::<f64>() / n as f64;
        }
    }
    tracing::warn!("eigenvector centrality did not converge in {EIGEN_MAX_ITER} iterations");
    f64::NAN
}

/// Component id per node and the component count.
fn components(adj: &[Vec<usize>]) -> (Vec<usize>, usize) {
    let mut comp = vec![usize::MAX; adj.len()];
    let mut count = 0;
    let mut stack = Vec::new();
    for s in 0..adj.len() {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = count;
        stack.push(s);
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if comp[v] == usize::MAX {
                    comp[v] = count;
                    stack.push(v);
                }
            }
        }
        count += 1;
    }
    (comp, count)
}

fn sample_nodes(n: usize, cfg: &SamplingConfig) -> Vec<usize> {
    if n <= cfg.max_nodes {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut s = index::sample(&mut rng, n, cfg.max_nodes).into_vec();
    s.sort_unstable();
    s
}

fn induced_subgraph(adj: &[Vec<usize>], nodes: &[usize]) -> Vec<Vec<usize>> {
    let mut pos = vec![usize::MAX; adj.len()];
    for (i, &u) in nodes.iter().enumerate() {
        pos[u] = i;
    }
    nodes
        .iter()
        .map(|&u| {
            let mut nb: Vec<usize> = adj[u].iter().filter_map(|&v| (pos[v] != usize::MAX).then_some(pos[v])).collect();
            nb.sort_unstable();
            nb
        })
        .collect()
}

struct PathStats {
    avg_betweenness: f64,
    avg_closeness: f64,
    diameter: f64,
    avg_shortest_path: f64,
}

/// Brandes betweenness, closeness and LCC distance statistics from one BFS per source.
fn path_statistics(adj: &[Vec<usize>]) -> PathStats {
    let n = adj.len();
    let (comp, ncomp) = components(adj);
    let mut sizes = vec![0usize; ncomp];
    for &c in &comp {
        sizes[c] += 1;
    }
    // largest component; ties go to the one containing the smallest node index
    let lcc = (0..ncomp).max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a))).unwrap_or(0);
    let lcc_size = sizes.get(lcc).copied().unwrap_or(0);

    let mut betweenness = vec![0.0f64; n];
    let mut closeness_sum = 0.0;
    let mut diameter = 0usize;
    let mut lcc_dist_sum = 0u64;

    let mut dist = vec![usize::MAX; n];
    let mut sigma = vec![0.0f64; n];
    let mut delta = vec![0.0f64; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    for s in 0..n {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        sigma.iter_mut().for_each(|x| *x = 0.0);
        delta.iter_mut().for_each(|x| *x = 0.0);
        order.clear();
        dist[s] = 0;
        sigma[s] = 1.0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
                if dist[v] == dist[u] + 1 {
                    sigma[v] += sigma[u];
                }
            }
        }
        for &w in order.iter().rev() {
            for &v in &adj[w] {
                if dist[v] != usize::MAX && dist[v] + 1 == dist[w] {
                    delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
                }
            }
            if w != s {
                betweenness[w] += delta[w];
            }
        }

        let reach = order.len();
        let total: usize = order.iter().map(|&u| dist[u]).sum();
        if total > 0 && n > 1 {
            let r = (reach - 1) as f64;
            closeness_sum += r / total as f64 * (r / (n - 1) as f64);
        }
        if comp[s] == lcc {
            lcc_dist_sum += total as u64;
            diameter = diameter.max(order.iter().map(|&u| dist[u]).max().unwrap_or(0));
        }
    }

    let avg_betweenness = if n > 2 {
        // each unordered pair was accumulated from both endpoints
        let scale = 1.0 / ((n - 1) * (n - 2)) as f64;
        betweenness.iter().map(|b| b * scale).sum::<f64>() / n as f64
    } else {
        0.0
    };
    let avg_shortest_path = if lcc_size > 1 {
        lcc_dist_sum as f64 / (lcc_size * (lcc_size - 1)) as f64
    } else {
        0.0
    };
    PathStats {
        avg_betweenness,
        avg_closeness: closeness_sum / n as f64,
        diameter: diameter as f64,
        avg_shortest_path,
    }
}
