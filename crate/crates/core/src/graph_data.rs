//! In-memory graph datasets and the on-disk dataset directory format.
//!
//! A dataset directory holds:
//!
//! - `meta.json`: `name`, `num_nodes`, `num_edges`, `feature_dim`, `num_classes`, `metric`,
//!   optional `description`
//! - `edges.tsv`: one `u<TAB>v` pair per line, 0-based node indices
//! - `features.csv`: `num_nodes` rows of `feature_dim` comma-separated decimals
//! - `labels.tsv` (optional): one integer per line, `-1` for unlabeled nodes
//! - `splits.json` (optional): `{"train": [...], "val": [...], "test": [...]}`
//!
//! Graphs are undirected and unweighted. Edges are canonicalized on load: self-loops are
//! dropped and each undirected edge is stored once as `(min, max)`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense feature matrices above this many cells trigger a memory warning at load.
const DENSE_WARN_CELLS: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Accuracy,
    Rocauc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub num_nodes: usize,
    /// Edge count as declared by the source (raw edge lines, before canonicalization).
    pub num_edges: usize,
    pub feature_dim: usize,
    pub num_classes: usize,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Row-major dense feature matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Features {
    dim: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::Mismatch(format!(
                "feature buffer holds {} values, expected {rows} x {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::Mismatch(format!(
                    "feature row {i} has {} values, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphDataset {
    pub name: String,
    pub num_nodes: usize,
    /// Canonical undirected edges, `(min, max)` sorted, no duplicates or self-loops.
    pub edges: Vec<(usize, usize)>,
    pub features: Features,
    pub labels: Option<Vec<i64>>,
    pub num_classes: usize,
    pub metric: Metric,
    pub description: Option<String>,
    pub splits: Option<Splits>,
}

impl GraphDataset {
    /// Builds a dataset from raw parts, canonicalizing edges and checking invariants.
    pub fn new(
        name: impl Into<String>,
        num_nodes: usize,
        raw_edges: &[(usize, usize)],
        features: Features,
        labels: Option<Vec<i64>>,
    ) -> Result<Self> {
        let edges = canonicalize(raw_edges, num_nodes)?;
        if features.dim() > 0 && features.rows() != num_nodes {
            return Err(Error::Mismatch(format!(
                "feature matrix has {} rows for {num_nodes} nodes",
                features.rows()
            )));
        }
        let num_classes = labels
            .as_ref()
            .and_then(|l| l.iter().copied().max())
            .map_or(0, |m| (m + 1).max(0) as usize);
        if let Some(l) = &labels {
            if l.len() != num_nodes {
                return Err(Error::Mismatch(format!(
                    "{} labels for {num_nodes} nodes",
                    l.len()
                )));
            }
            if let Some(bad) = l.iter().find(|&&v| v < -1) {
                return Err(Error::InvalidInput(format!("label {bad} below -1")));
            }
        }
        Ok(Self {
            name: name.into(),
            num_nodes,
            edges,
            features,
            labels,
            num_classes,
            metric: Metric::Accuracy,
            description: None,
            splits: None,
        })
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.dim()
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            name: self.name.clone(),
            num_nodes: self.num_nodes,
            num_edges: self.edges.len(),
            feature_dim: self.feature_dim(),
            num_classes: self.num_classes,
            metric: self.metric,
            description: self.description.clone(),
        }
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.num_nodes];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    /// Sorted neighbor lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for n in &mut adj {
            n.sort_unstable();
        }
        adj
    }
}

/// Removes self-loops, merges duplicates in either direction and sorts the result.
pub fn canonicalize(raw_edges: &[(usize, usize)], num_nodes: usize) -> Result<Vec<(usize, usize)>> {
    let mut set = BTreeSet::new();
    for (i, &(u, v)) in raw_edges.iter().enumerate() {
        for idx in [u, v] {
            if idx >= num_nodes {
                return Err(Error::IndexOutOfRange {
                    file: "<edges>".into(),
                    line: i + 1,
                    index: idx,
                    num_nodes,
                });
            }
        }
        if u != v {
            set.insert((u.min(v), u.max(v)));
        }
    }
    Ok(set.into_iter().collect())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<GraphDataset> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let meta_path = dir.join("meta.json");
    let meta: DatasetMeta = serde_json::from_str(&read_text(&meta_path)?)
        .map_err(|e| Error::json(meta_path.display().to_string(), e))?;
    let n = meta.num_nodes;

    let edges_path = dir.join("edges.tsv");
    let edge_text = read_text(&edges_path)?;
    let mut raw = Vec::new();
    for (line_no, line) in content_lines(&edge_text) {
        let mut it = line.split_whitespace();
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::parse(&edges_path, line_no, format!("expected two node indices, got {line:?}")));
        };
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::parse(&edges_path, line_no, format!("bad node index {s:?}")))
        };
        let (u, v) = (parse(a)?, parse(b)?);
        for idx in [u, v] {
            if idx >= n {
                return Err(Error::IndexOutOfRange {
                    file: edges_path.clone(),
                    line: line_no,
                    index: idx,
                    num_nodes: n,
                });
            }
        }
        raw.push((u, v));
    }
    if raw.len() != meta.num_edges {
        return Err(Error::Mismatch(format!(
            "{} declares {} edges but {} has {} edge lines",
            meta_path.display(),
            meta.num_edges,
            edges_path.display(),
            raw.len()
        )));
    }

    let feat_path = dir.join("features.csv");
    if n.saturating_mul(meta.feature_dim) > DENSE_WARN_CELLS {
        tracing::warn!(
            cells = n * meta.feature_dim,
            "densifying a large feature matrix; expect ~{} MiB",
            n * meta.feature_dim * 8 / (1 << 20)
        );
    }
    let feat_text = read_text(&feat_path)?;
    let mut data = Vec::with_capacity(n * meta.feature_dim);
    let mut rows = 0usize;
    for (line_no, line) in content_lines(&feat_text) {
        let before = data.len();
        for cell in line.split(',') {
            let cell = cell.trim();
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::parse(&feat_path, line_no, format!("bad feature value {cell:?}")))?;
            data.push(v);
        }
        if data.len() - before != meta.feature_dim {
            return Err(Error::parse(
                &feat_path,
                line_no,
                format!("{} values, expected {}", data.len() - before, meta.feature_dim),
            ));
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::Mismatch(format!(
            "{} has {rows} rows for {n} nodes",
            feat_path.display()
        )));
    }
    let features = Features::new(n, meta.feature_dim, data)?;

    let labels_path = dir.join("labels.tsv");
    let labels = if labels_path.exists() {
        let text = read_text(&labels_path)?;
        let mut labels = Vec::with_capacity(n);
        for (line_no, line) in content_lines(&text) {
            let v: i64 = line
                .parse()
                .map_err(|_| Error::parse(&labels_path, line_no, format!("bad label {line:?}")))?;
            if v < -1 || v >= meta.num_classes as i64 {
                return Err(Error::parse(
                    &labels_path,
                    line_no,
                    format!("label {v} outside [-1, {})", meta.num_classes),
                ));
            }
            labels.push(v);
        }
        if labels.len() != n {
            return Err(Error::Mismatch(format!(
                "{} has {} labels for {n} nodes",
                labels_path.display(),
                labels.len()
            )));
        }
        Some(labels)
    } else {
        None
    };

    let splits_path = dir.join("splits.json");
    let splits = if splits_path.exists() {
        let s: Splits = serde_json::from_str(&read_text(&splits_path)?)
            .map_err(|e| Error::json(splits_path.display().to_string(), e))?;
        if let Some(bad) = s.train.iter().chain(&s.val).chain(&s.test).find(|&&i| i >= n) {
            return Err(Error::InvalidInput(format!(
                "{}: split index {bad} out of range for {n} nodes",
                splits_path.display()
            )));
        }
        Some(s)
    } else {
        None
    };

    let edges = canonicalize(&raw, n)?;
    Ok(GraphDataset {
        name: meta.name,
        num_nodes: n,
        edges,
        features,
        labels,
        num_classes: meta.num_classes,
        metric: meta.metric,
        description: meta.description,
        splits,
    })
}

/// Writes `ds` in the directory format read by [`load_dataset`].
pub fn save_dataset(ds: &GraphDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: String| {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| Error::io(p, e))
    };
    let meta = ds.meta();
    write(
        "meta.json",
        serde_json::to_string_pretty(&meta).map_err(|e| Error::json("meta.json", e))?,
    )?;

    let mut edges = String::new();
    for &(u, v) in &ds.edges {
        let _ = writeln!(edges, "{u}\t{v}");
    }
    write("edges.tsv", edges)?;

    let mut feats = String::new();
    for i in 0..ds.num_nodes {
        let row = if ds.feature_dim() == 0 { &[][..] } else { ds.features.row(i) };
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        feats.push_str(&cells.join(","));
        feats.push('\n');
    }
    write("features.csv", feats)?;

    if let Some(labels) = &ds.labels {
        let mut s = String::new();
        for l in labels {
            let _ = writeln!(s, "{l}");
        }
        write("labels.tsv", s)?;
    }
    if let Some(splits) = &ds.splits {
        write(
            "splits.json",
            serde_json::to_string(splits).map_err(|e| Error::json("splits.json", e))?,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn triangle() -> GraphDataset {
        let f = Features::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap();
        GraphDataset::new("triangle", 3, &[(0, 1), (1, 2), (0, 2)], f, Some(vec![0, 1, 1])).unwrap()
    }

    #[test]
    fn canonicalize_examples() {
        assert_eq!(canonicalize(&[(1, 0), (0, 1), (2, 2)], 3).unwrap(), vec![(0, 1)]);
        assert_eq!(canonicalize(&[], 0).unwrap(), vec![]);
        assert_eq!(canonicalize(&[(2, 1), (0, 2)], 3).unwrap(), vec![(0, 2), (1, 2)]);
        assert!(matches!(canonicalize(&[(0, 5)], 3), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn triangle_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = triangle();
        save_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back.num_nodes, 3);
        assert_eq!(back.num_edges(), 3);
        assert_eq!(back, ds);
    }

    #[test]
    fn out_of_range_edge_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let mut ds = triangle();
        ds.num_nodes = 4;
        ds.features = Features::zeros(4, 2);
        ds.labels = None;
        save_dataset(&ds, dir.path()).unwrap();
        let meta = r#"{"name":"t","num_nodes":4,"num_edges":2,"feature_dim":2,"num_classes":2,"metric":"accuracy"}"#;
        fs::write(dir.path().join("meta.json"), meta).unwrap();
        fs::write(dir.path().join("edges.tsv"), "0\t1\n5 2\n").unwrap();
        match load_dataset(dir.path()) {
            Err(Error::IndexOutOfRange { line, index, num_nodes, .. }) => {
                assert_eq!((line, index, num_nodes), (2, 5, 4));
            }
            other => panic!("expected out-of-range, got {other:?}"),
        }
    }

    #[test]
    fn malformed_and_missing_inputs() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_dataset(dir.path().join("nope")), Err(Error::MissingFile(_))));
        save_dataset(&triangle(), dir.path()).unwrap();
        fs::write(dir.path().join("features.csv"), "1,0\n0,x\n0.5,0.5\n").unwrap();
        match load_dataset(dir.path()) {
            Err(Error::Parse { line, file, .. }) => {
                assert_eq!(line, 2);
                assert!(file.ends_with("features.csv"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        fs::write(dir.path().join("features.csv"), "1,0\n0,1\n").unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Mismatch(_))));
        fs::remove_file(dir.path().join("edges.tsv")).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::MissingFile(_))));
    }

    #[test]
    fn labels_out_of_class_range_rejected() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&triangle(), dir.path()).unwrap();
        fs::write(dir.path().join("labels.tsv"), "0\n1\n7\n").unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn directed_duplicates_symmetrized_on_load() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&triangle(), dir.path()).unwrap();
        let meta = r#"{"name":"t","num_nodes":3,"num_edges":5,"feature_dim":2,"num_classes":2}"#;
        fs::write(dir.path().join("meta.json"), meta).unwrap();
        fs::write(dir.path().join("edges.tsv"), "0\t1\n1\t0\n1\t2\n2\t2\n2\t0\n").unwrap();
        let ds = load_dataset(dir.path()).unwrap();
        assert_eq!(ds.edges, vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(ds.metric, Metric::Accuracy);
    }

    proptest! {
        #[test]
        fn canonicalize_idempotent_and_degree_sum(
            n in 1usize..30,
            raw in proptest::collection::vec((0usize..30, 0usize..30), 0..80),
        ) {
            let raw: Vec<_> = raw.into_iter().map(|(u, v)| (u % n, v % n)).collect();
            let once = canonicalize(&raw, n).unwrap();
            prop_assert_eq!(&canonicalize(&once, n).unwrap(), &once);
            let ds = GraphDataset::new("p", n, &raw, Features::zeros(n, 1), None).unwrap();
            prop_assert_eq!(ds.degrees().iter().sum::<usize>(), 2 * ds.num_edges());
        }
    }
}
