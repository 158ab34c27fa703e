//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;

use gnn_designer::graph_data::{Features, GraphDataset};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Tau-b by counting every pair.
pub fn brute_tau_b(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let (mut conc, mut disc, mut ties_a, mut ties_b) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let da = (a[i] - a[j]).signum() * f64::from(a[i] != a[j]);
            let db = (b[i] - b[j]).signum() * f64::from(b[i] != b[j]);
            if da == 0.0 {
                ties_a += 1;
            }
            if db == 0.0 {
                ties_b += 1;
            }
            if da * db > 0.0 {
                conc += 1;
            } else if da * db < 0.0 {
                disc += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom = (((n0 - ties_a) * (n0 - ties_b)) as f64).sqrt();
    if denom == 0.0 {
        return f64::NAN;
    }
    (conc - disc) as f64 / denom
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// A raw random graph: node count, raw edge list (may contain duplicates, reversed pairs and
/// self-loops), feature rows and labels.
pub struct RawGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<i64>,
}

impl RawGraph {
    pub fn random(seed: u64, max_n: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(3..=max_n);
        let p = rng.random_range(0.08..0.4);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if u < v && rng.random_bool(p) {
                    edges.push(if rng.random_bool(0.5) { (u, v) } else { (v, u) });
                }
            }
        }
        for _ in 0..rng.random_range(0..4) {
            let u = rng.random_range(0..n);
            edges.push((u, u));
            if let Some(&e) = edges.first() {
                edges.push((e.1, e.0));
            }
        }
        let dim = rng.random_range(1..6);
        let features = (0..n)
            .map(|_| {
                if rng.random_bool(0.1) {
                    vec![0.0; dim]
                } else {
                    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
                }
            })
            .collect();
        let labels = (0..n).map(|_| rng.random_range(-1..3)).collect();
        Self { n, edges, features, labels }
    }

    pub fn dataset(&self) -> GraphDataset {
        GraphDataset::new("rand", self.n, &self.edges, Features::from_rows(&self.features).unwrap(), Some(self.labels.clone()))
            .unwrap()
    }
}

fn adjacency_matrix(g: &RawGraph) -> Vec<Vec<bool>> {
    let mut a = vec![vec![false; g.n]; g.n];
    for &(u, v) in &g.edges {
        if u != v {
            a[u][v] = true;
            a[v][u] = true;
        }
    }
    a
}

const INF: usize = usize::MAX / 4;

fn floyd(a: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let n = a.len();
    let mut d = vec![vec![INF; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            if a[i][j] {
                d[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

/// Shortest-path counts from the distance matrix, level by level.
fn path_counts(a: &[Vec<bool>], d: &[Vec<usize>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut sigma = vec![vec![0.0; n]; n];
    for s in 0..n {
        sigma[s][s] = 1.0;
        let maxd = (0..n).filter(|&t| d[s][t] < INF).map(|t| d[s][t]).max().unwrap_or(0);
        for level in 1..=maxd {
            for t in 0..n {
                if d[s][t] == level {
                    sigma[s][t] = (0..n).filter(|&u| a[u][t] && d[s][u] + 1 == level).map(|u| sigma[s][u]).sum();
                }
            }
        }
    }
    sigma
}

fn union_find_components(a: &[Vec<bool>]) -> Vec<usize> {
    let n = a.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for i in 0..n {
        for j in 0..n {
            if a[i][j] {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    (0..n).map(|i| find(&mut parent, i)).collect()
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return f64::NAN;
    }
    cov / (vx * vy).sqrt()
}

/// Mean entry of the unit-norm projection of the uniform vector onto the top eigenspace of
/// the adjacency matrix (the fixed point of power iteration on `A + I`).
fn eigenvector_mean(a: &[Vec<bool>]) -> f64 {
    let n = a.len();
    let m = DMatrix::from_fn(n, n, |i, j| f64::from(u8::from(a[i][j])) + if i == j { 1.0 } else { 0.0 });
    let eig = SymmetricEigen::new(m);
    let top = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let u = nalgebra::DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut proj = nalgebra::DVector::zeros(n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if (lam - top).abs() < 1e-9 {
            let v = eig.eigenvectors.column(k);
            proj += v * v.dot(&u);
        }
    }
    let norm = proj.norm();
    proj.iter().sum::<f64>() / norm / n as f64
}

/// All 16 properties with no sampling, in canonical order.
pub fn brute_properties(g: &RawGraph) -> [f64; 16] {
    let n = g.n;
    let nf = n as f64;
    let a = adjacency_matrix(g);
    let deg: Vec<usize> = a.iter().map(|r| r.iter().filter(|&&x| x).count()).collect();
    let m = deg.iter().sum::<usize>() / 2;

    let clustering = (0..n)
        .map(|u| {
            let nb: Vec<usize> = (0..n).filter(|&v| a[u][v]).collect();
            if nb.len() < 2 {
                return 0.0;
            }
            let mut tri = 0;
            for i in 0..nb.len() {
                for j in i + 1..nb.len() {
                    tri += usize::from(a[nb[i]][nb[j]]);
                }
            }
            tri as f64 / (nb.len() * (nb.len() - 1) / 2) as f64
        })
        .sum::<f64>()
        / nf;

    let d = floyd(&a);
    let sigma = path_counts(&a, &d);
    let mut betw = vec![0.0; n];
    for s in 0..n {
        for t in s + 1..n {
            if d[s][t] >= INF {
                continue;
            }
            for v in 0..n {
                if v != s && v != t && d[s][v] + d[v][t] == d[s][t] {
                    betw[v] += sigma[s][v] * sigma[v][t] / sigma[s][t];
                }
            }
        }
    }
    let avg_betw = if n > 2 {
        betw.iter().map(|b| b * 2.0 / ((nf - 1.0) * (nf - 2.0))).sum::<f64>() / nf
    } else {
        0.0
    };

    let closeness = (0..n)
        .map(|u| {
            let reach: Vec<usize> = (0..n).filter(|&v| v != u && d[u][v] < INF).collect();
            let tot: usize = reach.iter().map(|&v| d[u][v]).sum();
            if tot == 0 {
                0.0
            } else {
                let r = reach.len() as f64;
                (r / tot as f64) * (r / (nf - 1.0))
            }
        })
        .sum::<f64>()
        / nf;

    let comp = union_find_components(&a);
    let mut roots: Vec<usize> = comp.clone();
    roots.sort_unstable();
    roots.dedup();
    let size = |r: usize| comp.iter().filter(|&&c| c == r).count();
    // largest component, ties to the one holding the lowest node index (roots are minima)
    let lcc = roots.iter().copied().fold(None, |best: Option<usize>, r| match best {
        Some(b) if size(b) >= size(r) => Some(b),
        _ => Some(r),
    });
    let members: Vec<usize> = (0..n).filter(|&v| Some(comp[v]) == lcc).collect();
    let mut diam = 0usize;
    let mut dsum = 0usize;
    for &u in &members {
        for &v in &members {
            diam = diam.max(d[u][v]);
            dsum += d[u][v];
        }
    }
    let k = members.len();
    let asp = if k > 1 { dsum as f64 / (k * (k - 1)) as f64 } else { 0.0 };

    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for u in 0..n {
        for v in 0..n {
            if a[u][v] {
                xs.push(deg[u] as f64);
                ys.push(deg[v] as f64);
            }
        }
    }
    let assort = if xs.is_empty() { f64::NAN } else { pearson(&xs, &ys) };

    let dim = g.features.first().map_or(0, Vec::len);
    let cos_dis = |x: &[f64], y: &[f64]| {
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        match (nx == 0.0, ny == 0.0) {
            (true, true) => 0.0,
            (true, false) | (false, true) => 1.0,
            _ => 1.0 - x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>() / (nx * ny),
        }
    };
    let mut fd = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            fd += cos_dis(&g.features[i], &g.features[j]);
        }
    }
    let fd = fd / (n * (n - 1) / 2) as f64;

    let (mut same, mut lab) = (0, 0);
    for u in 0..n {
        for v in u + 1..n {
            if a[u][v] && g.labels[u] >= 0 && g.labels[v] >= 0 {
                lab += 1;
                same += usize::from(g.labels[u] == g.labels[v]);
            }
        }
    }
    let homophily = if lab == 0 { f64::NAN } else { same as f64 / lab as f64 };

    [
        clustering,
        avg_betw,
        m as f64 / (nf * (nf - 1.0) / 2.0),
        deg.iter().map(|&x| x as f64 / (nf - 1.0)).sum::<f64>() / nf,
        closeness,
        deg.iter().sum::<usize>() as f64 / nf,
        m as f64,
        diam as f64,
        asp,
        assort,
        eigenvector_mean(&a),
        dim as f64,
        nf,
        fd,
        roots.len() as f64,
        homophily,
    ]
}

/// Relative error with NaN equal to NaN and an absolute floor near zero.
pub fn rel_err(x: f64, y: f64) -> f64 {
    if x.is_nan() && y.is_nan() {
        return 0.0;
    }
    if x.is_nan() || y.is_nan() {
        return f64::INFINITY;
    }
    (x - y).abs() / y.abs().max(1e-9)
}

/// Confidence recomputed from `bench.csv` and `properties/*.json` with plain parsing:
/// per-anchor tau-b between normalized distances and negated best transfer performance,
/// then the NaN-skipping average. Returns (per_anchor, averaged).
pub fn recompute_confidence(
    dir: &std::path::Path,
    n_m: usize,
) -> (std::collections::BTreeMap<String, [f64; 16]>, [f64; 16]) {
    use std::collections::BTreeMap;
    let mut perf: BTreeMap<String, BTreeMap<(String, String), f64>> = BTreeMap::new();
    let mut rdr = csv::Reader::from_path(dir.join("bench.csv")).unwrap();
    for row in rdr.records() {
        let row = row.unwrap();
        perf.entry(row[0].to_string())
            .or_default()
            .insert((row[1].to_string(), row[2].to_string()), row[3].parse().unwrap());
    }
    let mut props: BTreeMap<String, [f64; 16]> = BTreeMap::new();
    for e in std::fs::read_dir(dir.join("properties")).unwrap() {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(e.unwrap().path()).unwrap()).unwrap();
        let vals = v["values"].as_object().unwrap();
        let arr: Vec<f64> = CANONICAL.iter().map(|k| vals[*k].as_f64().unwrap_or(f64::NAN)).collect();
        props.insert(v["dataset"].as_str().unwrap().to_string(), arr.try_into().unwrap());
    }
    let names: Vec<String> = props.keys().cloned().collect();
    let top = |j: &str| {
        let mut r: Vec<(&(String, String), &f64)> = perf[j].iter().collect();
        r.sort_by(|a, b| b.1.partial_cmp(a.1).unwrap());
        r.into_iter().take(n_m).map(|(k, _)| k.clone()).collect::<Vec<_>>()
    };
    let (mut lo, mut hi) = ([f64::INFINITY; 16], [f64::NEG_INFINITY; 16]);
    for v in props.values() {
        for k in 0..16 {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    let norm = |k: usize, x: f64| if hi[k] > lo[k] { (x - lo[k]) / (hi[k] - lo[k]) } else { 0.0 };
    let mut per_anchor = BTreeMap::new();
    for i in &names {
        let others: Vec<&String> = names.iter().filter(|j| *j != i).collect();
        let neg_er: Vec<f64> = others
            .iter()
            .map(|j| -top(j).iter().map(|a| perf[i][a]).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let mut row = [0.0; 16];
        for k in 0..16 {
            let d: Vec<f64> = others.iter().map(|j| (norm(k, props[i][k]) - norm(k, props[*j][k])).abs()).collect();
            row[k] = brute_tau_b(&d, &neg_er);
        }
        per_anchor.insert(i.clone(), row);
    }
    let mut avg = [0.0; 16];
    for k in 0..16 {
        let vals: Vec<f64> = per_anchor.values().map(|r| r[k]).filter(|x: &f64| !x.is_nan()).collect();
        avg[k] = if vals.is_empty() { f64::NAN } else { vals.iter().sum::<f64>() / vals.len() as f64 };
    }
    (per_anchor, avg)
}

pub const CANONICAL: [&str; 16] = [
    "avg_clustering", "avg_betweenness", "density", "avg_degree_centrality", "avg_closeness", "avg_degree",
    "edge_count", "graph_diameter", "avg_shortest_path", "assortativity", "avg_eigenvector", "feature_dim",
    "node_count", "feature_diversity", "connected_components", "label_homophily",
];

pub fn bundled(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

/// Default-config simulated run on a planted bank with the unseen held out.
pub fn planted_config(seed: u64) -> gnn_designer::pipeline::PipelineConfig {
    gnn_designer::pipeline::PipelineConfig {
        seed,
        leave_one_out: Some(gnn_designer::synthetic::PLANTED_UNSEEN.into()),
        simulate: true,
        ..Default::default()
    }
}

pub fn planted_run(
    p: &gnn_designer::synthetic::Planted,
    cfg: gnn_designer::pipeline::PipelineConfig,
    out: Option<&Path>,
) -> gnn_designer::pipeline::DesignOutcome {
    let d = gnn_designer::pipeline::Designer::new(cfg, std::sync::Arc::new(p.table.clone()), None, None).unwrap();
    d.run(out, false).unwrap()
}

/// Best-so-far of uniform random search without replacement over the planted universe.
pub fn random_search_curve(p: &gnn_designer::synthetic::Planted, seed: u64, budget: usize) -> Vec<f64> {
    use rand::seq::SliceRandom;
    let mut all: Vec<_> = p.universe.iter().copied().collect();
    all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut best = f64::NEG_INFINITY;
    all.iter()
        .take(budget)
        .map(|a| {
            best = best.max(p.unseen_perf(a));
            best
        })
        .collect()
}

/// Every file under `dir`, recursively, as (path, contents).
pub fn read_tree(dir: &Path) -> Vec<(std::path::PathBuf, String)> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(read_tree(&p));
        } else {
            out.push((p.clone(), String::from_utf8_lossy(&std::fs::read(&p).unwrap()).into_owned()));
        }
    }
    out.sort();
    out
}
