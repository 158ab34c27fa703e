mod common;

use common::{brute_properties, rel_err, RawGraph};
use gnn_designer::graph_data::{Features, GraphDataset};
use gnn_designer::properties::{compute_properties, feature_diversity, label_homophily, Property, SamplingConfig};

fn tol(p: Property) -> f64 {
    match p {
        Property::Assortativity | Property::AvgEigenvector => 1e-6,
        _ => 1e-9,
    }
}

#[test]
fn random_small_graphs_match_brute_force() {
    let cfg = SamplingConfig::default();
    for seed in 0..25 {
        let raw = RawGraph::random(seed, 30);
        let got = compute_properties(&raw.dataset(), &cfg).unwrap();
        let want = brute_properties(&raw);
        for p in Property::ALL {
            let e = rel_err(got.get(p), want[p.index()]);
            assert!(e <= tol(p), "seed {seed} {}: got {} want {} (rel {e:e})", p.name(), got.get(p), want[p.index()]);
        }
    }
}

#[test]
fn twenty_node_graph_full_reference() {
    let raw = RawGraph::random(1234, 20);
    let cfg = SamplingConfig { max_nodes: 20, ..Default::default() };
    let got = compute_properties(&raw.dataset(), &cfg).unwrap();
    let want = brute_properties(&raw);
    for p in Property::ALL {
        assert!(rel_err(got.get(p), want[p.index()]) <= tol(p), "{}", p.name());
    }
    assert_eq!(got.sample_size, raw.n);
}

fn graph(n: usize, edges: &[(usize, usize)], labels: Option<Vec<i64>>) -> GraphDataset {
    GraphDataset::new("g", n, edges, Features::from_rows(&vec![vec![1.0, 0.5]; n]).unwrap(), labels).unwrap()
}

#[test]
fn analytic_examples() {
    let cfg = SamplingConfig::default();
    let tri = compute_properties(&graph(3, &[(0, 1), (1, 2), (0, 2)], None), &cfg).unwrap();
    assert_eq!(tri.get(Property::AvgClustering), 1.0);
    assert_eq!(tri.get(Property::Density), 1.0);
    assert_eq!(tri.get(Property::GraphDiameter), 1.0);
    assert_eq!(tri.get(Property::ConnectedComponents), 1.0);

    let p4 = compute_properties(&graph(4, &[(0, 1), (1, 2), (2, 3)], None), &cfg).unwrap();
    assert_eq!(p4.get(Property::GraphDiameter), 3.0);
    assert_eq!(p4.get(Property::AvgDegree), 1.5);
    assert_eq!(p4.get(Property::AvgClustering), 0.0);

    let star = graph(5, &[(0, 1), (0, 2), (0, 3), (0, 4)], Some(vec![0, 1, 1, 1, 1]));
    assert_eq!(label_homophily(&star), 0.0);
}

#[test]
fn homophily_examples() {
    assert_eq!(label_homophily(&graph(2, &[(0, 1)], Some(vec![1, 1]))), 1.0);
    assert_eq!(label_homophily(&graph(3, &[(0, 1), (1, 2)], Some(vec![0, 0, 1]))), 0.5);
    assert!(label_homophily(&graph(3, &[(0, 1)], Some(vec![-1, 0, 0]))).is_nan());
    assert!(label_homophily(&graph(3, &[(0, 1)], None)).is_nan());
}

#[test]
fn two_block_homophily_matches_edge_enumeration() {
    let n = 50;
    let block = |u: usize| (u >= 25) as i64;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let same = block(u) == block(v);
            if (u * 7 + v * 13) % if same { 3 } else { 11 } == 0 {
                edges.push((u, v));
            }
        }
    }
    let labels: Vec<i64> = (0..n).map(block).collect();
    let g = graph(n, &edges, Some(labels.clone()));
    let same = g.edges.iter().filter(|&&(u, v)| labels[u] == labels[v]).count();
    assert_eq!(label_homophily(&g), same as f64 / g.edges.len() as f64);
}

#[test]
fn feature_diversity_examples() {
    let cfg = SamplingConfig::default();
    let same = GraphDataset::new("s", 4, &[], Features::from_rows(&vec![vec![2.0, 1.0]; 4]).unwrap(), None).unwrap();
    assert!(feature_diversity(&same, &cfg).unwrap().abs() < 1e-15);
    let ortho = GraphDataset::new("o", 2, &[], Features::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(), None).unwrap();
    assert_eq!(feature_diversity(&ortho, &cfg).unwrap(), 1.0);

    let raw = RawGraph::random(99, 10);
    let g = GraphDataset::new("r", 10, &[], Features::from_rows(&raw.features[..raw.n.min(10)]).unwrap(), None);
    if let Ok(g) = g {
        let want = brute_properties(&RawGraph { n: g.num_nodes, edges: vec![], features: raw.features[..g.num_nodes].to_vec(), labels: vec![-1; g.num_nodes] });
        let got = feature_diversity(&g, &SamplingConfig { pair_samples: 45, ..Default::default() }).unwrap();
        assert!(rel_err(got, want[Property::FeatureDiversity.index()]) < 1e-12);
    }
}

#[test]
fn sampled_equals_exact_below_threshold() {
    let raw = RawGraph::random(5, 30);
    let g = raw.dataset();
    let a = compute_properties(&g, &SamplingConfig { max_nodes: raw.n, seed: 1, ..Default::default() }).unwrap();
    let b = compute_properties(&g, &SamplingConfig { max_nodes: 1000, seed: 9, ..Default::default() }).unwrap();
    assert_eq!(a.values.map(f64::to_bits), b.values.map(f64::to_bits));
}

#[test]
fn sampling_records_size_and_is_deterministic() {
    let edges: Vec<(usize, usize)> = (0..49).map(|i| (i, i + 1)).collect();
    let g = graph(50, &edges, None);
    let cfg = SamplingConfig { max_nodes: 10, ..Default::default() };
    let a = compute_properties(&g, &cfg).unwrap();
    let b = compute_properties(&g, &cfg).unwrap();
    assert_eq!(a.sample_size, 10);
    assert!(a.bit_eq(&b));
    assert_eq!(a.get(Property::NodeCount), 50.0);
}
