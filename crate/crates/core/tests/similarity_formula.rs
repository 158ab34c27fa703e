use std::collections::BTreeMap;

use gnn_designer::knowledge_base::{ConfidenceTable, ErMode};
use gnn_designer::properties::{NormBounds, Property, PropertyValues, PropertyVector, NUM_PROPERTIES};
use gnn_designer::similarity::{similarity_score, WeightSource, WeightVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn conf(selected: &[Property], averaged: &[f64]) -> ConfidenceTable {
    let mut avg = [0.0; NUM_PROPERTIES];
    for (p, a) in selected.iter().zip(averaged) {
        avg[p.index()] = *a;
    }
    ConfidenceTable {
        anchors: vec![],
        per_anchor: BTreeMap::new(),
        averaged: PropertyValues(avg),
        selected: selected.to_vec(),
        n_m: 1,
        er_mode: ErMode::Best,
        er_proxy: true,
    }
}

fn pv(name: &str, values: [f64; NUM_PROPERTIES]) -> PropertyVector {
    PropertyVector { dataset: name.into(), values, sample_seed: 0, sample_size: 0 }
}

fn weights(selected: &[Property], w: &[f64]) -> WeightVector {
    WeightVector { weights: selected.iter().copied().zip(w.iter().copied()).collect(), source: WeightSource::Llm, raw_response: None }
}

#[test]
fn worked_example() {
    let sel = [Property::Density, Property::AvgDegree];
    let c = conf(&sel, &[0.4, 0.2]);
    let mut u = [0.0; NUM_PROPERTIES];
    let mut s = [0.0; NUM_PROPERTIES];
    u[Property::AvgDegree.index()] = 0.0;
    s[Property::AvgDegree.index()] = 1.0;
    u[Property::Density.index()] = 0.3;
    s[Property::Density.index()] = 0.3;
    let bounds = NormBounds::from_vectors([&pv("u", u), &pv("s", s)]);
    let r = similarity_score(&pv("u", u), &pv("s", s), &c, &weights(&sel, &[1.0, 0.5]), &bounds).unwrap();
    assert!((r.score - 0.225).abs() < 1e-12);
}

#[test]
fn randomized_instances_match_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let n_f = rng.random_range(1..=NUM_PROPERTIES);
        let mut idx: Vec<usize> = (0..NUM_PROPERTIES).collect();
        for i in 0..n_f {
            let j = rng.random_range(i..NUM_PROPERTIES);
            idx.swap(i, j);
        }
        let sel: Vec<Property> = idx[..n_f].iter().map(|&i| Property::ALL[i]).collect();
        let avg: Vec<f64> = (0..n_f).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..n_f).map(|_| rng.random_range(0.0..1.0)).collect();
        let (mut u, mut s) = ([0.0; NUM_PROPERTIES], [0.0; NUM_PROPERTIES]);
        for k in 0..NUM_PROPERTIES {
            u[k] = rng.random_range(-5.0..5.0);
            s[k] = rng.random_range(-5.0..5.0);
        }
        let others: Vec<PropertyVector> = (0..3)
            .map(|i| pv(&format!("o{i}"), std::array::from_fn(|_| rng.random_range(-10.0..10.0))))
            .collect();
        let bounds = NormBounds::from_vectors(others.iter().chain([&pv("u", u), &pv("s", s)]));
        let got = similarity_score(&pv("u", u), &pv("s", s), &conf(&sel, &avg), &weights(&sel, &w), &bounds).unwrap();

        let mut direct = 0.0;
        for (i, p) in sel.iter().enumerate() {
            let k = p.index();
            let lo = others.iter().map(|o| o.values[k]).chain([u[k], s[k]]).fold(f64::INFINITY, f64::min);
            let hi = others.iter().map(|o| o.values[k]).chain([u[k], s[k]]).fold(f64::NEG_INFINITY, f64::max);
            let d = ((u[k] - lo) / (hi - lo) - (s[k] - lo) / (hi - lo)).abs();
            direct += w[i] * avg[i] / (1.0 + d);
        }
        direct /= n_f as f64;
        assert!((got.score - direct).abs() <= 1e-12, "{} vs {direct}", got.score);
    }
}

#[test]
fn nan_terms_shrink_the_denominator() {
    let sel = [Property::Density, Property::AvgDegree];
    let c = conf(&sel, &[0.4, 0.2]);
    let mut u = [0.0; NUM_PROPERTIES];
    let s = [0.0; NUM_PROPERTIES];
    u[Property::AvgDegree.index()] = f64::NAN;
    let bounds = NormBounds::from_vectors([&pv("u", u), &pv("s", s)]);
    let r = similarity_score(&pv("u", u), &pv("s", s), &c, &weights(&sel, &[1.0, 1.0]), &bounds).unwrap();
    assert_eq!(r.skipped, vec![Property::AvgDegree]);
    assert!((r.score - 0.4).abs() < 1e-15);
}
