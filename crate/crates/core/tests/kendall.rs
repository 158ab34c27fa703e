mod common;

use common::{brute_tau_b, permutations};
use gnn_designer::knowledge_base::kendall_tau;
use proptest::prelude::*;

fn as_f64(p: &[usize]) -> Vec<f64> {
    p.iter().map(|&x| x as f64).collect()
}

#[test]
fn examples() {
    assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
    assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
    let t = kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
    assert_eq!(t, 4.0 / 6.0);
}

#[test]
fn every_permutation_pair_up_to_six() {
    for n in 2..=6 {
        let perms: Vec<Vec<f64>> = permutations(n).iter().map(|p| as_f64(p)).collect();
        for a in &perms {
            for b in &perms {
                assert_eq!(kendall_tau(a, b).unwrap(), brute_tau_b(a, b), "{a:?} {b:?}");
            }
        }
    }
}

fn tuples(n: usize, k: usize) -> Vec<Vec<f64>> {
    (0..k.pow(n as u32))
        .map(|mut i| {
            (0..n)
                .map(|_| {
                    let d = i % k;
                    i /= k;
                    d as f64
                })
                .collect()
        })
        .collect()
}

#[test]
fn tied_lists_match_pair_counting() {
    for n in 2..=4 {
        let all = tuples(n, 3);
        for a in &all {
            for b in &all {
                let want = brute_tau_b(a, b);
                let got = kendall_tau(a, b).unwrap();
                if want.is_nan() {
                    assert!(got.is_nan(), "{a:?} {b:?}");
                } else {
                    assert!((got - want).abs() < 1e-12, "{a:?} {b:?}: {got} vs {want}");
                }
            }
        }
    }
}

#[test]
fn degenerate_inputs() {
    assert!(kendall_tau(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap().is_nan());
    assert!(kendall_tau(&[1.0, 2.0], &[1.0]).is_err());
    assert!(kendall_tau(&[1.0], &[1.0]).is_err());
    assert!(kendall_tau(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
}

proptest! {
    #[test]
    fn bounded_symmetric_and_matches_brute(
        pairs in prop::collection::vec((0u8..5, 0u8..5), 2..40)
    ) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        let t = kendall_tau(&a, &b).unwrap();
        let w = brute_tau_b(&a, &b);
        if w.is_nan() {
            prop_assert!(t.is_nan());
        } else {
            prop_assert!((-1.0..=1.0).contains(&t));
            prop_assert!((t - w).abs() < 1e-12);
            prop_assert_eq!(t, kendall_tau(&b, &a).unwrap());
        }
    }
}
