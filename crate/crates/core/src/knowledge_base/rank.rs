use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::BenchmarkTable;
use crate::error::{Error, Result};
use crate::properties::{NormBounds, Property};

/// Kendall rank correlation, tie-corrected (tau-b), in O(n log n).
///
/// Returns NaN when either list is constant.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 items, got {n}")));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("NaN in ranking input".into()));
    }
    let mut pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));

    let n0 = (n * (n - 1) / 2) as u64;
    let mut n1 = 0u64;
    let mut n3 = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && pairs[j].0 == pairs[i].0 {
            j += 1;
        }
        n1 += tie_pairs(j - i);
        let mut s = i;
        while s < j {
            let mut t = s + 1;
            while t < j && pairs[t].1 == pairs[s].1 {
                t += 1;
            }
            n3 += tie_pairs(t - s);
            s = t;
        }
        i = j;
    }

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = ys.clone();
    let swaps = merge_count(&mut ys, &mut buf);

    let mut n2 = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && ys[j] == ys[i] {
            j += 1;
        }
        n2 += tie_pairs(j - i);
        i = j;
    }

    if n1 == n0 || n2 == n0 {
        return Ok(f64::NAN);
    }
    let num = n0 as i64 - n1 as i64 - n2 as i64 + n3 as i64 - 2 * swaps as i64;
    let den = (((n0 - n1) as f64) * ((n0 - n2) as f64)).sqrt();
    Ok((num as f64 / den).clamp(-1.0, 1.0))
}

fn tie_pairs(t: usize) -> u64 {
    (t * t.saturating_sub(1) / 2) as u64
}

// Stable merge sort; counts inversions (strictly greater elements moved past).
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], &mut buf[..mid]) + merge_count(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// A dataset name with the score it was ranked by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranked {
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErMode {
    #[default]
    Best,
    Mean,
}

impl std::str::FromStr for ErMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "best" => Ok(ErMode::Best),
            "mean" => Ok(ErMode::Mean),
            _ => Err(Error::InvalidInput(format!("unknown ER mode {s:?} (expected best or mean)"))),
        }
    }
}

fn sort_ranked(v: &mut [Ranked], descending: bool) {
    v.sort_by(|x, y| {
        let o = x.score.total_cmp(&y.score);
        let o = if descending { o.reverse() } else { o };
        match o {
            Ordering::Equal => x.name.cmp(&y.name),
            o => o,
        }
    });
}

/// Normalized distances `|g_k^anchor - g_k^j|` for each of `others`, unsorted.
///
/// Others whose value is NaN are dropped with a warning.
pub(crate) fn property_distances(
    table: &BenchmarkTable,
    anchor: &str,
    k: Property,
    others: &[&str],
    bounds: &NormBounds,
) -> Result<Vec<Ranked>> {
    let pa = table
        .properties(anchor)
        .ok_or_else(|| Error::InvalidInput(format!("no property vector for {anchor}")))?;
    let x = pa.get(k);
    if x.is_nan() {
        return Err(Error::InvalidInput(format!("{k} is NaN for anchor {anchor}")));
    }
    let mut out = Vec::with_capacity(others.len());
    for &o in others {
        let po = table
            .properties(o)
            .ok_or_else(|| Error::InvalidInput(format!("no property vector for {o}")))?;
        let y = po.get(k);
        if y.is_nan() {
            warn!(dataset = o, property = k.name(), "NaN property value; excluded from ranking");
            continue;
        }
        out.push(Ranked { name: o.to_string(), score: bounds.distance(k.index(), x, y) });
    }
    Ok(out)
}

/// Other datasets ascending by normalized distance on property `k`; ties alphabetical.
pub fn statistical_ranking(anchor: &str, k: Property, table: &BenchmarkTable) -> Result<Vec<Ranked>> {
    let with_props: Vec<&str> = table.datasets().into_iter().filter(|d| table.properties(d).is_some()).collect();
    let others: Vec<&str> = with_props.iter().copied().filter(|d| *d != anchor).collect();
    if others.is_empty() {
        return Err(Error::InvalidInput(format!("no other dataset with properties besides {anchor}")));
    }
    let bounds = NormBounds::from_vectors(with_props.iter().filter_map(|d| table.properties(d)));
    let mut v = property_distances(table, anchor, k, &others, &bounds)?;
    sort_ranked(&mut v, false);
    Ok(v)
}

/// Transfer performance on `anchor` of the Top-`n_m` architectures of `source`.
pub fn transfer_performance(
    table: &BenchmarkTable,
    anchor: &str,
    source: &str,
    n_m: usize,
    mode: ErMode,
) -> Result<f64> {
    let top = table.top_models(source, n_m);
    if top.is_empty() {
        return Err(Error::NotFound { dataset: source.into(), arch: None });
    }
    let mut perfs = Vec::with_capacity(top.len());
    for (arch, _) in &top {
        perfs.push(table.record(anchor, arch)?.valid_perf);
    }
    Ok(match mode {
        ErMode::Best => perfs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ErMode::Mean => perfs.iter().sum::<f64>() / perfs.len() as f64,
    })
}

pub(crate) fn transfer_scores(
    table: &BenchmarkTable,
    anchor: &str,
    sources: &[&str],
    n_m: usize,
    mode: ErMode,
) -> Result<Vec<Ranked>> {
    sources
        .iter()
        .map(|s| Ok(Ranked { name: s.to_string(), score: transfer_performance(table, anchor, s, n_m, mode)? }))
        .collect()
}

/// Other datasets with records, descending by transfer performance onto `anchor`; ties
/// alphabetical.
pub fn empirical_ranking(anchor: &str, table: &BenchmarkTable, n_m: usize, mode: ErMode) -> Result<Vec<Ranked>> {
    if n_m == 0 {
        return Err(Error::InvalidInput("n_m must be positive".into()));
    }
    let sources: Vec<&str> = table
        .datasets()
        .into_iter()
        .filter(|d| *d != anchor && table.records(d).is_some_and(|r| !r.is_empty()))
        .collect();
    let mut v = transfer_scores(table, anchor, &sources, n_m, mode)?;
    sort_ranked(&mut v, true);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kendall_examples() {
        assert_eq!(kendall_tau(&[1., 2., 3.], &[1., 2., 3.]).unwrap(), 1.0);
        assert_eq!(kendall_tau(&[1., 2., 3.], &[3., 2., 1.]).unwrap(), -1.0);
        let t = kendall_tau(&[1., 2., 3., 4.], &[1., 3., 2., 4.]).unwrap();
        assert!((t - 4.0 / 6.0).abs() < 1e-12);
        assert!(kendall_tau(&[1., 1., 1.], &[1., 2., 3.]).unwrap().is_nan());
        assert!(kendall_tau(&[1., 2.], &[1.]).is_err());
        assert!(kendall_tau(&[1.], &[1.]).is_err());
    }

    #[test]
    fn kendall_with_ties() {
        // 3 concordant, 1 discordant, one tie in each list: 2 / sqrt(5 * 5)
        let t = kendall_tau(&[1., 2., 2., 3.], &[1., 3., 2., 2.]).unwrap();
        assert!((t - 0.4).abs() < 1e-12, "{t}");
    }
}
