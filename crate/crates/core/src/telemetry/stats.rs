use alloc::collections::BTreeMap;
use alloc::vec::Vec;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub max: f64,
    pub p99: f64,
    pub mean: f64,
    pub min: f64,
}

/// Nearest-rank percentile of an ascending slice.
pub fn nearest_rank(sorted: &[f64], pct: f64) -> f64 {
    assert!(!sorted.is_empty());
    let rank = libm::ceil(pct / 100.0 * sorted.len() as f64) as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn summary(mut v: Vec<f64>) -> Summary {
    v.sort_by(f64::total_cmp);
    Summary {
        count: v.len(),
        max: v[v.len() - 1],
        p99: nearest_rank(&v, 99.0),
        mean: v.iter().sum::<f64>() / v.len() as f64,
        min: v[0],
    }
}

/// Statistics per bucket key over `(bucket, value)` pairs.
pub fn summarize<K: Ord + Copy>(rows: impl IntoIterator<Item = (K, f64)>) -> BTreeMap<K, Summary> {
    let mut groups: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for (k, v) in rows {
        groups.entry(k).or_default().push(v);
    }
    groups.into_iter().map(|(k, v)| (k, summary(v))).collect()
}

/// `(sum x)^2 / (n * sum x^2)`; 1 for an empty or all-zero input.
pub fn jain_index(x: &[f64]) -> f64 {
    let s: f64 = x.iter().sum();
    let s2: f64 = x.iter().map(|v| v * v).sum();
    if x.is_empty() || s2 == 0.0 {
        return 1.0;
    }
    s * s / (x.len() as f64 * s2)
}
