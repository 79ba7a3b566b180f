//! Exhaustive nearest-neighbour search. Euclidean distance; ties go to the
//! lower row index so every consumer stays deterministic.

use rayon::prelude::*;

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// The `k` rows of `candidates` (given as indices into `points`) nearest to
/// `query`, excluding `exclude`. Returned nearest first.
pub fn k_nearest_among(
    points: &[Vec<f64>],
    candidates: &[usize],
    query: &[f64],
    k: usize,
    exclude: Option<usize>,
) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = candidates
        .iter()
        .copied()
        .filter(|&i| Some(i) != exclude)
        .map(|i| (squared_distance(&points[i], query), i))
        .collect();
    let k = k.min(scored.len());
    if k == 0 {
        return Vec::new();
    }
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, cmp);
        scored.truncate(k);
    }
    scored.sort_unstable_by(cmp);
    scored.into_iter().map(|(_, i)| i).collect()
}

/// For every row listed in `queries`, its `k` nearest rows among
/// `candidates`, never matching itself.
pub fn k_nearest_table(points: &[Vec<f64>], queries: &[usize], candidates: &[usize], k: usize) -> Vec<Vec<usize>> {
    queries
        .par_iter()
        .map(|&q| k_nearest_among(points, candidates, &points[q], k, Some(q)))
        .collect()
}
