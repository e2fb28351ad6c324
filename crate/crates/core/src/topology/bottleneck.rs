//! Exact bottleneck distance between persistence diagrams.

use crate::error::Result;
use crate::topology::persistence::{Barcode, Interval};

pub fn bottleneck_distance(a: &Barcode, b: &Barcode, dim: usize) -> Result<f64> {
    Ok(bottleneck_intervals(a.intervals(dim)?, b.intervals(dim)?))
}

/// Bottleneck distance with diagonal projections, L∞ ground metric.
///
/// Essential (infinite) intervals can only match each other; differing counts
/// give an infinite distance.
pub fn bottleneck_intervals(a: &[Interval], b: &[Interval]) -> f64 {
    let mut ess_a: Vec<f64> = a.iter().filter(|i| !i.is_finite()).map(|i| i.birth).collect();
    let mut ess_b: Vec<f64> = b.iter().filter(|i| !i.is_finite()).map(|i| i.birth).collect();
    if ess_a.len() != ess_b.len() {
        return f64::INFINITY;
    }
    ess_a.sort_by(f64::total_cmp);
    ess_b.sort_by(f64::total_cmp);
    let essential = ess_a.iter().zip(&ess_b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);

    let fa: Vec<Interval> = a.iter().filter(|i| i.is_finite()).copied().collect();
    let fb: Vec<Interval> = b.iter().filter(|i| i.is_finite()).copied().collect();
    essential.max(finite_bottleneck(&fa, &fb))
}

fn linf(x: &Interval, y: &Interval) -> f64 {
    (x.birth - y.birth).abs().max((x.death - y.death).abs())
}

fn to_diagonal(x: &Interval) -> f64 {
    0.5 * (x.death - x.birth)
}

fn finite_bottleneck(a: &[Interval], b: &[Interval]) -> f64 {
    let mut candidates = vec![0.0];
    candidates.extend(a.iter().map(to_diagonal));
    candidates.extend(b.iter().map(to_diagonal));
    for x in a {
        for y in b {
            candidates.push(linf(x, y));
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if has_perfect_matching(a, b, candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

/// Left side: points of `a`, then diagonal copies of `b`.
/// Right side: points of `b`, then diagonal copies of `a`.
fn has_perfect_matching(a: &[Interval], b: &[Interval], eps: f64) -> bool {
    let (n, m) = (a.len(), b.len());
    let size = n + m;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); size];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            if linf(x, y) <= eps {
                adj[i].push(j);
            }
        }
        if to_diagonal(x) <= eps {
            adj[i].push(m + i);
        }
    }
    for (j, y) in b.iter().enumerate() {
        if to_diagonal(y) <= eps {
            adj[n + j].push(j);
        }
        adj[n + j].extend(m..m + n);
    }
    let mut match_right = vec![usize::MAX; size];
    for left in 0..size {
        let mut seen = vec![false; size];
        if !augment(left, &adj, &mut seen, &mut match_right) {
            return false;
        }
    }
    true
}

fn augment(left: usize, adj: &[Vec<usize>], seen: &mut [bool], match_right: &mut [usize]) -> bool {
    for &r in &adj[left] {
        if seen[r] {
            continue;
        }
        seen[r] = true;
        if match_right[r] == usize::MAX || augment(match_right[r], adj, seen, match_right) {
            match_right[r] = left;
            return true;
        }
    }
    false
}
