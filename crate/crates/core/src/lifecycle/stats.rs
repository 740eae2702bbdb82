//! Two-sample comparisons used to contrast project groups.

use super::LifecycleError;
use crate::special::normal_sf;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// Pairs (x in a, y in b) with x > y, ties counting one half.
    pub u_a: f64,
    pub u_b: f64,
    pub z: f64,
    /// Two-sided p-value from the tie-corrected normal approximation with
    /// continuity correction.
    pub p: f64,
}

/// Mann-Whitney U with midranks.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney, LifecycleError> {
    if a.is_empty() {
        return Err(LifecycleError::EmptySample("a"));
    }
    if b.is_empty() {
        return Err(LifecycleError::EmptySample("b"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;

    let mut pooled: Vec<(f64, bool)> = a.iter().map(|&x| (x, true)).chain(b.iter().map(|&x| (x, false))).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        rank_sum_a += midrank * pooled[i..=j].iter().filter(|p| p.1).count() as f64;
        i = j + 1;
    }

    let u_a = rank_sum_a - na * (na + 1.0) / 2.0;
    let u_b = na * nb - u_a;
    let mean = na * nb / 2.0;
    let var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let (z, p) = if var <= 0.0 {
        (0.0, 1.0)
    } else {
        let dev = ((u_a - mean).abs() - 0.5).max(0.0);
        let z = dev / var.sqrt();
        (z.copysign(u_a - mean), (2.0 * normal_sf(z)).min(1.0))
    };
    Ok(MannWhitney { u_a, u_b, z, p })
}

/// Cliff's delta, (#{x > y} - #{x < y}) / (|a| |b|).
pub fn cliffs_delta(a: &[f64], b: &[f64]) -> Result<f64, LifecycleError> {
    if a.is_empty() {
        return Err(LifecycleError::EmptySample("a"));
    }
    if b.is_empty() {
        return Err(LifecycleError::EmptySample("b"));
    }
    let mut sorted = b.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut dominance: i64 = 0;
    for &x in a {
        let below = sorted.partition_point(|&y| y < x) as i64;
        let not_above = sorted.partition_point(|&y| y <= x) as i64;
        let above = sorted.len() as i64 - not_above;
        dominance += below - above;
    }
    Ok(dominance as f64 / (a.len() * b.len()) as f64)
}
