use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::CoreError;

use super::lift::{RoughPathLift, SignatureIncrement};
use super::path::merge_times;

/// Summary of the metric computations on one lift (or a pair of lifts).
/// All sup-over-partition quantities are certified lower bounds, exact in the
/// limit of partition refinement.
#[derive(Debug, Clone)]
pub struct RoughMetricReport {
    pub p_variation_norms: [f64; 2],
    pub distance: f64,
    pub hoelder_norm: f64,
    pub partition_refinement: usize,
}

/// Frobenius norm of a flat row-major tensor.
fn tensor_norm(v: &[f64]) -> f64 {
    math::norm2(v)
}

/// DP over sample points: maximizes the sum of `weight(i, j)^exponent` over
/// all partitions drawn from the points. `weight` returns the increment norm.
fn partition_dp(n: usize, exponent: f64, weight: impl Fn(usize, usize) -> f64) -> f64 {
    let mut best = vec![0.0_f64; n];
    for j in 1..n {
        let mut b = f64::NEG_INFINITY;
        for i in 0..j {
            let w = math::powf(weight(i, j), exponent);
            let cand = best[i] + w;
            if cand > b {
                b = cand;
            }
        }
        best[j] = b;
    }
    best[n - 1]
}

fn level_increment_norm(prefixes: &[SignatureIncrement], i: usize, j: usize, level: u8) -> f64 {
    let inc = SignatureIncrement::between(&prefixes[i], &prefixes[j]);
    match level {
        1 => math::norm2(&inc.one),
        2 => tensor_norm(&inc.two),
        _ => unreachable!("level cap is 2"),
    }
}

/// Homogeneous p-variation norm of one signature level:
/// `sup_partitions (sum ||increment||^{p/k})^{k/p}` with `k = level`.
pub fn p_variation_norm(lift: &RoughPathLift, level: u8, refinement: usize) -> f64 {
    assert!(level == 1 || level == 2, "level cap is 2");
    let times = lift.sample_times(refinement);
    let prefixes = lift.prefix_signatures(&times);
    let k = level as f64;
    let sum = partition_dp(times.len(), lift.p() / k, |i, j| {
        level_increment_norm(&prefixes, i, j, level)
    });
    math::powf(sum, k / lift.p())
}

/// Inhomogeneous p-variation distance: max over levels k of the p/k-variation
/// of the level-k increment difference, on the merged breakpoint grid.
pub fn rough_distance(
    a: &RoughPathLift,
    b: &RoughPathLift,
    refinement: usize,
) -> Result<f64, CoreError> {
    if a.dim() != b.dim() {
        return Err(CoreError::DimensionMismatch);
    }
    let p = math::max(a.p(), b.p());
    let times = merge_times(&a.sample_times(refinement), &b.sample_times(refinement));
    let pa = a.prefix_signatures(&times);
    let pb = b.prefix_signatures(&times);
    let mut dist = 0.0_f64;
    for level in 1..=2u8 {
        let k = level as f64;
        let sum = partition_dp(times.len(), p / k, |i, j| {
            let ia = SignatureIncrement::between(&pa[i], &pa[j]);
            let ib = SignatureIncrement::between(&pb[i], &pb[j]);
            match level {
                1 => math::norm2(
                    &ia.one
                        .iter()
                        .zip(&ib.one)
                        .map(|(x, y)| x - y)
                        .collect::<Vec<_>>(),
                ),
                _ => tensor_norm(
                    &ia.two
                        .iter()
                        .zip(&ib.two)
                        .map(|(x, y)| x - y)
                        .collect::<Vec<_>>(),
                ),
            }
        });
        dist = math::max(dist, math::powf(sum, k / p));
    }
    Ok(dist)
}

/// Homogeneous Hölder-type norm:
/// `max_k sup_{s<t} ||increment_k(s,t)||^{1/k} / (t-s)^beta`
/// over sampled pairs (breakpoints plus refinement points per segment).
pub fn hoelder_norm(
    lift: &RoughPathLift,
    exponent: f64,
    refinement: usize,
) -> Result<f64, CoreError> {
    if !(exponent > 0.0 && exponent <= 1.0) {
        return Err(CoreError::InvalidParameter("exponent must be in (0, 1]"));
    }
    let times = lift.sample_times(refinement);
    let prefixes = lift.prefix_signatures(&times);
    let mut sup = 0.0_f64;
    for i in 0..times.len() {
        for j in (i + 1)..times.len() {
            let dt = times[j] - times[i];
            for level in 1..=2u8 {
                let n = level_increment_norm(&prefixes, i, j, level);
                let homog = math::powf(n, 1.0 / level as f64);
                sup = math::max(sup, homog / math::powf(dt, exponent));
            }
        }
    }
    Ok(sup)
}
