use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

use crate::math;
use crate::CoreError;

use super::path::PiecewiseLinearPath;

/// One independent stream per (seed, dyadic level); within a level, midpoint
/// displacements are drawn in (index, dimension) order. This makes the
/// refinement nested: level n+1 agrees with level n at all level-n times.
fn level_rng(seed: u64, level: u32) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&level.to_le_bytes());
    key[12..16].copy_from_slice(&0x62726964u32.to_le_bytes());
    ChaCha12Rng::from_seed(key)
}

/// Standard normal via Box–Muller on the raw 64-bit stream; fully determined
/// by the rng state, independent of platform.
fn standard_normal(rng: &mut ChaCha12Rng) -> f64 {
    let u1 = ((rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / 9007199254740992.0);
    let u2 = ((rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / 9007199254740992.0);
    math::sqrt(-2.0 * math::ln(u1)) * math::cos(2.0 * core::f64::consts::PI * u2)
}

/// Piecewise-linear interpolation of a Brownian sample at the `2^n + 1` dyadic
/// points of `[0, T]`, built by nested Brownian-bridge midpoint displacement.
pub fn brownian_piecewise_linear(
    seed: u64,
    dims: usize,
    t_end: f64,
    dyadic_level: u32,
) -> Result<PiecewiseLinearPath, CoreError> {
    if dims == 0 || t_end <= 0.0 {
        return Err(CoreError::InvalidParameter(
            "need positive dimension and horizon",
        ));
    }
    // Level 0: endpoints only, W_T ~ N(0, T Id).
    let mut rng = level_rng(seed, 0);
    let mut values: Vec<Vec<f64>> = vec![vec![0.0; dims]];
    let endpoint: Vec<f64> = (0..dims)
        .map(|_| math::sqrt(t_end) * standard_normal(&mut rng))
        .collect();
    values.push(endpoint);

    for level in 1..=dyadic_level {
        // Interval length at the previous level.
        let delta = t_end / (1u64 << (level - 1)) as f64;
        let sd = math::sqrt(delta / 4.0);
        let mut rng = level_rng(seed, level);
        let mut refined = Vec::with_capacity(values.len() * 2 - 1);
        for i in 0..values.len() - 1 {
            let mid: Vec<f64> = (0..dims)
                .map(|k| 0.5 * (values[i][k] + values[i + 1][k]) + sd * standard_normal(&mut rng))
                .collect();
            refined.push(values[i].clone());
            refined.push(mid);
        }
        refined.push(values.last().unwrap().clone());
        values = refined;
    }

    let n = values.len();
    let times: Vec<f64> = (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect();
    PiecewiseLinearPath::from_points(times, &values)
}
