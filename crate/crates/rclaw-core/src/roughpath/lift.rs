use alloc::vec;
use alloc::vec::Vec;

use crate::CoreError;

use super::path::PiecewiseLinearPath;

/// Signature increment over one time interval: level 1 in `R^N`, level 2 in
/// `R^{N x N}` (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureIncrement {
    pub one: Vec<f64>,
    pub two: Vec<f64>,
    dim: usize,
}

impl SignatureIncrement {
    pub fn zero(dim: usize) -> Self {
        Self {
            one: vec![0.0; dim],
            two: vec![0.0; dim * dim],
            dim,
        }
    }

    /// Increment of a single linear piece with displacement `delta`:
    /// level 2 is exactly half the outer square of the displacement.
    pub fn linear(delta: &[f64]) -> Self {
        let dim = delta.len();
        let mut two = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                two[i * dim + j] = 0.5 * delta[i] * delta[j];
            }
        }
        Self {
            one: delta.to_vec(),
            two,
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Chen concatenation: `self` over `[s,t]` followed by `rhs` over `[t,u]`.
    pub fn chen(&self, rhs: &SignatureIncrement) -> Self {
        let dim = self.dim;
        let mut out = Self {
            one: self.one.iter().zip(&rhs.one).map(|(a, b)| a + b).collect(),
            two: self.two.iter().zip(&rhs.two).map(|(a, b)| a + b).collect(),
            dim,
        };
        for i in 0..dim {
            for j in 0..dim {
                out.two[i * dim + j] += self.one[i] * rhs.one[j];
            }
        }
        out
    }

    /// Increment over `[s, t]` from the running signatures over `[0, s]` and
    /// `[0, t]` (group inverse followed by Chen).
    pub fn between(from_zero_s: &SignatureIncrement, from_zero_t: &SignatureIncrement) -> Self {
        let dim = from_zero_s.dim;
        let mut one = vec![0.0; dim];
        for k in 0..dim {
            one[k] = from_zero_t.one[k] - from_zero_s.one[k];
        }
        let mut two = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                two[i * dim + j] = from_zero_t.two[i * dim + j]
                    - from_zero_s.two[i * dim + j]
                    - from_zero_s.one[i] * one[j];
            }
        }
        Self { one, two, dim }
    }

    /// Antisymmetric part of level 2 (the Lévy area), row-major.
    pub fn levy_area(&self) -> Vec<f64> {
        let d = self.dim;
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                a[i * d + j] = 0.5 * (self.two[i * d + j] - self.two[j * d + i]);
            }
        }
        a
    }
}

/// Canonical level-2 lift of a piecewise-linear path together with the
/// p-variation scale `p in [1, 3)`.
#[derive(Debug, Clone)]
pub struct RoughPathLift {
    base: PiecewiseLinearPath,
    /// Per-segment level-1 increments.
    level1: Vec<Vec<f64>>,
    /// Per-segment level-2 tensors (each exactly half the outer square).
    level2: Vec<Vec<f64>>,
    p: f64,
}

/// Computes the canonical lift. Fails for `p` outside `[1, 3)`.
pub fn lift(path: PiecewiseLinearPath, p: f64) -> Result<RoughPathLift, CoreError> {
    if !(1.0..3.0).contains(&p) {
        return Err(CoreError::InvalidParameter("p must lie in [1, 3)"));
    }
    let dim = path.dim();
    let mut level1 = Vec::with_capacity(path.num_segments());
    let mut level2 = Vec::with_capacity(path.num_segments());
    for s in 0..path.num_segments() {
        let a = path.point(s);
        let b = path.point(s + 1);
        let delta: Vec<f64> = (0..dim).map(|k| b[k] - a[k]).collect();
        let inc = SignatureIncrement::linear(&delta);
        level1.push(inc.one);
        level2.push(inc.two);
    }
    Ok(RoughPathLift {
        base: path,
        level1,
        level2,
        p,
    })
}

impl RoughPathLift {
    pub fn base(&self) -> &PiecewiseLinearPath {
        &self.base
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn horizon(&self) -> f64 {
        self.base.horizon()
    }

    pub fn segment_level1(&self, i: usize) -> &[f64] {
        &self.level1[i]
    }

    pub fn segment_level2(&self, i: usize) -> &[f64] {
        &self.level2[i]
    }

    /// Exact signature increment of the lift over `[s, t]`, assembled from
    /// (partial) linear pieces by Chen concatenation.
    pub fn signature_increment(&self, s: f64, t: f64) -> Result<SignatureIncrement, CoreError> {
        if s > t {
            return Err(CoreError::EmptyInterval);
        }
        let dim = self.dim();
        if t - s <= 0.0 {
            return Ok(SignatureIncrement::zero(dim));
        }
        let times = self.base.times();
        let i0 = self.base.segment_of(s);
        let i1 = self.base.segment_of(t);
        let piece = |i: usize, a: f64, b: f64| -> SignatureIncrement {
            // Partial linear piece of segment i over [a, b].
            let dt = times[i + 1] - times[i];
            let frac = (b - a) / dt;
            let delta: Vec<f64> = self.level1[i].iter().map(|d| d * frac).collect();
            SignatureIncrement::linear(&delta)
        };
        if i0 == i1 {
            return Ok(piece(i0, s, t));
        }
        let mut acc = piece(i0, s, times[i0 + 1]);
        for i in (i0 + 1)..i1 {
            let full = SignatureIncrement {
                one: self.level1[i].clone(),
                two: self.level2[i].clone(),
                dim,
            };
            acc = acc.chen(&full);
        }
        acc = acc.chen(&piece(i1, times[i1], t));
        Ok(acc)
    }

    /// Running signatures over `[0, t_k]` for a sorted list of sample times.
    /// Increments between sample points then come out in O(1) each via
    /// [`SignatureIncrement::between`].
    pub fn prefix_signatures(&self, sample_times: &[f64]) -> Vec<SignatureIncrement> {
        let mut out = Vec::with_capacity(sample_times.len());
        let mut acc = SignatureIncrement::zero(self.dim());
        let mut prev = 0.0;
        for &t in sample_times {
            let inc = self
                .signature_increment(prev, t)
                .expect("sorted sample times");
            acc = acc.chen(&inc);
            prev = t;
            out.push(acc.clone());
        }
        out
    }

    /// Breakpoints plus `refinement` equispaced interior points per segment.
    pub fn sample_times(&self, refinement: usize) -> Vec<f64> {
        let times = self.base.times();
        let mut out = Vec::with_capacity(times.len() + refinement * (times.len() - 1));
        for i in 0..times.len() - 1 {
            out.push(times[i]);
            let dt = times[i + 1] - times[i];
            for r in 1..=refinement {
                out.push(times[i] + dt * r as f64 / (refinement + 1) as f64);
            }
        }
        out.push(*times.last().unwrap());
        out
    }
}
