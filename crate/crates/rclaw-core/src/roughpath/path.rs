use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::CoreError;

/// A continuous piecewise-linear path `[0, T] -> R^N`, stored by its
/// breakpoints. Times are strictly increasing and start at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearPath {
    times: Vec<f64>,
    /// Flat row-major storage, `values[i * dim + k]` is component k at time i.
    values: Vec<f64>,
    dim: usize,
}

impl PiecewiseLinearPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self, CoreError> {
        if dim == 0 {
            return Err(CoreError::InvalidParameter("dimension must be positive"));
        }
        if times.len() < 2 {
            return Err(CoreError::InvalidPath("need at least two breakpoints"));
        }
        if values.len() != times.len() * dim {
            return Err(CoreError::InvalidPath("values/times length mismatch"));
        }
        if times[0] != 0.0 {
            return Err(CoreError::InvalidPath("times must start at 0"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoreError::InvalidPath("times must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::InvalidPath("values must be finite"));
        }
        Ok(Self { times, values, dim })
    }

    /// Builds the path from per-breakpoint points.
    pub fn from_points(times: Vec<f64>, points: &[Vec<f64>]) -> Result<Self, CoreError> {
        let dim = points.first().map(|p| p.len()).unwrap_or(0);
        if points.iter().any(|p| p.len() != dim) {
            return Err(CoreError::InvalidPath("ragged value rows"));
        }
        let mut flat = Vec::with_capacity(times.len() * dim);
        for p in points {
            flat.extend_from_slice(p);
        }
        Self::new(times, flat, dim)
    }

    /// Samples `f` at the given times.
    pub fn from_fn(
        times: Vec<f64>,
        dim: usize,
        mut f: impl FnMut(f64) -> Vec<f64>,
    ) -> Result<Self, CoreError> {
        let mut values = Vec::with_capacity(times.len() * dim);
        for &t in &times {
            let p = f(t);
            values.extend_from_slice(&p);
        }
        Self::new(times, values, dim)
    }

    /// Constant path at the origin on `[0, T]`.
    pub fn zero(dim: usize, t_end: f64) -> Self {
        Self::new(vec![0.0, t_end], vec![0.0; 2 * dim], dim).expect("valid constant path")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn num_segments(&self) -> usize {
        self.times.len() - 1
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Index of the segment containing `t` (the last one for `t = T`).
    pub fn segment_of(&self, t: f64) -> usize {
        match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.times.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.times.len() - 2),
        }
    }

    /// Linear interpolation of the path value at `t` (clamped to `[0, T]`).
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let t = t.clamp(0.0, self.horizon());
        let i = self.segment_of(t);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let w = (t - t0) / (t1 - t0);
        let a = self.point(i);
        let b = self.point(i + 1);
        for k in 0..self.dim {
            out[k] = a[k] + w * (b[k] - a[k]);
        }
    }

    /// Component of the path value at `t`.
    pub fn component_at(&self, t: f64, k: usize) -> f64 {
        let t = t.clamp(0.0, self.horizon());
        let i = self.segment_of(t);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let w = (t - t0) / (t1 - t0);
        self.point(i)[k] + w * (self.point(i + 1)[k] - self.point(i)[k])
    }

    /// Slope of components `range` on segment `i`, divided increment.
    pub fn segment_slope(&self, i: usize, range: core::ops::Range<usize>) -> Vec<f64> {
        let dt = self.times[i + 1] - self.times[i];
        range
            .map(|k| (self.point(i + 1)[k] - self.point(i)[k]) / dt)
            .collect()
    }

    /// Extracts a sub-path of components `range` on the same time grid.
    pub fn components(&self, range: core::ops::Range<usize>) -> PiecewiseLinearPath {
        let dim = range.len();
        let mut values = Vec::with_capacity(self.times.len() * dim);
        for i in 0..self.times.len() {
            values.extend(range.clone().map(|k| self.point(i)[k]));
        }
        Self::new(self.times.clone(), values, dim).expect("subpath of valid path")
    }

    /// `self + lambda * other`, resampled on the merged breakpoint grid.
    pub fn add_scaled(&self, lambda: f64, other: &PiecewiseLinearPath) -> Result<Self, CoreError> {
        if self.dim != other.dim {
            return Err(CoreError::DimensionMismatch);
        }
        let times = merge_times(&self.times, &other.times);
        let mut values = Vec::with_capacity(times.len() * self.dim);
        for &t in &times {
            let a = self.eval(t);
            let b = other.eval(t);
            values.extend(a.iter().zip(&b).map(|(x, y)| x + lambda * y));
        }
        Self::new(times, values, self.dim)
    }

    /// Restricts the path to `[0, t_end]`, inserting a breakpoint at `t_end`.
    pub fn restrict(&self, t_end: f64) -> Result<Self, CoreError> {
        if t_end <= 0.0 || t_end > self.horizon() {
            return Err(CoreError::InvalidParameter("restriction time out of range"));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (i, &t) in self.times.iter().enumerate() {
            if t < t_end {
                times.push(t);
                values.extend_from_slice(self.point(i));
            }
        }
        times.push(t_end);
        values.extend(self.eval(t_end));
        Self::new(times, values, self.dim)
    }
}

/// Merges two sorted breakpoint sequences, de-duplicating near-equal entries.
pub(crate) fn merge_times(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let t = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => {
                if x <= y {
                    i += 1;
                    if (y - x).abs() < 1e-14 {
                        j += 1;
                    }
                    x
                } else {
                    j += 1;
                    y
                }
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => break,
        };
        if out.last().map(|&l: &f64| t - l > 1e-14).unwrap_or(true) {
            out.push(t);
        }
    }
    out
}

/// JSON document form of a path: `{"times": [...], "values": [[...], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathDoc {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl From<&PiecewiseLinearPath> for PathDoc {
    fn from(p: &PiecewiseLinearPath) -> Self {
        PathDoc {
            times: p.times.clone(),
            values: (0..p.times.len()).map(|i| p.point(i).to_vec()).collect(),
        }
    }
}

impl TryFrom<PathDoc> for PiecewiseLinearPath {
    type Error = CoreError;

    fn try_from(doc: PathDoc) -> Result<Self, CoreError> {
        PiecewiseLinearPath::from_points(doc.times, &doc.values)
    }
}
