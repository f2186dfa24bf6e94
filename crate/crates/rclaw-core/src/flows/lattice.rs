use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Rectangular lattice over a box in `R^d` (d = 1 or 2), used to sample flow
/// data. Off-lattice queries use multilinear interpolation with clamping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowLattice {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    /// Points per axis (so the box extent is `(npts - 1) * spacing`).
    pub npts: Vec<usize>,
}

impl FlowLattice {
    /// Uniform lattice with `n` points per axis over `[lo, hi]^d`.
    pub fn uniform(lo: &[f64], hi: &[f64], n: usize) -> Self {
        assert!(n >= 2);
        let origin = lo.to_vec();
        let spacing = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| (b - a) / (n - 1) as f64)
            .collect();
        FlowLattice {
            origin,
            spacing,
            npts: alloc::vec![n; lo.len()],
        }
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn len(&self) -> usize {
        self.npts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinates of the lattice point with flat index `idx` (row-major,
    /// last axis fastest).
    pub fn point(&self, idx: usize, out: &mut [f64]) {
        let d = self.dim();
        let mut rem = idx;
        for axis in (0..d).rev() {
            let n = self.npts[axis];
            out[axis] = self.origin[axis] + self.spacing[axis] * (rem % n) as f64;
            rem /= n;
        }
    }

    pub fn point_vec(&self, idx: usize) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.dim()];
        self.point(idx, &mut out);
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for (axis, &m) in multi.iter().enumerate() {
            idx = idx * self.npts[axis] + m;
        }
        idx
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.origin[axis] + self.spacing[axis] * (self.npts[axis] - 1) as f64
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|a| x[a] >= self.origin[a] - 1e-12 && x[a] <= self.upper(a) + 1e-12)
    }

    /// Multilinear interpolation of a lattice field with `comps` components
    /// per point (stored flat `[point * comps + c]`). Queries are clamped to
    /// the box.
    pub fn interpolate(&self, field: &[f64], comps: usize, x: &[f64], out: &mut [f64]) {
        match self.dim() {
            1 => {
                let (i, w) = self.cell_weight(0, x[0]);
                let a = &field[i * comps..(i + 1) * comps];
                let b = &field[(i + 1) * comps..(i + 2) * comps];
                for c in 0..comps {
                    out[c] = a[c] + w * (b[c] - a[c]);
                }
            }
            2 => {
                let (i, wx) = self.cell_weight(0, x[0]);
                let (j, wy) = self.cell_weight(1, x[1]);
                let ny = self.npts[1];
                let idx = |ii: usize, jj: usize| (ii * ny + jj) * comps;
                let f00 = &field[idx(i, j)..idx(i, j) + comps];
                let f01 = &field[idx(i, j + 1)..idx(i, j + 1) + comps];
                let f10 = &field[idx(i + 1, j)..idx(i + 1, j) + comps];
                let f11 = &field[idx(i + 1, j + 1)..idx(i + 1, j + 1) + comps];
                for c in 0..comps {
                    let a = f00[c] + wy * (f01[c] - f00[c]);
                    let b = f10[c] + wy * (f11[c] - f10[c]);
                    out[c] = a + wx * (b - a);
                }
            }
            _ => unreachable!("dimension cap is 2"),
        }
    }

    /// Cell index and interpolation weight along one axis, clamped.
    fn cell_weight(&self, axis: usize, x: f64) -> (usize, f64) {
        let n = self.npts[axis];
        let s = (x - self.origin[axis]) / self.spacing[axis];
        let s = s.clamp(0.0, (n - 1) as f64);
        let mut i = s as usize;
        if i >= n - 1 {
            i = n - 2;
        }
        (i, s - i as f64)
    }
}
