use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::CoreError;

/// Uniform cell-centered grid on a box, d <= 2. Cell `i` (per axis) is
/// centered at `origin + (i + 1/2) h`; the flat index is row-major with the
/// last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub origin: Vec<f64>,
    pub h: Vec<f64>,
    pub n: Vec<usize>,
}

impl Grid {
    pub fn from_box(lo: &[f64], hi: &[f64], cells: &[usize]) -> Result<Self, CoreError> {
        let d = lo.len();
        if d == 0 || d > 2 || hi.len() != d || cells.len() != d {
            return Err(CoreError::DimensionMismatch);
        }
        if cells.contains(&0) || lo.iter().zip(hi).any(|(a, b)| b <= a) {
            return Err(CoreError::InvalidParameter("degenerate grid box"));
        }
        let h = lo
            .iter()
            .zip(hi)
            .zip(cells)
            .map(|((a, b), &n)| (b - a) / n as f64)
            .collect();
        Ok(Grid {
            origin: lo.to_vec(),
            h,
            n: cells.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn num_cells(&self) -> usize {
        self.n.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.origin[axis] + self.h[axis] * self.n[axis] as f64
    }

    pub fn flat(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for (axis, &m) in multi.iter().enumerate() {
            idx = idx * self.n[axis] + m;
        }
        idx
    }

    pub fn center(&self, idx: usize, out: &mut [f64]) {
        let d = self.dim();
        let mut rem = idx;
        for axis in (0..d).rev() {
            let m = rem % self.n[axis];
            rem /= self.n[axis];
            out[axis] = self.origin[axis] + (m as f64 + 0.5) * self.h[axis];
        }
    }

    /// Fills cell averages from a pointwise function of the cell center.
    pub fn sample(&self, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
        let d = self.dim();
        let mut x = vec![0.0; d];
        (0..self.num_cells())
            .map(|idx| {
                self.center(idx, &mut x);
                f(&x)
            })
            .collect()
    }

    /// Bilinear interpolation between cell centers, clamped at the boundary.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> f64 {
        let d = self.dim();
        let mut i0 = [0usize; 2];
        let mut w = [0.0f64; 2];
        for axis in 0..d {
            let s = (x[axis] - self.origin[axis]) / self.h[axis] - 0.5;
            let sc = math::max(0.0, math::min(s, (self.n[axis] - 1) as f64));
            let i = math::min(math::floor(sc), (self.n[axis].max(2) - 2) as f64) as usize;
            i0[axis] = i.min(self.n[axis] - 1);
            w[axis] = if self.n[axis] == 1 {
                0.0
            } else {
                sc - i0[axis] as f64
            };
        }
        match d {
            1 => {
                let a = values[i0[0]];
                let b = values[(i0[0] + 1).min(self.n[0] - 1)];
                a + w[0] * (b - a)
            }
            2 => {
                let i1 = [
                    (i0[0] + 1).min(self.n[0] - 1),
                    (i0[1] + 1).min(self.n[1] - 1),
                ];
                let v00 = values[self.flat(&[i0[0], i0[1]])];
                let v01 = values[self.flat(&[i0[0], i1[1]])];
                let v10 = values[self.flat(&[i1[0], i0[1]])];
                let v11 = values[self.flat(&[i1[0], i1[1]])];
                let a = v00 + w[1] * (v01 - v00);
                let b = v10 + w[1] * (v11 - v10);
                a + w[0] * (b - a)
            }
            _ => unreachable!("dimension cap is 2"),
        }
    }
}

/// Time-indexed cell averages on a fixed grid.
#[derive(Debug, Clone)]
pub struct GridSolution {
    pub grid: Grid,
    pub times: Vec<f64>,
    /// `[time][cell]`.
    pub data: Vec<Vec<f64>>,
}

impl GridSolution {
    pub fn new(grid: Grid, times: Vec<f64>, data: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(times.len(), data.len());
        GridSolution { grid, times, data }
    }

    pub fn snapshot(&self, ti: usize) -> &[f64] {
        &self.data[ti]
    }

    pub fn eval(&self, ti: usize, x: &[f64]) -> f64 {
        self.grid.interpolate(&self.data[ti], x)
    }
}

/// Discrete total variation: sum over axes of |neighbor differences| times
/// h^{d-1}. Equals the distributional TV for piecewise-constant functions.
pub fn tv(grid: &Grid, values: &[f64]) -> f64 {
    let d = grid.dim();
    let mut total = 0.0;
    match d {
        1 => {
            for i in 0..grid.n[0] - 1 {
                total += math::abs(values[i + 1] - values[i]);
            }
        }
        2 => {
            let (nx, ny) = (grid.n[0], grid.n[1]);
            for i in 0..nx {
                for j in 0..ny {
                    let v = values[i * ny + j];
                    if i + 1 < nx {
                        total += math::abs(values[(i + 1) * ny + j] - v) * grid.h[1];
                    }
                    if j + 1 < ny {
                        total += math::abs(values[i * ny + j + 1] - v) * grid.h[0];
                    }
                }
            }
        }
        _ => unreachable!("dimension cap is 2"),
    }
    total
}

pub fn linf(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, &v| math::max(m, math::abs(v)))
}

/// Riemann-sum L^1 norm of `a - b` over cells whose centers lie in the ball
/// B_R(x0). Errors if the ball is not contained in the grid box.
pub fn l1_ball_distance(
    grid: &Grid,
    a: &[f64],
    b: &[f64],
    radius: f64,
    x0: &[f64],
) -> Result<f64, CoreError> {
    let d = grid.dim();
    if x0.len() != d || a.len() != grid.num_cells() || b.len() != a.len() {
        return Err(CoreError::DimensionMismatch);
    }
    for axis in 0..d {
        if x0[axis] - radius < grid.origin[axis] || x0[axis] + radius > grid.upper(axis) {
            return Err(CoreError::BallOutOfBox);
        }
    }
    let vol = grid.cell_volume();
    let mut x = vec![0.0; d];
    let mut total = 0.0;
    for idx in 0..grid.num_cells() {
        grid.center(idx, &mut x);
        let dist: f64 = x.iter().zip(x0).map(|(xi, ci)| (xi - ci) * (xi - ci)).sum();
        if dist <= radius * radius {
            total += math::abs(a[idx] - b[idx]) * vol;
        }
    }
    Ok(total)
}
