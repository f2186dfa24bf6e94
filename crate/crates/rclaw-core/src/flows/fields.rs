use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;

/// Divergence-free transport field `H : R^d -> R^{d x N1}`, one column per
/// driver component, with analytic Jacobians. All built-in fields have
/// `div H^k = 0` exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransportField {
    /// H = 0 with `n1` driver components.
    Zero { dim: usize, n1: usize },
    /// Constant columns; the only divergence-free option in d = 1.
    Constant { cols: Vec<Vec<f64>> },
    /// d = 2, N1 = 1: `H(x) = omega (-x2, x1)` (rigid rotation generator).
    Rotation { omega: f64 },
    /// d = 2, N1 = 1: perpendicular gradient of a Gaussian stream function
    /// `amp exp(-|x - center|^2 / (2 sigma^2))`.
    StreamGaussian {
        amp: f64,
        sigma: f64,
        center: [f64; 2],
    },
}

impl TransportField {
    pub fn dim(&self) -> usize {
        match self {
            TransportField::Zero { dim, .. } => *dim,
            TransportField::Constant { cols } => cols[0].len(),
            TransportField::Rotation { .. } | TransportField::StreamGaussian { .. } => 2,
        }
    }

    /// Number of driver components consumed (N1).
    pub fn n1(&self) -> usize {
        match self {
            TransportField::Zero { n1, .. } => *n1,
            TransportField::Constant { cols } => cols.len(),
            TransportField::Rotation { .. } | TransportField::StreamGaussian { .. } => 1,
        }
    }

    /// `out[i] = sum_k H^k_i(x) a_k` — the field contracted with a slope
    /// vector `a in R^{N1}`.
    pub fn eval_contracted(&self, x: &[f64], a: &[f64], out: &mut [f64]) {
        match self {
            TransportField::Zero { dim, .. } => out[..*dim].fill(0.0),
            TransportField::Constant { cols } => {
                let d = cols[0].len();
                out[..d].fill(0.0);
                for (k, col) in cols.iter().enumerate() {
                    for i in 0..d {
                        out[i] += col[i] * a[k];
                    }
                }
            }
            TransportField::Rotation { omega } => {
                out[0] = -omega * x[1] * a[0];
                out[1] = omega * x[0] * a[0];
            }
            TransportField::StreamGaussian { amp, sigma, center } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                let s2 = sigma * sigma;
                let e = amp * math::exp(-(dx * dx + dy * dy) / (2.0 * s2));
                // H = (d/dy, -d/dx) of the stream function.
                out[0] = -(dy / s2) * e * a[0];
                out[1] = (dx / s2) * e * a[0];
            }
        }
    }

    /// Row-major `out[i*d + j] = sum_k a_k d_j H^k_i(x)` — contracted Jacobian.
    pub fn jacobian_contracted(&self, x: &[f64], a: &[f64], out: &mut [f64]) {
        let d = self.dim();
        out[..d * d].fill(0.0);
        match self {
            TransportField::Zero { .. } | TransportField::Constant { .. } => {}
            TransportField::Rotation { omega } => {
                out[1] = -omega * a[0];
                out[2] = omega * a[0];
            }
            TransportField::StreamGaussian { amp, sigma, center } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                let s2 = sigma * sigma;
                let e = amp * math::exp(-(dx * dx + dy * dy) / (2.0 * s2));
                // H1 = -(dy/s2) e, H2 = (dx/s2) e.
                out[0] = (dx * dy / (s2 * s2)) * e * a[0];
                out[1] = (-1.0 / s2 + dy * dy / (s2 * s2)) * e * a[0];
                out[2] = (1.0 / s2 - dx * dx / (s2 * s2)) * e * a[0];
                out[3] = (-dx * dy / (s2 * s2)) * e * a[0];
            }
        }
    }

    /// Finite-difference residual of `div H^k` at a point, for data audits.
    pub fn divergence_residual(&self, x: &[f64], h: f64) -> f64 {
        let d = self.dim();
        let n1 = self.n1();
        let mut a = vec![0.0; n1];
        let mut res = 0.0_f64;
        for k in 0..n1 {
            a.fill(0.0);
            a[k] = 1.0;
            let mut div = 0.0;
            let mut plus = vec![0.0; d];
            let mut minus = vec![0.0; d];
            for i in 0..d {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                self.eval_contracted(&xp, &a, &mut plus);
                self.eval_contracted(&xm, &a, &mut minus);
                div += (plus[i] - minus[i]) / (2.0 * h);
            }
            res = math::max(res, math::abs(div));
        }
        res
    }
}

/// Scalar field on `R^d` with analytic gradient; used for g (per component)
/// and, in the C1-driver mode, for spatially varying nu.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarField {
    Zero,
    Constant {
        value: f64,
    },
    /// `amp exp(-|x - center|^2 / (2 sigma^2))`.
    GaussianBump {
        amp: f64,
        sigma: f64,
        center: Vec<f64>,
    },
    /// `sin(x_1)`, handy for hand-checkable nu(x) cases.
    SinX1,
}

impl ScalarField {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ScalarField::Zero => 0.0,
            ScalarField::Constant { value } => *value,
            ScalarField::GaussianBump { amp, sigma, center } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                amp * math::exp(-r2 / (2.0 * sigma * sigma))
            }
            ScalarField::SinX1 => math::sin(x[0]),
        }
    }

    pub fn grad(&self, x: &[f64], out: &mut [f64]) {
        match self {
            ScalarField::Zero | ScalarField::Constant { .. } => out.fill(0.0),
            ScalarField::GaussianBump { amp, sigma, center } => {
                let s2 = sigma * sigma;
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                let e = amp * math::exp(-r2 / (2.0 * s2));
                for (i, o) in out.iter_mut().enumerate() {
                    *o = -(x[i] - center[i]) / s2 * e;
                }
            }
            ScalarField::SinX1 => {
                out.fill(0.0);
                out[0] = math::cos(x[0]);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ScalarField::Zero)
            || matches!(self, ScalarField::Constant { value } if *value == 0.0)
    }
}

/// The noise data (H, nu, g). Driver components are laid out as
/// `z = (z^1 | z^2 | z^3)` with widths `(N1, N2, N3)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Coefficients {
    pub transport: TransportField,
    /// Constant nu (the rough-driver mode of the theory requires this).
    pub nu: Vec<f64>,
    /// One scalar field per z^3 component.
    pub affine: Vec<ScalarField>,
}

impl Coefficients {
    pub fn dim(&self) -> usize {
        self.transport.dim()
    }

    pub fn n1(&self) -> usize {
        self.transport.n1()
    }

    pub fn n2(&self) -> usize {
        self.nu.len()
    }

    pub fn n3(&self) -> usize {
        self.affine.len()
    }

    pub fn driver_dim(&self) -> usize {
        self.n1() + self.n2() + self.n3()
    }

    pub fn z1_range(&self) -> core::ops::Range<usize> {
        0..self.n1()
    }

    pub fn z2_range(&self) -> core::ops::Range<usize> {
        self.n1()..self.n1() + self.n2()
    }

    pub fn z3_range(&self) -> core::ops::Range<usize> {
        self.n1() + self.n2()..self.driver_dim()
    }

    pub fn noise_free(&self) -> bool {
        matches!(self.transport, TransportField::Zero { .. })
            && self.nu.iter().all(|&v| v == 0.0)
            && self.affine.iter().all(|g| g.is_zero())
    }
}
