use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::roughpath::PiecewiseLinearPath;
use crate::CoreError;

use super::fields::{Coefficients, TransportField};
use super::lattice::FlowLattice;
use super::{det, invert};

/// Exact (up to RK4 error) evaluator of the transport flow `psi` from
/// `d psi = -H(psi) dz^1`: forward map, variational Jacobian, and the inverse
/// map obtained by integrating the time-reversed driver.
pub struct FlowMap<'a> {
    field: &'a TransportField,
    /// The z^1 block of the driver.
    z1: PiecewiseLinearPath,
    pub substeps: usize,
}

/// Per-point integration state: position and variational Jacobian (d <= 2).
#[derive(Clone, Copy)]
struct State {
    y: [f64; 2],
    j: [f64; 4],
}

impl State {
    fn at(x: &[f64], d: usize) -> Self {
        let mut s = State {
            y: [0.0; 2],
            j: [0.0; 4],
        };
        s.y[..d].copy_from_slice(x);
        for i in 0..d {
            s.j[i * d + i] = 1.0;
        }
        s
    }
}

/// Derivative of (y, J): `dy = -H(y) a`, `dJ = -(sum_k a_k DH^k(y)) J`.
fn deriv(field: &TransportField, a: &[f64], s: &State, d: usize, out: &mut State) {
    let mut hy = [0.0; 2];
    field.eval_contracted(&s.y[..d], a, &mut hy[..d]);
    for i in 0..d {
        out.y[i] = -hy[i];
    }
    let mut m = [0.0; 4];
    field.jacobian_contracted(&s.y[..d], a, &mut m[..d * d]);
    for i in 0..d {
        for j in 0..d {
            let mut acc = 0.0;
            for k in 0..d {
                acc += m[i * d + k] * s.j[k * d + j];
            }
            out.j[i * d + j] = -acc;
        }
    }
}

fn axpy(s: &State, h: f64, ds: &State, d: usize) -> State {
    let mut out = *s;
    for i in 0..d {
        out.y[i] += h * ds.y[i];
    }
    for i in 0..d * d {
        out.j[i] += h * ds.j[i];
    }
    out
}

/// The z^1 components of the driver on the driver's breakpoints; when the
/// transport field consumes no driver components, a zero placeholder keeps
/// the segment structure intact.
fn z1_block(coeffs: &Coefficients, driver: &PiecewiseLinearPath) -> PiecewiseLinearPath {
    if coeffs.n1() == 0 {
        PiecewiseLinearPath::new(driver.times().to_vec(), vec![0.0; driver.times().len()], 1)
            .expect("zero placeholder path is valid")
    } else {
        driver.components(coeffs.z1_range())
    }
}

/// One RK4 step of length `h` along a linear driver piece with slope `a`.
fn rk4_step(field: &TransportField, a: &[f64], s: &mut State, h: f64, d: usize) {
    let mut k1 = *s;
    let mut k2 = *s;
    let mut k3 = *s;
    let mut k4 = *s;
    deriv(field, a, s, d, &mut k1);
    let s2 = axpy(s, 0.5 * h, &k1, d);
    deriv(field, a, &s2, d, &mut k2);
    let s3 = axpy(s, 0.5 * h, &k2, d);
    deriv(field, a, &s3, d, &mut k3);
    let s4 = axpy(s, h, &k3, d);
    deriv(field, a, &s4, d, &mut k4);
    for i in 0..d {
        s.y[i] += h / 6.0 * (k1.y[i] + 2.0 * k2.y[i] + 2.0 * k3.y[i] + k4.y[i]);
    }
    for i in 0..d * d {
        s.j[i] += h / 6.0 * (k1.j[i] + 2.0 * k2.j[i] + 2.0 * k3.j[i] + k4.j[i]);
    }
}

impl<'a> FlowMap<'a> {
    pub fn new(coeffs: &'a Coefficients, driver: &PiecewiseLinearPath, substeps: usize) -> Self {
        FlowMap {
            field: &coeffs.transport,
            z1: z1_block(coeffs, driver),
            substeps: substeps.max(1),
        }
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn horizon(&self) -> f64 {
        self.z1.horizon()
    }

    /// Forward flow: returns `(psi_t(x), D psi_t(x))` while invoking
    /// `record(time, state)` at every requested output time (sorted).
    pub fn forward_record(
        &self,
        x: &[f64],
        out_times: &[f64],
        mut record: impl FnMut(usize, &[f64], &[f64]),
    ) {
        let d = self.dim();
        let n1 = self.field.n1();
        let mut s = State::at(x, d);
        let mut next_out = 0;
        let mut t = 0.0_f64;
        // Emit t = 0 outputs.
        while next_out < out_times.len() && out_times[next_out] <= 1e-15 {
            record(next_out, &s.y[..d], &s.j[..d * d]);
            next_out += 1;
        }
        let times = self.z1.times();
        for seg in 0..self.z1.num_segments() {
            if next_out >= out_times.len() {
                break;
            }
            let seg_end = times[seg + 1];
            let a = self.z1.segment_slope(seg, 0..n1);
            // March to every output time inside this segment, then to its end.
            loop {
                let target = if next_out < out_times.len() && out_times[next_out] <= seg_end + 1e-15
                {
                    out_times[next_out].min(seg_end)
                } else {
                    seg_end
                };
                if target > t + 1e-15 {
                    let span = target - t;
                    let h = span / self.substeps as f64;
                    for _ in 0..self.substeps {
                        rk4_step(self.field, &a, &mut s, h, d);
                    }
                    t = target;
                }
                if next_out < out_times.len() && out_times[next_out] <= t + 1e-15 {
                    record(next_out, &s.y[..d], &s.j[..d * d]);
                    next_out += 1;
                    continue;
                }
                if t >= seg_end - 1e-15 {
                    break;
                }
            }
            t = seg_end;
        }
    }

    /// `(psi_t(x), D psi_t(x))`.
    pub fn forward(&self, x: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut y = vec![0.0; d];
        let mut j = vec![0.0; d * d];
        self.forward_record(x, &[t], |_, yy, jj| {
            y.copy_from_slice(yy);
            j.copy_from_slice(jj);
        });
        (y, j)
    }

    /// `(psi_t^{-1}(y), D(psi_t^{-1})(y))` via the time-reversed driver.
    pub fn inverse(&self, y: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let n1 = self.field.n1();
        let mut s = State::at(y, d);
        if t <= 1e-15 {
            return (s.y[..d].to_vec(), s.j[..d * d].to_vec());
        }
        let times = self.z1.times();
        let last_seg = self.z1.segment_of(t);
        // Walk the segments covering [0, t] backwards with negated slopes.
        for seg in (0..=last_seg).rev() {
            let lo = times[seg];
            let hi = math::min(times[seg + 1], t);
            if hi <= lo {
                continue;
            }
            let a: Vec<f64> = self
                .z1
                .segment_slope(seg, 0..n1)
                .iter()
                .map(|v| -v)
                .collect();
            let h = (hi - lo) / self.substeps as f64;
            for _ in 0..self.substeps {
                rk4_step(self.field, &a, &mut s, h, d);
            }
        }
        (s.y[..d].to_vec(), s.j[..d * d].to_vec())
    }
}

/// Options for [`solve_transport_flow`].
#[derive(Debug, Clone)]
pub struct FlowOptions {
    /// Box the trajectories must stay inside; `None` disables the check.
    pub escape_box: Option<(Vec<f64>, Vec<f64>)>,
    /// Fail if `max |det Dpsi - 1|` exceeds this.
    pub tol_vol: Option<f64>,
    /// Fail if `max |psi^{-1}(psi(x)) - x|` exceeds this (checked only when
    /// `sample_inverse` is on).
    pub tol_inv: Option<f64>,
    /// Also sample the inverse flow on the lattice (reverse integration per
    /// point and output time; skip for dense time grids).
    pub sample_inverse: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            escape_box: None,
            tol_vol: Some(1e-6),
            tol_inv: Some(1e-6),
            sample_inverse: true,
        }
    }
}

/// Sampled flow data on a lattice: `psi`, `D psi`, the inverse flow and
/// `D(psi_t)^{-1}|_{psi_t(x)}` (the matrix entering the robust flux).
#[derive(Debug, Clone)]
pub struct DiffeoFlowGrid {
    pub lattice: FlowLattice,
    pub times: Vec<f64>,
    /// `[time][point * d + i]`.
    pub psi: Vec<Vec<f64>>,
    /// `[time][point * d*d + ..]`, row-major.
    pub jac: Vec<Vec<f64>>,
    /// Inverse flow samples at lattice points (empty if not sampled).
    pub psi_inv: Vec<Vec<f64>>,
    /// `(D psi_t(x))^{-1}`, i.e. `D(psi_t)^{-1}` evaluated at `psi_t(x)`.
    pub jac_inv_at_psi: Vec<Vec<f64>>,
    /// Recorded diagnostics: max |det Dpsi - 1| and max inverse error.
    pub max_det_deviation: f64,
    pub max_inverse_error: f64,
}

impl DiffeoFlowGrid {
    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    fn time_bracket(&self, t: f64) -> (usize, usize, f64) {
        let n = self.times.len();
        if t <= self.times[0] {
            return (0, 0, 0.0);
        }
        if t >= self.times[n - 1] {
            return (n - 1, n - 1, 0.0);
        }
        let mut i = match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => return (i, i, 0.0),
            Err(i) => i - 1,
        };
        if i >= n - 1 {
            i = n - 2;
        }
        let w = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        (i, i + 1, w)
    }

    /// Interpolates a per-time lattice field (bilinear in x, linear in t).
    pub fn interp_field(
        &self,
        data: &[Vec<f64>],
        comps: usize,
        t: f64,
        x: &[f64],
        out: &mut [f64],
    ) {
        let (i0, i1, w) = self.time_bracket(t);
        let mut a = [0.0; 4];
        self.lattice
            .interpolate(&data[i0], comps, x, &mut a[..comps]);
        if i1 != i0 && w != 0.0 {
            let mut b = [0.0; 4];
            self.lattice
                .interpolate(&data[i1], comps, x, &mut b[..comps]);
            for c in 0..comps {
                out[c] = a[c] + w * (b[c] - a[c]);
            }
        } else {
            out[..comps].copy_from_slice(&a[..comps]);
        }
    }

    pub fn psi_at(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.interp_field(&self.psi, self.dim(), t, x, out)
    }

    pub fn jac_inv_at(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        self.interp_field(&self.jac_inv_at_psi, d * d, t, x, out)
    }

    pub fn psi_inv_at(&self, t: f64, x: &[f64], out: &mut [f64]) {
        assert!(
            !self.psi_inv.is_empty(),
            "inverse flow was not sampled on this grid"
        );
        self.interp_field(&self.psi_inv, self.dim(), t, x, out)
    }
}

/// RK4 sampling of the transport flow on a lattice. See module docs; the
/// variational equation is integrated alongside, the inverse flow (optional)
/// comes from the time-reversed driver.
pub fn solve_transport_flow(
    coeffs: &Coefficients,
    driver: &PiecewiseLinearPath,
    lattice: &FlowLattice,
    out_times: &[f64],
    substeps: usize,
    opts: &FlowOptions,
) -> Result<DiffeoFlowGrid, CoreError> {
    let d = coeffs.dim();
    if lattice.dim() != d {
        return Err(CoreError::DimensionMismatch);
    }
    if out_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CoreError::InvalidParameter("output times must increase"));
    }
    let map = FlowMap::new(coeffs, driver, substeps);
    let nt = out_times.len();
    let npts = lattice.len();
    let mut psi = vec![vec![0.0; npts * d]; nt];
    let mut jac = vec![vec![0.0; npts * d * d]; nt];
    let mut jac_inv = vec![vec![0.0; npts * d * d]; nt];
    let mut max_det_dev = 0.0_f64;
    let mut escape: Option<f64> = None;

    let mut x = vec![0.0; d];
    for idx in 0..npts {
        lattice.point(idx, &mut x);
        map.forward_record(&x, out_times, |ti, y, j| {
            psi[ti][idx * d..(idx + 1) * d].copy_from_slice(y);
            jac[ti][idx * d * d..(idx + 1) * d * d].copy_from_slice(j);
            max_det_dev = math::max(max_det_dev, math::abs(det(j, d) - 1.0));
            if let Some((lo, hi)) = &opts.escape_box {
                if (0..d).any(|i| y[i] < lo[i] || y[i] > hi[i]) && escape.is_none() {
                    escape = Some(out_times[ti]);
                }
            }
            let mut inv = [0.0; 4];
            invert(j, d, &mut inv[..d * d]);
            jac_inv[ti][idx * d * d..(idx + 1) * d * d].copy_from_slice(&inv[..d * d]);
        });
    }
    if let Some(time) = escape {
        return Err(CoreError::FlowEscaped { time });
    }
    if let Some(tol) = opts.tol_vol {
        if max_det_dev > tol {
            return Err(CoreError::ToleranceViolation {
                what: "max |det Dpsi - 1|",
                value: max_det_dev,
            });
        }
    }

    let mut psi_inv = Vec::new();
    let mut max_inv_err = 0.0_f64;
    if opts.sample_inverse {
        psi_inv = vec![vec![0.0; npts * d]; nt];
        for (ti, &t) in out_times.iter().enumerate() {
            for idx in 0..npts {
                lattice.point(idx, &mut x);
                let (q, _) = map.inverse(&x, t);
                psi_inv[ti][idx * d..(idx + 1) * d].copy_from_slice(&q);
                // Inverse consistency at the exact forward image of x.
                let fwd = &psi[ti][idx * d..(idx + 1) * d];
                let (back, _) = map.inverse(fwd, t);
                let err = math::norm2(
                    &back
                        .iter()
                        .zip(x.iter())
                        .map(|(a, b)| a - b)
                        .collect::<Vec<_>>(),
                );
                max_inv_err = math::max(max_inv_err, err);
            }
        }
        if let Some(tol) = opts.tol_inv {
            if max_inv_err > tol {
                return Err(CoreError::ToleranceViolation {
                    what: "max |psi^{-1}(psi(x)) - x|",
                    value: max_inv_err,
                });
            }
        }
    }

    Ok(DiffeoFlowGrid {
        lattice: lattice.clone(),
        times: out_times.to_vec(),
        psi,
        jac,
        psi_inv,
        jac_inv_at_psi: jac_inv,
        max_det_deviation: max_det_dev,
        max_inverse_error: max_inv_err,
    })
}

/// `mu_t = -nu . (z^2_t - z^2_0)`, exact for constant nu.
pub fn compute_mu(nu: &[f64], driver: &PiecewiseLinearPath, z2_start: usize, t: f64) -> f64 {
    let mut mu = 0.0;
    for (k, &nu_k) in nu.iter().enumerate() {
        let z_t = driver.component_at(t, z2_start + k);
        let z_0 = driver.component_at(0.0, z2_start + k);
        mu -= nu_k * (z_t - z_0);
    }
    mu
}

/// The affine transformation data: `mu` per output time (constant in x for
/// constant nu) and `rho(t, x)` on the flow lattice.
#[derive(Debug, Clone)]
pub struct AffineFlowData {
    pub times: Vec<f64>,
    pub mu: Vec<f64>,
    /// `[time][point]`.
    pub rho: Vec<Vec<f64>>,
    pub quadrature_substeps: usize,
}

impl AffineFlowData {
    /// Data for the noise-free (nu = 0, g = 0) case.
    pub fn trivial(times: &[f64], npts: usize) -> Self {
        AffineFlowData {
            times: times.to_vec(),
            mu: vec![0.0; times.len()],
            rho: vec![vec![0.0; npts]; times.len()],
            quadrature_substeps: 1,
        }
    }

    pub fn mu_at(&self, t: f64) -> f64 {
        // mu is piecewise-smooth along the driver; linear interpolation
        // between stored times matches the driver's own resolution.
        let n = self.times.len();
        if t <= self.times[0] {
            return self.mu[0];
        }
        if t >= self.times[n - 1] {
            return self.mu[n - 1];
        }
        let i = match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.mu[i],
            Err(i) => i - 1,
        };
        let w = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        self.mu[i] + w * (self.mu[i + 1] - self.mu[i])
    }
}

/// `rho(t, x) = int_0^t e^{mu_r} g(psi_r(x)) . zdot^3_r dr` by composite
/// trapezoidal quadrature with `quadrature_substeps` nodes per linear
/// segment; the trajectory `psi_r(x)` is re-integrated alongside with RK4.
pub fn compute_rho(
    coeffs: &Coefficients,
    flow: &DiffeoFlowGrid,
    driver: &PiecewiseLinearPath,
    quadrature_substeps: usize,
) -> Result<AffineFlowData, CoreError> {
    let d = coeffs.dim();
    let lattice = &flow.lattice;
    let out_times = &flow.times;
    let nsub = quadrature_substeps.max(1);
    let mu: Vec<f64> = out_times
        .iter()
        .map(|&t| compute_mu(&coeffs.nu, driver, coeffs.n1(), t))
        .collect();

    let npts = lattice.len();
    let mut rho = vec![vec![0.0; npts]; out_times.len()];
    if coeffs.affine.iter().all(|g| g.is_zero()) {
        return Ok(AffineFlowData {
            times: out_times.to_vec(),
            mu,
            rho,
            quadrature_substeps: nsub,
        });
    }

    let field = &coeffs.transport;
    let n1 = coeffs.n1();
    let z3_range = coeffs.z3_range();
    let z1 = z1_block(coeffs, driver);
    let times = driver.times();

    // Integrand at (r, psi_r(x)): e^{mu_r} sum_m g_m(psi) zdot^3_m(r).
    let integrand = |r: f64, y: &[f64], z3_slope: &[f64]| -> f64 {
        let mu_r = compute_mu(&coeffs.nu, driver, coeffs.n1(), r);
        let e = math::exp(mu_r);
        let mut val = 0.0;
        for (m, g) in coeffs.affine.iter().enumerate() {
            val += e * g.eval(y) * z3_slope[m];
        }
        val
    };

    let mut x = vec![0.0; d];
    for idx in 0..npts {
        lattice.point(idx, &mut x);
        let mut s = State::at(&x, d);
        let mut acc = 0.0_f64;
        let mut next_out = 0usize;
        let mut t = 0.0_f64;
        while next_out < out_times.len() && out_times[next_out] <= 1e-15 {
            rho[next_out][idx] = 0.0;
            next_out += 1;
        }
        'segs: for seg in 0..driver.num_segments() {
            if next_out >= out_times.len() {
                break;
            }
            let seg_end = times[seg + 1];
            let a = z1.segment_slope(seg, 0..n1);
            let z3_slope = driver.segment_slope(seg, z3_range.clone());
            loop {
                let target = if next_out < out_times.len() && out_times[next_out] <= seg_end + 1e-15
                {
                    out_times[next_out].min(seg_end)
                } else {
                    seg_end
                };
                if target > t + 1e-15 {
                    let h = (target - t) / nsub as f64;
                    for k in 0..nsub {
                        let r0 = t + k as f64 * h;
                        let f0 = integrand(r0, &s.y[..d], &z3_slope);
                        rk4_step(field, &a, &mut s, h, d);
                        let f1 = integrand(r0 + h, &s.y[..d], &z3_slope);
                        acc += 0.5 * h * (f0 + f1);
                    }
                    t = target;
                }
                if next_out < out_times.len() && out_times[next_out] <= t + 1e-15 {
                    rho[next_out][idx] = acc;
                    next_out += 1;
                    if next_out >= out_times.len() {
                        break 'segs;
                    }
                    continue;
                }
                if t >= seg_end - 1e-15 {
                    break;
                }
            }
            t = seg_end;
        }
    }

    Ok(AffineFlowData {
        times: out_times.to_vec(),
        mu,
        rho,
        quadrature_substeps: nsub,
    })
}

/// Sup-norm gaps between the flows of two drivers, for the rough-metric
/// stability audits: `sup |psi^a - psi^b|`, `sup |Dpsi^a - Dpsi^b|` and
/// `sup |(psi^a)^{-1} - (psi^b)^{-1}|` over the lattice and times.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowStabilityGaps {
    pub psi: f64,
    pub jac: f64,
    pub psi_inv: f64,
}

pub fn flow_stability_gap(
    coeffs: &Coefficients,
    driver_a: &PiecewiseLinearPath,
    driver_b: &PiecewiseLinearPath,
    lattice: &FlowLattice,
    times: &[f64],
    substeps: usize,
) -> FlowStabilityGaps {
    let d = coeffs.dim();
    let map_a = FlowMap::new(coeffs, driver_a, substeps);
    let map_b = FlowMap::new(coeffs, driver_b, substeps);
    let mut gaps = FlowStabilityGaps {
        psi: 0.0,
        jac: 0.0,
        psi_inv: 0.0,
    };
    let mut x = vec![0.0; d];
    for idx in 0..lattice.len() {
        lattice.point(idx, &mut x);
        for &t in times {
            let (ya, ja) = map_a.forward(&x, t);
            let (yb, jb) = map_b.forward(&x, t);
            let dy: Vec<f64> = ya.iter().zip(&yb).map(|(a, b)| a - b).collect();
            let dj: Vec<f64> = ja.iter().zip(&jb).map(|(a, b)| a - b).collect();
            gaps.psi = math::max(gaps.psi, math::norm2(&dy));
            gaps.jac = math::max(gaps.jac, math::norm2(&dj));
            let (ia, _) = map_a.inverse(&x, t);
            let (ib, _) = map_b.inverse(&x, t);
            let di: Vec<f64> = ia.iter().zip(&ib).map(|(a, b)| a - b).collect();
            gaps.psi_inv = math::max(gaps.psi_inv, math::norm2(&di));
        }
    }
    gaps
}
