//! The change of unknown that turns the noisy conservation law into a
//! classical inhomogeneous one: the transformed flux built from flow data,
//! and the forward/inverse conversions between u-space and v-space.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::flows::{AffineFlowData, Coefficients, DiffeoFlowGrid, FlowMap, ScalarField};
use crate::fvsolver::GridSolution;
use crate::math;
use crate::roughpath::PiecewiseLinearPath;
use crate::CoreError;

/// A C^2 scalar flux u -> f(u) in R^d, chosen by name in experiment configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FluxSpec {
    /// f_i(u) = u^2 / 2 on every axis.
    Burgers { dim: usize },
    /// f(u) = c u (linear advection with velocity c).
    Linear { c: Vec<f64> },
    /// f_i(u) = factor * u^2 / 2; the twin flux for perturbation audits.
    ScaledBurgers { dim: usize, factor: f64 },
    /// f_i(u) = e^u; second derivative unbounded, used as a hypothesis
    /// sensitivity probe, never in the rough pipeline.
    Exp { dim: usize },
}

impl FluxSpec {
    pub fn dim(&self) -> usize {
        match self {
            FluxSpec::Burgers { dim } | FluxSpec::ScaledBurgers { dim, .. } => *dim,
            FluxSpec::Linear { c } => c.len(),
            FluxSpec::Exp { dim } => *dim,
        }
    }

    pub fn eval(&self, u: f64, out: &mut [f64]) {
        match self {
            FluxSpec::Burgers { dim } => out[..*dim].fill(0.5 * u * u),
            FluxSpec::Linear { c } => {
                for (o, ci) in out.iter_mut().zip(c) {
                    *o = ci * u;
                }
            }
            FluxSpec::ScaledBurgers { dim, factor } => out[..*dim].fill(0.5 * factor * u * u),
            FluxSpec::Exp { dim } => out[..*dim].fill(math::exp(u)),
        }
    }

    pub fn d1(&self, u: f64, out: &mut [f64]) {
        match self {
            FluxSpec::Burgers { dim } => out[..*dim].fill(u),
            FluxSpec::Linear { c } => out[..c.len()].copy_from_slice(c),
            FluxSpec::ScaledBurgers { dim, factor } => out[..*dim].fill(factor * u),
            FluxSpec::Exp { dim } => out[..*dim].fill(math::exp(u)),
        }
    }

    pub fn d2(&self, u: f64, out: &mut [f64]) {
        match self {
            FluxSpec::Burgers { dim } => out[..*dim].fill(1.0),
            FluxSpec::Linear { c } => out[..c.len()].fill(0.0),
            FluxSpec::ScaledBurgers { dim, factor } => out[..*dim].fill(*factor),
            FluxSpec::Exp { dim } => out[..*dim].fill(math::exp(u)),
        }
    }

    /// Global bound on |f''|, when one exists.
    pub fn second_derivative_bound(&self) -> Option<f64> {
        match self {
            FluxSpec::Burgers { .. } => Some(1.0),
            FluxSpec::Linear { .. } => Some(0.0),
            FluxSpec::ScaledBurgers { factor, .. } => Some(math::abs(*factor)),
            FluxSpec::Exp { .. } => None,
        }
    }
}

/// Right-hand side F(u) for the C^1-driver general mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    Zero,
    /// F(u) = rate * u.
    Linear {
        rate: f64,
    },
}

impl SourceSpec {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            SourceSpec::Zero => 0.0,
            SourceSpec::Linear { rate } => rate * u,
        }
    }

    pub fn d1(&self) -> f64 {
        match self {
            SourceSpec::Zero => 0.0,
            SourceSpec::Linear { rate } => *rate,
        }
    }
}

enum Kind<'a> {
    /// No noise at all: the flux passes through untouched.
    Plain,
    /// Rough setting (constant nu): flux from the flow grid and the affine
    /// data; the source vanishes identically.
    Robust {
        flow: &'a DiffeoFlowGrid,
        affine: &'a AffineFlowData,
        /// `[time][point * d + i]`, central differences of rho on the lattice.
        grad_rho: Vec<Vec<f64>>,
    },
    /// C^1-driver general setting: mu may depend on x, and the source keeps
    /// the transformed right-hand side plus the flux . grad(mu) term.
    GeneralC1 {
        flow: &'a DiffeoFlowGrid,
        source: SourceSpec,
        /// `[time][point]`.
        mu: Vec<Vec<f64>>,
        rho: Vec<Vec<f64>>,
        /// `[time][point * d + i]`.
        grad_mu: Vec<Vec<f64>>,
        grad_rho: Vec<Vec<f64>>,
    },
}

/// The transformed conservation-law problem `d_t v + Div flux(t,x,v) =
/// source(t,x,v)`, with pure, reentrant evaluators.
pub struct TransformedProblem<'a> {
    pub flux_spec: FluxSpec,
    kind: Kind<'a>,
    /// Sup of |d_v flux| over the sampled box, value range and times.
    pub wavespeed_bound: f64,
    /// Validated value range [-V, V] for v.
    pub value_bound: f64,
}

/// Local data at (t, x) shared by the evaluators.
struct Local {
    mu: f64,
    rho: f64,
    jinv: [f64; 4],
    grad_mu: [f64; 2],
    grad_rho: [f64; 2],
}

impl<'a> TransformedProblem<'a> {
    /// Noise-free problem: flux = f exactly, source = 0.
    pub fn plain(flux_spec: FluxSpec, value_bound: f64) -> Self {
        let wavespeed_bound = sample_plain_wavespeed(&flux_spec, value_bound);
        TransformedProblem {
            flux_spec,
            kind: Kind::Plain,
            wavespeed_bound,
            value_bound,
        }
    }

    pub fn dim(&self) -> usize {
        self.flux_spec.dim()
    }

    fn local(&self, t: f64, x: &[f64]) -> Local {
        let d = self.dim();
        let mut loc = Local {
            mu: 0.0,
            rho: 0.0,
            jinv: [0.0; 4],
            grad_mu: [0.0; 2],
            grad_rho: [0.0; 2],
        };
        match &self.kind {
            Kind::Plain => {
                for i in 0..d {
                    loc.jinv[i * d + i] = 1.0;
                }
            }
            Kind::Robust {
                flow,
                affine,
                grad_rho,
            } => {
                loc.mu = affine.mu_at(t);
                let mut buf = [0.0; 4];
                flow.interp_field(&affine.rho, 1, t, x, &mut buf[..1]);
                loc.rho = buf[0];
                flow.jac_inv_at(t, x, &mut loc.jinv[..d * d]);
                flow.interp_field(grad_rho, d, t, x, &mut loc.grad_rho[..d]);
            }
            Kind::GeneralC1 {
                flow,
                mu,
                rho,
                grad_mu,
                grad_rho,
                ..
            } => {
                let mut buf = [0.0; 4];
                flow.interp_field(mu, 1, t, x, &mut buf[..1]);
                loc.mu = buf[0];
                flow.interp_field(rho, 1, t, x, &mut buf[..1]);
                loc.rho = buf[0];
                flow.jac_inv_at(t, x, &mut loc.jinv[..d * d]);
                flow.interp_field(grad_mu, d, t, x, &mut loc.grad_mu[..d]);
                flow.interp_field(grad_rho, d, t, x, &mut loc.grad_rho[..d]);
            }
        }
        loc
    }

    /// `flux(t,x,v) = e^{mu} (Dpsi_t)^{-1}|_{psi_t(x)} f(e^{-mu}(v + rho))`.
    pub fn flux(&self, t: f64, x: &[f64], v: f64, out: &mut [f64]) {
        if let Kind::Plain = self.kind {
            self.flux_spec.eval(v, out);
            return;
        }
        let loc = self.local(t, x);
        self.flux_with_local(&loc, v, out);
    }

    fn flux_with_local(&self, loc: &Local, v: f64, out: &mut [f64]) {
        let d = self.dim();
        let w = math::exp(-loc.mu) * (v + loc.rho);
        let mut fw = [0.0; 2];
        self.flux_spec.eval(w, &mut fw[..d]);
        let e = math::exp(loc.mu);
        for i in 0..d {
            out[i] = e * (0..d).map(|j| loc.jinv[i * d + j] * fw[j]).sum::<f64>();
        }
    }

    /// `d_v flux = (Dpsi_t)^{-1}|_{psi_t(x)} f'(e^{-mu}(v + rho))` (the
    /// exponential factors cancel).
    pub fn flux_dv(&self, t: f64, x: &[f64], v: f64, out: &mut [f64]) {
        let d = self.dim();
        if let Kind::Plain = self.kind {
            self.flux_spec.d1(v, out);
            return;
        }
        let loc = self.local(t, x);
        let w = math::exp(-loc.mu) * (v + loc.rho);
        let mut fp = [0.0; 2];
        self.flux_spec.d1(w, &mut fp[..d]);
        for i in 0..d {
            out[i] = (0..d).map(|j| loc.jinv[i * d + j] * fp[j]).sum::<f64>();
        }
    }

    /// `div_x flux(t, ., v)` at frozen v. The divergence of the Jacobian
    /// factor drops out for volume-preserving flows, so only the gradients
    /// of rho (and of mu, in the general mode) survive.
    pub fn flux_div(&self, t: f64, x: &[f64], v: f64) -> f64 {
        let d = self.dim();
        match &self.kind {
            Kind::Plain => 0.0,
            Kind::Robust { .. } => {
                let loc = self.local(t, x);
                let w = math::exp(-loc.mu) * (v + loc.rho);
                let mut fp = [0.0; 2];
                self.flux_spec.d1(w, &mut fp[..d]);
                let mut div = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        div += loc.jinv[i * d + j] * fp[j] * loc.grad_rho[i];
                    }
                }
                div
            }
            Kind::GeneralC1 { .. } => {
                let loc = self.local(t, x);
                let w = math::exp(-loc.mu) * (v + loc.rho);
                let mut fp = [0.0; 2];
                self.flux_spec.d1(w, &mut fp[..d]);
                let mut fhat = [0.0; 2];
                self.flux_with_local(&loc, v, &mut fhat[..d]);
                let mut div = 0.0;
                for i in 0..d {
                    div += fhat[i] * loc.grad_mu[i];
                    for j in 0..d {
                        div += loc.jinv[i * d + j]
                            * fp[j]
                            * (loc.grad_rho[i] - loc.grad_mu[i] * (v + loc.rho));
                    }
                }
                div
            }
        }
    }

    /// Source term. Identically zero in the rough (constant nu) setting;
    /// `e^{mu} F(e^{-mu}(v + rho)) + flux(t,x,v) . grad(mu)` in general mode.
    pub fn source(&self, t: f64, x: &[f64], v: f64) -> f64 {
        match &self.kind {
            Kind::Plain | Kind::Robust { .. } => 0.0,
            Kind::GeneralC1 { source, .. } => {
                let d = self.dim();
                let loc = self.local(t, x);
                let w = math::exp(-loc.mu) * (v + loc.rho);
                let mut fhat = [0.0; 2];
                self.flux_with_local(&loc, v, &mut fhat[..d]);
                let mut s = math::exp(loc.mu) * source.eval(w);
                for i in 0..d {
                    s += fhat[i] * loc.grad_mu[i];
                }
                s
            }
        }
    }

    pub fn has_source(&self) -> bool {
        matches!(self.kind, Kind::GeneralC1 { .. })
    }

    /// Local Lax-Friedrichs interface flux along `axis` for a left/right
    /// state pair, sharing one (t,x) lookup: returns the numerical flux and
    /// the local wavespeed used for it.
    pub fn interface_flux(&self, t: f64, x: &[f64], axis: usize, vl: f64, vr: f64) -> (f64, f64) {
        let d = self.dim();
        let mut fl = 0.0;
        let mut fr = 0.0;
        let mut alpha = 0.0_f64;
        if let Kind::Plain = self.kind {
            let mut buf = [0.0; 2];
            for (v, f) in [(vl, &mut fl), (vr, &mut fr)] {
                self.flux_spec.eval(v, &mut buf[..d]);
                *f = buf[axis];
                self.flux_spec.d1(v, &mut buf[..d]);
                alpha = math::max(alpha, math::abs(buf[axis]));
            }
        } else {
            let loc = self.local(t, x);
            let e = math::exp(loc.mu);
            let mut buf = [0.0; 2];
            for (v, f) in [(vl, &mut fl), (vr, &mut fr)] {
                let w = math::exp(-loc.mu) * (v + loc.rho);
                self.flux_spec.eval(w, &mut buf[..d]);
                *f = e * (0..d).map(|j| loc.jinv[axis * d + j] * buf[j]).sum::<f64>();
                self.flux_spec.d1(w, &mut buf[..d]);
                let dv = (0..d).map(|j| loc.jinv[axis * d + j] * buf[j]).sum::<f64>();
                alpha = math::max(alpha, math::abs(dv));
            }
        }
        (0.5 * (fl + fr) - 0.5 * alpha * (vr - vl), alpha)
    }

    /// Flux vectors for many v-values at one (t,x), `out[vi*d + axis]`.
    pub fn flux_values(&self, t: f64, x: &[f64], vs: &[f64], out: &mut [f64]) {
        let d = self.dim();
        if let Kind::Plain = self.kind {
            for (vi, &v) in vs.iter().enumerate() {
                self.flux_spec.eval(v, &mut out[vi * d..(vi + 1) * d]);
            }
            return;
        }
        let loc = self.local(t, x);
        for (vi, &v) in vs.iter().enumerate() {
            self.flux_with_local(&loc, v, &mut out[vi * d..(vi + 1) * d]);
        }
    }

    /// `div_x flux(t, ., v)` for many v-values at one (t,x).
    pub fn flux_div_values(&self, t: f64, x: &[f64], vs: &[f64], out: &mut [f64]) {
        let d = self.dim();
        match &self.kind {
            Kind::Plain => out[..vs.len()].fill(0.0),
            Kind::Robust { .. } => {
                let loc = self.local(t, x);
                let mut fp = [0.0; 2];
                for (o, &v) in out.iter_mut().zip(vs) {
                    let w = math::exp(-loc.mu) * (v + loc.rho);
                    self.flux_spec.d1(w, &mut fp[..d]);
                    let mut div = 0.0;
                    for i in 0..d {
                        for j in 0..d {
                            div += loc.jinv[i * d + j] * fp[j] * loc.grad_rho[i];
                        }
                    }
                    *o = div;
                }
            }
            Kind::GeneralC1 { .. } => {
                for (o, &v) in out.iter_mut().zip(vs) {
                    *o = self.flux_div(t, x, v);
                }
            }
        }
    }
}

fn sample_plain_wavespeed(flux: &FluxSpec, v_bound: f64) -> f64 {
    let d = flux.dim();
    let mut fp = [0.0; 2];
    let mut m = 0.0_f64;
    for k in 0..=64 {
        let v = -v_bound + 2.0 * v_bound * k as f64 / 64.0;
        flux.d1(v, &mut fp[..d]);
        for i in 0..d {
            m = math::max(m, math::abs(fp[i]));
        }
    }
    m
}

/// Central differences of a scalar lattice field (one-sided at the edges).
fn lattice_gradient(flow: &DiffeoFlowGrid, field: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let lat = &flow.lattice;
    let d = lat.dim();
    field
        .iter()
        .map(|vals| {
            let mut g = vec![0.0; lat.len() * d];
            for idx in 0..lat.len() {
                let mut multi = [0usize; 2];
                let mut rem = idx;
                for axis in (0..d).rev() {
                    multi[axis] = rem % lat.npts[axis];
                    rem /= lat.npts[axis];
                }
                for axis in 0..d {
                    let n = lat.npts[axis];
                    let i = multi[axis];
                    let (lo, hi, span) = if i == 0 {
                        (0, 1, 1.0)
                    } else if i == n - 1 {
                        (n - 2, n - 1, 1.0)
                    } else {
                        (i - 1, i + 1, 2.0)
                    };
                    let mut mlo = multi;
                    let mut mhi = multi;
                    mlo[axis] = lo;
                    mhi[axis] = hi;
                    let vlo = vals[lat.flat_index(&mlo[..d])];
                    let vhi = vals[lat.flat_index(&mhi[..d])];
                    g[idx * d + axis] = (vhi - vlo) / (span * lat.spacing[axis]);
                }
            }
            g
        })
        .collect()
}

fn sample_wavespeed(problem: &TransformedProblem, v_bound: f64, flow: &DiffeoFlowGrid) -> f64 {
    let d = problem.dim();
    let lat = &flow.lattice;
    let mut x = vec![0.0; d];
    let mut fp = [0.0; 2];
    let mut m = 0.0_f64;
    for &t in &flow.times {
        for idx in 0..lat.len() {
            lat.point(idx, &mut x);
            for k in 0..=8 {
                let v = -v_bound + 2.0 * v_bound * k as f64 / 8.0;
                problem.flux_dv(t, &x, v, &mut fp[..d]);
                for i in 0..d {
                    m = math::max(m, math::abs(fp[i]));
                }
            }
        }
    }
    m
}

/// Builds the rough-setting transformed problem from flow and affine data.
/// The flow and the affine data must share lattice and times.
pub fn build_robust_problem<'a>(
    flux_spec: FluxSpec,
    flow: &'a DiffeoFlowGrid,
    affine: &'a AffineFlowData,
    value_bound: f64,
) -> Result<TransformedProblem<'a>, CoreError> {
    if flux_spec.dim() != flow.dim() {
        return Err(CoreError::DimensionMismatch);
    }
    if affine.times.len() != flow.times.len() {
        return Err(CoreError::InvalidParameter(
            "flow and affine data must share the time grid",
        ));
    }
    if value_bound <= 0.0 || value_bound.is_nan() {
        return Err(CoreError::InvalidParameter("value bound must be positive"));
    }
    let grad_rho = lattice_gradient(flow, &affine.rho);
    let mut problem = TransformedProblem {
        flux_spec,
        kind: Kind::Robust {
            flow,
            affine,
            grad_rho,
        },
        wavespeed_bound: 0.0,
        value_bound,
    };
    problem.wavespeed_bound = sample_wavespeed(&problem, value_bound, flow);
    Ok(problem)
}

/// `v(t,x) = e^{mu_t} u(t, psi_t(x)) - rho(t,x)`, sampled at cell centers.
pub fn forward_transform(
    u: &GridSolution,
    flow: &DiffeoFlowGrid,
    affine: &AffineFlowData,
) -> Result<GridSolution, CoreError> {
    let d = u.grid.dim();
    if d != flow.dim() {
        return Err(CoreError::DimensionMismatch);
    }
    let mut data = Vec::with_capacity(u.times.len());
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut rho = [0.0];
    for (ti, &t) in u.times.iter().enumerate() {
        let e = math::exp(affine.mu_at(t));
        let mut vals = vec![0.0; u.grid.num_cells()];
        for (idx, val) in vals.iter_mut().enumerate() {
            u.grid.center(idx, &mut x);
            flow.psi_at(t, &x, &mut y);
            flow.interp_field(&affine.rho, 1, t, &x, &mut rho);
            *val = e * u.eval(ti, &y) - rho[0];
        }
        data.push(vals);
    }
    Ok(GridSolution::new(u.grid.clone(), u.times.clone(), data))
}

/// `u(t,y) = e^{-mu_t} (v(t,x) + rho(t,x))` at `x = psi_t^{-1}(y)`. The flow
/// grid must have the inverse flow sampled.
pub fn inverse_transform(
    v: &GridSolution,
    flow: &DiffeoFlowGrid,
    affine: &AffineFlowData,
) -> Result<GridSolution, CoreError> {
    let d = v.grid.dim();
    if d != flow.dim() {
        return Err(CoreError::DimensionMismatch);
    }
    if flow.psi_inv.is_empty() {
        return Err(CoreError::InvalidParameter(
            "inverse transform needs the sampled inverse flow",
        ));
    }
    let mut data = Vec::with_capacity(v.times.len());
    let mut y = vec![0.0; d];
    let mut x = vec![0.0; d];
    let mut rho = [0.0];
    for (ti, &t) in v.times.iter().enumerate() {
        let e = math::exp(-affine.mu_at(t));
        let mut vals = vec![0.0; v.grid.num_cells()];
        for (idx, val) in vals.iter_mut().enumerate() {
            v.grid.center(idx, &mut y);
            flow.psi_inv_at(t, &y, &mut x);
            flow.interp_field(&affine.rho, 1, t, &x, &mut rho);
            *val = e * (v.eval(ti, &x) + rho[0]);
        }
        data.push(vals);
    }
    Ok(GridSolution::new(v.grid.clone(), v.times.clone(), data))
}

/// Builds the general C^1-driver transformed problem, where nu may depend on
/// x (one scalar field per z^2 component) and a right-hand side F survives.
/// mu(t,x) and rho(t,x) are computed by trapezoidal quadrature along
/// re-integrated trajectories.
#[allow(clippy::too_many_arguments)]
pub fn build_general_transform_c1<'a>(
    flux_spec: FluxSpec,
    source: SourceSpec,
    coeffs: &Coefficients,
    nu_fields: &[ScalarField],
    driver: &PiecewiseLinearPath,
    flow: &'a DiffeoFlowGrid,
    quadrature_substeps: usize,
    value_bound: f64,
) -> Result<TransformedProblem<'a>, CoreError> {
    let d = coeffs.dim();
    if flux_spec.dim() != d || flow.dim() != d {
        return Err(CoreError::DimensionMismatch);
    }
    if nu_fields.len() != coeffs.n2() {
        return Err(CoreError::InvalidParameter(
            "one nu field per z^2 driver component required",
        ));
    }
    if !coeffs.affine.iter().all(|g| g.is_zero()) && flux_spec.second_derivative_bound().is_none() {
        return Err(CoreError::InvalidParameter(
            "affine noise requires a flux with bounded second derivative",
        ));
    }
    let nsub = quadrature_substeps.max(1);
    let out_times = &flow.times;
    let lat = &flow.lattice;
    let npts = lat.len();
    let nt = out_times.len();
    let mut mu = vec![vec![0.0; npts]; nt];
    let mut rho = vec![vec![0.0; npts]; nt];

    // Quadrature nodes: every driver segment refined nsub times, merged with
    // the output times.
    let seg_times = driver.times();
    let mut nodes: Vec<f64> = Vec::new();
    for seg in 0..driver.num_segments() {
        let (a, b) = (seg_times[seg], seg_times[seg + 1]);
        for k in 0..nsub {
            nodes.push(a + (b - a) * k as f64 / nsub as f64);
        }
    }
    nodes.push(seg_times[seg_times.len() - 1]);
    for &t in out_times {
        nodes.push(t);
    }
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

    let map = FlowMap::new(coeffs, driver, 4);
    let z2_range = coeffs.z2_range();
    let z3_range = coeffs.z3_range();
    let mut x = vec![0.0; d];
    let mut traj = vec![0.0; nodes.len() * d];
    for idx in 0..npts {
        lat.point(idx, &mut x);
        map.forward_record(&x, &nodes, |ni, y, _| {
            traj[ni * d..(ni + 1) * d].copy_from_slice(y);
        });
        // mu and rho accumulate together over the node intervals: mu feeds
        // e^{mu_r} into rho's integrand.
        let mut mu_acc = 0.0_f64;
        let mut rho_acc = 0.0_f64;
        let mut out_i = 0usize;
        let store = |t: f64,
                     out_i: &mut usize,
                     mu_acc: f64,
                     rho_acc: f64,
                     mu: &mut Vec<Vec<f64>>,
                     rho: &mut Vec<Vec<f64>>| {
            while *out_i < out_times.len() && out_times[*out_i] <= t + 1e-14 {
                mu[*out_i][idx] = mu_acc;
                rho[*out_i][idx] = rho_acc;
                *out_i += 1;
            }
        };
        store(0.0, &mut out_i, mu_acc, rho_acc, &mut mu, &mut rho);
        for ni in 0..nodes.len() - 1 {
            let (t0, t1) = (nodes[ni], nodes[ni + 1]);
            let h = t1 - t0;
            let seg = driver.segment_of(0.5 * (t0 + t1));
            let z2_slope = driver.segment_slope(seg, z2_range.clone());
            let z3_slope = driver.segment_slope(seg, z3_range.clone());
            let y0 = &traj[ni * d..(ni + 1) * d];
            let y1 = &traj[(ni + 1) * d..(ni + 2) * d];
            let nu_dot = |y: &[f64]| -> f64 {
                nu_fields
                    .iter()
                    .zip(&z2_slope)
                    .map(|(f, s)| f.eval(y) * s)
                    .sum()
            };
            let g_dot = |y: &[f64], mu_r: f64| -> f64 {
                coeffs
                    .affine
                    .iter()
                    .zip(&z3_slope)
                    .map(|(f, s)| math::exp(mu_r) * f.eval(y) * s)
                    .sum()
            };
            let mu0 = mu_acc;
            let dmu = 0.5 * h * (nu_dot(y0) + nu_dot(y1));
            mu_acc -= dmu;
            rho_acc += 0.5 * h * (g_dot(y0, mu0) + g_dot(y1, mu_acc));
            store(t1, &mut out_i, mu_acc, rho_acc, &mut mu, &mut rho);
        }
    }

    let grad_mu = lattice_gradient(flow, &mu);
    let grad_rho = lattice_gradient(flow, &rho);
    let mut problem = TransformedProblem {
        flux_spec,
        kind: Kind::GeneralC1 {
            flow,
            source,
            mu,
            rho,
            grad_mu,
            grad_rho,
        },
        wavespeed_bound: 0.0,
        value_bound,
    };
    problem.wavespeed_bound = sample_wavespeed(&problem, value_bound, flow);
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{
        compute_rho, solve_transport_flow, FlowLattice, FlowOptions, TransportField,
    };
    use crate::fvsolver::Grid;

    fn linear_driver(dim: usize, t_end: f64) -> PiecewiseLinearPath {
        PiecewiseLinearPath::from_fn(vec![0.0, t_end], dim, |t| vec![t; dim]).unwrap()
    }

    fn identity_setup(d: usize) -> (Coefficients, PiecewiseLinearPath) {
        let coeffs = Coefficients {
            transport: TransportField::Zero { dim: d, n1: 0 },
            nu: vec![],
            affine: vec![],
        };
        (coeffs, PiecewiseLinearPath::zero(1, 1.0))
    }

    fn solve_flow(
        coeffs: &Coefficients,
        driver: &PiecewiseLinearPath,
        lo: &[f64],
        hi: &[f64],
        n: usize,
        times: &[f64],
    ) -> DiffeoFlowGrid {
        let lattice = FlowLattice::uniform(lo, hi, n);
        solve_transport_flow(coeffs, driver, &lattice, times, 16, &FlowOptions::default()).unwrap()
    }

    #[test]
    fn noise_free_transform_is_identity() {
        let (coeffs, driver) = identity_setup(1);
        let flow = solve_flow(&coeffs, &driver, &[-1.0], &[1.0], 9, &[0.0, 0.5, 1.0]);
        let affine = compute_rho(&coeffs, &flow, &driver, 8).unwrap();
        let problem =
            build_robust_problem(FluxSpec::Burgers { dim: 1 }, &flow, &affine, 2.0).unwrap();
        let mut out = [0.0];
        problem.flux(0.7, &[0.3], 0.8, &mut out);
        assert!((out[0] - 0.5 * 0.8 * 0.8).abs() < 1e-13);
        assert_eq!(problem.flux_div(0.7, &[0.3], 0.8), 0.0);
        assert_eq!(problem.source(0.7, &[0.3], 0.8), 0.0);
        problem.flux_dv(0.7, &[0.3], 0.8, &mut out);
        assert!((out[0] - 0.8).abs() < 1e-13);
    }

    #[test]
    fn constant_shift_leaves_burgers_flux_unchanged() {
        // d = 1, H = c, nu = g = 0: Dpsi = 1, so flux(t,x,v) = f(v).
        let coeffs = Coefficients {
            transport: TransportField::Constant {
                cols: vec![vec![0.6]],
            },
            nu: vec![],
            affine: vec![],
        };
        let driver = linear_driver(1, 1.0);
        let flow = solve_flow(&coeffs, &driver, &[-2.0], &[2.0], 17, &[0.0, 0.5, 1.0]);
        let affine = compute_rho(&coeffs, &flow, &driver, 8).unwrap();
        let problem =
            build_robust_problem(FluxSpec::Burgers { dim: 1 }, &flow, &affine, 2.0).unwrap();
        let mut out = [0.0];
        problem.flux(1.0, &[0.25], -0.4, &mut out);
        assert!((out[0] - 0.5 * 0.16).abs() < 1e-10);
        assert!((problem.wavespeed_bound - 2.0).abs() < 1e-9);
    }

    #[test]
    fn exponential_damping_flux_closed_form() {
        // d = 1, H = 0, nu = 1, g = 0, z^2 = t: mu_t = -t and
        // flux(t,x,v) = e^{mu} f(e^{-mu} v) = e^{t} v^2 / 2 for Burgers.
        let coeffs = Coefficients {
            transport: TransportField::Zero { dim: 1, n1: 0 },
            nu: vec![1.0],
            affine: vec![],
        };
        let driver = linear_driver(1, 1.0);
        let flow = solve_flow(&coeffs, &driver, &[-1.0], &[1.0], 9, &[0.0, 0.5, 1.0]);
        let affine = compute_rho(&coeffs, &flow, &driver, 8).unwrap();
        let problem =
            build_robust_problem(FluxSpec::Burgers { dim: 1 }, &flow, &affine, 2.0).unwrap();
        let mut out = [0.0];
        for &(t, v) in &[(0.5, 0.8), (1.0, -0.3)] {
            problem.flux(t, &[0.0], v, &mut out);
            assert!(
                (out[0] - math::exp(t) * 0.5 * v * v).abs() < 1e-12,
                "t = {t}, v = {v}: {}",
                out[0]
            );
        }
    }

    #[test]
    fn flux_dv_matches_finite_differences() {
        let coeffs = Coefficients {
            transport: TransportField::Rotation { omega: 1.0 },
            nu: vec![0.5],
            affine: vec![ScalarField::GaussianBump {
                amp: 0.3,
                sigma: 0.5,
                center: vec![0.0, 0.0],
            }],
        };
        let driver = linear_driver(3, 1.0);
        let flow = solve_flow(
            &coeffs,
            &driver,
            &[-1.5, -1.5],
            &[1.5, 1.5],
            25,
            &[0.0, 0.5, 1.0],
        );
        let affine = compute_rho(&coeffs, &flow, &driver, 16).unwrap();
        let problem =
            build_robust_problem(FluxSpec::Burgers { dim: 2 }, &flow, &affine, 2.0).unwrap();
        let x = [0.3, -0.2];
        let (t, v) = (0.8, 0.6);
        let eps = 1e-6;
        let mut dv = [0.0; 2];
        let mut fp = [0.0; 2];
        let mut fm = [0.0; 2];
        problem.flux_dv(t, &x, v, &mut dv);
        problem.flux(t, &x, v + eps, &mut fp);
        problem.flux(t, &x, v - eps, &mut fm);
        for i in 0..2 {
            let fd = (fp[i] - fm[i]) / (2.0 * eps);
            assert!(
                (dv[i] - fd).abs() < 1e-6 * (1.0 + fd.abs()),
                "axis {i}: {} vs {}",
                dv[i],
                fd
            );
        }
    }

    #[test]
    fn flux_div_matches_lattice_finite_differences() {
        let coeffs = Coefficients {
            transport: TransportField::StreamGaussian {
                amp: 0.4,
                sigma: 0.7,
                center: [0.0, 0.0],
            },
            nu: vec![0.5],
            affine: vec![ScalarField::GaussianBump {
                amp: 0.3,
                sigma: 0.5,
                center: vec![0.0, 0.0],
            }],
        };
        let driver = linear_driver(3, 1.0);
        let n = 41;
        let flow = solve_flow(
            &coeffs,
            &driver,
            &[-1.5, -1.5],
            &[1.5, 1.5],
            n,
            &[0.0, 0.5, 1.0],
        );
        let affine = compute_rho(&coeffs, &flow, &driver, 16).unwrap();
        let problem =
            build_robust_problem(FluxSpec::Burgers { dim: 2 }, &flow, &affine, 2.0).unwrap();
        // FD with step = lattice spacing, at interior lattice points, for
        // frozen v; the Jacobian divergence drops by volume preservation so
        // residuals are O(spacing^2).
        let h = flow.lattice.spacing[0];
        let (t, v) = (1.0, 0.4);
        let mut worst = 0.0_f64;
        for &p in &[[0.15, -0.3], [0.0, 0.0], [-0.45, 0.3]] {
            let div = problem.flux_div(t, &p, v);
            let mut fd = 0.0;
            let mut fp = [0.0; 2];
            let mut fm = [0.0; 2];
            for axis in 0..2 {
                let mut xp = p;
                let mut xm = p;
                xp[axis] += h;
                xm[axis] -= h;
                problem.flux(t, &xp, v, &mut fp);
                problem.flux(t, &xm, v, &mut fm);
                fd += (fp[axis] - fm[axis]) / (2.0 * h);
            }
            worst = math::max(worst, math::abs(div - fd));
        }
        assert!(worst < 20.0 * h * h, "worst = {worst}, h^2 = {}", h * h);
    }

    #[test]
    fn forward_transform_of_constant_under_damping() {
        // u = 1, nu = 1, g = 0, z^2 = t: v(t,x) = e^{-t}.
        let coeffs = Coefficients {
            transport: TransportField::Zero { dim: 1, n1: 0 },
            nu: vec![1.0],
            affine: vec![],
        };
        let driver = linear_driver(1, 1.0);
        let flow = solve_flow(&coeffs, &driver, &[-1.0], &[1.0], 9, &[0.0, 0.5, 1.0]);
        let affine = compute_rho(&coeffs, &flow, &driver, 8).unwrap();
        let grid = Grid::from_box(&[-1.0], &[1.0], &[40]).unwrap();
        let u = GridSolution::new(grid.clone(), vec![0.0, 0.5, 1.0], vec![vec![1.0; 40]; 3]);
        let v = forward_transform(&u, &flow, &affine).unwrap();
        for (ti, &t) in v.times.iter().enumerate() {
            for &val in v.snapshot(ti) {
                assert!((val - math::exp(-t)).abs() < 1e-12, "t = {t}");
            }
        }
    }

    #[test]
    fn round_trip_discrepancy_halves_with_grid() {
        // Gaussian bump under the 2D rotation flow; forward then inverse
        // transform should return the input up to interpolation error,
        // first order in the cell size.
        let coeffs = Coefficients {
            transport: TransportField::Rotation { omega: 1.0 },
            nu: vec![0.5],
            affine: vec![ScalarField::GaussianBump {
                amp: 0.5,
                sigma: 0.4,
                center: vec![0.0, 0.0],
            }],
        };
        let driver = linear_driver(3, 1.0);
        let flow = solve_flow(
            &coeffs,
            &driver,
            &[-2.0, -2.0],
            &[2.0, 2.0],
            41,
            &[0.0, 0.5, 1.0],
        );
        let affine = compute_rho(&coeffs, &flow, &driver, 16).unwrap();
        let disc = |cells: usize| -> f64 {
            let grid = Grid::from_box(&[-2.0, -2.0], &[2.0, 2.0], &[cells, cells]).unwrap();
            let u0 = grid.sample(|x| math::exp(-(x[0] * x[0] + x[1] * x[1]) / (2.0 * 0.09)));
            let u = GridSolution::new(
                grid.clone(),
                vec![0.0, 0.5, 1.0],
                vec![u0.clone(), u0.clone(), u0],
            );
            let v = forward_transform(&u, &flow, &affine).unwrap();
            let back = inverse_transform(&v, &flow, &affine).unwrap();
            let vol = grid.cell_volume();
            let mut l1 = 0.0;
            for (a, b) in back.snapshot(2).iter().zip(u.snapshot(2)) {
                l1 += (a - b).abs() * vol;
            }
            l1
        };
        let coarse = disc(40);
        let fine = disc(80);
        assert!(
            coarse / fine > 1.6,
            "coarse = {coarse}, fine = {fine} (expected ~2x drop)"
        );
    }

    #[test]
    fn inverse_transform_of_zero_is_scaled_rho() {
        // v = 0, g != 0: u(t,y) = e^{-mu_t} rho(t, psi_t^{-1}(y)).
        let coeffs = Coefficients {
            transport: TransportField::Zero { dim: 1, n1: 0 },
            nu: vec![1.0],
            affine: vec![ScalarField::Constant { value: 1.0 }],
        };
        let driver = linear_driver(2, 1.0);
        let flow = solve_flow(&coeffs, &driver, &[-1.0], &[1.0], 9, &[0.0, 1.0]);
        let affine = compute_rho(&coeffs, &flow, &driver, 64).unwrap();
        let grid = Grid::from_box(&[-1.0], &[1.0], &[16]).unwrap();
        let v = GridSolution::new(grid, vec![0.0, 1.0], vec![vec![0.0; 16]; 2]);
        let u = inverse_transform(&v, &flow, &affine).unwrap();
        // rho(1) = 1 - e^{-1}, mu(1) = -1: u = e^{1}(1 - e^{-1}) = e - 1.
        let want = math::exp(1.0) - 1.0;
        for &val in u.snapshot(1) {
            assert!((val - want).abs() < 1e-4, "{val} vs {want}");
        }
        for &val in u.snapshot(0) {
            assert_eq!(val, 0.0);
        }
    }

    #[test]
    fn general_mode_with_constant_nu_matches_robust() {
        let coeffs = Coefficients {
            transport: TransportField::Zero { dim: 1, n1: 0 },
            nu: vec![0.7],
            affine: vec![ScalarField::GaussianBump {
                amp: 0.3,
                sigma: 0.5,
                center: vec![0.0, 0.0],
            }],
        };
        let driver = linear_driver(2, 1.0);
        let flow = solve_flow(&coeffs, &driver, &[-1.0], &[1.0], 33, &[0.0, 0.5, 1.0]);
        let affine = compute_rho(&coeffs, &flow, &driver, 64).unwrap();
        let robust =
            build_robust_problem(FluxSpec::Burgers { dim: 1 }, &flow, &affine, 2.0).unwrap();
        let general = build_general_transform_c1(
            FluxSpec::Burgers { dim: 1 },
            SourceSpec::Zero,
            &coeffs,
            &[ScalarField::Constant { value: 0.7 }],
            &driver,
            &flow,
            64,
            2.0,
        )
        .unwrap();
        let mut a = [0.0];
        let mut b = [0.0];
        for &(t, x, v) in &[(0.5, 0.2, 0.8), (1.0, -0.4, -0.3)] {
            robust.flux(t, &[x], v, &mut a);
            general.flux(t, &[x], v, &mut b);
            assert!((a[0] - b[0]).abs() < 1e-5, "{} vs {}", a[0], b[0]);
            // Constant nu: the grad(mu) part of the source vanishes.
            assert!(general.source(t, &[x], v).abs() < 1e-6);
        }
    }

    #[test]
    fn general_mode_source_spot_value() {
        // nu(x) = sin x, H = 0, z^2 = t: mu(t,x) = -t sin x, so
        // d_x mu(1, 0) = -1 and the F = 0 source at x = 0 is -flux(1,0,v).
        let coeffs = Coefficients {
            transport: TransportField::Zero { dim: 1, n1: 0 },
            nu: vec![1.0],
            affine: vec![],
        };
        let driver = linear_driver(1, 1.0);
        let flow = solve_flow(&coeffs, &driver, &[-1.0], &[1.0], 201, &[0.0, 0.5, 1.0]);
        let problem = build_general_transform_c1(
            FluxSpec::Burgers { dim: 1 },
            SourceSpec::Zero,
            &coeffs,
            &[ScalarField::SinX1],
            &driver,
            &flow,
            64,
            2.0,
        )
        .unwrap();
        let v = 0.6;
        let mut f = [0.0];
        problem.flux(1.0, &[0.0], v, &mut f);
        // mu(1,0) = 0 so flux(1,0,v) = f(v) = 0.18.
        assert!((f[0] - 0.18).abs() < 1e-4, "{}", f[0]);
        let s = problem.source(1.0, &[0.0], v);
        assert!((s - (-f[0])).abs() < 1e-3, "source = {s}, flux = {}", f[0]);
    }

    #[test]
    fn affine_noise_requires_bounded_second_derivative() {
        let coeffs = Coefficients {
            transport: TransportField::Zero { dim: 1, n1: 0 },
            nu: vec![1.0],
            affine: vec![ScalarField::Constant { value: 1.0 }],
        };
        let driver = linear_driver(2, 1.0);
        let flow = solve_flow(&coeffs, &driver, &[-1.0], &[1.0], 9, &[0.0, 1.0]);
        let err = build_general_transform_c1(
            FluxSpec::Exp { dim: 1 },
            SourceSpec::Zero,
            &coeffs,
            &[ScalarField::Constant { value: 1.0 }],
            &driver,
            &flow,
            16,
            2.0,
        );
        assert!(err.is_err());
    }
}
