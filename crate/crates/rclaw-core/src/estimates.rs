//! Quantitative stability machinery: sampled stability constants for
//! (pairs of) transformed problems, closed-form growth / stability / rate
//! bound evaluators, and numerical hypothesis validation.
//!
//! All sup-norms are sampled on a finite lattice over a user-supplied box,
//! value range and time list, so they are lower estimates of the true sups;
//! densifying the lattice can only increase them. Bound evaluators are pure
//! formulas and live here so audits can assert
//! `measured <= bound + scheme allowance`.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::transform::TransformedProblem;

/// Finite sampling domain: a box lattice, a symmetric value range and a
/// list of sample times.
#[derive(Debug, Clone)]
pub struct SamplingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Lattice points per spatial axis (>= 2).
    pub pts_per_axis: usize,
    pub times: Vec<f64>,
    /// Values are sampled in [-value_range, value_range].
    pub value_range: f64,
    pub value_samples: usize,
}

impl SamplingBox {
    pub fn new(lo: &[f64], hi: &[f64], pts_per_axis: usize, times: &[f64], v: f64) -> Self {
        SamplingBox {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            pts_per_axis: pts_per_axis.max(2),
            times: times.to_vec(),
            value_range: v,
            value_samples: 9,
        }
    }

    fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Visits every (t, x, v) lattice sample.
    fn for_each(&self, mut visit: impl FnMut(f64, &[f64], f64)) {
        let d = self.dim();
        let n = self.pts_per_axis;
        let m = self.value_samples.max(2);
        let npts = n.pow(d as u32);
        let mut x = vec![0.0; d];
        for &t in &self.times {
            for flat in 0..npts {
                let mut rem = flat;
                for a in (0..d).rev() {
                    let i = rem % n;
                    rem /= n;
                    x[a] = self.lo[a] + (self.hi[a] - self.lo[a]) * i as f64 / (n - 1) as f64;
                }
                for k in 0..m {
                    let v = -self.value_range + 2.0 * self.value_range * k as f64 / (m - 1) as f64;
                    visit(t, &x, v);
                }
            }
        }
    }

    /// Finite-difference step for spatial derivatives: a small fraction of
    /// the shortest box extent.
    fn fd_step(&self) -> f64 {
        let mut ext = f64::INFINITY;
        for a in 0..self.dim() {
            ext = math::min(ext, self.hi[a] - self.lo[a]);
        }
        1e-4 * ext
    }
}

/// Sampled constants controlling total-variation growth and L1 stability of
/// entropy solutions: `kappa0` drives TV growth of the first problem,
/// `kappa` and `m` (cone speed) drive the localized comparison of the pair,
/// `v` is the joint value bound and `cd = (pi/2) d` the dimensional factor.
#[derive(Debug, Clone)]
pub struct StabilityConstants {
    pub kappa0: f64,
    pub kappa: f64,
    pub m: f64,
    pub v: f64,
    pub cd: f64,
}

/// Samples the stability constants for the pair (problem_a, problem_b):
///
/// * `kappa0 = (2d+1) sup|grad_x d_v f_a| + sup|d_v S_a|`
/// * `kappa  = sup|d_v S_a| + sup|d_v div_x (f_b - f_a)|`
/// * `m      = sup |d_v f_b|_2` (cone / propagation speed)
///
/// Spatial derivatives of `d_v f` use central differences with a step tied
/// to the box; value derivatives use central differences over the value
/// range. All sups are lattice samples, i.e. lower estimates.
pub fn estimate_constants(
    problem_a: &TransformedProblem<'_>,
    problem_b: &TransformedProblem<'_>,
    sampling: &SamplingBox,
) -> StabilityConstants {
    let d = problem_a.dim();
    assert_eq!(d, problem_b.dim(), "problems must share the dimension");
    assert_eq!(d, sampling.dim(), "sampling box must match the dimension");
    let hx = sampling.fd_step();
    let hv = 1e-4 * sampling.value_range.max(1.0);

    let mut grad_dflux = 0.0f64;
    let mut dsource = 0.0f64;
    let mut ddiv_gap = 0.0f64;
    let mut speed = 0.0f64;
    let mut fp = vec![0.0; d];
    let mut fm = vec![0.0; d];
    let mut xp = vec![0.0; d];
    sampling.for_each(|t, x, v| {
        // sup over entries of the d x d matrix grad_x d_v f_a.
        for a in 0..d {
            xp.copy_from_slice(x);
            xp[a] = x[a] + hx;
            problem_a.flux_dv(t, &xp, v, &mut fp);
            xp[a] = x[a] - hx;
            problem_a.flux_dv(t, &xp, v, &mut fm);
            for j in 0..d {
                grad_dflux = math::max(grad_dflux, math::abs((fp[j] - fm[j]) / (2.0 * hx)));
            }
        }
        // d_v of the source of problem_a.
        let sd = (problem_a.source(t, x, v + hv) - problem_a.source(t, x, v - hv)) / (2.0 * hv);
        dsource = math::max(dsource, math::abs(sd));
        // d_v of div_x (f_b - f_a).
        let gap_p = problem_b.flux_div(t, x, v + hv) - problem_a.flux_div(t, x, v + hv);
        let gap_m = problem_b.flux_div(t, x, v - hv) - problem_a.flux_div(t, x, v - hv);
        ddiv_gap = math::max(ddiv_gap, math::abs((gap_p - gap_m) / (2.0 * hv)));
        // Euclidean norm of d_v f_b: propagation speed.
        problem_b.flux_dv(t, x, v, &mut fp);
        let mut s2 = 0.0;
        for j in 0..d {
            s2 += fp[j] * fp[j];
        }
        speed = math::max(speed, math::sqrt(s2));
    });

    StabilityConstants {
        kappa0: (2.0 * d as f64 + 1.0) * grad_dflux + dsource,
        kappa: dsource + ddiv_gap,
        m: speed,
        v: sampling.value_range,
        cd: 0.5 * core::f64::consts::PI * d as f64,
    }
}

/// Sup-norm growth bound: `(|u0|_inf + 1) e^{2 m t}`, where `m` bounds both
/// the zero-level forcing and its value derivative.
pub fn linf_bound(u0_linf: f64, m: f64, t: f64) -> f64 {
    (u0_linf + 1.0) * math::exp(2.0 * m * t)
}

/// The constant entering [`linf_bound`] for one problem:
/// `sup |(div_x f - S)(t, x, 0)| + sup |d_v (div_x f - S)|`, sampled on the
/// box.
pub fn linf_growth_constant(problem: &TransformedProblem<'_>, sampling: &SamplingBox) -> f64 {
    assert_eq!(problem.dim(), sampling.dim());
    let hv = 1e-4 * sampling.value_range.max(1.0);
    let forcing = |t: f64, x: &[f64], v: f64| problem.flux_div(t, x, v) - problem.source(t, x, v);
    let mut at_zero = 0.0f64;
    let mut deriv = 0.0f64;
    sampling.for_each(|t, x, v| {
        let d = (forcing(t, x, v + hv) - forcing(t, x, v - hv)) / (2.0 * hv);
        deriv = math::max(deriv, math::abs(d));
    });
    // v = 0 is sampled explicitly (the value lattice may miss it).
    let n = sampling.pts_per_axis;
    let d = sampling.dim();
    let mut x = vec![0.0; d];
    for &t in &sampling.times {
        for flat in 0..n.pow(d as u32) {
            let mut rem = flat;
            for a in (0..d).rev() {
                let i = rem % n;
                rem /= n;
                x[a] =
                    sampling.lo[a] + (sampling.hi[a] - sampling.lo[a]) * i as f64 / (n - 1) as f64;
            }
            at_zero = math::max(at_zero, math::abs(forcing(t, &x, 0.0)));
        }
    }
    at_zero + deriv
}

/// Time-weighted integral used by the TV growth bound:
/// `trapz_r( e^{kappa0 (t - r)} * int_box sup_v |grad_x (S - div_x f)(r, x, .)| dx )`
/// over the sampling times up to `t`, with the spatial integral as a
/// lattice Riemann sum and the gradient by central differences.
pub fn weighted_forcing_gradient_integral(
    problem: &TransformedProblem<'_>,
    sampling: &SamplingBox,
    kappa0: f64,
    t: f64,
) -> f64 {
    let d = problem.dim();
    assert_eq!(d, sampling.dim());
    let hx = sampling.fd_step();
    let n = sampling.pts_per_axis;
    let m = sampling.value_samples.max(2);
    let mut cell_vol = 1.0;
    for a in 0..d {
        cell_vol *= (sampling.hi[a] - sampling.lo[a]) / (n - 1) as f64;
    }
    let forcing = |r: f64, x: &[f64], v: f64| problem.source(r, x, v) - problem.flux_div(r, x, v);
    let mut x = vec![0.0; d];
    let mut xp = vec![0.0; d];
    let times: Vec<f64> = sampling.times.iter().copied().filter(|&r| r <= t).collect();
    let mut spatial = Vec::with_capacity(times.len());
    for &r in &times {
        let mut integral = 0.0;
        for flat in 0..n.pow(d as u32) {
            let mut rem = flat;
            for a in (0..d).rev() {
                let i = rem % n;
                rem /= n;
                x[a] =
                    sampling.lo[a] + (sampling.hi[a] - sampling.lo[a]) * i as f64 / (n - 1) as f64;
            }
            let mut sup = 0.0f64;
            for k in 0..m {
                let v =
                    -sampling.value_range + 2.0 * sampling.value_range * k as f64 / (m - 1) as f64;
                let mut g2 = 0.0;
                for a in 0..d {
                    xp.copy_from_slice(&x);
                    xp[a] = x[a] + hx;
                    let fp = forcing(r, &xp, v);
                    xp[a] = x[a] - hx;
                    let fm = forcing(r, &xp, v);
                    let g = (fp - fm) / (2.0 * hx);
                    g2 += g * g;
                }
                sup = math::max(sup, math::sqrt(g2));
            }
            integral += sup * cell_vol;
        }
        spatial.push(integral);
    }
    let mut total = 0.0;
    for i in 0..times.len().saturating_sub(1) {
        let dr = times[i + 1] - times[i];
        let w0 = math::exp(kappa0 * (t - times[i])) * spatial[i];
        let w1 = math::exp(kappa0 * (t - times[i + 1])) * spatial[i + 1];
        total += 0.5 * dr * (w0 + w1);
    }
    total
}

/// Total-variation growth bound:
/// `TV(u0) e^{kappa0 t} + (pi/2) d * integral_term`, where `integral_term`
/// is the time-weighted spatial integral of the gradient of the effective
/// forcing, supplied by the caller's quadrature.
pub fn tv_bound(tv_u0: f64, kappa0: f64, t: f64, integral_term: f64, dim: usize) -> f64 {
    tv_u0 * math::exp(kappa0 * t) + 0.5 * core::f64::consts::PI * dim as f64 * integral_term
}

/// `(e^{a t} - e^{b t}) / (a - b)`, evaluated as
/// `e^{b t} * t * expm1((a - b) t) / ((a - b) t)` so the cancellation for
/// small `a - b` is avoided; the value tends to `t e^{a t}` as `a -> b`.
pub fn exp_difference_quotient(a: f64, b: f64, t: f64) -> f64 {
    let d = (a - b) * t;
    if math::abs(d) < 1e-12 {
        t * math::exp(a * t)
    } else {
        math::exp(b * t) * t * (math::expm1(d) / d)
    }
}

/// Right side of the localized L1 stability estimate for two entropy
/// solutions on a ball, with caller-supplied quadrature data:
///
/// `e^{kappa t} * l1_initial_gap`
/// `+ dflux_gap * [ Q(t) TV(u0) + cd * trapz_r( Q(t - r) grad_force(r) ) ]`
/// `+ trapz_r( e^{kappa (t - r)} force_gap(r) )`
///
/// where `Q = exp_difference_quotient(kappa0, kappa, .)`, `grad_force(r)` is
/// the spatial integral of the gradient sup of the first problem's forcing,
/// and `force_gap(r)` the ball-restricted spatial integral of the forcing
/// mismatch between the two problems. `quad_times` must be increasing and
/// cover [0, t]; both value slices are sampled at those times.
#[allow(clippy::too_many_arguments)]
pub fn local_stability_bound(
    t: f64,
    constants: &StabilityConstants,
    l1_initial_gap: f64,
    dflux_gap: f64,
    tv_u0: f64,
    quad_times: &[f64],
    grad_force_vals: &[f64],
    force_gap_vals: &[f64],
) -> f64 {
    assert_eq!(quad_times.len(), grad_force_vals.len());
    assert_eq!(quad_times.len(), force_gap_vals.len());
    let q = |s: f64| exp_difference_quotient(constants.kappa0, constants.kappa, s);
    let mut weighted_grad = 0.0;
    let mut weighted_gap = 0.0;
    for w in quad_times.windows(2).enumerate() {
        let (i, w) = w;
        let dr = w[1] - w[0];
        let g0 = q(t - w[0]) * grad_force_vals[i];
        let g1 = q(t - w[1]) * grad_force_vals[i + 1];
        weighted_grad += 0.5 * dr * (g0 + g1);
        let e0 = math::exp(constants.kappa * (t - w[0])) * force_gap_vals[i];
        let e1 = math::exp(constants.kappa * (t - w[1])) * force_gap_vals[i + 1];
        weighted_gap += 0.5 * dr * (e0 + e1);
    }
    math::exp(constants.kappa * t) * l1_initial_gap
        + dflux_gap * (q(t) * tv_u0 + constants.cd * weighted_grad)
        + weighted_gap
}

/// Driver-continuity rate bound: `|u0_gap|_L1 + K * TV(u0) * rough_dist`,
/// where `rough_dist` is the inhomogeneous p-variation distance between the
/// two drivers and `K` an empirically estimated constant.
pub fn rate_bound(l1_u0_gap: f64, k: f64, tv_u0: f64, rough_dist: f64) -> f64 {
    l1_u0_gap + k * tv_u0 * rough_dist
}

/// Sampled finiteness / size report for the structural hypotheses a
/// transformed problem must satisfy: bounded flux, bounded value derivative
/// and its spatial gradient, integrable forcing. Sampling certifies only
/// the recorded box, range and times.
#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    pub value_range: f64,
    pub sup_flux: f64,
    pub sup_flux_dv: f64,
    pub sup_grad_flux_dv: f64,
    pub sup_div_flux: f64,
    pub sup_source_dv: f64,
    /// Quadrature of the box integral of sup_v |S - div_x f| over the time
    /// list (integrability check of the effective forcing).
    pub forcing_integral: f64,
    pub all_finite: bool,
    /// Any sampled sup above 1e12: formally finite on the box but
    /// practically unusable in the growth bounds.
    pub suspiciously_large: bool,
}

/// Samples every hypothesis quantity for one problem on the given box.
pub fn validate_hypotheses(
    problem: &TransformedProblem<'_>,
    sampling: &SamplingBox,
) -> HypothesisReport {
    let d = problem.dim();
    assert_eq!(d, sampling.dim(), "sampling box must match the dimension");
    let hx = sampling.fd_step();
    let mut sup_flux = 0.0f64;
    let mut sup_dv = 0.0f64;
    let mut sup_grad_dv = 0.0f64;
    let mut sup_div = 0.0f64;
    let mut sup_src_dv = 0.0f64;
    let mut forcing_sup_per_time = vec![0.0f64; sampling.times.len()];
    let hv = 1e-4 * sampling.value_range.max(1.0);
    let mut buf = vec![0.0; d];
    let mut fp = vec![0.0; d];
    let mut fm = vec![0.0; d];
    let mut xp = vec![0.0; d];
    let mut ti = 0usize;
    let mut last_t = f64::NAN;
    sampling.for_each(|t, x, v| {
        if t != last_t {
            ti = sampling.times.iter().position(|&s| s == t).unwrap();
            last_t = t;
        }
        problem.flux(t, x, v, &mut buf);
        for j in 0..d {
            sup_flux = math::max(sup_flux, math::abs(buf[j]));
        }
        problem.flux_dv(t, x, v, &mut buf);
        for j in 0..d {
            sup_dv = math::max(sup_dv, math::abs(buf[j]));
        }
        for a in 0..d {
            xp.copy_from_slice(x);
            xp[a] = x[a] + hx;
            problem.flux_dv(t, &xp, v, &mut fp);
            xp[a] = x[a] - hx;
            problem.flux_dv(t, &xp, v, &mut fm);
            for j in 0..d {
                sup_grad_dv = math::max(sup_grad_dv, math::abs((fp[j] - fm[j]) / (2.0 * hx)));
            }
        }
        let div = problem.flux_div(t, x, v);
        sup_div = math::max(sup_div, math::abs(div));
        let sd = (problem.source(t, x, v + hv) - problem.source(t, x, v - hv)) / (2.0 * hv);
        sup_src_dv = math::max(sup_src_dv, math::abs(sd));
        let forcing = math::abs(problem.source(t, x, v) - div);
        forcing_sup_per_time[ti] = math::max(forcing_sup_per_time[ti], forcing);
    });

    // Box volume times the per-time sup, integrated by trapezoid: an upper
    // proxy for the spatial integral that still detects non-integrability.
    let mut vol = 1.0;
    for a in 0..d {
        vol *= sampling.hi[a] - sampling.lo[a];
    }
    let mut forcing_integral = 0.0;
    for i in 0..sampling.times.len().saturating_sub(1) {
        let dt = sampling.times[i + 1] - sampling.times[i];
        forcing_integral +=
            0.5 * dt * vol * (forcing_sup_per_time[i] + forcing_sup_per_time[i + 1]);
    }

    let vals = [
        sup_flux,
        sup_dv,
        sup_grad_dv,
        sup_div,
        sup_src_dv,
        forcing_integral,
    ];
    HypothesisReport {
        box_lo: sampling.lo.clone(),
        box_hi: sampling.hi.clone(),
        value_range: sampling.value_range,
        sup_flux,
        sup_flux_dv: sup_dv,
        sup_grad_flux_dv: sup_grad_dv,
        sup_div_flux: sup_div,
        sup_source_dv: sup_src_dv,
        forcing_integral,
        all_finite: vals.iter().all(|v| v.is_finite()),
        suspiciously_large: vals.iter().any(|&v| v > 1e12),
    }
}
