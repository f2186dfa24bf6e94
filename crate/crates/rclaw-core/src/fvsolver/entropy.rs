use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::transform::TransformedProblem;

use super::grid::{Grid, GridSolution};

/// Smooth compactly supported bump: `exp(1 - 1/(1 - s^2))` on |s| < 1.
fn bump(s: f64) -> f64 {
    if s * s >= 1.0 {
        0.0
    } else {
        math::exp(1.0 - 1.0 / (1.0 - s * s))
    }
}

fn bump_d(s: f64) -> f64 {
    if s * s >= 1.0 {
        0.0
    } else {
        let q = 1.0 - s * s;
        bump(s) * (-2.0 * s / (q * q))
    }
}

/// Tensor-product bump test functions `phi(t,x) = B((t-tc)/wt) prod_a
/// B((x_a-c_a)/w)`, vanishing at t = 0 and t = T. The family is a fixed
/// lattice of spatial centers times a list of widths.
#[derive(Debug, Clone)]
pub struct TestFunctionFamily {
    /// (width, center) per spatial bump; every support must lie inside the
    /// grid box, otherwise the functional loses its compact-support
    /// cancellations.
    pub bumps: Vec<(f64, Vec<f64>)>,
    pub time_center: f64,
    pub time_width: f64,
}

impl TestFunctionFamily {
    /// Three widths scaled to the box; for each width, a lattice of
    /// `centers_per_axis`^d centers placed so the supports stay inside the
    /// box. One time bump covering (0, T).
    pub fn standard(grid: &Grid, t_end: f64, centers_per_axis: usize) -> Self {
        let d = grid.dim();
        let extent: f64 = (0..d)
            .map(|a| grid.upper(a) - grid.origin[a])
            .fold(f64::INFINITY, math::min);
        let widths = [0.08 * extent, 0.15 * extent, 0.3 * extent];
        let m = centers_per_axis.max(1);
        let mut bumps = Vec::new();
        for &w in &widths {
            let axis_centers: Vec<Vec<f64>> = (0..d)
                .map(|a| {
                    let lo = grid.origin[a] + w;
                    let hi = grid.upper(a) - w;
                    (0..m)
                        .map(|i| {
                            if m == 1 {
                                0.5 * (lo + hi)
                            } else {
                                lo + (hi - lo) * i as f64 / (m - 1) as f64
                            }
                        })
                        .collect()
                })
                .collect();
            match d {
                1 => {
                    for &c in &axis_centers[0] {
                        bumps.push((w, vec![c]));
                    }
                }
                2 => {
                    for &cx in &axis_centers[0] {
                        for &cy in &axis_centers[1] {
                            bumps.push((w, vec![cx, cy]));
                        }
                    }
                }
                _ => unreachable!("dimension cap is 2"),
            }
        }
        TestFunctionFamily {
            bumps,
            time_center: 0.5 * t_end,
            time_width: 0.499 * t_end,
        }
    }
}

/// Result of the Kruzkov entropy audit: the minimum of the discretized
/// entropy functional over all (k, phi) pairs. Entropy solutions give a
/// nonnegative value up to quadrature error; a markedly negative minimum
/// flags a non-entropy profile.
#[derive(Debug, Clone)]
pub struct EntropyAudit {
    pub min_residual: f64,
    pub worst_k: f64,
    pub worst_center: Vec<f64>,
    pub worst_width: f64,
    pub pairs_evaluated: usize,
}

/// Evaluates `int |u-k| d_t phi + sgn(u-k)(flux(t,x,u) - flux(t,x,k)) .
/// grad phi + sgn(u-k)(source(t,x,u) - div flux(t,x,k)) phi dx dt` for every
/// (k, phi) in the family, by midpoint quadrature in space (exact for the
/// piecewise-constant solution) and trapezoid in time. The solution must
/// carry densely stored time levels.
pub fn entropy_residual(
    problem: &TransformedProblem,
    solution: &GridSolution,
    k_values: &[f64],
    family: &TestFunctionFamily,
) -> EntropyAudit {
    let grid = &solution.grid;
    let d = grid.dim();
    let nk = k_values.len();
    let cell_vol = grid.cell_volume();
    let mut audit = EntropyAudit {
        min_residual: f64::INFINITY,
        worst_k: f64::NAN,
        worst_center: Vec::new(),
        worst_width: f64::NAN,
        pairs_evaluated: 0,
    };

    let mut vs = vec![0.0; 1 + nk];
    vs[1..].copy_from_slice(k_values);
    let mut flux_buf = vec![0.0; (1 + nk) * d];
    let mut flux_buf_next = vec![0.0; (1 + nk) * d];
    let mut div_buf = vec![0.0; nk];
    let mut div_buf_next = vec![0.0; nk];
    let mut acc = vec![0.0; nk];

    for (w, center) in family.bumps.iter().map(|(w, c)| (*w, c)) {
        // Cell index window covering the support of this bump.
        let mut lo = [0usize; 2];
        let mut hi = [0usize; 2];
        for a in 0..d {
            let l = (center[a] - w - grid.origin[a]) / grid.h[a];
            let r = (center[a] + w - grid.origin[a]) / grid.h[a];
            lo[a] = math::max(0.0, math::floor(l)) as usize;
            hi[a] = math::min(grid.n[a] as f64, math::ceil(r)) as usize;
        }
        let cells: Vec<usize> = match d {
            1 => (lo[0]..hi[0]).collect(),
            2 => {
                let mut c = Vec::new();
                for i in lo[0]..hi[0] {
                    for j in lo[1]..hi[1] {
                        c.push(i * grid.n[1] + j);
                    }
                }
                c
            }
            _ => unreachable!(),
        };
        // Spatial bump and gradient at the covered cell centers.
        let mut x = vec![0.0; d];
        let mut phi_s = vec![0.0; cells.len()];
        let mut grad_s = vec![0.0; cells.len() * d];
        for (ci, &idx) in cells.iter().enumerate() {
            grid.center(idx, &mut x);
            let mut p = 1.0;
            for a in 0..d {
                p *= bump((x[a] - center[a]) / w);
            }
            phi_s[ci] = p;
            for a in 0..d {
                let s = (x[a] - center[a]) / w;
                let b = bump(s);
                grad_s[ci * d + a] = if b == 0.0 { 0.0 } else { p / b * bump_d(s) / w };
            }
        }

        acc.fill(0.0);
        for n in 0..solution.times.len() - 1 {
            let (t0, t1) = (solution.times[n], solution.times[n + 1]);
            let dt = t1 - t0;
            let b0 = bump((t0 - family.time_center) / family.time_width);
            let b1 = bump((t1 - family.time_center) / family.time_width);
            if b0 == 0.0 && b1 == 0.0 {
                continue;
            }
            let u = solution.snapshot(n);
            for (ci, &idx) in cells.iter().enumerate() {
                if phi_s[ci] == 0.0 {
                    continue;
                }
                grid.center(idx, &mut x);
                vs[0] = u[idx];
                problem.flux_values(t0, &x, &vs, &mut flux_buf);
                problem.flux_values(t1, &x, &vs, &mut flux_buf_next);
                problem.flux_div_values(t0, &x, k_values, &mut div_buf);
                problem.flux_div_values(t1, &x, k_values, &mut div_buf_next);
                let s0 = problem.source(t0, &x, u[idx]);
                let s1 = problem.source(t1, &x, u[idx]);
                for (ki, &k) in k_values.iter().enumerate() {
                    let diff = u[idx] - k;
                    let sgn = if diff > 0.0 {
                        1.0
                    } else if diff < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    // |u-k| d_t phi integrated exactly in t.
                    let mut val = math::abs(diff) * (b1 - b0) * phi_s[ci];
                    // Flux and source terms by trapezoid in t.
                    let mut fterm0 = 0.0;
                    let mut fterm1 = 0.0;
                    for a in 0..d {
                        fterm0 += (flux_buf[a] - flux_buf[(1 + ki) * d + a]) * grad_s[ci * d + a];
                        fterm1 += (flux_buf_next[a] - flux_buf_next[(1 + ki) * d + a])
                            * grad_s[ci * d + a];
                    }
                    let g0 = sgn * (fterm0 + (s0 - div_buf[ki]) * phi_s[ci]) * b0;
                    let g1 = sgn * (fterm1 + (s1 - div_buf_next[ki]) * phi_s[ci]) * b1;
                    val += 0.5 * dt * (g0 + g1);
                    acc[ki] += val * cell_vol;
                }
            }
        }
        for (ki, &k) in k_values.iter().enumerate() {
            audit.pairs_evaluated += 1;
            if acc[ki] < audit.min_residual {
                audit.min_residual = acc[ki];
                audit.worst_k = k;
                audit.worst_center = center.clone();
                audit.worst_width = w;
            }
        }
    }
    audit
}

/// Uniform grid of `count` k-values on [-v, v].
pub fn uniform_k_grid(v: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| -v + 2.0 * v * i as f64 / (count - 1) as f64)
        .collect()
}

/// The manufactured stationary NON-entropy profile for Burgers-type fluxes:
/// u = -1 for x1 < 0, +1 for x1 > 0, injected directly as data at the given
/// times. A correct entropy audit must flag it.
pub fn expansion_shock_data(grid: &Grid, times: &[f64]) -> GridSolution {
    let vals = grid.sample(|x| if x[0] < 0.0 { -1.0 } else { 1.0 });
    GridSolution::new(
        grid.clone(),
        times.to_vec(),
        times.iter().map(|_| vals.clone()).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fvsolver::scheme::{solve, SolveOptions};
    use crate::transform::{FluxSpec, TransformedProblem};

    #[test]
    fn constant_solution_has_near_zero_residual() {
        let grid = Grid::from_box(&[-2.0], &[2.0], &[200]).unwrap();
        let times: Vec<f64> = (0..=40).map(|i| i as f64 / 40.0).collect();
        let data = times.iter().map(|_| vec![0.4; 200]).collect();
        let sol = GridSolution::new(grid.clone(), times, data);
        let problem = TransformedProblem::plain(FluxSpec::Burgers { dim: 1 }, 2.0);
        let family = TestFunctionFamily::standard(&grid, 1.0, 5);
        let audit = entropy_residual(&problem, &sol, &uniform_k_grid(1.0, 33), &family);
        assert!(
            audit.min_residual.abs() < 1e-4,
            "residual = {}",
            audit.min_residual
        );
    }

    #[test]
    fn entropy_shock_passes_audit() {
        // The audited defect scales like the numerical viscosity alpha*h/2,
        // so grid spacing 1/400 is needed to land inside the 1e-3 budget.
        let grid = Grid::from_box(&[-2.0], &[2.0], &[1600]).unwrap();
        let u0 = grid.sample(|x| if x[0] < 0.0 { 1.0 } else { 0.0 });
        let problem = TransformedProblem::plain(FluxSpec::Burgers { dim: 1 }, 2.0);
        let sol = solve(&problem, &grid, &u0, 1.0, &SolveOptions::default()).unwrap();
        let family = TestFunctionFamily::standard(&grid, 1.0, 5);
        let audit = entropy_residual(&problem, &sol, &uniform_k_grid(1.0, 33), &family);
        assert!(
            audit.min_residual >= -1e-3,
            "residual = {} at k = {}",
            audit.min_residual,
            audit.worst_k
        );
    }

    #[test]
    fn expansion_shock_is_flagged() {
        let grid = Grid::from_box(&[-2.0], &[2.0], &[400]).unwrap();
        let times: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let fake = expansion_shock_data(&grid, &times);
        let problem = TransformedProblem::plain(FluxSpec::Burgers { dim: 1 }, 2.0);
        let family = TestFunctionFamily::standard(&grid, 1.0, 5);
        let audit = entropy_residual(&problem, &fake, &uniform_k_grid(1.0, 33), &family);
        assert!(
            audit.min_residual < -0.1,
            "expansion shock not flagged: {}",
            audit.min_residual
        );
    }

    #[test]
    fn shock_residual_shrinks_with_grid() {
        let run = |cells: usize| -> f64 {
            let grid = Grid::from_box(&[-2.0], &[2.0], &[cells]).unwrap();
            let u0 = grid.sample(|x| if x[0] < 0.0 { 1.0 } else { 0.0 });
            let problem = TransformedProblem::plain(FluxSpec::Burgers { dim: 1 }, 2.0);
            let sol = solve(&problem, &grid, &u0, 1.0, &SolveOptions::default()).unwrap();
            let family = TestFunctionFamily::standard(&grid, 1.0, 5);
            entropy_residual(&problem, &sol, &uniform_k_grid(1.0, 33), &family).min_residual
        };
        let coarse = run(100);
        let fine = run(200);
        // Any negative part is quadrature/scheme error and shrinks with h.
        assert!(fine >= coarse - 1e-12, "coarse = {coarse}, fine = {fine}");
        assert!(fine.abs() <= coarse.abs().max(1e-6));
    }
}
