//! End-to-end runs: driver -> flow of diffeomorphisms -> transformed
//! conservation law -> monotone solve -> untransformed solution.

use anyhow::{anyhow, Result};
use rclaw_core::flows::{
    compute_rho, solve_transport_flow, AffineFlowData, DiffeoFlowGrid, FlowLattice, FlowOptions,
};
use rclaw_core::fvsolver::{solve, Grid, GridSolution, SolveOptions};
use rclaw_core::roughpath::PiecewiseLinearPath;
use rclaw_core::transform::{build_robust_problem, inverse_transform, TransformedProblem};

use crate::config::ExperimentConfig;

/// Flow and affine data for one driver realization, shared by the problem
/// builder and the inverse transform.
pub struct Prepared {
    pub driver: PiecewiseLinearPath,
    pub flow: DiffeoFlowGrid,
    pub affine: AffineFlowData,
    pub grid: Grid,
    pub times: Vec<f64>,
}

impl Prepared {
    pub fn problem(&self, cfg: &ExperimentConfig) -> Result<TransformedProblem<'_>> {
        build_robust_problem(cfg.flux.clone(), &self.flow, &self.affine, cfg.value_bound)
            .map_err(|e| anyhow!("building transformed problem: {e:?}"))
    }
}

/// Solves the flow equations for one driver and evaluates the affine data
/// at the snapshot times.
pub fn prepare(cfg: &ExperimentConfig, driver: PiecewiseLinearPath) -> Result<Prepared> {
    let d = cfg.coefficients.dim();
    let lo: Vec<f64> = cfg.grid_lo.iter().map(|x| x - cfg.flow_padding).collect();
    let hi: Vec<f64> = cfg.grid_hi.iter().map(|x| x + cfg.flow_padding).collect();
    let lattice = FlowLattice::uniform(&lo, &hi, cfg.flow_lattice_pts);
    let times = cfg.snapshot_times();
    let opts = FlowOptions::default();
    let flow = solve_transport_flow(
        &cfg.coefficients,
        &driver,
        &lattice,
        &times,
        cfg.flow_substeps,
        &opts,
    )
    .map_err(|e| anyhow!("flow solve ({d}d): {e:?}"))?;
    let affine = compute_rho(&cfg.coefficients, &flow, &driver, cfg.quadrature_substeps)
        .map_err(|e| anyhow!("affine data: {e:?}"))?;
    Ok(Prepared {
        driver,
        flow,
        affine,
        grid: cfg.grid()?,
        times,
    })
}

/// Transformed-variable and original-variable solutions of one run.
pub struct RunOutput {
    /// Solution of the transformed (stripped) conservation law.
    pub v: GridSolution,
    /// Untransformed solution u = e^{-mu}(v + rho) at psi^{-1}.
    pub u: GridSolution,
}

/// Full pipeline for one prepared driver realization. At t = 0 the
/// transformation is the identity, so v0 = u0 sampled at cell centers.
pub fn run(cfg: &ExperimentConfig, prepared: &Prepared) -> Result<RunOutput> {
    let problem = prepared.problem(cfg)?;
    let u0 = prepared.grid.sample(|x| cfg.initial.eval(x));
    let opts = SolveOptions {
        cfl: cfg.cfl,
        snapshots: Some(prepared.times.clone()),
        ..SolveOptions::default()
    };
    let v = solve(&problem, &prepared.grid, &u0, cfg.t_end, &opts)
        .map_err(|e| anyhow!("solver ({}): {e:?}", cfg.name))?;
    let u = inverse_transform(&v, &prepared.flow, &prepared.affine)
        .map_err(|e| anyhow!("inverse transform: {e:?}"))?;
    Ok(RunOutput { v, u })
}

/// Convenience: build the driver from the config (optionally overriding the
/// Brownian level), prepare and run.
pub fn run_level(
    cfg: &ExperimentConfig,
    level_override: Option<u32>,
) -> Result<(Prepared, RunOutput)> {
    let driver = cfg.build_driver(level_override)?;
    let prepared = prepare(cfg, driver)?;
    let out = run(cfg, &prepared)?;
    Ok((prepared, out))
}
