//! JSON experiment configuration: benchmark geometry, noise coefficients,
//! driver specification and solver parameters.

use anyhow::{bail, Context, Result};
use rclaw_core::flows::Coefficients;
use rclaw_core::fvsolver::Grid;
use rclaw_core::roughpath::{brownian_piecewise_linear, PiecewiseLinearPath};
use rclaw_core::transform::FluxSpec;
use serde::{Deserialize, Serialize};

/// How the driving path is produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriverSpec {
    /// z == 0: the noise-free degenerate case.
    Zero,
    /// Piecewise-linear interpolation of a Brownian sample on `2^level`
    /// dyadic intervals, reproducible from the seed; refining the level
    /// keeps earlier points (nested bridge construction).
    Brownian { seed: u64, level: u32 },
    /// z(t) = rates * t (smooth deterministic driver).
    LinearRamp { rates: Vec<f64> },
}

/// Initial data u0, sampled at cell centers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    GaussianBump {
        amplitude: f64,
        sigma: f64,
        center: Vec<f64>,
    },
    /// `value` inside the axis-aligned box, 0 outside.
    BoxIndicator {
        lo: Vec<f64>,
        hi: Vec<f64>,
        value: f64,
    },
    /// 1D Riemann data: `left` for x < split, `right` otherwise.
    Riemann { left: f64, right: f64, split: f64 },
}

impl InitialData {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            InitialData::GaussianBump {
                amplitude,
                sigma,
                center,
            } => {
                let mut q = 0.0;
                for (a, c) in x.iter().zip(center) {
                    q += (a - c) * (a - c);
                }
                amplitude * (-q / (2.0 * sigma * sigma)).exp()
            }
            InitialData::BoxIndicator { lo, hi, value } => {
                let inside = x
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .all(|(a, (l, h))| *l <= *a && *a < *h);
                if inside {
                    *value
                } else {
                    0.0
                }
            }
            InitialData::Riemann { left, right, split } => {
                if x[0] < *split {
                    *left
                } else {
                    *right
                }
            }
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            InitialData::GaussianBump { amplitude, .. } => amplitude.abs(),
            InitialData::BoxIndicator { value, .. } => value.abs(),
            InitialData::Riemann { left, right, .. } => left.abs().max(right.abs()),
        }
    }
}

/// Complete description of one benchmark run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub flux: FluxSpec,
    pub coefficients: Coefficients,
    pub driver: DriverSpec,
    pub initial: InitialData,
    pub grid_lo: Vec<f64>,
    pub grid_hi: Vec<f64>,
    pub cells: Vec<usize>,
    /// Padding of the flow lattice beyond the solver box; must cover the
    /// propagation cone M * t_end.
    pub flow_padding: f64,
    /// Flow lattice points per axis.
    pub flow_lattice_pts: usize,
    /// RK4 substeps per driver segment.
    pub flow_substeps: usize,
    /// Trapezoid substeps per driver segment for the affine data.
    pub quadrature_substeps: usize,
    pub t_end: f64,
    pub cfl: f64,
    /// Rough-path integrability exponent, in [1, 3).
    pub p: f64,
    /// Observation ball for localized norms.
    pub ball_radius: f64,
    pub ball_center: Vec<f64>,
    /// Blow-up guard for the solver.
    pub value_bound: f64,
    /// Number of snapshot intervals (snapshot times are i*t_end/n).
    pub snapshot_count: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let d = self.coefficients.dim();
        if self.flux.dim() != d
            || self.grid_lo.len() != d
            || self.grid_hi.len() != d
            || self.cells.len() != d
            || self.ball_center.len() != d
        {
            bail!("dimension mismatch in config '{}'", self.name);
        }
        if !(1.0..3.0).contains(&self.p) {
            bail!("p must lie in [1, 3)");
        }
        if self.flow_padding < 0.0 || self.t_end <= 0.0 || self.snapshot_count == 0 {
            bail!("invalid geometry/time parameters");
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::from_box(&self.grid_lo, &self.grid_hi, &self.cells)
            .context("building the solver grid")
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        (0..=self.snapshot_count)
            .map(|i| self.t_end * i as f64 / self.snapshot_count as f64)
            .collect()
    }

    /// Builds the driving path with the total number of components the
    /// coefficients expect; Brownian levels can be overridden per run.
    pub fn build_driver(&self, level_override: Option<u32>) -> Result<PiecewiseLinearPath> {
        let dims =
            (self.coefficients.n1() + self.coefficients.n2() + self.coefficients.n3()).max(1);
        let path = match &self.driver {
            DriverSpec::Zero => PiecewiseLinearPath::zero(dims, self.t_end),
            DriverSpec::Brownian { seed, level } => {
                brownian_piecewise_linear(*seed, dims, self.t_end, level_override.unwrap_or(*level))
                    .map_err(|e| anyhow::anyhow!("brownian driver: {e:?}"))?
            }
            DriverSpec::LinearRamp { rates } => {
                if rates.len() != dims {
                    bail!("linear ramp needs {dims} rates");
                }
                let rates = rates.clone();
                PiecewiseLinearPath::from_fn(vec![0.0, self.t_end], dims, |t| {
                    rates.iter().map(|r| r * t).collect()
                })
                .map_err(|e| anyhow::anyhow!("ramp driver: {e:?}"))?
            }
        };
        Ok(path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).context("parsing config JSON")?;
        cfg.validate()?;
        Ok(cfg)
    }
}
