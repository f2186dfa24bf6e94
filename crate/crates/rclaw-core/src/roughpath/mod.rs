//! Canonical level-2 lifts of piecewise-linear paths and rough-path metrics.
//!
//! Drivers are always represented as piecewise-linear paths; "abstract" rough
//! paths enter only as convergent sequences of such lifts. The level cap is 2,
//! i.e. p in [1, 3).

mod brownian;
mod lift;
mod metrics;
mod path;

pub use brownian::brownian_piecewise_linear;
pub use lift::{lift, RoughPathLift, SignatureIncrement};
pub use metrics::{hoelder_norm, p_variation_norm, rough_distance, RoughMetricReport};
pub use path::{PathDoc, PiecewiseLinearPath};

/// Default number of extra equispaced points per linear segment used by the
/// partition search in the p-variation / Hölder sups.
pub const DEFAULT_PARTITION_REFINEMENT: usize = 4;
