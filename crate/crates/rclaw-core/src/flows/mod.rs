//! Flows of volume-preserving diffeomorphisms driven by piecewise-linear
//! paths, their Jacobians and inverses, the affine data mu / rho, and the
//! divergence-identity audits.

mod audit;
mod fields;
mod flowmap;
mod lattice;

pub use audit::{audit_divergence_identity, DivergenceAuditReport};
pub use fields::{Coefficients, ScalarField, TransportField};
pub use flowmap::{
    compute_mu, compute_rho, flow_stability_gap, solve_transport_flow, AffineFlowData,
    DiffeoFlowGrid, FlowMap, FlowOptions, FlowStabilityGaps,
};
pub use lattice::FlowLattice;

/// 2x2 (or 1x1) determinant of a row-major matrix.
pub(crate) fn det(m: &[f64], d: usize) -> f64 {
    match d {
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        _ => unreachable!("dimension cap is 2"),
    }
}

/// Inverse of a row-major 1x1 / 2x2 matrix.
pub(crate) fn invert(m: &[f64], d: usize, out: &mut [f64]) {
    match d {
        1 => out[0] = 1.0 / m[0],
        2 => {
            let det = m[0] * m[3] - m[1] * m[2];
            out[0] = m[3] / det;
            out[1] = -m[1] / det;
            out[2] = -m[2] / det;
            out[3] = m[0] / det;
        }
        _ => unreachable!("dimension cap is 2"),
    }
}
