use alloc::vec;

use crate::math;
use crate::roughpath::PiecewiseLinearPath;

use super::fields::Coefficients;
use super::flowmap::FlowMap;
use super::invert;
use super::lattice::FlowLattice;

/// Max-norm residuals of the two divergence identities that a
/// volume-preserving flow must satisfy:
///   (a) div((Dpsi)|_{psi^{-1}}) = 0 (column-wise divergence),
///   (b) div(g(psi)) = div((Dpsi)_{psi^{-1}} g)(psi) for any C^1 field g.
/// Both are evaluated by central finite differences with step `fd_step`, so
/// the contract is residual <= C * fd_step^2.
#[derive(Debug, Clone)]
pub struct DivergenceAuditReport {
    pub time: f64,
    pub fd_step: f64,
    pub eval_points: usize,
    /// Max over points and columns of |div((Dpsi)|_{psi^{-1}})^j|.
    pub residual_div_jacobian: f64,
    /// Max over points of |div(g(psi)) - div((Dpsi)_{psi^{-1}} g)(psi)|.
    pub residual_composition: f64,
}

/// `(Dpsi)_{psi^{-1}}(y)`, computed exactly as the inverse of
/// `D(psi^{-1})(y)` from reverse variational integration (no lattice
/// interpolation, so the finite-difference order is not polluted).
fn jac_at_inverse(map: &FlowMap, y: &[f64], t: f64, d: usize, out: &mut [f64]) {
    let (_, jinv) = map.inverse(y, t);
    invert(&jinv, d, out);
}

/// Audits both identities for the flow of `coeffs` under `driver` at time
/// `t`, over the points of `eval_lattice`. `g_test` writes a smooth vector
/// field value into its output slice.
pub fn audit_divergence_identity(
    coeffs: &Coefficients,
    driver: &PiecewiseLinearPath,
    t: f64,
    eval_lattice: &FlowLattice,
    fd_step: f64,
    substeps: usize,
    g_test: impl Fn(&[f64], &mut [f64]),
) -> DivergenceAuditReport {
    let d = coeffs.dim();
    let map = FlowMap::new(coeffs, driver, substeps);
    let h = fd_step;

    let mut res_a = 0.0_f64;
    let mut res_b = 0.0_f64;
    let mut x = vec![0.0; d];
    let mut gv = vec![0.0; d];
    let mut fp = [0.0; 4];
    let mut fm = [0.0; 4];

    // w(y) = (Dpsi)_{psi^{-1}}(y) g(y), the field whose divergence enters (b).
    let w = |y: &[f64], out: &mut [f64], gbuf: &mut [f64], jbuf: &mut [f64]| {
        jac_at_inverse(&map, y, t, d, jbuf);
        g_test(y, gbuf);
        for r in 0..d {
            out[r] = (0..d).map(|c| jbuf[r * d + c] * gbuf[c]).sum();
        }
    };

    for idx in 0..eval_lattice.len() {
        eval_lattice.point(idx, &mut x);
        let (y0, _) = map.forward(&x, t);

        // (a) column-wise divergence of F(y) = (Dpsi)_{psi^{-1}}(y),
        //     (div F)^j = sum_i d/dy_i F[i][j], at y = psi_t(x).
        let mut col_div = [0.0; 2];
        for i in 0..d {
            let mut yp = y0.clone();
            let mut ym = y0.clone();
            yp[i] += h;
            ym[i] -= h;
            jac_at_inverse(&map, &yp, t, d, &mut fp[..d * d]);
            jac_at_inverse(&map, &ym, t, d, &mut fm[..d * d]);
            for j in 0..d {
                col_div[j] += (fp[i * d + j] - fm[i * d + j]) / (2.0 * h);
            }
        }
        for j in 0..d {
            res_a = math::max(res_a, math::abs(col_div[j]));
        }

        // (b) div(g(psi))(x) by FD in x ...
        let mut lhs = 0.0;
        for i in 0..d {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let (yp, _) = map.forward(&xp, t);
            let (ym, _) = map.forward(&xm, t);
            g_test(&yp, &mut gv);
            let gp = gv[i];
            g_test(&ym, &mut gv);
            lhs += (gp - gv[i]) / (2.0 * h);
        }
        // ... minus div((Dpsi)_{psi^{-1}} g)(psi(x)) by FD in y.
        let mut rhs = 0.0;
        let mut wbuf = [0.0; 2];
        let mut jbuf = [0.0; 4];
        for i in 0..d {
            let mut yp = y0.clone();
            let mut ym = y0.clone();
            yp[i] += h;
            ym[i] -= h;
            w(&yp, &mut wbuf[..d], &mut gv, &mut jbuf[..d * d]);
            let wp = wbuf[i];
            w(&ym, &mut wbuf[..d], &mut gv, &mut jbuf[..d * d]);
            rhs += (wp - wbuf[i]) / (2.0 * h);
        }
        res_b = math::max(res_b, math::abs(lhs - rhs));
    }

    DivergenceAuditReport {
        time: t,
        fd_step,
        eval_points: eval_lattice.len(),
        residual_div_jacobian: res_a,
        residual_composition: res_b,
    }
}
