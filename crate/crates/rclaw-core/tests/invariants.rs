//! Algebraic invariants of the level-2 lift on randomized piecewise-linear
//! paths: Chen multiplicativity of signature increments, geometricity of
//! the second level, and metric axioms of the p-variation distance.

use proptest::prelude::*;
use rclaw_core::roughpath::{lift, rough_distance, PiecewiseLinearPath, SignatureIncrement};

fn random_path(dim: usize, segments: usize, seedlike: &[f64]) -> PiecewiseLinearPath {
    // Deterministic values driven by proptest-provided floats.
    let times: Vec<f64> = (0..=segments).map(|i| i as f64 / segments as f64).collect();
    let values: Vec<f64> = (0..(segments + 1) * dim)
        .map(|i| {
            let s = seedlike[i % seedlike.len()];
            (s * (i as f64 + 1.0) * 0.37).sin()
        })
        .collect();
    PiecewiseLinearPath::new(times, values, dim).unwrap()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(250))]

    /// sig(s, u) = sig(s, t) * sig(t, u) (Chen), to 1e-12, and the
    /// symmetric part of level two equals half the outer square of level
    /// one (geometricity).
    #[test]
    fn chen_and_geometricity(
        dim in 1usize..4,
        segments in 1usize..65,
        seeds in prop::collection::vec(-3.0f64..3.0, 8),
        frac_a in 0.05f64..0.95,
        frac_b in 0.05f64..0.95,
    ) {
        let path = random_path(dim, segments, &seeds);
        let lifted = lift(path, 2.2).unwrap();
        let (s, t, u) = {
            let (a, b) = if frac_a <= frac_b { (frac_a, frac_b) } else { (frac_b, frac_a) };
            (0.0, a, b)
        };
        let st = lifted.signature_increment(s, t).unwrap();
        let tu = lifted.signature_increment(t, u).unwrap();
        let su = lifted.signature_increment(s, u).unwrap();
        let product = st.chen(&tu);
        let err1: Vec<f64> = product.one.iter().zip(&su.one).map(|(a, b)| a - b).collect();
        let err2: Vec<f64> = product.two.iter().zip(&su.two).map(|(a, b)| a - b).collect();
        prop_assert!(max_abs(&err1) < 1e-12, "chen level 1 error {}", max_abs(&err1));
        prop_assert!(max_abs(&err2) < 1e-12, "chen level 2 error {}", max_abs(&err2));

        let mut geo = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                let sym = su.two[i * dim + j] + su.two[j * dim + i];
                geo = geo.max((sym - su.one[i] * su.one[j]).abs());
            }
        }
        prop_assert!(geo < 1e-12, "geometricity defect {geo}");
    }

    /// The rough distance is a pseudometric: zero on identical lifts,
    /// symmetric, and positive on distinct paths.
    #[test]
    fn rough_distance_axioms(
        segments in 1usize..17,
        seeds in prop::collection::vec(-2.0f64..2.0, 6),
        bump in 0.01f64..1.0,
    ) {
        let path = random_path(2, segments, &seeds);
        let a = lift(path.clone(), 2.2).unwrap();
        let zero = rough_distance(&a, &a, 1).unwrap();
        prop_assert!(zero < 1e-13);

        let shifted = path
            .add_scaled(bump, &PiecewiseLinearPath::from_fn(
                path.times().to_vec(),
                2,
                |t| vec![t, -0.5 * t],
            ).unwrap())
            .unwrap();
        let b = lift(shifted, 2.2).unwrap();
        let dab = rough_distance(&a, &b, 1).unwrap();
        let dba = rough_distance(&b, &a, 1).unwrap();
        prop_assert!(dab > 0.0);
        prop_assert!((dab - dba).abs() < 1e-12 * dab.max(1.0));
    }
}

/// Concatenating a path with its own reversal produces a lift whose total
/// increment is the identity (level 1 and level 2 both vanish): geometric
/// lifts see no area from backtracking.
#[test]
fn reversal_cancels_increment() {
    let times = vec![0.0, 0.25, 0.5, 0.75, 1.0];
    let fwd = vec![
        vec![0.0, 0.0],
        vec![1.0, -0.5],
        vec![0.5, 0.75],
        vec![1.0, -0.5],
        vec![0.0, 0.0],
    ];
    let path = PiecewiseLinearPath::from_points(times, &fwd).unwrap();
    let lifted = lift(path, 2.0).unwrap();
    let inc = lifted.signature_increment(0.0, 1.0).unwrap();
    // The example path is palindromic, so the whole increment collapses.
    assert!(max_abs(&inc.one) < 1e-14);
    let linear = SignatureIncrement::linear(&[0.0, 0.0]);
    let err: Vec<f64> = inc
        .two
        .iter()
        .zip(&linear.two)
        .map(|(a, b)| a - b)
        .collect();
    assert!(max_abs(&err) < 1e-14);
}
