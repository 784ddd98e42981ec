use std::sync::Arc;

use lightray::catalog::{ExampleMuVariation, Minkowski};
use lightray::checks::helix_lift;
use lightray::curve::{uniform_grid, CoefficientCurve, Curve};
use lightray::isotopy::{
    celestial_recover, classify_profile, isotopy_from_curve, pointwise_verdict, sign_profile,
    ClassifyOptions, ProfileClass, RecoverOptions, Verdict,
};
use lightray::Tolerances;
use proptest::prelude::*;

fn class_of(curve: &CoefficientCurve, nodes: usize) -> (ProfileClass, Verdict) {
    let m = Minkowski::new(3).unwrap();
    let grid = uniform_grid(curve.interval().0, curve.interval().1, nodes);
    let field = isotopy_from_curve(&m, curve, 64, &grid, &Tolerances::default()).unwrap();
    let c = classify_profile(&sign_profile(&m, &field), &ClassifyOptions::default());
    assert_eq!(pointwise_verdict(&m, &field, 0.0).unwrap(), c.verdict);
    (c.class, c.verdict)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn grid_refinement_keeps_the_class(vx in -0.9f64..0.9, vy in -0.4f64..0.4, w in -0.5f64..0.5, sign in prop::bool::ANY) {
        // causal when |(vx, vy)| < 1, otherwise spacelike
        let vt = if sign { 1.0 } else { -1.0 };
        let curve = CoefficientCurve::new((0.0, 1.0), vec![
            [0.0, vt, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, vx, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, vy, 0.0, 0.0, 0.0, 0.0, 0.0],
        ]).unwrap();
        let base = class_of(&curve, 51);
        prop_assert_eq!(base, class_of(&curve, 101));
        prop_assert_eq!(base, class_of(&curve, 201));
        prop_assert_eq!(base.0, if sign { ProfileClass::NonPositive } else { ProfileClass::NonNegative });
        let space = CoefficientCurve::new((0.0, 1.0), vec![
            [0.0, w, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        ]).unwrap();
        let b = class_of(&space, 51);
        prop_assert_eq!(b, class_of(&space, 201));
        prop_assert_eq!(b.0, ProfileClass::Mixed);
    }
}

#[test]
fn null_helix_is_recovered_from_its_lift() {
    let m = Minkowski::new(3).unwrap();
    let var = helix_lift().unwrap();
    let rec = celestial_recover(&m, &var, (0.0, 0.0), &RecoverOptions::default()).unwrap();
    let mut dist = 0.0_f64;
    for (s, mu) in rec.s.iter().zip(&rec.mu) {
        let nu = var.curve().position(*s).unwrap();
        for k in 0..3 {
            dist = dist.max((mu[k] - nu[k]).abs());
        }
    }
    assert!(dist < 1e-6, "max distance {dist}");
    assert!(rec.max_contact_residual < 1e-8);
    assert!(rec.max_null_residual < 1e-8);
}

#[test]
fn example_recovery_is_orthogonal() {
    let m = Minkowski::new(3).unwrap();
    let rec = celestial_recover(&m, &ExampleMuVariation::default(), (0.0, 0.0), &RecoverOptions::default()).unwrap();
    assert!(rec.max_contact_residual < 1e-8);
    // μ' is null and proportional to σ
    for (d, sg) in rec.mu_prime.iter().zip(&rec.sigma) {
        let g = -d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        assert!(g.abs() < 1e-8);
        let cross = (d[1] * sg[2] - d[2] * sg[1]).abs() + (d[0] * sg[1] - d[1] * sg[0]).abs();
        assert!(cross < 1e-7);
    }
}

#[test]
fn helix_lift_is_shared_across_threads() {
    let var = Arc::new(helix_lift().unwrap());
    let handles: Vec<_> = (0..4)
        .map(|_| {
            let v = Arc::clone(&var);
            std::thread::spawn(move || v.curve().position(0.3).unwrap())
        })
        .collect();
    let first = handles.into_iter().map(|h| h.join().unwrap()).collect::<Vec<_>>();
    assert!(first.windows(2).all(|w| w[0] == w[1]));
}
