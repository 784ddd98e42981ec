use std::f64::consts::PI;

use lightray::catalog::{Minkowski, PerturbedMinkowski};
use lightray::contact::{contact_value, is_celestial, sky_tangent_basis, CelestialOptions};
use lightray::jacobi::{propagate_jacobi, tangent_from_chart_velocity, JacobiState};
use lightray::rays::{LightRay, RayChart};
use lightray::{Error, Event, Metric, Tolerances};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn contact_value_is_constant_along_the_ray(
        th in -3.1f64..3.1, d in prop::collection::vec(-1.0f64..1.0, 3), ts in prop::collection::vec(-4.0f64..2.3, 10),
    ) {
        let tol = Tolerances::default();
        let metrics: Vec<(Box<dyn Metric>, RayChart)> = vec![
            (Box::new(Minkowski::new(3).unwrap()), RayChart::angle()),
            (Box::new(PerturbedMinkowski::with_default_bump(0.5).unwrap()), RayChart::angle().at_level(-2.0)),
        ];
        for (metric, chart) in metrics {
            let st = tangent_from_chart_velocity(metric.as_ref(), &chart, &[0.1, 0.2], &[th], &d[..2], &d[2..]).unwrap();
            let a0 = contact_value(metric.as_ref(), &st);
            for &t in &ts {
                let moved = propagate_jacobi(metric.as_ref(), &st, t, &tol).unwrap();
                prop_assert!((contact_value(metric.as_ref(), &moved) - a0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sky_tangents_are_legendrian(s0 in -3.0f64..2.3, ang in -3.1f64..3.1) {
        let tol = Tolerances::default();
        let metric = PerturbedMinkowski::with_default_bump(0.5).unwrap();
        let ray = LightRay::new(Event::new(&[-2.0, 0.3, 0.1]).unwrap(), &[ang.cos(), ang.sin()]).unwrap();
        let basis = sky_tangent_basis(&metric, &ray, s0, &tol).unwrap();
        for st in basis.at_anchor(&metric, &tol).unwrap() {
            prop_assert!(st.j.amax() > 1e-6 || s0.abs() < 1e-6);
            prop_assert!(contact_value(&metric, &st).abs() < 1e-9);
        }
    }
}

/// In Minkowski-3 every direction of the contact plane is celestial except
/// the pure translation orthogonal to the ray.
#[test]
fn celestial_directions_fill_the_contact_plane() {
    let m = Minkowski::new(3).unwrap();
    let chart = RayChart::angle();
    let opts = CelestialOptions::default();
    let th: f64 = 0.8;
    for i in 0..72 {
        let phi = PI * i as f64 / 72.0;
        let dx = [-phi.cos() * th.sin(), phi.cos() * th.cos()];
        let st = tangent_from_chart_velocity(&m, &chart, &[0.0, 0.0], &[th], &dx, &[phi.sin()]).unwrap();
        let found = is_celestial(&m, &st, (-12.0, 12.0), &opts).unwrap();
        if i == 0 {
            assert_eq!(found, None, "translation direction must not be celestial");
            continue;
        }
        let expect = -phi.cos() / phi.sin();
        if expect.abs() < 11.0 {
            let t = found.unwrap_or_else(|| panic!("direction {phi} should be celestial"));
            assert!((t - expect).abs() < 1e-8, "phi {phi}: t {t} vs {expect}");
        }
    }
    // off the contact plane the test refuses
    let st = tangent_from_chart_velocity(&m, &chart, &[0.0, 0.0], &[th], &[th.cos(), th.sin()], &[0.0]).unwrap();
    assert!(matches!(is_celestial(&m, &st, (-5.0, 5.0), &opts), Err(Error::NotCelestial { .. })));
}

#[test]
fn contact_value_is_linear_in_the_tangent() {
    let tol = Tolerances::default();
    let m = Minkowski::new(3).unwrap();
    let ray = LightRay::new(Event::new(&[0.0, 0.0, 0.0]).unwrap(), &[0.6, 0.8]).unwrap();
    let a = JacobiState::on_ray(&m, &ray, 0.0, &[0.0, 1.0, 0.0], &[0.0; 3], &tol).unwrap();
    let b = JacobiState::on_ray(&m, &ray, 0.0, &[0.0, 0.0, 1.0], &[0.0; 3], &tol).unwrap();
    let c = a.combine(2.0, &b, -3.0);
    let lin = 2.0 * contact_value(&m, &a) - 3.0 * contact_value(&m, &b);
    assert!((contact_value(&m, &c) - lin).abs() < 1e-14);
}
