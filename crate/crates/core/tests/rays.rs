use lightray::catalog::{Minkowski, PerturbedMinkowski};
use lightray::rays::{ray_coords, ray_from_coords, ray_from_event_direction_at, LightRay, RayChart, DEFAULT_HORIZON};
use lightray::{Event, Metric, TangentVector, Tolerances};
use proptest::prelude::*;

fn unit(a: f64) -> [f64; 2] {
    [a.cos(), a.sin()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn canonicalization_is_idempotent(x in -1.0f64..1.0, y in -1.0f64..1.0, a in -3.1f64..3.1, t in -3.0f64..3.0, lam in 0.05f64..20.0) {
        let tol = Tolerances::default();
        let metrics: Vec<(Box<dyn Metric>, RayChart)> = vec![
            (Box::new(Minkowski::new(3).unwrap()), RayChart::default()),
            (Box::new(PerturbedMinkowski::with_default_bump(0.5).unwrap()), RayChart::default().at_level(-2.0)),
        ];
        for (metric, chart) in metrics {
            let ray = LightRay::new(Event::new(&[chart.level, x, y]).unwrap(), &unit(a)).unwrap();
            // stay below t = ε
            let t = t.min(2.3);
            let (p, k) = ray.state(metric.as_ref(), t, &tol).unwrap();
            let p = Event(p);
            let xi = TangentVector::new(p.clone(), (k * lam).as_slice()).unwrap();
            let back = ray_from_event_direction_at(metric.as_ref(), &chart, &p, &xi, DEFAULT_HORIZON, &tol).unwrap();
            prop_assert!(back.distance(&ray) < 1e-8);
            prop_assert!((back.unit().norm_squared() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn chart_coordinates_are_injective(x in prop::collection::vec(-1.0f64..1.0, 4), u in prop::collection::vec(-0.6f64..0.6, 4)) {
        for chart in [RayChart::angle(), RayChart::hemisphere()] {
            let (ua, ub) = match chart.kind {
                lightray::rays::ChartKind::Angle => (vec![u[0] * 5.0], vec![u[1] * 5.0]),
                lightray::rays::ChartKind::Hemisphere => (vec![u[0]], vec![u[1]]),
            };
            let ra = ray_from_coords(&chart, &x[..2], &ua).unwrap();
            let rb = ray_from_coords(&chart, &x[2..], &ub).unwrap();
            let (xa, ua2) = ray_coords(&chart, &ra).unwrap();
            let (xb, ub2) = ray_coords(&chart, &rb).unwrap();
            let coord_gap = (&xa - &xb).amax().max((&ua2 - &ub2).amax());
            // distinct rays have distinct coordinates, and coordinates round-trip
            if ra.distance(&rb) > 1e-9 {
                prop_assert!(coord_gap > 1e-12);
            }
            prop_assert!((xa[0] - x[0]).abs() < 1e-12 && (ua2[0] - ua[0]).abs() < 1e-12);
        }
    }
}

#[test]
fn unit_normalization_is_enforced() {
    let ray = LightRay::new(Event::new(&[0.0, 0.0, 0.0, 0.0]).unwrap(), &[3.0, 4.0, 12.0]).unwrap();
    assert!((ray.unit().norm() - 1.0).abs() < 1e-15);
}
