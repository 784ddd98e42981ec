use lightray::catalog::{EinsteinStatic, Minkowski, PerturbedMinkowski};
use lightray::jacobi::{propagate_jacobi, reduce_mod_gamma, sky_intersection_rank, JacobiState};
use lightray::rays::LightRay;
use lightray::{Event, Metric, Tolerances};
use proptest::prelude::*;

fn metrics() -> Vec<(Box<dyn Metric>, Vec<f64>)> {
    vec![
        (Box::new(Minkowski::new(3).unwrap()), vec![0.0, 0.1, -0.2]),
        (Box::new(PerturbedMinkowski::with_default_bump(0.5).unwrap()), vec![-1.5, 0.1, -0.2]),
        (Box::new(EinsteinStatic::new()), vec![0.0, std::f64::consts::FRAC_PI_2, 0.3]),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn propagation_is_linear(
        j1 in prop::collection::vec(-1.0f64..1.0, 6),
        j2 in prop::collection::vec(-1.0f64..1.0, 6),
        a in -2.0f64..2.0, b in -2.0f64..2.0, ang in -3.1f64..3.1, t in 0.2f64..1.3,
    ) {
        let tol = Tolerances::default();
        for (metric, anchor) in metrics() {
            let ray = LightRay::new(Event::new(&anchor).unwrap(), &[ang.cos(), ang.sin()]).unwrap();
            let s1 = JacobiState::on_ray(metric.as_ref(), &ray, 0.0, &j1[..3], &j1[3..], &tol).unwrap();
            let s2 = JacobiState::on_ray(metric.as_ref(), &ray, 0.0, &j2[..3], &j2[3..], &tol).unwrap();
            let lhs = propagate_jacobi(metric.as_ref(), &s1.combine(a, &s2, b), t, &tol).unwrap();
            let p1 = propagate_jacobi(metric.as_ref(), &s1, t, &tol).unwrap();
            let p2 = propagate_jacobi(metric.as_ref(), &s2, t, &tol).unwrap();
            let rhs = p1.combine(a, &p2, b);
            prop_assert!((&lhs.j - &rhs.j).amax() < 1e-8);
            prop_assert!((&lhs.dj - &rhs.dj).amax() < 1e-8);
        }
    }

    #[test]
    fn reduction_kills_tangential_part(
        j in prop::collection::vec(-1.0f64..1.0, 6),
        a in -5.0f64..5.0, b in -5.0f64..5.0, ang in -3.1f64..3.1, t in 0.0f64..1.3,
    ) {
        let tol = Tolerances::default();
        for (metric, anchor) in metrics() {
            let ray = LightRay::new(Event::new(&anchor).unwrap(), &[ang.cos(), ang.sin()]).unwrap();
            let st = JacobiState::on_ray(metric.as_ref(), &ray, 0.0, &j[..3], &j[3..], &tol).unwrap();
            let st = propagate_jacobi(metric.as_ref(), &st, t, &tol).unwrap();
            let r0 = reduce_mod_gamma(metric.as_ref(), &st).unwrap();
            let r1 = reduce_mod_gamma(metric.as_ref(), &st.shifted(a, b)).unwrap();
            for (x, y) in r0.w_bar.iter().zip(&r1.w_bar).chain(r0.v_bar.iter().zip(&r1.v_bar)) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn skies_of_distinct_points_meet_trivially(s1 in -3.0f64..3.0, gap in 0.1f64..4.0, ang in prop::collection::vec(-1.0f64..1.0, 3)) {
        let tol = Tolerances::default();
        let m3 = Minkowski::new(3).unwrap();
        let ray = LightRay::new(Event::new(&[0.0, 0.2, 0.1]).unwrap(), &[ang[0].cos(), ang[0].sin()]).unwrap();
        prop_assert_eq!(sky_intersection_rank(&m3, &ray, s1, s1 + gap, &tol).unwrap(), 2);
        let m4 = Minkowski::new(4).unwrap();
        let n = (ang[0] * ang[0] + ang[1] * ang[1] + ang[2] * ang[2]).sqrt().max(1e-3);
        let u = [ang[0] / n, ang[1] / n, ang[2] / n];
        let u = if n <= 1e-3 { [1.0, 0.0, 0.0] } else { u };
        let ray = LightRay::new(Event::new(&[0.0, 0.2, 0.1, -0.3]).unwrap(), &u).unwrap();
        prop_assert_eq!(sky_intersection_rank(&m4, &ray, s1, s1 + gap, &tol).unwrap(), 4);
    }
}

#[test]
fn skies_of_one_point_coincide() {
    let tol = Tolerances::default();
    let m = Minkowski::new(3).unwrap();
    let ray = LightRay::new(Event::new(&[0.0, 0.0, 0.0]).unwrap(), &[1.0, 0.0]).unwrap();
    assert_eq!(sky_intersection_rank(&m, &ray, 1.0, 1.0, &tol).unwrap(), 1);
}
