use std::f64::consts::FRAC_PI_2;

use lightray::catalog::{EinsteinStatic, Minkowski, PerturbedMinkowski};
use lightray::curvature::{christoffel, christoffel_fd, riemann, riemann_fd};
use lightray::curve::CoefficientCurve;
use lightray::geodesic::{causal_character, geodesic_flow, parallel_transport, NULL_TOL};
use lightray::metric::{frame_residual, inner, negative_eigenvalues};
use lightray::{Event, Metric, TangentVector, Tolerances};
use nalgebra::DVector;
use proptest::prelude::*;

fn catalog() -> Vec<Box<dyn Metric>> {
    vec![
        Box::new(Minkowski::new(3).unwrap()),
        Box::new(Minkowski::new(4).unwrap()),
        Box::new(PerturbedMinkowski::with_default_bump(0.5).unwrap()),
        Box::new(EinsteinStatic::new()),
    ]
}

/// A point inside each metric's domain from unit-box samples.
fn probe(metric: &dyn Metric, r: &[f64]) -> Vec<f64> {
    let m = metric.dim();
    let mut p: Vec<f64> = r[..m].to_vec();
    if metric.name().contains("einstein") {
        p[1] = 1.5 + 1.2 * r[1];
    } else if metric.name().contains("perturbed") {
        // inside the slab where the bump's derivatives are resolved by the stencils
        p[0] = 0.3 + 0.15 * r[0];
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn frames_are_orthonormal(r in prop::collection::vec(-1.0f64..1.0, 4)) {
        for metric in catalog() {
            let p = probe(metric.as_ref(), &r);
            prop_assert!(frame_residual(metric.as_ref(), &p).unwrap() < 1e-10);
            prop_assert_eq!(negative_eigenvalues(metric.as_ref(), &p), 1);
            let g = metric.components(&p);
            prop_assert!((&g - g.transpose()).amax() == 0.0);
            // E_1 is future-pointing: g(E_1, ∂_t) < 0
            let e1 = metric.frame(&p).unwrap().vector(0);
            let mut dt = DVector::zeros(metric.dim());
            dt[0] = 1.0;
            prop_assert!(inner(metric.as_ref(), &p, &e1, &dt) < 0.0);
        }
    }

    #[test]
    fn closed_form_and_difference_connections_agree(r in prop::collection::vec(-1.0f64..1.0, 4)) {
        for metric in catalog() {
            let p = probe(metric.as_ref(), &r);
            let a = christoffel(metric.as_ref(), &p).unwrap();
            let b = christoffel_fd(metric.as_ref(), &p).unwrap();
            let m = metric.dim();
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        let (x, y) = (a.get(i, j, k), b.get(i, j, k));
                        if x.abs() > 1e-8 {
                            prop_assert!((x - y).abs() <= 1e-5 * x.abs(), "Γ[{i}{j}{k}] {x} vs {y}");
                        }
                    }
                }
            }
            let ra = riemann(metric.as_ref(), &p).unwrap();
            let rb = riemann_fd(metric.as_ref(), &p).unwrap();
            for a_ in 0..m {
                for b_ in 0..m {
                    for c in 0..m {
                        for d in 0..m {
                            let (x, y) = (ra.get(a_, b_, c, d), rb.get(a_, b_, c, d));
                            if x.abs() > 1e-8 {
                                prop_assert!((x - y).abs() <= 1e-5 * x.abs(), "R[{a_}{b_}{c}{d}] {x} vs {y}");
                            } else {
                                // vanishing entries: the difference path sits at its rounding floor
                                prop_assert!(y.abs() < 1e-6, "R[{a_}{b_}{c}{d}] {y}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn reversal_swaps_time_orientation(v in prop::collection::vec(-2.0f64..2.0, 3), r in prop::collection::vec(-1.0f64..1.0, 4)) {
        for metric in catalog() {
            if metric.dim() != 3 {
                continue;
            }
            let p = Event::new(&probe(metric.as_ref(), &r)).unwrap();
            let a = causal_character(metric.as_ref(), &TangentVector::new(p.clone(), &v).unwrap(), NULL_TOL).unwrap();
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            let b = causal_character(metric.as_ref(), &TangentVector::new(p, &neg).unwrap(), NULL_TOL).unwrap();
            prop_assert_eq!(a.flipped(), b);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn geodesic_flow_conserves_norm(c in prop::collection::vec(-1.0f64..1.0, 3), e in 0.5f64..1.0, x in -1.0f64..1.0) {
        let tol = Tolerances::default();
        let cases: Vec<(Box<dyn Metric>, Vec<f64>, DVector<f64>)> = vec![
            (Box::new(Minkowski::new(3).unwrap()), vec![0.0, x, 0.3], DVector::from_vec(vec![e, c[0], c[1]])),
            // started deep in the flat region so the flow reaches the bump within |t| ≤ 10
            (Box::new(PerturbedMinkowski::with_default_bump(0.5).unwrap()), vec![-9.8, x, 0.3], DVector::from_vec(vec![e, c[0], c[1]])),
            // along the equator the geodesic never reaches the poles
            (Box::new(EinsteinStatic::new()), vec![0.0, FRAC_PI_2, x], DVector::from_vec(vec![e, 0.0, c[2]])),
        ];
        for (metric, p, xi) in cases {
            let span = if metric.name().contains("perturbed") { (0.0, 10.0) } else { (-10.0, 10.0) };
            let ev = Event::new(&p).unwrap();
            let curve = geodesic_flow(metric.as_ref(), &ev, &TangentVector::new(ev.clone(), xi.as_slice()).unwrap(), span, &tol).unwrap();
            let n0 = inner(metric.as_ref(), &p, &xi, &xi);
            for i in 0..=20 {
                let t = span.0 + (span.1 - span.0) * i as f64 / 20.0;
                let (y, k) = curve.state(t).unwrap();
                prop_assert!((inner(metric.as_ref(), y.as_slice(), &k, &k) - n0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn transport_is_isometric(u in prop::collection::vec(-1.0f64..1.0, 3), w in prop::collection::vec(-1.0f64..1.0, 3), a in -0.3f64..0.3) {
        let tol = Tolerances::default();
        let metric = PerturbedMinkowski::with_default_bump(0.5).unwrap();
        // a wiggly spacelike curve crossing the curved slab
        let curve = CoefficientCurve::new((0.0, 1.0), vec![
            [0.05, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, a, 0.1, 0.0, 0.0, 0.0],
            [0.2, 0.0, 0.0, 0.0, 0.0, a, 0.0],
        ]).unwrap();
        let p0 = Event::new(&[0.05, 0.0, 0.2]).unwrap();
        let g0 = inner(&metric, p0.coords(), &DVector::from_vec(u.clone()), &DVector::from_vec(w.clone()));
        let us = parallel_transport(&metric, &curve, &TangentVector::new(p0.clone(), &u).unwrap(), 1.0, &tol).unwrap();
        let ws = parallel_transport(&metric, &curve, &TangentVector::new(p0, &w).unwrap(), 1.0, &tol).unwrap();
        prop_assert!((inner(&metric, us.base.coords(), &us.comps, &ws.comps) - g0).abs() < 1e-8);
    }
}
