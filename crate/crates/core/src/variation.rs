//! Geodesic variations `f(s, t) = γ_s(t)` given by their initial data.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::curvature::PointGeometry;
use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::metric::{check_dim, check_domain, inner, Event, Metric, MetricRef};

/// A one-parameter family of geodesics, described by `f(s, 0)` and
/// `∂_t f(s, 0)`.
pub trait GeodesicVariation: Send + Sync {
    fn interval(&self) -> (f64, f64);

    /// `(f(s, 0), ∂_t f(s, 0))`.
    fn initial(&self, s: f64) -> Result<(DVector<f64>, DVector<f64>)>;

    /// `(∂_s f(s, 0), ∂_s ∂_t f(s, 0))`; defaults to five-point differences.
    fn initial_derivative(&self, s: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        let h = 1e-3;
        let (x2, k2) = self.initial(s + 2.0 * h)?;
        let (x1, k1) = self.initial(s + h)?;
        let (y1, l1) = self.initial(s - h)?;
        let (y2, l2) = self.initial(s - 2.0 * h)?;
        let d = |a2: DVector<f64>, a1: DVector<f64>, b1: DVector<f64>, b2: DVector<f64>| {
            (-a2 + a1 * 8.0 - b1 * 8.0 + b2) / (12.0 * h)
        };
        Ok((d(x2, x1, y1, y2), d(k2, k1, l1, l2)))
    }
}

/// Initial data of the variation field at `s`: `(x, k, J(0), J'(0))` with
/// the covariant derivative `J'(0) = ∂_s∂_t f + Γ(∂_s f, ∂_t f)`.
pub fn variation_field(
    metric: &dyn Metric,
    var: &dyn GeodesicVariation,
    s: f64,
) -> Result<[DVector<f64>; 4]> {
    let (x, k) = var.initial(s)?;
    let (j, dk) = var.initial_derivative(s)?;
    check_dim(metric, x.len())?;
    check_domain(metric, x.as_slice())?;
    let geo = PointGeometry::at(metric, x.as_slice(), false)?;
    let mut corr = vec![0.0; x.len()];
    geo.contract_gamma(j.as_slice(), k.as_slice(), &mut corr);
    let dj = dk + DVector::from_vec(corr);
    Ok([x, k, j, dj])
}

type DirectionFn = Arc<dyn Fn(f64) -> (DVector<f64>, DVector<f64>) + Send + Sync>;

/// All light rays through a fixed event `p`: `f(s, t) = exp_p(t k(s))` with
/// `k(s) = E_1 + Σ d_j(s) E_j` for a curve `d` on the unit sphere.
#[derive(Clone)]
pub struct SkyCurveVariation {
    metric: MetricRef,
    p: Event,
    interval: (f64, f64),
    directions: DirectionFn,
}

impl fmt::Debug for SkyCurveVariation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SkyCurveVariation")
            .field("metric", &self.metric.name())
            .field("p", &self.p)
            .field("interval", &self.interval)
            .finish()
    }
}

impl SkyCurveVariation {
    /// `directions(s)` returns the unit vector `d(s)` and `d'(s)`.
    pub fn new(
        metric: MetricRef,
        p: Event,
        interval: (f64, f64),
        directions: impl Fn(f64) -> (DVector<f64>, DVector<f64>) + Send + Sync + 'static,
    ) -> Result<Self> {
        check_dim(metric.as_ref(), p.dim())?;
        check_domain(metric.as_ref(), p.coords())?;
        Ok(Self {
            metric,
            p,
            interval,
            directions: Arc::new(directions),
        })
    }

    /// Three-dimensional case with `d(s) = (cos θ(s), sin θ(s))`,
    /// `θ(s) = θ₀ + ωs`.
    pub fn circle(
        metric: MetricRef,
        p: Event,
        interval: (f64, f64),
        theta0: f64,
        omega: f64,
    ) -> Result<Self> {
        if metric.dim() != 3 {
            return Err(Error::Dimension {
                expected: 3,
                got: metric.dim(),
            });
        }
        Self::new(metric, p, interval, move |s| {
            let (sn, cs) = (theta0 + omega * s).sin_cos();
            (
                DVector::from_vec(vec![cs, sn]),
                DVector::from_vec(vec![-sn * omega, cs * omega]),
            )
        })
    }

    pub fn event(&self) -> &Event {
        &self.p
    }
}

impl GeodesicVariation for SkyCurveVariation {
    fn interval(&self) -> (f64, f64) {
        self.interval
    }

    fn initial(&self, s: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        let frame = self.metric.frame(self.p.coords())?;
        let (d, _) = (self.directions)(s);
        let mut c = DVector::zeros(d.len() + 1);
        c[0] = 1.0;
        c.rows_mut(1, d.len()).copy_from(&d);
        Ok((self.p.0.clone(), frame.from_frame(&c)))
    }

    fn initial_derivative(&self, s: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        let frame = self.metric.frame(self.p.coords())?;
        let (_, dd) = (self.directions)(s);
        let mut c = DVector::zeros(dd.len() + 1);
        c.rows_mut(1, dd.len()).copy_from(&dd);
        Ok((DVector::zeros(self.p.dim()), frame.from_frame(&c)))
    }
}

/// The null geodesics tangent to a null curve `ν`, with initial velocity
/// `σ(s) = −ν'(s) / g(ν'(s), E_1)` (future-pointing, unit energy).
#[derive(Clone)]
pub struct NullCurveLift {
    metric: MetricRef,
    curve: Arc<dyn Curve>,
}

impl fmt::Debug for NullCurveLift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NullCurveLift")
            .field("metric", &self.metric.name())
            .field("interval", &self.curve.interval())
            .finish()
    }
}

impl NullCurveLift {
    pub fn new(metric: MetricRef, curve: Arc<dyn Curve>) -> Self {
        Self { metric, curve }
    }

    pub fn curve(&self) -> &dyn Curve {
        self.curve.as_ref()
    }

    fn direction(&self, s: f64) -> Result<DVector<f64>> {
        let x = self.curve.position(s)?;
        let v = self.curve.velocity(s)?;
        let frame = self.metric.frame(x.as_slice())?;
        let e1 = frame.vector(0);
        let energy = inner(self.metric.as_ref(), x.as_slice(), &v, &e1);
        if energy.abs() < 1e-12 * (1.0 + v.amax()) {
            return Err(Error::NonRegularCurve {
                s,
                curvature: energy,
            });
        }
        Ok(-v / energy)
    }
}

impl GeodesicVariation for NullCurveLift {
    fn interval(&self) -> (f64, f64) {
        self.curve.interval()
    }

    fn initial(&self, s: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        Ok((self.curve.position(s)?, self.direction(s)?))
    }

    fn initial_derivative(&self, s: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        let h = 1e-3;
        let d = (-self.direction(s + 2.0 * h)? + self.direction(s + h)? * 8.0
            - self.direction(s - h)? * 8.0
            + self.direction(s - 2.0 * h)?)
            / (12.0 * h);
        Ok((self.curve.velocity(s)?, d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{ExampleMuVariation, Minkowski};
    use crate::curve::CoefficientCurve;

    #[test]
    fn default_derivative_matches_exact() {
        struct Fd(ExampleMuVariation);
        impl GeodesicVariation for Fd {
            fn interval(&self) -> (f64, f64) {
                self.0.interval()
            }
            fn initial(&self, s: f64) -> Result<(DVector<f64>, DVector<f64>)> {
                self.0.initial(s)
            }
        }
        let exact = ExampleMuVariation::default();
        let fd = Fd(exact);
        for s in [-0.7, 0.0, 0.4] {
            let (a, b) = exact.initial_derivative(s).unwrap();
            let (c, d) = fd.initial_derivative(s).unwrap();
            assert!((a - c).amax() < 1e-10);
            assert!((b - d).amax() < 1e-10);
        }
    }

    #[test]
    fn null_lift_of_helix_is_future_null() {
        let m: MetricRef = Arc::new(Minkowski::new(3).unwrap());
        let helix = CoefficientCurve::new(
            (-1.0, 1.0),
            vec![
                [0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            ],
        )
        .unwrap();
        let lift = NullCurveLift::new(m.clone(), Arc::new(helix));
        let (x, k) = lift.initial(0.3).unwrap();
        assert!(inner(m.as_ref(), x.as_slice(), &k, &k).abs() < 1e-14);
        assert!((k[0] - 1.0).abs() < 1e-14);
        let [_, _, j, _] = variation_field(m.as_ref(), &lift, 0.3).unwrap();
        // J(0) = ν' = −σ
        assert!((j + k).amax() < 1e-14);
    }
}
