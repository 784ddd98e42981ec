//! Geodesic flow, parallel transport and causal classification of vectors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::curvature::PointGeometry;
use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::metric::{check_dim, check_domain, Event, Metric, TangentVector};
use crate::ode::{integrate, integrate_stations, OdeSystem, Tolerances};

/// `x' = k`, `k' = −Γ(k, k)` on the state `[x; k]`.
pub(crate) struct GeodesicSystem<'a> {
    pub metric: &'a dyn Metric,
}

impl OdeSystem for GeodesicSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.metric.dim()
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let m = self.metric.dim();
        let (x, k) = y.split_at(m);
        check_domain(self.metric, x)?;
        let geo = PointGeometry::at(self.metric, x, false)?;
        dy[..m].copy_from_slice(k);
        geo.contract_gamma(k, k, &mut dy[m..]);
        for v in &mut dy[m..] {
            *v = -*v;
        }
        Ok(())
    }
}

/// Integrates the geodesic with initial position `x0` and velocity `k0` at
/// parameter `t0` to `t1`. Returns `(x, k)` at `t1`.
pub fn geodesic_state(
    metric: &dyn Metric,
    x0: &[f64],
    k0: &[f64],
    t0: f64,
    t1: f64,
    tol: &Tolerances,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check_dim(metric, x0.len())?;
    check_dim(metric, k0.len())?;
    check_domain(metric, x0)?;
    let m = metric.dim();
    let mut y0 = x0.to_vec();
    y0.extend_from_slice(k0);
    let y = integrate(&GeodesicSystem { metric }, t0, &y0, t1, tol)?;
    Ok((
        DVector::from_column_slice(&y[..m]),
        DVector::from_column_slice(&y[m..]),
    ))
}

/// A geodesic sampled at checkpoints; evaluation between checkpoints
/// re-integrates from the nearest one.
#[derive(Clone)]
pub struct GeodesicCurve<'a> {
    metric: &'a dyn Metric,
    tol: Tolerances,
    nodes: Vec<f64>,
    states: Vec<Vec<f64>>,
}

impl std::fmt::Debug for GeodesicCurve<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeodesicCurve")
            .field("metric", &self.metric.name())
            .field("span", &self.interval())
            .field("checkpoints", &self.nodes.len())
            .finish()
    }
}

impl GeodesicCurve<'_> {
    /// `(γ(t), γ'(t))`.
    pub fn state(&self, t: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        let m = self.metric.dim();
        let i = self
            .nodes
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
            .expect("at least one checkpoint");
        let y = &self.states[i];
        geodesic_state(self.metric, &y[..m], &y[m..], self.nodes[i], t, &self.tol)
    }

    /// Checkpoint parameters, increasing.
    pub fn checkpoints(&self) -> &[f64] {
        &self.nodes
    }
}

impl Curve for GeodesicCurve<'_> {
    fn interval(&self) -> (f64, f64) {
        (self.nodes[0], *self.nodes.last().expect("non-empty"))
    }

    fn position(&self, s: f64) -> Result<DVector<f64>> {
        Ok(self.state(s)?.0)
    }

    fn velocity(&self, s: f64) -> Result<DVector<f64>> {
        Ok(self.state(s)?.1)
    }
}

/// `t ↦ exp_p(tξ)` for `t` in `t_span` (which must contain 0).
pub fn geodesic_flow<'a>(
    metric: &'a dyn Metric,
    p: &Event,
    xi: &TangentVector,
    t_span: (f64, f64),
    tol: &Tolerances,
) -> Result<GeodesicCurve<'a>> {
    check_dim(metric, p.dim())?;
    check_dim(metric, xi.comps.len())?;
    check_domain(metric, p.coords())?;
    if xi.comps.iter().all(|&c| c == 0.0) {
        return Err(Error::InvalidArgument("zero initial velocity".into()));
    }
    let (a, b) = t_span;
    if !(a <= 0.0 && b >= 0.0 && a < b) {
        return Err(Error::InvalidArgument(format!(
            "parameter span {t_span:?} must contain 0"
        )));
    }
    let mut y0 = p.coords().to_vec();
    y0.extend(xi.comps.iter());
    let sys = GeodesicSystem { metric };
    let per_unit = 8.0;
    let count = |len: f64| ((len * per_unit).ceil() as usize).clamp(1, 4096);
    let fwd: Vec<f64> = if b > 0.0 {
        let n = count(b);
        (1..=n).map(|i| b * i as f64 / n as f64).collect()
    } else {
        Vec::new()
    };
    let bwd: Vec<f64> = if a < 0.0 {
        let n = count(-a);
        (1..=n).map(|i| a * i as f64 / n as f64).collect()
    } else {
        Vec::new()
    };
    let fwd_states = integrate_stations(&sys, 0.0, &y0, &fwd, tol)?;
    let bwd_states = integrate_stations(&sys, 0.0, &y0, &bwd, tol)?;
    let mut nodes: Vec<f64> = bwd.iter().rev().copied().collect();
    let mut states: Vec<Vec<f64>> = bwd_states.into_iter().rev().collect();
    nodes.push(0.0);
    states.push(y0);
    nodes.extend(fwd);
    states.extend(fwd_states);
    Ok(GeodesicCurve {
        metric,
        tol: *tol,
        nodes,
        states,
    })
}

/// Residual `|D γ'/dt|` at `t` from central differences of the velocity.
pub fn geodesic_residual(metric: &dyn Metric, curve: &GeodesicCurve<'_>, t: f64) -> Result<f64> {
    let h = 1e-4;
    let (x, k) = curve.state(t)?;
    let acc = (curve.velocity(t + h)? - curve.velocity(t - h)?) / (2.0 * h);
    let geo = PointGeometry::at(metric, x.as_slice(), false)?;
    let mut gkk = vec![0.0; k.len()];
    geo.contract_gamma(k.as_slice(), k.as_slice(), &mut gkk);
    Ok((acc + DVector::from_vec(gkk)).amax())
}

/// Parallel propagator equation `P' = −Γ(μ', P)` along a curve.
struct TransportSystem<'a> {
    metric: &'a dyn Metric,
    curve: &'a dyn Curve,
    cols: usize,
}

impl OdeSystem for TransportSystem<'_> {
    fn dim(&self) -> usize {
        self.metric.dim() * self.cols
    }

    fn rhs(&self, s: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let m = self.metric.dim();
        let x = self.curve.position(s)?;
        let v = self.curve.velocity(s)?;
        check_domain(self.metric, x.as_slice())?;
        let geo = PointGeometry::at(self.metric, x.as_slice(), false)?;
        for c in 0..self.cols {
            let col = &y[c * m..(c + 1) * m];
            let out = &mut dy[c * m..(c + 1) * m];
            geo.contract_gamma(v.as_slice(), col, out);
            for o in out.iter_mut() {
                *o = -*o;
            }
        }
        Ok(())
    }
}

/// Parallel propagators `P(s)` (with `P(start) = I`) along `curve` at each
/// station. A vector `u0` at `μ(start)` transports to `P(s)·u0`.
pub fn transport_propagator(
    metric: &dyn Metric,
    curve: &dyn Curve,
    stations: &[f64],
    tol: &Tolerances,
) -> Result<Vec<DMatrix<f64>>> {
    let m = metric.dim();
    let (start, _) = curve.interval();
    let id = DMatrix::<f64>::identity(m, m);
    let sys = TransportSystem {
        metric,
        curve,
        cols: m,
    };
    let ys = integrate_stations(&sys, start, id.as_slice(), stations, tol)?;
    Ok(ys
        .into_iter()
        .map(|y| DMatrix::from_column_slice(m, m, &y))
        .collect())
}

/// Parallel transport of `u0` (based at the curve's start) to parameter `s`.
pub fn parallel_transport(
    metric: &dyn Metric,
    curve: &dyn Curve,
    u0: &TangentVector,
    s: f64,
    tol: &Tolerances,
) -> Result<TangentVector> {
    check_dim(metric, u0.comps.len())?;
    let (start, _) = curve.interval();
    let p0 = curve.position(start)?;
    if (&p0 - &u0.base.0).amax() > 1e-9 * (1.0 + p0.amax()) {
        return Err(Error::InvalidArgument(
            "vector is not based at the start of the curve".into(),
        ));
    }
    let sys = TransportSystem {
        metric,
        curve,
        cols: 1,
    };
    let y = integrate(&sys, start, u0.comps.as_slice(), s, tol)?;
    Ok(TangentVector {
        base: Event(curve.position(s)?),
        comps: DVector::from_vec(y),
    })
}

/// Pointwise causal character of a tangent vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CausalCharacter {
    Zero,
    Spacelike,
    NullFuture,
    NullPast,
    TimelikeFuture,
    TimelikePast,
}

impl CausalCharacter {
    pub fn is_causal(self) -> bool {
        !matches!(self, Self::Spacelike | Self::Zero)
    }

    pub fn is_past(self) -> bool {
        matches!(self, Self::NullPast | Self::TimelikePast)
    }

    pub fn is_future(self) -> bool {
        matches!(self, Self::NullFuture | Self::TimelikeFuture)
    }

    /// Character of `−v`.
    pub fn flipped(self) -> Self {
        match self {
            Self::NullFuture => Self::NullPast,
            Self::NullPast => Self::NullFuture,
            Self::TimelikeFuture => Self::TimelikePast,
            Self::TimelikePast => Self::TimelikeFuture,
            other => other,
        }
    }
}

impl std::fmt::Display for CausalCharacter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Zero => "zero",
            Self::Spacelike => "spacelike",
            Self::NullFuture => "null-future",
            Self::NullPast => "null-past",
            Self::TimelikeFuture => "timelike-future",
            Self::TimelikePast => "timelike-past",
        };
        f.write_str(s)
    }
}

/// Default degeneracy tolerance for [`causal_character`].
pub const NULL_TOL: f64 = 1e-9;

/// Null tolerance for velocities that have been through the integrator:
/// `g(k, k)` drifts by a few tens of `rtol` relative to `‖k‖²`.
pub fn integrated_null_tol(tol: &Tolerances) -> f64 {
    NULL_TOL.max(1e3 * tol.rtol.max(tol.atol))
}

/// Classifies `v` at `p`: null when `|g(v,v)| < tol·max(1, ‖v‖²)` with the
/// frame norm, time orientation from the sign of `g(v, E_1)`.
pub fn causal_character_at(
    metric: &dyn Metric,
    p: &[f64],
    v: &DVector<f64>,
    tol: f64,
) -> Result<CausalCharacter> {
    check_dim(metric, v.len())?;
    let g = metric.components(p);
    let frame = metric.frame(p)?;
    let c = frame.to_frame(&g, v);
    let norm2 = c.norm_squared();
    if norm2.sqrt() <= tol {
        return Ok(CausalCharacter::Zero);
    }
    let q = (v.transpose() * &g * v)[0];
    let future = c[0] > 0.0;
    Ok(if q.abs() < tol * norm2.max(1.0) {
        if future {
            CausalCharacter::NullFuture
        } else {
            CausalCharacter::NullPast
        }
    } else if q > 0.0 {
        CausalCharacter::Spacelike
    } else if future {
        CausalCharacter::TimelikeFuture
    } else {
        CausalCharacter::TimelikePast
    })
}

pub fn causal_character(
    metric: &dyn Metric,
    v: &TangentVector,
    tol: f64,
) -> Result<CausalCharacter> {
    causal_character_at(metric, v.base.coords(), &v.comps, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Minkowski, PerturbedMinkowski};
    use crate::curve::CoefficientCurve;

    fn ev(c: &[f64]) -> Event {
        Event::new(c).unwrap()
    }

    #[test]
    fn minkowski_geodesics_are_straight() {
        let m = Minkowski::new(3).unwrap();
        let p = ev(&[0.1, 0.2, -0.3]);
        let xi = TangentVector::new(p.clone(), &[1.0, 0.6, 0.8]).unwrap();
        let tol = Tolerances::default();
        let c = geodesic_flow(&m, &p, &xi, (-2.0, 3.0), &tol).unwrap();
        for t in [-2.0, -0.7, 0.0, 1.3, 3.0] {
            let x = c.position(t).unwrap();
            let expect = &p.0 + &xi.comps * t;
            assert!((x - expect).amax() < 1e-12);
        }
        assert!(geodesic_residual(&m, &c, 0.5).unwrap() < 1e-6);
    }

    #[test]
    fn leaving_the_domain_is_an_error() {
        let g = PerturbedMinkowski::with_default_bump(0.5).unwrap();
        let p = ev(&[0.0, 0.0, 0.0]);
        let xi = TangentVector::new(p.clone(), &[1.0, 1.0, 0.0]).unwrap();
        let err = geodesic_flow(&g, &p, &xi, (0.0, 2.0), &Tolerances::default()).unwrap_err();
        assert!(matches!(err, Error::OutOfDomain { .. } | Error::StepFailure { .. }));
    }

    #[test]
    fn causal_classes_of_simple_vectors() {
        let m = Minkowski::new(3).unwrap();
        let p = [0.0; 3];
        let cc = |v: [f64; 3]| {
            causal_character_at(&m, &p, &DVector::from_column_slice(&v), NULL_TOL).unwrap()
        };
        assert_eq!(cc([1.0, 0.0, 0.0]), CausalCharacter::TimelikeFuture);
        assert_eq!(cc([1.0, 1.0, 0.0]), CausalCharacter::NullFuture);
        assert_eq!(cc([-1.0, 1.0, 0.0]), CausalCharacter::NullPast);
        assert_eq!(cc([0.0, 1.0, 0.0]), CausalCharacter::Spacelike);
        assert_eq!(cc([0.0, 0.0, 0.0]), CausalCharacter::Zero);
        assert_eq!(cc([-2.0, 0.1, 0.3]), CausalCharacter::TimelikePast);
    }

    #[test]
    fn flat_transport_keeps_components() {
        let m = Minkowski::new(3).unwrap();
        let curve = CoefficientCurve::new(
            (0.0, 1.0),
            vec![
                [0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, 0.3, 0.0, 0.0, 0.0],
                [0.0, 0.0, 0.2, 0.0, 0.0, 0.0, 0.0],
            ],
        )
        .unwrap();
        let u0 = TangentVector::new(ev(&[0.0, 0.0, 0.0]), &[1.0, 0.6, 0.8]).unwrap();
        let u1 = parallel_transport(&m, &curve, &u0, 1.0, &Tolerances::default()).unwrap();
        assert!((u1.comps - u0.comps).amax() < 1e-14);
    }
}
