//! Light rays anchored on a Cauchy surface `{x¹ = level}` and the chart
//! `(x, u)` on the space of light rays.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::{
    causal_character_at, geodesic_state, integrated_null_tol, CausalCharacter, GeodesicSystem,
};
use crate::metric::{check_dim, check_domain, Event, Metric, TangentVector};
use crate::ode::{integrate_to_event, EventOutcome, Tolerances};
use crate::sphere::sphere_samples;

/// Default search horizon (affine units) when looking for the crossing of C.
pub const DEFAULT_HORIZON: f64 = 1e3;

/// A future null direction `E_1 + Σ u^j E_j` at `base`, stored as the unit
/// vector `(u², …, u^m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NullDirection {
    pub base: Event,
    pub unit: DVector<f64>,
}

impl NullDirection {
    /// Normalizes `raw` onto the unit sphere.
    pub fn new(base: Event, raw: &[f64]) -> Result<Self> {
        if raw.len() + 1 != base.dim() {
            return Err(Error::Dimension {
                expected: base.dim() - 1,
                got: raw.len(),
            });
        }
        let v = DVector::from_column_slice(raw);
        let n = v.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidArgument("degenerate null direction".into()));
        }
        Ok(Self { base, unit: v / n })
    }

    /// Frame components `(1, u², …, u^m)`.
    pub fn frame_components(&self) -> DVector<f64> {
        let mut c = DVector::zeros(self.unit.len() + 1);
        c[0] = 1.0;
        c.rows_mut(1, self.unit.len()).copy_from(&self.unit);
        c
    }

    /// Coordinate components of `E_1 + Σ u^j E_j`.
    pub fn vector(&self, metric: &dyn Metric) -> Result<DVector<f64>> {
        let frame = metric.frame(self.base.coords())?;
        Ok(frame.from_frame(&self.frame_components()))
    }
}

/// A light ray: the future null geodesic through `anchor ∈ C` with initial
/// velocity `E_1 + Σ u^j E_j`, affinely parametrized from 0 at the anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct LightRay {
    pub direction: NullDirection,
}

impl LightRay {
    pub fn new(anchor: Event, unit: &[f64]) -> Result<Self> {
        Ok(Self {
            direction: NullDirection::new(anchor, unit)?,
        })
    }

    pub fn anchor(&self) -> &Event {
        &self.direction.base
    }

    pub fn unit(&self) -> &DVector<f64> {
        &self.direction.unit
    }

    pub fn dim(&self) -> usize {
        self.anchor().dim()
    }

    /// `γ'(0)` in coordinates.
    pub fn initial_velocity(&self, metric: &dyn Metric) -> Result<DVector<f64>> {
        self.direction.vector(metric)
    }

    /// `(γ(t), γ'(t))`.
    pub fn state(
        &self,
        metric: &dyn Metric,
        t: f64,
        tol: &Tolerances,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let k = self.initial_velocity(metric)?;
        geodesic_state(metric, self.anchor().coords(), k.as_slice(), 0.0, t, tol)
    }

    /// Maximum componentwise distance to another ray's anchor and direction.
    pub fn distance(&self, other: &LightRay) -> f64 {
        (&self.anchor().0 - &other.anchor().0)
            .amax()
            .max((self.unit() - other.unit()).amax())
    }
}

/// How the sphere factor of the chart is coordinatized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChartKind {
    /// `(u³, …, u^m)` on the hemisphere `u² > 0`.
    Hemisphere,
    /// `θ` with `(u², u³) = (cos θ, sin θ)`; three dimensions only.
    Angle,
}

/// Chart on the space of light rays anchored on `C = {x¹ = level}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayChart {
    pub kind: ChartKind,
    pub level: f64,
}

impl Default for RayChart {
    fn default() -> Self {
        Self::hemisphere()
    }
}

impl RayChart {
    pub fn hemisphere() -> Self {
        Self {
            kind: ChartKind::Hemisphere,
            level: 0.0,
        }
    }

    pub fn angle() -> Self {
        Self {
            kind: ChartKind::Angle,
            level: 0.0,
        }
    }

    pub fn at_level(self, level: f64) -> Self {
        Self { level, ..self }
    }

    /// Number of sphere coordinates, `m − 2`.
    pub fn sphere_dim(&self, m: usize) -> usize {
        m - 2
    }

    /// Sphere coordinates of a unit vector `(u², …, u^m)`.
    pub fn sphere_coords(&self, unit: &DVector<f64>) -> Result<DVector<f64>> {
        match self.kind {
            ChartKind::Hemisphere => {
                if !(unit[0] > 0.0) {
                    return Err(Error::OutOfHemisphere { u2: unit[0] });
                }
                Ok(unit.rows(1, unit.len() - 1).into_owned())
            }
            ChartKind::Angle => {
                if unit.len() != 2 {
                    return Err(Error::Dimension {
                        expected: 2,
                        got: unit.len(),
                    });
                }
                Ok(DVector::from_element(1, unit[1].atan2(unit[0])))
            }
        }
    }

    /// Unit vector `(u², …, u^m)` from sphere coordinates.
    pub fn unit_from_coords(&self, u: &[f64]) -> Result<DVector<f64>> {
        match self.kind {
            ChartKind::Hemisphere => {
                let r2: f64 = u.iter().map(|x| x * x).sum();
                if r2 >= 1.0 {
                    return Err(Error::OutOfHemisphere {
                        u2: -(r2 - 1.0).sqrt(),
                    });
                }
                let mut v = Vec::with_capacity(u.len() + 1);
                v.push((1.0 - r2).sqrt());
                v.extend_from_slice(u);
                Ok(DVector::from_vec(v))
            }
            ChartKind::Angle => {
                if u.len() != 1 {
                    return Err(Error::Dimension {
                        expected: 1,
                        got: u.len(),
                    });
                }
                let (s, c) = u[0].sin_cos();
                Ok(DVector::from_vec(vec![c, s]))
            }
        }
    }

    /// Derivative of the unit vector along a chart velocity `u̇` at `u`.
    pub fn unit_velocity(&self, u: &[f64], du: &[f64]) -> Result<DVector<f64>> {
        let unit = self.unit_from_coords(u)?;
        Ok(match self.kind {
            ChartKind::Hemisphere => {
                let dot: f64 = u.iter().zip(du).map(|(a, b)| a * b).sum();
                let mut v = Vec::with_capacity(u.len() + 1);
                v.push(-dot / unit[0]);
                v.extend_from_slice(du);
                DVector::from_vec(v)
            }
            ChartKind::Angle => DVector::from_vec(vec![-unit[1] * du[0], unit[0] * du[0]]),
        })
    }

    /// Whether the induced metric on `C` is positive definite at `p`.
    pub fn surface_is_spacelike(&self, metric: &dyn Metric, p: &[f64]) -> bool {
        let g = metric.components(p);
        let m = g.nrows();
        let block: DMatrix<f64> = g.view((1, 1), (m - 1, m - 1)).into_owned();
        block.cholesky().is_some()
    }
}

/// A ray obtained by canonicalizing a geodesic `(x(t), k(t))`: the original
/// parameter `t` relates to the ray parameter by `t_ray = scale·(t − t_cross)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Canonical {
    pub ray: LightRay,
    pub t_cross: f64,
    pub scale: f64,
}

impl Canonical {
    /// Ray parameter of the original parameter `t`.
    pub fn ray_param(&self, t: f64) -> f64 {
        self.scale * (t - self.t_cross)
    }
}

/// Follows the geodesic with data `(x, k)` at parameter 0 to its crossing of
/// `{x¹ = level}` and rescales the velocity so that its `E_1` component is 1.
pub fn canonicalize(
    metric: &dyn Metric,
    level: f64,
    x: &[f64],
    k: &[f64],
    horizon: f64,
    tol: &Tolerances,
) -> Result<Canonical> {
    check_dim(metric, x.len())?;
    check_dim(metric, k.len())?;
    check_domain(metric, x)?;
    let m = metric.dim();
    let character = causal_character_at(metric, x, &DVector::from_column_slice(k), integrated_null_tol(tol))?;
    if character != CausalCharacter::NullFuture {
        return Err(Error::NotNullFuture { character: character.to_string() });
    }
    let mut y0 = x.to_vec();
    y0.extend_from_slice(k);
    let (t_hit, mut y) = if (x[0] - level).abs() <= 1e-14 * (1.0 + level.abs()) {
        (0.0, y0)
    } else {
        // x¹ increases along future null geodesics in a chart adapted to C
        let t_end = if x[0] > level { -horizon } else { horizon };
        let sys = GeodesicSystem { metric };
        match integrate_to_event(&sys, 0.0, &y0, t_end, tol, |_, y| y[0] - level)? {
            EventOutcome::Found { t, y } => (t, y),
            EventOutcome::NotFound { .. } => {
                return Err(Error::NoCauchyCrossing { horizon });
            }
        }
    };
    let mut t_cross = t_hit;
    for _ in 0..3 {
        let f = y[0] - level;
        if f.abs() <= 1e-15 * (1.0 + level.abs()) || y[m] == 0.0 {
            break;
        }
        let dt = -f / y[m];
        let (xn, kn) = geodesic_state(metric, &y[..m], &y[m..], t_cross, t_cross + dt, tol)?;
        t_cross += dt;
        y[..m].copy_from_slice(xn.as_slice());
        y[m..].copy_from_slice(kn.as_slice());
    }
    let mut anchor = y[..m].to_vec();
    anchor[0] = level;
    let kc = DVector::from_column_slice(&y[m..]);
    let g = metric.components(&anchor);
    let frame = metric.frame(&anchor)?;
    let c = frame.to_frame(&g, &kc);
    let scale = c[0];
    if !(scale > 0.0) {
        return Err(Error::NotNullFuture {
            character: CausalCharacter::NullPast.to_string(),
        });
    }
    let spatial: Vec<f64> = c.iter().skip(1).copied().collect();
    Ok(Canonical {
        ray: LightRay::new(Event::new(&anchor)?, &spatial)?,
        t_cross,
        scale,
    })
}

/// The light ray through `p` with direction `ξ`, anchored on `{x¹ = 0}`.
pub fn ray_from_event_direction(
    metric: &dyn Metric,
    p: &Event,
    xi: &TangentVector,
    horizon: f64,
) -> Result<LightRay> {
    ray_from_event_direction_at(metric, &RayChart::default(), p, xi, horizon, &Tolerances::default())
}

/// As [`ray_from_event_direction`], for the chart's Cauchy surface.
pub fn ray_from_event_direction_at(
    metric: &dyn Metric,
    chart: &RayChart,
    p: &Event,
    xi: &TangentVector,
    horizon: f64,
    tol: &Tolerances,
) -> Result<LightRay> {
    check_dim(metric, xi.comps.len())?;
    Ok(canonicalize(metric, chart.level, p.coords(), xi.comps.as_slice(), horizon, tol)?.ray)
}

/// Chart coordinates `(x, u)`: the anchor's `(x², …, x^m)` and the sphere
/// coordinates of its direction.
pub fn ray_coords(chart: &RayChart, ray: &LightRay) -> Result<(DVector<f64>, DVector<f64>)> {
    let a = ray.anchor().coords();
    if (a[0] - chart.level).abs() > 1e-9 * (1.0 + chart.level.abs()) {
        return Err(Error::InvalidArgument(format!(
            "ray anchored at x¹ = {} is not on the chart surface x¹ = {}",
            a[0], chart.level
        )));
    }
    let x = DVector::from_column_slice(&a[1..]);
    Ok((x, chart.sphere_coords(ray.unit())?))
}

/// Inverse of [`ray_coords`].
pub fn ray_from_coords(chart: &RayChart, x: &[f64], u: &[f64]) -> Result<LightRay> {
    let mut anchor = Vec::with_capacity(x.len() + 1);
    anchor.push(chart.level);
    anchor.extend_from_slice(x);
    let unit = chart.unit_from_coords(u)?;
    LightRay::new(Event::new(&anchor)?, unit.as_slice())
}

/// A ray of a sampled sky together with the ray parameter at which it
/// passes through the sky's event.
#[derive(Debug, Clone, PartialEq)]
pub struct SkyRay {
    pub ray: LightRay,
    pub t_event: f64,
}

/// `n` rays through `p` with distinct directions taken from the sphere
/// samples, anchored on `{x¹ = level}`.
pub fn sky_sample_at(
    metric: &dyn Metric,
    chart: &RayChart,
    p: &Event,
    n: usize,
    tol: &Tolerances,
) -> Result<Vec<SkyRay>> {
    check_dim(metric, p.dim())?;
    let frame = metric.frame(p.coords())?;
    sphere_samples(metric.dim(), n)?
        .into_iter()
        .map(|d| {
            let dir = NullDirection {
                base: p.clone(),
                unit: d,
            };
            let k = frame.from_frame(&dir.frame_components());
            let c = canonicalize(metric, chart.level, p.coords(), k.as_slice(), DEFAULT_HORIZON, tol)?;
            Ok(SkyRay {
                t_event: c.ray_param(0.0),
                ray: c.ray,
            })
        })
        .collect()
}

/// The sky of `p` sampled by `n` rays, anchored on `{x¹ = 0}`.
pub fn sky_sample(metric: &dyn Metric, p: &Event, n: usize) -> Result<Vec<LightRay>> {
    Ok(sky_sample_at(metric, &RayChart::default(), p, n, &Tolerances::default())?
        .into_iter()
        .map(|s| s.ray)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Minkowski, PerturbedMinkowski};
    use std::f64::consts::PI;

    fn ev(c: &[f64]) -> Event {
        Event::new(c).unwrap()
    }

    #[test]
    fn backtracks_to_the_surface() {
        let m = Minkowski::new(3).unwrap();
        let p = ev(&[0.5, 0.0, 0.0]);
        let xi = TangentVector::new(p.clone(), &[1.0, 1.0, 0.0]).unwrap();
        let ray = ray_from_event_direction(&m, &p, &xi, DEFAULT_HORIZON).unwrap();
        assert!((ray.anchor().0.clone() - DVector::from_vec(vec![0.0, -0.5, 0.0])).amax() < 1e-12);
        let (_, th) = ray_coords(&RayChart::angle(), &ray).unwrap();
        assert!(th[0].abs() < 1e-12);
    }

    #[test]
    fn scale_invariance() {
        let g = PerturbedMinkowski::with_default_bump(0.5).unwrap();
        let p = ev(&[0.3, 0.1, -0.2]);
        let frame = g.frame(p.coords()).unwrap();
        let k = frame.from_frame(&DVector::from_vec(vec![1.0, 0.6, 0.8]));
        let base = ray_from_event_direction(
            &g,
            &p,
            &TangentVector::new(p.clone(), k.as_slice()).unwrap(),
            DEFAULT_HORIZON,
        )
        .unwrap();
        for lam in [0.1, 10.0] {
            let xi = TangentVector::new(p.clone(), (&k * lam).as_slice()).unwrap();
            let r = ray_from_event_direction(&g, &p, &xi, DEFAULT_HORIZON).unwrap();
            assert!(r.distance(&base) < 1e-9);
        }
    }

    #[test]
    fn hemisphere_boundary() {
        let ray = LightRay::new(ev(&[0.0, 0.0, 0.0]), &[-1.0, 0.0]).unwrap();
        assert!(matches!(
            ray_coords(&RayChart::hemisphere(), &ray),
            Err(Error::OutOfHemisphere { .. })
        ));
        let (_, th) = ray_coords(&RayChart::angle(), &ray).unwrap();
        assert!((th[0].abs() - PI).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_null() {
        let m = Minkowski::new(3).unwrap();
        let p = ev(&[0.0, 0.0, 0.0]);
        let xi = TangentVector::new(p.clone(), &[1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            ray_from_event_direction(&m, &p, &xi, DEFAULT_HORIZON),
            Err(Error::NotNullFuture { .. })
        ));
    }

    #[test]
    fn minkowski_sky_through_origin() {
        let m = Minkowski::new(3).unwrap();
        let rays = sky_sample(&m, &ev(&[0.0, 0.0, 0.0]), 8).unwrap();
        for (i, r) in rays.iter().enumerate() {
            let th = 2.0 * PI * i as f64 / 8.0;
            assert!(r.anchor().0.amax() < 1e-15);
            assert!((r.unit()[0] - th.cos()).abs() < 1e-15);
        }
    }
}
