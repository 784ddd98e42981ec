//! Closed-form metrics, curves and exact oracles.
//!
//! Everything here is ground truth for the numerical pipelines: the metrics
//! supply exact derivative jets, and the oracle functions are evaluated
//! directly from their formulas.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::metric::{Metric, MetricJet, MetricRef};
use crate::variation::GeodesicVariation;

/// Flat metric `diag(−1, 1, …, 1)`.
#[derive(Debug, Clone)]
pub struct Minkowski {
    dim: usize,
}

impl Minkowski {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 3 {
            return Err(Error::InvalidArgument(format!(
                "Minkowski space needs dimension >= 3, got {dim}"
            )));
        }
        Ok(Self { dim })
    }

    fn eta(&self) -> DMatrix<f64> {
        let mut d = DVector::from_element(self.dim, 1.0);
        d[0] = -1.0;
        DMatrix::from_diagonal(&d)
    }
}

impl Metric for Minkowski {
    fn name(&self) -> String {
        format!("minkowski-{}", self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn components(&self, _p: &[f64]) -> DMatrix<f64> {
        self.eta()
    }

    fn jet(&self, _p: &[f64]) -> Option<MetricJet> {
        Some(MetricJet::constant(self.eta()))
    }
}

/// Smooth function vanishing for `t <= 0`, with its first two derivatives.
#[derive(Clone)]
pub enum Bump {
    /// `a·exp(−c/t)` for `t > 0`.
    ExpInverse { amplitude: f64, rate: f64 },
    /// User supplied `t ↦ [f, f', f'']`.
    Custom(Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>),
}

impl fmt::Debug for Bump {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bump::ExpInverse { amplitude, rate } => f
                .debug_struct("ExpInverse")
                .field("amplitude", amplitude)
                .field("rate", rate)
                .finish(),
            Bump::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Default for Bump {
    fn default() -> Self {
        Bump::ExpInverse {
            amplitude: 1.0,
            rate: 1.0,
        }
    }
}

impl Bump {
    /// `[f(t), f'(t), f''(t)]`.
    pub fn jet(&self, t: f64) -> [f64; 3] {
        match self {
            Bump::ExpInverse { amplitude, rate } => {
                if t <= 0.0 || rate / t > 700.0 {
                    return [0.0; 3];
                }
                let f = amplitude * (-rate / t).exp();
                let d1 = f * rate / (t * t);
                let d2 = f * (rate * rate / t.powi(4) - 2.0 * rate / t.powi(3));
                [f, d1, d2]
            }
            Bump::Custom(func) => func(t),
        }
    }

    /// Checks `f(t) = 0` on a probe grid of `t <= 0`.
    pub fn validate(&self) -> Result<()> {
        for i in 0..=64 {
            let t = -10.0 * (i as f64) / 64.0;
            let value = self.jet(t)[0];
            if value != 0.0 {
                return Err(Error::InvalidBump { t, value });
            }
        }
        Ok(())
    }
}

/// `g_ε = −(1+f)dt² + 2f dt dx + (1−f)dx² + dy²` on `{t < ε}`.
#[derive(Debug, Clone)]
pub struct PerturbedMinkowski {
    pub epsilon: f64,
    pub bump: Bump,
}

impl PerturbedMinkowski {
    pub fn new(epsilon: f64, bump: Bump) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        bump.validate()?;
        Ok(Self { epsilon, bump })
    }

    pub fn with_default_bump(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, Bump::default())
    }

    fn block(a: f64, b: f64, c: f64, d: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[a, b, 0.0, b, c, 0.0, 0.0, 0.0, d])
    }
}

impl Metric for PerturbedMinkowski {
    fn name(&self) -> String {
        format!("perturbed-minkowski(eps={})", self.epsilon)
    }

    fn dim(&self) -> usize {
        3
    }

    fn components(&self, p: &[f64]) -> DMatrix<f64> {
        let f = self.bump.jet(p[0])[0];
        Self::block(-(1.0 + f), f, 1.0 - f, 1.0)
    }

    fn jet(&self, p: &[f64]) -> Option<MetricJet> {
        let [f, d1, d2] = self.bump.jet(p[0]);
        let z = DMatrix::zeros(3, 3);
        let mut dg = vec![z.clone(); 3];
        dg[0] = Self::block(-d1, d1, -d1, 0.0);
        let mut ddg = vec![vec![z; 3]; 3];
        ddg[0][0] = Self::block(-d2, d2, -d2, 0.0);
        Some(MetricJet {
            g: Self::block(-(1.0 + f), f, 1.0 - f, 1.0),
            dg,
            ddg,
        })
    }

    fn contains(&self, p: &[f64]) -> bool {
        p[0] < self.epsilon
    }
}

/// Einstein static universe `−dt² + dχ² + sin²χ dφ²` on `R × S²`, in the
/// polar chart with the poles cut away: `χ ∈ (0.1, π − 0.1)`.
#[derive(Debug, Clone, Default)]
pub struct EinsteinStatic;

impl EinsteinStatic {
    pub const POLE_MARGIN: f64 = 0.1;

    pub fn new() -> Self {
        Self
    }
}

impl Metric for EinsteinStatic {
    fn name(&self) -> String {
        "einstein-static".into()
    }

    fn dim(&self) -> usize {
        3
    }

    fn components(&self, p: &[f64]) -> DMatrix<f64> {
        let s = p[1].sin();
        DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0, s * s]))
    }

    fn jet(&self, p: &[f64]) -> Option<MetricJet> {
        let chi = p[1];
        let z = DMatrix::zeros(3, 3);
        let diag = |v: f64| DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.0, v]));
        let mut dg = vec![z.clone(); 3];
        dg[1] = diag((2.0 * chi).sin());
        let mut ddg = vec![vec![z; 3]; 3];
        ddg[1][1] = diag(2.0 * (2.0 * chi).cos());
        Some(MetricJet {
            g: self.components(p),
            dg,
            ddg,
        })
    }

    fn contains(&self, p: &[f64]) -> bool {
        p[1] > Self::POLE_MARGIN && p[1] < PI - Self::POLE_MARGIN
    }
}

/// Exact oracles attached to a catalog entry.
#[derive(Debug, Clone, Default)]
pub struct Oracles {
    /// Contact form in the `(x, y, θ)` chart of three-dimensional Minkowski space.
    pub mink3_contact: Option<fn(f64, [f64; 3]) -> f64>,
    /// Affine distance to the first conjugate point along every null geodesic.
    pub first_conjugate: Option<f64>,
    /// Geodesics are straight lines `p + tξ`.
    pub straight_geodesics: bool,
}

/// A named metric with its oracles.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub metric: MetricRef,
    pub oracles: Oracles,
}

pub fn make_minkowski(dim: usize) -> Result<CatalogEntry> {
    let metric = Minkowski::new(dim)?;
    Ok(CatalogEntry {
        name: metric.name(),
        metric: Arc::new(metric),
        oracles: Oracles {
            mink3_contact: (dim == 3).then_some(exact_mink3_contact as fn(f64, [f64; 3]) -> f64),
            first_conjugate: None,
            straight_geodesics: true,
        },
    })
}

pub fn make_perturbed_minkowski(epsilon: f64, bump: Bump) -> Result<CatalogEntry> {
    let metric = PerturbedMinkowski::new(epsilon, bump)?;
    Ok(CatalogEntry {
        name: metric.name(),
        metric: Arc::new(metric),
        oracles: Oracles::default(),
    })
}

/// Not part of the light-ray examples proper: a positively curved entry whose
/// null geodesics refocus at affine distance `π`, giving the conjugate-point
/// scan a non-trivial ground truth.
pub fn make_einstein_static() -> CatalogEntry {
    CatalogEntry {
        name: "einstein-static".into(),
        metric: Arc::new(EinsteinStatic::new()),
        oracles: Oracles {
            mink3_contact: None,
            first_conjugate: Some(PI),
            straight_geodesics: false,
        },
    }
}

/// Looks up a catalog entry by name with default parameters.
pub fn by_name(name: &str) -> Result<CatalogEntry> {
    match name {
        "minkowski" | "minkowski-3" => make_minkowski(3),
        "minkowski-4" => make_minkowski(4),
        "perturbed_minkowski" | "perturbed-minkowski" => {
            make_perturbed_minkowski(0.5, Bump::default())
        }
        "einstein_static" | "einstein-static" => Ok(make_einstein_static()),
        other => Err(Error::InvalidArgument(format!(
            "unknown catalog metric '{other}'"
        ))),
    }
}

/// `α = cos θ dx + sin θ dy` on the `(x, y, θ)` chart of Minkowski-3.
pub fn exact_mink3_contact(theta: f64, tangent: [f64; 3]) -> f64 {
    theta.cos() * tangent[0] + theta.sin() * tangent[1]
}

/// The light ray through `(0, x, y)` at angle `θ`: `(s, x + s cos θ, y + s sin θ)`.
pub fn mink3_ray_point(x: f64, y: f64, theta: f64, s: f64) -> [f64; 3] {
    [s, x + s * theta.cos(), y + s * theta.sin()]
}

/// `f(s, τ) = (τ + s²/2, s sin s + (1+τ) cos s, −s cos s + (1+τ) sin s)`.
pub fn example_mu_point(s: f64, tau: f64) -> [f64; 3] {
    let (sn, cs) = s.sin_cos();
    [
        tau + 0.5 * s * s,
        s * sn + (1.0 + tau) * cs,
        -s * cs + (1.0 + tau) * sn,
    ]
}

/// `μ(s) = f(s, 0)`.
pub fn example_mu_curve(s: f64) -> [f64; 3] {
    example_mu_point(s, 0.0)
}

/// `μ'(s) = s(1, cos s, sin s)`.
pub fn example_mu_velocity(s: f64) -> [f64; 3] {
    [s, s * s.cos(), s * s.sin()]
}

/// The geodesic variation of the celestial-curve example in Minkowski-3.
#[derive(Debug, Clone, Copy)]
pub struct ExampleMuVariation {
    pub interval: (f64, f64),
}

impl Default for ExampleMuVariation {
    fn default() -> Self {
        Self {
            interval: (-1.0, 1.0),
        }
    }
}

impl GeodesicVariation for ExampleMuVariation {
    fn interval(&self) -> (f64, f64) {
        self.interval
    }

    fn initial(&self, s: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        let (sn, cs) = s.sin_cos();
        Ok((
            DVector::from_column_slice(&example_mu_point(s, 0.0)),
            DVector::from_vec(vec![1.0, cs, sn]),
        ))
    }

    fn initial_derivative(&self, s: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        let (sn, cs) = s.sin_cos();
        Ok((
            DVector::from_column_slice(&example_mu_velocity(s)),
            DVector::from_vec(vec![0.0, -sn, cs]),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::frame_residual;

    #[test]
    fn minkowski_basics() {
        let e = make_minkowski(3).unwrap();
        let f = e.metric.frame(&[0.0; 3]).unwrap();
        let g = e.metric.components(&[0.0; 3]);
        let e1 = f.vector(0);
        assert_eq!((e1.transpose() * &g * &e1)[0], -1.0);
        assert!(make_minkowski(2).is_err());
    }

    #[test]
    fn exact_contact_formula_values() {
        assert_eq!(exact_mink3_contact(0.0, [1.0, 0.0, 0.0]), 1.0);
        assert_eq!(exact_mink3_contact(1.234, [0.0, 0.0, 1.0]), 0.0);
        assert!((exact_mink3_contact(PI / 2.0, [0.0, 1.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn perturbed_metric_formula() {
        let g = PerturbedMinkowski::with_default_bump(0.5).unwrap();
        let flat = Minkowski::new(3).unwrap();
        for t in [-3.0, -0.1, 0.0] {
            assert_eq!(g.components(&[t, 1.0, 2.0]), flat.components(&[0.0; 3]));
        }
        let c = g.components(&[0.25, 0.0, 0.0]);
        let f = (-4.0f64).exp();
        assert_eq!(c[(0, 1)], f);
        assert_eq!(c[(1, 0)], f);
        assert_eq!(c[(0, 0)], -(1.0 + f));
        assert_eq!(c[(1, 1)], 1.0 - f);
        // −(1+f)(1−f) − f² = −1
        assert!((c.determinant() + 1.0).abs() < 1e-15);
        assert!(frame_residual(&g, &[0.25, 0.0, 0.0]).unwrap() < 1e-12);
    }

    #[test]
    fn bump_must_vanish_in_the_past() {
        let bad = Bump::Custom(Arc::new(|t: f64| [1e-3 * (t + 20.0), 1e-3, 0.0]));
        assert!(matches!(
            PerturbedMinkowski::new(0.5, bad),
            Err(Error::InvalidBump { .. })
        ));
        assert!(PerturbedMinkowski::new(0.0, Bump::default()).is_err());
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let b = Bump::default();
        let t = 0.3;
        let h = 1e-5;
        let [_, d1, d2] = b.jet(t);
        let fd1 = (b.jet(t + h)[0] - b.jet(t - h)[0]) / (2.0 * h);
        let fd2 = (b.jet(t + h)[1] - b.jet(t - h)[1]) / (2.0 * h);
        assert!((d1 - fd1).abs() < 1e-8 * d1.abs().max(1.0));
        assert!((d2 - fd2).abs() < 1e-7 * d2.abs().max(1.0));
    }

    #[test]
    fn example_mu_substitutions() {
        assert_eq!(example_mu_point(0.0, 0.7), [0.7, 1.7, 0.0]);
        assert_eq!(example_mu_curve(0.0), [0.0, 1.0, 0.0]);
        for s in [-0.9, -0.2, 0.0, 0.4, 1.0] {
            let v = example_mu_velocity(s);
            let n = -v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
            assert!(n.abs() < 1e-15);
        }
    }

    #[test]
    fn einstein_static_domain_excludes_poles() {
        let es = EinsteinStatic::new();
        assert!(!es.contains(&[0.0, 0.05, 0.0]));
        assert!(es.contains(&[0.0, PI / 2.0, 0.0]));
        assert!(!es.contains(&[0.0, PI - 0.05, 0.0]));
    }
}
