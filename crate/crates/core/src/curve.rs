//! Parametrized curves in space-time.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A differentiable curve `s ↦ μ(s)` in chart coordinates.
pub trait Curve: Send + Sync {
    fn interval(&self) -> (f64, f64);

    fn position(&self, s: f64) -> Result<DVector<f64>>;

    /// Defaults to fourth-order central differences of [`Curve::position`].
    fn velocity(&self, s: f64) -> Result<DVector<f64>> {
        central_velocity(self, s, 1e-3)
    }
}

/// `(−μ(s+2h) + 8μ(s+h) − 8μ(s−h) + μ(s−2h)) / 12h`.
pub fn central_velocity<C: Curve + ?Sized>(c: &C, s: f64, h: f64) -> Result<DVector<f64>> {
    let p2 = c.position(s + 2.0 * h)?;
    let p1 = c.position(s + h)?;
    let m1 = c.position(s - h)?;
    let m2 = c.position(s - 2.0 * h)?;
    Ok((-p2 + p1 * 8.0 - m1 * 8.0 + m2) / (12.0 * h))
}

/// Number of basis functions in a coefficient row.
pub const BASIS_LEN: usize = 7;

/// Basis `{1, s, s², sin s, cos s, s sin s, s cos s}` and its derivatives.
fn basis(s: f64, order: usize) -> [f64; BASIS_LEN] {
    let (sn, cs) = s.sin_cos();
    match order {
        0 => [1.0, s, s * s, sn, cs, s * sn, s * cs],
        1 => [0.0, 1.0, 2.0 * s, cs, -sn, sn + s * cs, cs - s * sn],
        2 => [0.0, 0.0, 2.0, -sn, -cs, 2.0 * cs - s * sn, -2.0 * sn - s * cs],
        _ => unreachable!("basis derivatives above second order are not used"),
    }
}

/// Curve whose coordinates are linear combinations of the fixed basis
/// `{1, s, s², sin s, cos s, s·sin s, s·cos s}`. Derivatives are exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientCurve {
    pub interval: (f64, f64),
    pub coords: Vec<[f64; BASIS_LEN]>,
}

impl CoefficientCurve {
    pub fn new(interval: (f64, f64), coords: Vec<[f64; BASIS_LEN]>) -> Result<Self> {
        if !(interval.0 < interval.1) {
            return Err(Error::InvalidArgument(format!(
                "empty curve interval {interval:?}"
            )));
        }
        if coords.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite curve coefficient".into()));
        }
        Ok(Self { interval, coords })
    }

    /// `p + s·v` on `interval`.
    pub fn line(interval: (f64, f64), p: &[f64], v: &[f64]) -> Result<Self> {
        let coords = p
            .iter()
            .zip(v)
            .map(|(&a, &b)| [a, b, 0.0, 0.0, 0.0, 0.0, 0.0])
            .collect();
        Self::new(interval, coords)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    fn eval(&self, s: f64, order: usize) -> DVector<f64> {
        let b = basis(s, order);
        DVector::from_iterator(
            self.coords.len(),
            self.coords
                .iter()
                .map(|row| row.iter().zip(&b).map(|(c, x)| c * x).sum::<f64>()),
        )
    }

    pub fn acceleration(&self, s: f64) -> DVector<f64> {
        self.eval(s, 2)
    }
}

impl Curve for CoefficientCurve {
    fn interval(&self) -> (f64, f64) {
        self.interval
    }

    fn position(&self, s: f64) -> Result<DVector<f64>> {
        Ok(self.eval(s, 0))
    }

    fn velocity(&self, s: f64) -> Result<DVector<f64>> {
        Ok(self.eval(s, 1))
    }
}

/// Piecewise cubic Hermite interpolant through sampled positions and
/// velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteCurve {
    nodes: Vec<f64>,
    positions: Vec<DVector<f64>>,
    velocities: Vec<DVector<f64>>,
}

impl HermiteCurve {
    pub fn new(
        nodes: Vec<f64>,
        positions: Vec<DVector<f64>>,
        velocities: Vec<DVector<f64>>,
    ) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != positions.len() || nodes.len() != velocities.len() {
            return Err(Error::InvalidArgument(
                "Hermite curve needs >= 2 nodes with matching samples".into(),
            ));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "Hermite nodes must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            nodes,
            positions,
            velocities,
        })
    }

    fn segment(&self, s: f64) -> usize {
        match self.nodes.partition_point(|&x| x <= s) {
            0 => 0,
            n if n >= self.nodes.len() => self.nodes.len() - 2,
            n => n - 1,
        }
    }
}

impl Curve for HermiteCurve {
    fn interval(&self) -> (f64, f64) {
        (self.nodes[0], *self.nodes.last().expect("non-empty"))
    }

    fn position(&self, s: f64) -> Result<DVector<f64>> {
        let i = self.segment(s);
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        let h = b - a;
        let x = (s - a) / h;
        let h00 = 2.0 * x.powi(3) - 3.0 * x * x + 1.0;
        let h10 = x.powi(3) - 2.0 * x * x + x;
        let h01 = -2.0 * x.powi(3) + 3.0 * x * x;
        let h11 = x.powi(3) - x * x;
        Ok(&self.positions[i] * h00
            + &self.velocities[i] * (h10 * h)
            + &self.positions[i + 1] * h01
            + &self.velocities[i + 1] * (h11 * h))
    }

    fn velocity(&self, s: f64) -> Result<DVector<f64>> {
        let i = self.segment(s);
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        let h = b - a;
        let x = (s - a) / h;
        let d00 = (6.0 * x * x - 6.0 * x) / h;
        let d10 = 3.0 * x * x - 4.0 * x + 1.0;
        let d01 = (-6.0 * x * x + 6.0 * x) / h;
        let d11 = 3.0 * x * x - 2.0 * x;
        Ok(&self.positions[i] * d00
            + &self.velocities[i] * d10
            + &self.positions[i + 1] * d01
            + &self.velocities[i + 1] * d11)
    }
}

type VecFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// Curve backed by closures; the velocity is optional.
#[derive(Clone)]
pub struct FnCurve {
    interval: (f64, f64),
    position: VecFn,
    velocity: Option<VecFn>,
}

impl fmt::Debug for FnCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnCurve")
            .field("interval", &self.interval)
            .field("analytic_velocity", &self.velocity.is_some())
            .finish()
    }
}

impl FnCurve {
    pub fn new(
        interval: (f64, f64),
        position: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            interval,
            position: Arc::new(position),
            velocity: None,
        }
    }

    pub fn with_velocity(
        mut self,
        velocity: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.velocity = Some(Arc::new(velocity));
        self
    }
}

impl Curve for FnCurve {
    fn interval(&self) -> (f64, f64) {
        self.interval
    }

    fn position(&self, s: f64) -> Result<DVector<f64>> {
        Ok((self.position)(s))
    }

    fn velocity(&self, s: f64) -> Result<DVector<f64>> {
        match &self.velocity {
            Some(v) => Ok(v(s)),
            None => central_velocity(self, s, 1e-3),
        }
    }
}

/// Uniform grid of `n >= 2` nodes on `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "grid needs at least two nodes");
    (0..n)
        .map(|i| {
            if i == n - 1 {
                b
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_velocity_matches_central_differences() {
        let c = CoefficientCurve::new(
            (0.0, 1.0),
            vec![
                [0.1, -2.0, 0.3, 0.5, 0.0, 0.2, -0.1],
                [1.0, 0.0, 0.0, -1.0, 2.0, 0.0, 0.4],
                [0.0, 1.0, -0.7, 0.0, 0.0, 0.3, 0.0],
            ],
        )
        .unwrap();
        for s in [0.1, 0.5, 0.9] {
            let exact = c.velocity(s).unwrap();
            let fd = central_velocity(&c, s, 1e-3).unwrap();
            assert!((exact - fd).amax() < 1e-10);
            let acc = c.acceleration(s);
            let fd2 = (c.velocity(s + 1e-5).unwrap() - c.velocity(s - 1e-5).unwrap()) / 2e-5;
            assert!((acc - fd2).amax() < 1e-8);
        }
    }

    #[test]
    fn hermite_reproduces_cubic_exactly() {
        let f = |s: f64| DVector::from_vec(vec![s.powi(3) - s, 2.0 * s * s]);
        let df = |s: f64| DVector::from_vec(vec![3.0 * s * s - 1.0, 4.0 * s]);
        let nodes = uniform_grid(-1.0, 1.0, 5);
        let h = HermiteCurve::new(
            nodes.clone(),
            nodes.iter().map(|&s| f(s)).collect(),
            nodes.iter().map(|&s| df(s)).collect(),
        )
        .unwrap();
        for s in [-0.95, -0.3, 0.0, 0.41, 1.0] {
            assert!((h.position(s).unwrap() - f(s)).amax() < 1e-14);
            assert!((h.velocity(s).unwrap() - df(s)).amax() < 1e-13);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(CoefficientCurve::new((1.0, 0.0), vec![]).is_err());
        assert!(HermiteCurve::new(vec![0.0], vec![], vec![]).is_err());
    }
}
