//! Lorentzian metrics, their derivative jets and orthonormal frames.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A point of space-time in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Event(pub DVector<f64>);

impl Event {
    pub fn new(coords: &[f64]) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite event coordinates {coords:?}"
            )));
        }
        Ok(Self(DVector::from_column_slice(coords)))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// A tangent vector in the coordinate basis at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: Event,
    pub comps: DVector<f64>,
}

impl TangentVector {
    pub fn new(base: Event, comps: &[f64]) -> Result<Self> {
        if comps.len() != base.dim() {
            return Err(Error::Dimension {
                expected: base.dim(),
                got: comps.len(),
            });
        }
        Ok(Self {
            base,
            comps: DVector::from_column_slice(comps),
        })
    }
}

/// Metric components with exact first and second coordinate derivatives.
///
/// `dg[k]` holds `∂_k g_ij`; `ddg[k][l]` holds `∂_k ∂_l g_ij`.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub g: DMatrix<f64>,
    pub dg: Vec<DMatrix<f64>>,
    pub ddg: Vec<Vec<DMatrix<f64>>>,
}

impl MetricJet {
    /// A jet with vanishing derivatives.
    pub fn constant(g: DMatrix<f64>) -> Self {
        let m = g.nrows();
        let z = DMatrix::zeros(m, m);
        Self {
            g,
            dg: vec![z.clone(); m],
            ddg: vec![vec![z; m]; m],
        }
    }
}

/// Orthonormal frame `E_1..E_m` stored column-wise in coordinate components.
/// `E_1` is the future-pointing timelike reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub vectors: DMatrix<f64>,
}

impl Frame {
    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn vector(&self, a: usize) -> DVector<f64> {
        self.vectors.column(a).into_owned()
    }

    /// Coordinate components of `Σ c^a E_a`.
    pub fn from_frame(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.vectors * c
    }

    /// Frame components `c^a = η_aa g(v, E_a)` of a coordinate vector.
    pub fn to_frame(&self, g: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
        let gv = g * v;
        let mut c = self.vectors.tr_mul(&gv);
        c[0] = -c[0];
        c
    }
}

/// An analytic Lorentzian metric of signature (−,+,…,+).
///
/// Implementors supply components; exact derivatives are optional and are
/// used in place of finite differences when present.
pub trait Metric: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn dim(&self) -> usize;

    fn components(&self, p: &[f64]) -> DMatrix<f64>;

    fn jet(&self, _p: &[f64]) -> Option<MetricJet> {
        None
    }

    /// Whether `p` lies in the declared chart domain.
    fn contains(&self, _p: &[f64]) -> bool {
        true
    }

    /// Orthonormal frame at `p`; defaults to Gram–Schmidt on the coordinate
    /// basis, which requires `∂_1` to be timelike.
    fn frame(&self, p: &[f64]) -> Result<Frame> {
        gram_schmidt(&self.components(p), p)
    }
}

pub type MetricRef = Arc<dyn Metric>;

/// Gram–Schmidt on the coordinate basis with respect to a Lorentzian `g`.
pub fn gram_schmidt(g: &DMatrix<f64>, at: &[f64]) -> Result<Frame> {
    let m = g.nrows();
    let mut e = DMatrix::<f64>::zeros(m, m);
    for a in 0..m {
        let mut v = DVector::<f64>::zeros(m);
        v[a] = 1.0;
        for b in 0..a {
            let eb = e.column(b).into_owned();
            let eta = if b == 0 { -1.0 } else { 1.0 };
            let proj = (v.transpose() * g * &eb)[0] * eta;
            v -= eb * proj;
        }
        let n2 = (v.transpose() * g * &v)[0];
        let ok = if a == 0 { n2 < 0.0 } else { n2 > 0.0 };
        if !ok || !n2.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "coordinate basis vector {a} has wrong causal character (g = {n2:e}) at {at:?}"
            )));
        }
        e.set_column(a, &(v / n2.abs().sqrt()));
    }
    Ok(Frame { vectors: e })
}

/// `g(u, v)` at `p`.
pub fn inner(metric: &dyn Metric, p: &[f64], u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    (u.transpose() * metric.components(p) * v)[0]
}

pub(crate) fn check_dim(metric: &dyn Metric, len: usize) -> Result<()> {
    if metric.dim() != len {
        return Err(Error::Dimension {
            expected: metric.dim(),
            got: len,
        });
    }
    Ok(())
}

pub(crate) fn check_domain(metric: &dyn Metric, p: &[f64]) -> Result<()> {
    if !metric.contains(p) || p.iter().any(|x| !x.is_finite()) {
        return Err(Error::OutOfDomain {
            metric: metric.name(),
            at: p.to_vec(),
        });
    }
    Ok(())
}

/// Residual `max |g(E_a, E_b) − η_ab|` of a frame.
pub fn frame_residual(metric: &dyn Metric, p: &[f64]) -> Result<f64> {
    let g = metric.components(p);
    let f = metric.frame(p)?;
    let gram = f.vectors.transpose() * g * &f.vectors;
    let m = gram.nrows();
    let mut worst = 0.0_f64;
    for a in 0..m {
        for b in 0..m {
            let eta = if a != b {
                0.0
            } else if a == 0 {
                -1.0
            } else {
                1.0
            };
            worst = worst.max((gram[(a, b)] - eta).abs());
        }
    }
    Ok(worst)
}

/// Number of negative eigenvalues of `g` at `p`.
pub fn negative_eigenvalues(metric: &dyn Metric, p: &[f64]) -> usize {
    let g = metric.components(p);
    let sym = nalgebra::SymmetricEigen::new(g);
    sym.eigenvalues.iter().filter(|&&l| l < 0.0).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_schmidt_on_boosted_block() {
        // -(1+f) dt² + 2f dt dx + (1-f) dx² + dy² with f = 0.3
        let f = 0.3;
        let g = DMatrix::from_row_slice(3, 3, &[-(1.0 + f), f, 0.0, f, 1.0 - f, 0.0, 0.0, 0.0, 1.0]);
        let fr = gram_schmidt(&g, &[0.0; 3]).unwrap();
        let gram = fr.vectors.transpose() * &g * &fr.vectors;
        let eta = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0, 1.0]));
        assert!((gram - eta).amax() < 1e-14);
        // E_2 = √(1+f)(∂x + f/(1+f) ∂t)
        let e2 = fr.vector(1);
        assert!((e2[1] - (1.0 + f).sqrt()).abs() < 1e-14);
        assert!((e2[0] - f / (1.0 + f).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn frame_components_round_trip() {
        let g = DMatrix::from_row_slice(3, 3, &[-1.2, 0.2, 0.0, 0.2, 0.8, 0.0, 0.0, 0.0, 1.0]);
        let fr = gram_schmidt(&g, &[0.0; 3]).unwrap();
        let v = DVector::from_vec(vec![0.3, -1.1, 2.0]);
        let c = fr.to_frame(&g, &v);
        assert!((fr.from_frame(&c) - v).amax() < 1e-14);
    }

    #[test]
    fn spacelike_first_axis_is_rejected() {
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, 1.0]));
        assert!(gram_schmidt(&g, &[0.0; 3]).is_err());
    }
}
