//! Levi-Civita connection, curvature and the Cotton tensor.
//!
//! Conventions: `Γ^k_ij` is stored as `gamma[(k, i, j)]`; the Riemann tensor
//! `R^a_bcd = ∂_c Γ^a_db − ∂_d Γ^a_cb + Γ^a_ce Γ^e_db − Γ^a_de Γ^e_cb` so that
//! `(R(X,Y)Z)^a = R^a_bcd Z^b X^c Y^d` and the Jacobi equation reads
//! `J'' + R(J,γ')γ' = 0`. Ricci is `R_bd = R^a_bad`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::metric::{check_dim, Metric, MetricJet};

/// Central-difference step for first derivatives of the metric.
pub const H_CHRISTOFFEL: f64 = 1e-5;
/// Central-difference step for derivatives of the connection.
pub const H_RIEMANN: f64 = 1e-4;

/// Dense rank-3 array over `0..m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dim + j) * self.dim + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.idx(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let n = self.idx(i, j, k);
        self.data[n] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, b| a.max(b.abs()))
    }
}

/// Dense rank-4 array over `0..m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim.pow(4)],
        }
    }

    #[inline]
    fn idx(&self, a: usize, b: usize, c: usize, d: usize) -> usize {
        ((a * self.dim + b) * self.dim + c) * self.dim + d
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.data[self.idx(a, b, c, d)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, d: usize, v: f64) {
        let n = self.idx(a, b, c, d);
        self.data[n] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    /// `R_abcd = g_ae R^e_bcd`.
    pub fn lowered(&self, g: &DMatrix<f64>) -> Tensor4 {
        let m = self.dim;
        let mut out = Tensor4::zeros(m);
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        let mut acc = 0.0;
                        for e in 0..m {
                            acc += g[(a, e)] * self.get(e, b, c, d);
                        }
                        out.set(a, b, c, d, acc);
                    }
                }
            }
        }
        out
    }
}

fn invert(g: &DMatrix<f64>, p: &[f64]) -> Result<DMatrix<f64>> {
    let det = g.determinant();
    if !det.is_finite() || det.abs() < 1e-14 {
        return Err(Error::SingularMetric { at: p.to_vec(), det });
    }
    g.clone().try_inverse().ok_or(Error::SingularMetric { at: p.to_vec(), det })
}

fn shifted(p: &[f64], k: usize, h: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    q[k] += h;
    q
}

/// Christoffel symbols from `g⁻¹` and `∂g`.
fn christoffel_from(ginv: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Tensor3 {
    let m = ginv.nrows();
    let mut first = Tensor3::zeros(m);
    for l in 0..m {
        for i in 0..m {
            for j in i..m {
                let v = 0.5 * (dg[i][(l, j)] + dg[j][(l, i)] - dg[l][(i, j)]);
                first.set(l, i, j, v);
                first.set(l, j, i, v);
            }
        }
    }
    let mut gamma = Tensor3::zeros(m);
    for k in 0..m {
        for i in 0..m {
            for j in i..m {
                let mut acc = 0.0;
                for l in 0..m {
                    acc += ginv[(k, l)] * first.get(l, i, j);
                }
                gamma.set(k, i, j, acc);
                gamma.set(k, j, i, acc);
            }
        }
    }
    gamma
}

/// Riemann tensor from `Γ` and its coordinate derivatives `dgamma[c] = ∂_c Γ`.
fn riemann_from(gamma: &Tensor3, dgamma: &[Tensor3]) -> Tensor4 {
    let m = gamma.dim;
    let mut r = Tensor4::zeros(m);
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for d in (c + 1)..m {
                    let mut v = dgamma[c].get(a, d, b) - dgamma[d].get(a, c, b);
                    for e in 0..m {
                        v += gamma.get(a, c, e) * gamma.get(e, d, b)
                            - gamma.get(a, d, e) * gamma.get(e, c, b);
                    }
                    r.set(a, b, c, d, v);
                    r.set(a, b, d, c, -v);
                }
            }
        }
    }
    r
}

/// Connection data at one point: metric, inverse, Christoffel symbols and
/// (optionally) the Riemann tensor.
#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub g: DMatrix<f64>,
    pub ginv: DMatrix<f64>,
    pub gamma: Tensor3,
    pub riemann: Option<Tensor4>,
}

impl PointGeometry {
    /// Evaluates `Γ` (and `R` when `with_riemann`) at `p`, from the metric's
    /// exact jet when available and by central differences otherwise.
    pub fn at(metric: &dyn Metric, p: &[f64], with_riemann: bool) -> Result<Self> {
        check_dim(metric, p.len())?;
        match metric.jet(p) {
            Some(jet) => Self::from_jet(&jet, p, with_riemann),
            None => {
                let g = metric.components(p);
                let ginv = invert(&g, p)?;
                let gamma = christoffel_fd(metric, p)?;
                let riemann = if with_riemann {
                    Some(riemann_fd(metric, p)?)
                } else {
                    None
                };
                Ok(Self {
                    g,
                    ginv,
                    gamma,
                    riemann,
                })
            }
        }
    }

    fn from_jet(jet: &MetricJet, p: &[f64], with_riemann: bool) -> Result<Self> {
        let m = jet.g.nrows();
        let ginv = invert(&jet.g, p)?;
        let gamma = christoffel_from(&ginv, &jet.dg);
        let riemann = if with_riemann {
            let mut dgamma = Vec::with_capacity(m);
            for c in 0..m {
                // ∂_c g^{kl} = −g^{ka} ∂_c g_ab g^{bl}
                let dginv = -(&ginv * &jet.dg[c] * &ginv);
                let mut dfirst = Tensor3::zeros(m);
                let mut first = Tensor3::zeros(m);
                for l in 0..m {
                    for i in 0..m {
                        for j in 0..m {
                            dfirst.set(
                                l,
                                i,
                                j,
                                0.5 * (jet.ddg[c][i][(l, j)] + jet.ddg[c][j][(l, i)]
                                    - jet.ddg[c][l][(i, j)]),
                            );
                            first.set(
                                l,
                                i,
                                j,
                                0.5 * (jet.dg[i][(l, j)] + jet.dg[j][(l, i)] - jet.dg[l][(i, j)]),
                            );
                        }
                    }
                }
                let mut dg_c = Tensor3::zeros(m);
                for k in 0..m {
                    for i in 0..m {
                        for j in 0..m {
                            let mut acc = 0.0;
                            for l in 0..m {
                                acc += dginv[(k, l)] * first.get(l, i, j)
                                    + ginv[(k, l)] * dfirst.get(l, i, j);
                            }
                            dg_c.set(k, i, j, acc);
                        }
                    }
                }
                dgamma.push(dg_c);
            }
            Some(riemann_from(&gamma, &dgamma))
        } else {
            None
        };
        Ok(Self {
            g: jet.g.clone(),
            ginv,
            gamma,
            riemann,
        })
    }

    /// `Γ(u, v)^c = Γ^c_ab u^a v^b`.
    pub fn contract_gamma(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        let m = self.gamma.dim;
        for (c, o) in out.iter_mut().enumerate().take(m) {
            let mut acc = 0.0;
            for a in 0..m {
                if u[a] == 0.0 {
                    continue;
                }
                for b in 0..m {
                    acc += self.gamma.get(c, a, b) * u[a] * v[b];
                }
            }
            *o = acc;
        }
    }

    /// `(R(x, y) z)^a = R^a_bcd z^b x^c y^d`.
    pub fn curvature_operator(&self, x: &[f64], y: &[f64], z: &[f64], out: &mut [f64]) {
        let r = self
            .riemann
            .as_ref()
            .expect("curvature requested without Riemann tensor");
        let m = r.dim;
        for (a, o) in out.iter_mut().enumerate().take(m) {
            let mut acc = 0.0;
            for b in 0..m {
                if z[b] == 0.0 {
                    continue;
                }
                for c in 0..m {
                    for d in 0..m {
                        acc += r.get(a, b, c, d) * z[b] * x[c] * y[d];
                    }
                }
            }
            *o = acc;
        }
    }
}

/// Christoffel symbols at `p`, closed form when the metric supplies a jet.
pub fn christoffel(metric: &dyn Metric, p: &[f64]) -> Result<Tensor3> {
    Ok(PointGeometry::at(metric, p, false)?.gamma)
}

/// Christoffel symbols from central differences of `g_ij` with step
/// [`H_CHRISTOFFEL`] (fourth-order stencil), ignoring any exact jet.
pub fn christoffel_fd(metric: &dyn Metric, p: &[f64]) -> Result<Tensor3> {
    check_dim(metric, p.len())?;
    let m = p.len();
    let g = metric.components(p);
    let ginv = invert(&g, p)?;
    let h = H_CHRISTOFFEL;
    let dg: Vec<DMatrix<f64>> = (0..m)
        .map(|k| {
            let at = |s: f64| metric.components(&shifted(p, k, s * h));
            (at(-2.0) - at(2.0) + (at(1.0) - at(-1.0)) * 8.0) / (12.0 * h)
        })
        .collect();
    Ok(christoffel_from(&ginv, &dg))
}

/// Riemann tensor at `p`, closed form when the metric supplies a jet.
pub fn riemann(metric: &dyn Metric, p: &[f64]) -> Result<Tensor4> {
    Ok(PointGeometry::at(metric, p, true)?
        .riemann
        .expect("requested with Riemann"))
}

/// Riemann tensor from fourth-order central differences (step [`H_RIEMANN`]) of
/// finite-difference Christoffel symbols.
pub fn riemann_fd(metric: &dyn Metric, p: &[f64]) -> Result<Tensor4> {
    check_dim(metric, p.len())?;
    let m = p.len();
    let gamma = christoffel_fd(metric, p)?;
    let h = H_RIEMANN;
    let mut dgamma = Vec::with_capacity(m);
    for c in 0..m {
        let at = |s: f64| christoffel_fd(metric, &shifted(p, c, s * h));
        let (p1, m1, p2, m2) = (at(1.0)?, at(-1.0)?, at(2.0)?, at(-2.0)?);
        let mut d = Tensor3::zeros(m);
        for (n, v) in d.data.iter_mut().enumerate() {
            *v = (m2.data[n] - p2.data[n] + 8.0 * (p1.data[n] - m1.data[n])) / (12.0 * h);
        }
        dgamma.push(d);
    }
    Ok(riemann_from(&gamma, &dgamma))
}

/// Ricci tensor `R_bd = R^a_bad`.
pub fn ricci_from(r: &Tensor4) -> DMatrix<f64> {
    let m = r.dim;
    DMatrix::from_fn(m, m, |b, d| (0..m).map(|a| r.get(a, b, a, d)).sum())
}

pub fn ricci(metric: &dyn Metric, p: &[f64]) -> Result<DMatrix<f64>> {
    Ok(ricci_from(&riemann(metric, p)?))
}

pub fn scalar_curvature(metric: &dyn Metric, p: &[f64]) -> Result<f64> {
    let geo = PointGeometry::at(metric, p, true)?;
    let ric = ricci_from(geo.riemann.as_ref().expect("with Riemann"));
    Ok(geo.ginv.component_mul(&ric).sum())
}

/// Cotton tensor `C_ijk = ∇_k R_ij − ∇_j R_ik + ¼(∇_j R g_ik − ∇_k R g_ij)`
/// of a three-dimensional metric.
///
/// Ricci and scalar curvature are contracted from [`riemann`]; their
/// coordinate derivatives are central differences with step `1e-4` (exact
/// jet) or `1e-3` (finite-difference curvature).
pub fn cotton_tensor(metric: &dyn Metric, p: &[f64]) -> Result<Tensor3> {
    check_dim(metric, p.len())?;
    if metric.dim() != 3 {
        return Err(Error::Dimension {
            expected: 3,
            got: metric.dim(),
        });
    }
    let m = 3;
    let h = if metric.jet(p).is_some() { 1e-4 } else { 1e-3 };
    let geo = PointGeometry::at(metric, p, true)?;
    let ric = ricci_from(geo.riemann.as_ref().expect("with Riemann"));
    let ricci_scalar = |q: &[f64]| -> Result<(DMatrix<f64>, f64)> {
        let g = PointGeometry::at(metric, q, true)?;
        let r = ricci_from(g.riemann.as_ref().expect("with Riemann"));
        let s = g.ginv.component_mul(&r).sum();
        Ok((r, s))
    };
    let mut d_ric = Vec::with_capacity(m);
    let mut d_scalar = DVector::zeros(m);
    for k in 0..m {
        let (rp, sp) = ricci_scalar(&shifted(p, k, h))?;
        let (rm, sm) = ricci_scalar(&shifted(p, k, -h))?;
        d_ric.push((rp - rm) / (2.0 * h));
        d_scalar[k] = (sp - sm) / (2.0 * h);
    }
    // ∇_k R_ij
    let nabla = |i: usize, j: usize, k: usize| -> f64 {
        let mut v = d_ric[k][(i, j)];
        for l in 0..m {
            v -= geo.gamma.get(l, k, i) * ric[(l, j)] + geo.gamma.get(l, k, j) * ric[(i, l)];
        }
        v
    };
    let mut c = Tensor3::zeros(m);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let v = nabla(i, j, k) - nabla(i, k, j)
                    + 0.25 * (d_scalar[j] * geo.g[(i, k)] - d_scalar[k] * geo.g[(i, j)]);
                c.set(i, j, k, v);
            }
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{EinsteinStatic, Minkowski, PerturbedMinkowski};

    #[test]
    fn minkowski_connection_and_curvature_vanish() {
        let m = Minkowski::new(3).unwrap();
        let p = [0.3, -1.0, 2.0];
        assert_eq!(christoffel(&m, &p).unwrap().max_abs(), 0.0);
        assert_eq!(riemann(&m, &p).unwrap().max_abs(), 0.0);
        assert!(riemann_fd(&m, &p).unwrap().max_abs() < 1e-10);
        assert!(cotton_tensor(&m, &p).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn perturbed_metric_is_flat_in_the_past() {
        let g = PerturbedMinkowski::with_default_bump(0.5).unwrap();
        for t in [-2.0, -0.5, -1e-3, 0.0] {
            let p = [t, 0.7, -0.2];
            assert_eq!(christoffel(&g, &p).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn sphere_factor_has_scalar_curvature_two() {
        let es = EinsteinStatic::new();
        let r = scalar_curvature(&es, &[0.0, 1.1, 0.4]).unwrap();
        assert!((r - 2.0).abs() < 1e-12, "R = {r}");
        assert!(riemann(&es, &[0.0, 1.1, 0.4]).unwrap().max_abs() > 0.1);
    }

    #[test]
    fn cotton_rejects_four_dimensions() {
        let m = Minkowski::new(4).unwrap();
        assert!(matches!(
            cotton_tensor(&m, &[0.0; 4]),
            Err(Error::Dimension { expected: 3, got: 4 })
        ));
    }

    #[test]
    fn lowered_riemann_is_antisymmetric_in_last_pair() {
        let es = EinsteinStatic::new();
        let p = [0.2, 0.9, 1.3];
        let r = riemann(&es, &p).unwrap();
        let low = r.lowered(&es.components(&p));
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    for d in 0..3 {
                        assert!((low.get(a, b, c, d) + low.get(a, b, d, c)).abs() < 1e-14);
                    }
                }
            }
        }
    }
}
