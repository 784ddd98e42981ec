//! Metrics given by a table of components, each a sum of products of
//! one-variable factors `x^n`, `sin(a x)`, `cos(a x)`, `exp(a x)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{Metric, MetricJet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FactorKind {
    Pow { n: u32 },
    Sin { a: f64 },
    Cos { a: f64 },
    Exp { a: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub coord: usize,
    #[serde(flatten)]
    pub kind: FactorKind,
}

impl Factor {
    /// `(f, f', f'')` at `x`.
    fn jet(&self, x: f64) -> [f64; 3] {
        match self.kind {
            FactorKind::Pow { n } => {
                let n = n as i32;
                let p = |k: i32| if k < 0 { 0.0 } else { x.powi(k) };
                let nf = n as f64;
                [p(n), nf * p(n - 1), nf * (nf - 1.0) * p(n - 2)]
            }
            FactorKind::Sin { a } => {
                let (s, c) = (a * x).sin_cos();
                [s, a * c, -a * a * s]
            }
            FactorKind::Cos { a } => {
                let (s, c) = (a * x).sin_cos();
                [c, -a * s, -a * a * c]
            }
            FactorKind::Exp { a } => {
                let e = (a * x).exp();
                [e, a * e, a * a * e]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    #[serde(default)]
    pub factors: Vec<Factor>,
}

/// One independent component `g_ij = g_ji` (with `i <= j`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentEntry {
    pub i: usize,
    pub j: usize,
    pub terms: Vec<Term>,
}

/// Box bounds `lo < x^k < hi` declaring the chart domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub coord: usize,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMetric {
    pub name: String,
    pub dim: usize,
    pub components: Vec<ComponentEntry>,
    #[serde(default)]
    pub bounds: Vec<Bound>,
}

impl TableMetric {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 3 {
            return Err(Error::InvalidArgument(format!(
                "table metric needs dimension >= 3, got {}",
                self.dim
            )));
        }
        let mut seen = vec![false; self.dim * self.dim];
        for e in &self.components {
            if e.i >= self.dim || e.j >= self.dim {
                return Err(Error::InvalidArgument(format!(
                    "component ({}, {}) outside dimension {}",
                    e.i, e.j, self.dim
                )));
            }
            let (i, j) = (e.i.min(e.j), e.i.max(e.j));
            if std::mem::replace(&mut seen[i * self.dim + j], true) {
                return Err(Error::InvalidArgument(format!("component ({i}, {j}) given twice")));
            }
            for t in &e.terms {
                if !t.coeff.is_finite() || t.factors.iter().any(|f| f.coord >= self.dim) {
                    return Err(Error::InvalidArgument(format!(
                        "bad term in component ({i}, {j})"
                    )));
                }
            }
        }
        for b in &self.bounds {
            if b.coord >= self.dim || !(b.lo < b.hi) {
                return Err(Error::InvalidArgument(format!("bad bound {b:?}")));
            }
        }
        Ok(())
    }

    /// Value, gradient and Hessian of a sum of terms.
    fn eval(&self, terms: &[Term], p: &[f64]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let m = self.dim;
        let mut val = 0.0;
        let mut grad = vec![0.0; m];
        let mut hess = vec![vec![0.0; m]; m];
        for t in terms {
            // collapse factors per coordinate into one jet
            let mut per = vec![[1.0, 0.0, 0.0]; m];
            for f in &t.factors {
                let a = per[f.coord];
                let b = f.jet(p[f.coord]);
                per[f.coord] = [
                    a[0] * b[0],
                    a[1] * b[0] + a[0] * b[1],
                    a[2] * b[0] + 2.0 * a[1] * b[1] + a[0] * b[2],
                ];
            }
            let prod_except = |skip: &[usize]| -> f64 {
                (0..m)
                    .filter(|k| !skip.contains(k))
                    .map(|k| per[k][0])
                    .product()
            };
            val += t.coeff * prod_except(&[]);
            for k in 0..m {
                grad[k] += t.coeff * per[k][1] * prod_except(&[k]);
                for l in 0..m {
                    hess[k][l] += t.coeff
                        * if k == l {
                            per[k][2] * prod_except(&[k])
                        } else {
                            per[k][1] * per[l][1] * prod_except(&[k, l])
                        };
                }
            }
        }
        (val, grad, hess)
    }
}

impl Metric for TableMetric {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn components(&self, p: &[f64]) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.dim, self.dim);
        for e in &self.components {
            let (v, _, _) = self.eval(&e.terms, p);
            g[(e.i, e.j)] = v;
            g[(e.j, e.i)] = v;
        }
        g
    }

    fn jet(&self, p: &[f64]) -> Option<MetricJet> {
        let m = self.dim;
        let mut jet = MetricJet::constant(DMatrix::zeros(m, m));
        for e in &self.components {
            let (v, grad, hess) = self.eval(&e.terms, p);
            for (a, b) in [(e.i, e.j), (e.j, e.i)] {
                jet.g[(a, b)] = v;
                for k in 0..m {
                    jet.dg[k][(a, b)] = grad[k];
                    for l in 0..m {
                        jet.ddg[k][l][(a, b)] = hess[k][l];
                    }
                }
            }
        }
        Some(jet)
    }

    fn contains(&self, p: &[f64]) -> bool {
        self.bounds
            .iter()
            .all(|b| p[b.coord] > b.lo && p[b.coord] < b.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::EinsteinStatic;
    use crate::curvature::{christoffel, christoffel_fd, riemann};

    fn einstein_table() -> TableMetric {
        let c = |coeff: f64, factors: Vec<Factor>| Term { coeff, factors };
        TableMetric {
            name: "es".into(),
            dim: 3,
            components: vec![
                ComponentEntry { i: 0, j: 0, terms: vec![c(-1.0, vec![])] },
                ComponentEntry { i: 1, j: 1, terms: vec![c(1.0, vec![])] },
                // sin² χ = (1 − cos 2χ)/2
                ComponentEntry {
                    i: 2,
                    j: 2,
                    terms: vec![
                        c(0.5, vec![]),
                        c(-0.5, vec![Factor { coord: 1, kind: FactorKind::Cos { a: 2.0 } }]),
                    ],
                },
            ],
            bounds: vec![Bound { coord: 1, lo: 0.1, hi: 3.04 }],
        }
    }

    #[test]
    fn table_reproduces_catalog_metric() {
        let t = einstein_table();
        t.validate().unwrap();
        let e = EinsteinStatic::new();
        let p = [0.3, 1.1, 0.4];
        assert!((t.components(&p) - e.components(&p)).amax() < 1e-15);
        let a = christoffel(&t, &p).unwrap();
        let b = christoffel(&e, &p).unwrap();
        let c = christoffel_fd(&t, &p).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    assert!((a.get(i, j, k) - b.get(i, j, k)).abs() < 1e-14);
                    assert!((a.get(i, j, k) - c.get(i, j, k)).abs() < 1e-8);
                }
            }
        }
        let ra = riemann(&t, &p).unwrap();
        let rb = riemann(&e, &p).unwrap();
        assert!((ra.get(1, 2, 1, 2) - rb.get(1, 2, 1, 2)).abs() < 1e-13);
    }

    #[test]
    fn mixed_products_differentiate() {
        let t = TableMetric {
            name: "x".into(),
            dim: 3,
            components: vec![ComponentEntry {
                i: 1,
                j: 1,
                terms: vec![Term {
                    coeff: 2.0,
                    factors: vec![
                        Factor { coord: 0, kind: FactorKind::Pow { n: 2 } },
                        Factor { coord: 2, kind: FactorKind::Sin { a: 1.5 } },
                        Factor { coord: 0, kind: FactorKind::Exp { a: 0.5 } },
                    ],
                }],
            }],
            bounds: vec![],
        };
        let p = [0.7, 0.0, 0.3];
        let jet = t.jet(&p).unwrap();
        let f = |q: [f64; 3]| 2.0 * q[0] * q[0] * (1.5 * q[2]).sin() * (0.5 * q[0]).exp();
        let h = 1e-5;
        let d0 = (f([p[0] + h, 0.0, p[2]]) - f([p[0] - h, 0.0, p[2]])) / (2.0 * h);
        assert!((jet.dg[0][(1, 1)] - d0).abs() < 1e-8);
        let d02 = (f([p[0] + h, 0.0, p[2] + h]) - f([p[0] + h, 0.0, p[2] - h])
            - f([p[0] - h, 0.0, p[2] + h])
            + f([p[0] - h, 0.0, p[2] - h]))
            / (4.0 * h * h);
        assert!((jet.ddg[0][2][(1, 1)] - d02).abs() < 1e-5);
    }
}
