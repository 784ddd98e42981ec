//! Jacobi fields along light rays, the reduction modulo `γ'`, the chart on
//! `TN` and conjugate-point scans.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::curvature::PointGeometry;
use crate::error::{Error, Result};
use crate::metric::{check_dim, check_domain, Event, Metric, TangentVector};
use crate::ode::{integrate, integrate_stations, OdeSystem, Tolerances};
use crate::rays::{canonicalize, ray_from_coords, ray_coords, ChartKind, LightRay, RayChart, DEFAULT_HORIZON};

/// A Jacobi field at parameter `t`: the geodesic point `x`, its velocity
/// `k`, the field `J` and its covariant derivative `J'`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiState {
    pub t: f64,
    pub x: DVector<f64>,
    pub k: DVector<f64>,
    pub j: DVector<f64>,
    pub dj: DVector<f64>,
}

impl JacobiState {
    /// Field with data `(J, J')` at parameter `t` of `ray`.
    pub fn on_ray(
        metric: &dyn Metric,
        ray: &LightRay,
        t: f64,
        j: &[f64],
        dj: &[f64],
        tol: &Tolerances,
    ) -> Result<Self> {
        check_dim(metric, j.len())?;
        check_dim(metric, dj.len())?;
        let (x, k) = ray.state(metric, t, tol)?;
        Ok(Self {
            t,
            x,
            k,
            j: DVector::from_column_slice(j),
            dj: DVector::from_column_slice(dj),
        })
    }

    /// `J + (at + b)γ'`, with `J' + aγ'`.
    pub fn shifted(&self, a: f64, b: f64) -> Self {
        Self {
            j: &self.j + &self.k * (a * self.t + b),
            dj: &self.dj + &self.k * a,
            ..self.clone()
        }
    }

    /// `αJ₁ + βJ₂` along the same geodesic point.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        Self {
            j: &self.j * alpha + &other.j * beta,
            dj: &self.dj * alpha + &other.dj * beta,
            ..self.clone()
        }
    }

    fn pack(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(4 * self.x.len());
        y.extend(self.x.iter());
        y.extend(self.k.iter());
        y.extend(self.j.iter());
        y.extend(self.dj.iter());
        y
    }

    fn unpack(t: f64, y: &[f64], m: usize) -> Self {
        let v = |i: usize| DVector::from_column_slice(&y[i * m..(i + 1) * m]);
        Self {
            t,
            x: v(0),
            k: v(1),
            j: v(2),
            dj: v(3),
        }
    }
}

/// State `[x, k, J₁, J₁', …]`: `J̇ = J' − Γ(k, J)`, `J̇' = −R(J,k)k − Γ(k, J')`.
pub(crate) struct JacobiSystem<'a> {
    pub metric: &'a dyn Metric,
    pub fields: usize,
}

impl OdeSystem for JacobiSystem<'_> {
    fn dim(&self) -> usize {
        self.metric.dim() * (2 + 2 * self.fields)
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let m = self.metric.dim();
        let x = &y[..m];
        let k = &y[m..2 * m];
        check_domain(self.metric, x)?;
        let geo = PointGeometry::at(self.metric, x, true)?;
        let mut tmp = vec![0.0; m];
        dy[..m].copy_from_slice(k);
        geo.contract_gamma(k, k, &mut tmp);
        for (d, g) in dy[m..2 * m].iter_mut().zip(&tmp) {
            *d = -g;
        }
        for f in 0..self.fields {
            let o = (2 + 2 * f) * m;
            let j = &y[o..o + m];
            let dj = &y[o + m..o + 2 * m];
            geo.contract_gamma(k, j, &mut tmp);
            for i in 0..m {
                dy[o + i] = dj[i] - tmp[i];
            }
            let mut rjk = vec![0.0; m];
            geo.curvature_operator(j, k, k, &mut rjk);
            geo.contract_gamma(k, dj, &mut tmp);
            for i in 0..m {
                dy[o + m + i] = -rjk[i] - tmp[i];
            }
        }
        Ok(())
    }
}

/// Propagates a Jacobi state to parameter `t1`.
pub fn propagate_jacobi(
    metric: &dyn Metric,
    state: &JacobiState,
    t1: f64,
    tol: &Tolerances,
) -> Result<JacobiState> {
    check_dim(metric, state.x.len())?;
    let y = integrate(
        &JacobiSystem { metric, fields: 1 },
        state.t,
        &state.pack(),
        t1,
        tol,
    )?;
    Ok(JacobiState::unpack(t1, &y, metric.dim()))
}

/// Propagates several fields along one geodesic to each station (which
/// must be monotone away from `t0`). Returns, per station, the fields.
pub fn propagate_family(
    metric: &dyn Metric,
    t0: f64,
    x: &DVector<f64>,
    k: &DVector<f64>,
    fields: &[(DVector<f64>, DVector<f64>)],
    stations: &[f64],
    tol: &Tolerances,
) -> Result<Vec<Vec<JacobiState>>> {
    let m = metric.dim();
    let mut y0: Vec<f64> = x.iter().chain(k.iter()).copied().collect();
    for (j, dj) in fields {
        y0.extend(j.iter());
        y0.extend(dj.iter());
    }
    let sys = JacobiSystem {
        metric,
        fields: fields.len(),
    };
    let ys = integrate_stations(&sys, t0, &y0, stations, tol)?;
    Ok(ys
        .iter()
        .zip(stations)
        .map(|(y, &t)| {
            (0..fields.len())
                .map(|f| {
                    let o = (2 + 2 * f) * m;
                    JacobiState {
                        t,
                        x: DVector::from_column_slice(&y[..m]),
                        k: DVector::from_column_slice(&y[m..2 * m]),
                        j: DVector::from_column_slice(&y[o..o + m]),
                        dj: DVector::from_column_slice(&y[o + m..o + 2 * m]),
                    }
                })
                .collect()
        })
        .collect())
}

/// The Jacobi field of the sky of `γ(τ)` with `J(τ) = 0`, `J'(τ) = ξ`.
pub fn sky_jacobi(
    metric: &dyn Metric,
    ray: &LightRay,
    tau: f64,
    xi: &TangentVector,
    tol: &Tolerances,
) -> Result<JacobiState> {
    check_dim(metric, xi.comps.len())?;
    let (x, k) = ray.state(metric, tau, tol)?;
    if (&x - &xi.base.0).amax() > 1e-8 * (1.0 + x.amax()) {
        return Err(Error::InvalidArgument(format!(
            "vector is not based at γ({tau})"
        )));
    }
    Ok(JacobiState {
        t: tau,
        x,
        k,
        j: DVector::zeros(metric.dim()),
        dj: xi.comps.clone(),
    })
}

/// The class `[J]` at parameter `t` in reduced frame components: `w̄`, `v̄`
/// are the frame components of `J(t) − (w¹/c¹)γ'(t)` and
/// `J'(t) − (v¹/c¹)γ'(t)` with the vanishing first entry removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentRayVector {
    pub t: f64,
    pub w_bar: Vec<f64>,
    pub v_bar: Vec<f64>,
    /// Frame components of `γ'(t)`.
    pub velocity: Vec<f64>,
}

impl TangentRayVector {
    /// `g(J, γ') = Σ_j w̄^j c^j`.
    pub fn contact_value(&self) -> f64 {
        self.w_bar
            .iter()
            .zip(&self.velocity[1..])
            .map(|(w, c)| w * c)
            .sum()
    }

    /// Euclidean norm of `(w̄, v̄)`.
    pub fn norm(&self) -> f64 {
        self.w_bar
            .iter()
            .chain(&self.v_bar)
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

/// Reduces a Jacobi state modulo `γ'` in the frame at `x(t)`.
pub fn reduce_mod_gamma(metric: &dyn Metric, state: &JacobiState) -> Result<TangentRayVector> {
    let p = state.x.as_slice();
    let g = metric.components(p);
    let frame = metric.frame(p)?;
    let c = frame.to_frame(&g, &state.k);
    let w = frame.to_frame(&g, &state.j);
    let v = frame.to_frame(&g, &state.dj);
    Ok(reduce_components(state.t, &c, &w, &v))
}

pub(crate) fn reduce_components(
    t: f64,
    c: &DVector<f64>,
    w: &DVector<f64>,
    v: &DVector<f64>,
) -> TangentRayVector {
    let rw = w[0] / c[0];
    let rv = v[0] / c[0];
    TangentRayVector {
        t,
        w_bar: (1..c.len()).map(|a| w[a] - rw * c[a]).collect(),
        v_bar: (1..c.len()).map(|a| v[a] - rv * c[a]).collect(),
        velocity: c.iter().copied().collect(),
    }
}

/// Coordinates `(x, u; v, w)` of a tangent vector to the space of light rays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TnCoords {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl TnCoords {
    pub fn to_vec(&self) -> Vec<f64> {
        [&self.x[..], &self.u, &self.v, &self.w].concat()
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        self.to_vec()
            .iter()
            .zip(other.to_vec())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Moves a Jacobi state to the crossing of the chart surface and rewrites it
/// in the canonical parametrization of the ray.
pub fn canonical_state(
    metric: &dyn Metric,
    chart: &RayChart,
    state: &JacobiState,
    tol: &Tolerances,
) -> Result<(LightRay, JacobiState)> {
    let c = canonicalize(
        metric,
        chart.level,
        state.x.as_slice(),
        state.k.as_slice(),
        DEFAULT_HORIZON,
        tol,
    )?;
    let at = propagate_jacobi(metric, state, state.t + c.t_cross, tol)?;
    let ray = c.ray;
    let k = ray.initial_velocity(metric)?;
    Ok((
        ray.clone(),
        JacobiState {
            t: 0.0,
            x: ray.anchor().0.clone(),
            k,
            j: at.j,
            dj: at.dj / c.scale,
        },
    ))
}

/// `(x, u; v, w)` of a Jacobi state: `w` is `w̄` at the chart surface and
/// `v` the independent part of `v̄`.
pub fn tn_chart(
    metric: &dyn Metric,
    chart: &RayChart,
    state: &JacobiState,
    tol: &Tolerances,
) -> Result<TnCoords> {
    let (ray, st) = canonical_state(metric, chart, state, tol)?;
    let (x, u) = ray_coords(chart, &ray)?;
    let red = reduce_mod_gamma(metric, &st)?;
    let v = match chart.kind {
        ChartKind::Hemisphere => red.v_bar[1..].to_vec(),
        ChartKind::Angle => {
            let (s, c) = u[0].sin_cos();
            vec![-s * red.v_bar[0] + c * red.v_bar[1]]
        }
    };
    Ok(TnCoords {
        x: x.iter().copied().collect(),
        u: u.iter().copied().collect(),
        v,
        w: red.w_bar,
    })
}

/// Inverse of [`tn_chart`]: the ray and the reduced representative at its
/// anchor.
pub fn tn_chart_inverse(
    metric: &dyn Metric,
    chart: &RayChart,
    coords: &TnCoords,
) -> Result<(LightRay, JacobiState)> {
    let m = metric.dim();
    if coords.x.len() != m - 1 || coords.w.len() != m - 1 {
        return Err(Error::Dimension {
            expected: m - 1,
            got: coords.x.len().min(coords.w.len()),
        });
    }
    let ray = ray_from_coords(chart, &coords.x, &coords.u)?;
    let unit = ray.unit().clone();
    let v_bar: Vec<f64> = match chart.kind {
        ChartKind::Hemisphere => {
            let dot: f64 = coords.v.iter().zip(unit.iter().skip(1)).map(|(a, b)| a * b).sum();
            std::iter::once(-dot / unit[0])
                .chain(coords.v.iter().copied())
                .collect()
        }
        ChartKind::Angle => vec![-unit[1] * coords.v[0], unit[0] * coords.v[0]],
    };
    let frame = metric.frame(ray.anchor().coords())?;
    let lift = |bar: &[f64]| {
        let mut c = DVector::zeros(m);
        c.rows_mut(1, m - 1).copy_from_slice(bar);
        frame.from_frame(&c)
    };
    let state = JacobiState {
        t: 0.0,
        x: ray.anchor().0.clone(),
        k: ray.initial_velocity(metric)?,
        j: lift(&coords.w),
        dj: lift(&v_bar),
    };
    Ok((ray, state))
}

/// Step for differentiating the frame field in [`tangent_from_chart_velocity`].
const H_FRAME: f64 = 1e-5;

/// The Jacobi field at the anchor of the variation of rays through the chart
/// curve with velocity `(ẋ, u̇)` at `(x, u)`:
/// `J(0) = Σ ẋ^k ∂_k`, `J'(0) = ∇_{J(0)}(E_1 + Σ u^j E_j) + Σ u̇^j E_j`.
pub fn tangent_from_chart_velocity(
    metric: &dyn Metric,
    chart: &RayChart,
    x: &[f64],
    u: &[f64],
    dx: &[f64],
    du: &[f64],
) -> Result<JacobiState> {
    let m = metric.dim();
    if dx.len() != m - 1 || du.len() != u.len() {
        return Err(Error::Dimension {
            expected: m - 1,
            got: dx.len(),
        });
    }
    let ray = ray_from_coords(chart, x, u)?;
    let p = ray.anchor().coords().to_vec();
    let mut j = DVector::zeros(m);
    j.rows_mut(1, m - 1).copy_from_slice(dx);
    let frame = metric.frame(&p)?;
    let c = ray.direction.frame_components();
    let unit_dot = chart.unit_velocity(u, du)?;

    let mut dj = DVector::zeros(m);
    if j.amax() > 0.0 {
        let plus: Vec<f64> = p.iter().zip(j.iter()).map(|(a, b)| a + H_FRAME * b).collect();
        let minus: Vec<f64> = p.iter().zip(j.iter()).map(|(a, b)| a - H_FRAME * b).collect();
        let fp = metric.frame(&plus)?;
        let fm = metric.frame(&minus)?;
        // ∂_J (Σ c^a E_a) along the chart surface
        dj += (fp.from_frame(&c) - fm.from_frame(&c)) / (2.0 * H_FRAME);
        let k = frame.from_frame(&c);
        let geo = PointGeometry::at(metric, &p, false)?;
        let mut corr = vec![0.0; m];
        geo.contract_gamma(j.as_slice(), k.as_slice(), &mut corr);
        dj += DVector::from_vec(corr);
    }
    let mut cu = DVector::zeros(m);
    cu.rows_mut(1, m - 1).copy_from(&unit_dot);
    dj += frame.from_frame(&cu);

    Ok(JacobiState {
        t: 0.0,
        x: DVector::from_column_slice(&p),
        k: ray.initial_velocity(metric)?,
        j,
        dj,
    })
}

/// The linear map `(ẋ, u̇) ↦ (v, w)` at `(x, u)` in block form
/// `[[B, I], [A, 0]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeMatrix {
    pub full: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl ChangeMatrix {
    pub fn apply(&self, dx: &[f64], du: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.b.nrows();
        let input = DVector::from_iterator(dx.len() + du.len(), dx.iter().chain(du).copied());
        let out = &self.full * input;
        (out.rows(0, n).iter().copied().collect(), out.rows(n, out.len() - n).iter().copied().collect())
    }

    pub fn det_a(&self) -> f64 {
        self.a.determinant()
    }
}

fn chart_vw(metric: &dyn Metric, chart: &RayChart, st: &JacobiState, u: &[f64]) -> Result<Vec<f64>> {
    let red = reduce_mod_gamma(metric, st)?;
    let v = match chart.kind {
        ChartKind::Hemisphere => red.v_bar[1..].to_vec(),
        ChartKind::Angle => {
            let (s, c) = u[0].sin_cos();
            vec![-s * red.v_bar[0] + c * red.v_bar[1]]
        }
    };
    Ok([v, red.w_bar].concat())
}

/// Matrix of the tangent map of the chart at `(x, u)`.
pub fn coordinate_change(
    metric: &dyn Metric,
    chart: &RayChart,
    x: &[f64],
    u: &[f64],
) -> Result<ChangeMatrix> {
    let m = metric.dim();
    let nx = m - 1;
    let nu = u.len();
    let n = nx + nu;
    let mut full = DMatrix::zeros(n, n);
    for col in 0..n {
        let mut dx = vec![0.0; nx];
        let mut du = vec![0.0; nu];
        if col < nx {
            dx[col] = 1.0;
        } else {
            du[col - nx] = 1.0;
        }
        let st = tangent_from_chart_velocity(metric, chart, x, u, &dx, &du)?;
        let vw = chart_vw(metric, chart, &st, u)?;
        full.set_column(col, &DVector::from_vec(vw));
    }
    let a = full.view((nu, 0), (nx, nx)).into_owned();
    let b = full.view((0, 0), (nu, nx)).into_owned();
    let det = a.determinant();
    if !(det.abs() > 1e-12) {
        return Err(Error::RegularityViolation { det });
    }
    Ok(ChangeMatrix { full, a, b })
}

/// Chart velocity `(ẋ, u̇)` realizing `(v, w)` at `(x, u)`.
pub fn chart_velocity(
    metric: &dyn Metric,
    chart: &RayChart,
    x: &[f64],
    u: &[f64],
    v: &[f64],
    w: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let cm = coordinate_change(metric, chart, x, u)?;
    let rhs = DVector::from_iterator(v.len() + w.len(), v.iter().chain(w).copied());
    let sol = cm
        .full
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(Error::RegularityViolation { det: cm.det_a() })?;
    let nx = x.len();
    Ok((
        sol.rows(0, nx).iter().copied().collect(),
        sol.rows(nx, sol.len() - nx).iter().copied().collect(),
    ))
}

/// Orthonormal basis of the Euclidean complement of `ĉ` in `R^{m−1}`.
pub(crate) fn complement_basis(c_spatial: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    let n = c_spatial.len();
    let norm = c_spatial.norm();
    if !(norm > 1e-12) {
        return Err(Error::DegenerateComplement);
    }
    let chat = c_spatial / norm;
    let mut basis: Vec<DVector<f64>> = vec![chat.clone()];
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        for b in &basis {
            let d = e.dot(b);
            e -= b * d;
        }
        let l = e.norm();
        if l > 1e-6 {
            basis.push(e / l);
        }
        if basis.len() == n {
            break;
        }
    }
    if basis.len() != n {
        return Err(Error::DegenerateComplement);
    }
    basis.remove(0);
    Ok(basis)
}

/// Spacelike vectors `ξ_i ⊥ γ'(τ)` whose reduced classes form an orthonormal
/// basis of the contact complement, in coordinates at `x`.
pub(crate) fn sky_complement(
    metric: &dyn Metric,
    x: &DVector<f64>,
    k: &DVector<f64>,
) -> Result<Vec<DVector<f64>>> {
    let m = metric.dim();
    let p = x.as_slice();
    let g = metric.components(p);
    let frame = metric.frame(p)?;
    let c = frame.to_frame(&g, k);
    if !(c[0] > 0.0) {
        return Err(Error::DegenerateComplement);
    }
    let cs = c.rows(1, m - 1).into_owned();
    complement_basis(&cs)?
        .into_iter()
        .map(|b| {
            let mut comps = DVector::zeros(m);
            comps[0] = b.dot(&cs) / c[0];
            comps.rows_mut(1, m - 1).copy_from(&b);
            Ok(frame.from_frame(&comps))
        })
        .collect()
}

/// Options for [`conjugate_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub nodes: usize,
    pub refine_tol: f64,
    pub tol: Tolerances,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            nodes: 1000,
            refine_tol: 1e-10,
            tol: Tolerances::default(),
        }
    }
}

struct Detector<'a> {
    metric: &'a dyn Metric,
    tau: f64,
    tol: Tolerances,
}

impl Detector<'_> {
    /// `det[w̄_1, …, w̄_{m−2}, ĉ] / (t − τ)^{m−2}`, or the limit at `t = τ`.
    fn statistic(&self, fields: &[JacobiState]) -> Result<f64> {
        let m = self.metric.dim();
        let t = fields[0].t;
        let dt = t - self.tau;
        let near = dt.abs() < 1e-12;
        let mut mat = DMatrix::zeros(m - 1, m - 1);
        let mut cs = DVector::zeros(m - 1);
        for (i, f) in fields.iter().enumerate() {
            let red = reduce_mod_gamma(self.metric, f)?;
            let col = if near { &red.v_bar } else { &red.w_bar };
            let scale = if near { 1.0 } else { dt };
            for r in 0..m - 1 {
                mat[(r, i)] = col[r] / scale;
            }
            cs = DVector::from_column_slice(&red.velocity[1..]);
        }
        let n = cs.norm();
        mat.set_column(m - 2, &(cs / n));
        Ok(mat.determinant())
    }

    fn advance(&self, from: &[JacobiState], t: f64) -> Result<Vec<JacobiState>> {
        let fields: Vec<_> = from.iter().map(|f| (f.j.clone(), f.dj.clone())).collect();
        let out = propagate_family(self.metric, from[0].t, &from[0].x, &from[0].k, &fields, &[t], &self.tol)?;
        Ok(out.into_iter().next().expect("one station"))
    }

    fn value_at(&self, from: &[JacobiState], t: f64) -> Result<f64> {
        self.statistic(&self.advance(from, t)?)
    }
}

/// Parameters in `t_range` conjugate to `γ(τ)` along `ray`: zeros of the
/// normalized reduced determinant of a propagated sky basis, found by sign
/// changes on a uniform grid (refined by bisection) and by minima of its
/// absolute value (refined by golden section) for even multiplicity.
pub fn conjugate_scan(
    metric: &dyn Metric,
    ray: &LightRay,
    tau: f64,
    t_range: (f64, f64),
    opts: &ScanOptions,
) -> Result<Vec<f64>> {
    if opts.nodes < 3 {
        return Err(Error::InvalidArgument("scan grid needs >= 3 nodes".into()));
    }
    let (a, b) = t_range;
    if !(a < b) {
        return Err(Error::InvalidArgument(format!("empty scan range {t_range:?}")));
    }
    let tol = opts.tol;
    let (x, k) = ray.state(metric, tau, &tol)?;
    let basis: Vec<_> = sky_complement(metric, &x, &k)?
        .into_iter()
        .map(|xi| (DVector::zeros(metric.dim()), xi))
        .collect();
    let grid = crate::curve::uniform_grid(a, b, opts.nodes);
    let fwd: Vec<f64> = grid.iter().copied().filter(|&t| t >= tau).collect();
    let bwd: Vec<f64> = grid.iter().rev().copied().filter(|&t| t < tau).collect();
    let mut states: Vec<Vec<JacobiState>> = Vec::with_capacity(grid.len());
    let mut back = propagate_family(metric, tau, &x, &k, &basis, &bwd, &tol)?;
    back.reverse();
    states.extend(back);
    states.extend(propagate_family(metric, tau, &x, &k, &basis, &fwd, &tol)?);

    let det = Detector { metric, tau, tol };
    let values: Vec<f64> = states
        .iter()
        .map(|s| det.statistic(s))
        .collect::<Result<_>>()?;
    let vmax = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let mut roots = Vec::new();
    for i in 0..values.len() - 1 {
        let (va, vb) = (values[i], values[i + 1]);
        if va == 0.0 {
            roots.push(grid[i]);
            continue;
        }
        if va.signum() != vb.signum() && vb != 0.0 {
            let (mut lo, mut hi, mut flo) = (grid[i], grid[i + 1], va);
            let from = &states[i];
            while hi - lo > opts.refine_tol {
                let mid = 0.5 * (lo + hi);
                let fm = det.value_at(from, mid)?;
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    if values.last() == Some(&0.0) {
        roots.push(b);
    }
    // even-multiplicity zeros: local minima of |D| without a sign change
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    for i in 1..values.len() - 1 {
        let (l, c, r) = (values[i - 1], values[i], values[i + 1]);
        let is_min = c.abs() < l.abs() && c.abs() <= r.abs();
        if !is_min || l.signum() != c.signum() || r.signum() != c.signum() {
            continue;
        }
        let from = &states[i - 1];
        let (mut lo, mut hi) = (grid[i - 1], grid[i + 1]);
        let mut x1 = hi - golden * (hi - lo);
        let mut x2 = lo + golden * (hi - lo);
        let mut f1 = det.value_at(from, x1)?.abs();
        let mut f2 = det.value_at(from, x2)?.abs();
        while hi - lo > opts.refine_tol {
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - golden * (hi - lo);
                f1 = det.value_at(from, x1)?.abs();
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + golden * (hi - lo);
                f2 = det.value_at(from, x2)?.abs();
            }
        }
        let tmin = 0.5 * (lo + hi);
        if det.value_at(from, tmin)?.abs() < 1e-8 * vmax.max(1.0) {
            roots.push(tmin);
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|x, y| (*x - *y).abs() < 1e-8);
    Ok(roots)
}

/// Joint rank of the reduced sky tangent bases of `γ(s₁)` and `γ(s₂)`,
/// compared at the ray's anchor: full rank `2(m−2)` means the two sky
/// tangent spaces intersect trivially.
pub fn sky_intersection_rank(
    metric: &dyn Metric,
    ray: &LightRay,
    s1: f64,
    s2: f64,
    tol: &Tolerances,
) -> Result<usize> {
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for s in [s1, s2] {
        let (x, k) = ray.state(metric, s, tol)?;
        for xi in sky_complement(metric, &x, &k)? {
            let st = JacobiState {
                t: s,
                x: x.clone(),
                k: k.clone(),
                j: DVector::zeros(metric.dim()),
                dj: xi,
            };
            let at0 = propagate_jacobi(metric, &st, 0.0, tol)?;
            let red = reduce_mod_gamma(metric, &at0)?;
            cols.push(DVector::from_iterator(
                red.w_bar.len() + red.v_bar.len(),
                red.w_bar.iter().chain(&red.v_bar).copied(),
            ));
        }
    }
    let mat = DMatrix::from_columns(&cols);
    let svd = mat.svd(false, false);
    let smax = svd.singular_values.amax();
    Ok(svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-9 * smax.max(1.0))
        .count())
}

/// Event on `ray` at parameter `t`.
pub fn ray_event(metric: &dyn Metric, ray: &LightRay, t: f64, tol: &Tolerances) -> Result<Event> {
    Ok(Event(ray.state(metric, t, tol)?.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{EinsteinStatic, Minkowski, PerturbedMinkowski};
    use std::f64::consts::PI;

    fn mink_ray(theta: f64) -> LightRay {
        LightRay::new(Event::new(&[0.0, 0.2, -0.1]).unwrap(), &[theta.cos(), theta.sin()]).unwrap()
    }

    #[test]
    fn flat_fields_are_affine() {
        let m = Minkowski::new(3).unwrap();
        let tol = Tolerances::default();
        let st = JacobiState::on_ray(&m, &mink_ray(0.4), 0.0, &[0.1, 0.2, 0.3], &[0.5, -0.4, 0.2], &tol)
            .unwrap();
        let out = propagate_jacobi(&m, &st, 2.5, &tol).unwrap();
        assert!((out.j - (&st.j + &st.dj * 2.5)).amax() < 1e-12);
    }

    #[test]
    fn reduction_ignores_tangential_shifts() {
        let m = Minkowski::new(3).unwrap();
        let tol = Tolerances::default();
        let st = JacobiState::on_ray(&m, &mink_ray(1.0), 0.7, &[0.1, 0.2, 0.3], &[0.5, -0.4, 0.2], &tol)
            .unwrap();
        let a = reduce_mod_gamma(&m, &st).unwrap();
        let b = reduce_mod_gamma(&m, &st.shifted(2.0, 3.0)).unwrap();
        for (x, y) in a.w_bar.iter().zip(&b.w_bar).chain(a.v_bar.iter().zip(&b.v_bar)) {
            assert!((x - y).abs() < 1e-12);
        }
        let gamma = JacobiState { j: st.k.clone(), dj: DVector::zeros(3), ..st };
        assert!(reduce_mod_gamma(&m, &gamma).unwrap().norm() < 1e-15);
    }

    #[test]
    fn minkowski_change_matrix_has_identity_a() {
        let m = Minkowski::new(4).unwrap();
        let cm = coordinate_change(&m, &RayChart::hemisphere(), &[0.1, 0.2, 0.3], &[0.3, -0.2]).unwrap();
        assert!((cm.a.clone() - DMatrix::identity(3, 3)).amax() < 1e-10);
        assert!(cm.b.amax() < 1e-10);
        let (v, w) = cm.apply(&[0.0; 3], &[0.7, 0.1]);
        assert!((v[0] - 0.7).abs() < 1e-14 && (v[1] - 0.1).abs() < 1e-14);
        assert!(w.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn tn_round_trip_in_perturbed_metric() {
        let g = PerturbedMinkowski::with_default_bump(0.5).unwrap();
        let chart = RayChart::angle().at_level(0.25);
        let coords = TnCoords {
            x: vec![0.1, -0.3],
            u: vec![0.8],
            v: vec![0.4],
            w: vec![-0.2, 0.5],
        };
        let (_, st) = tn_chart_inverse(&g, &chart, &coords).unwrap();
        let tol = Tolerances::default();
        let moved = propagate_jacobi(&g, &st, -1.5, &tol).unwrap();
        let back = tn_chart(&g, &chart, &moved, &tol).unwrap();
        assert!(back.max_diff(&coords) < 1e-8, "{back:?}");
    }

    #[test]
    fn no_conjugate_points_in_flat_space() {
        let m = Minkowski::new(3).unwrap();
        let opts = ScanOptions { nodes: 200, ..Default::default() };
        assert!(conjugate_scan(&m, &mink_ray(0.3), 0.0, (0.0, 10.0), &opts).unwrap().is_empty());
    }

    #[test]
    fn einstein_static_refocuses_at_pi() {
        let e = EinsteinStatic::new();
        let ray = LightRay::new(Event::new(&[0.0, PI / 2.0, 0.0]).unwrap(), &[0.0, 1.0]).unwrap();
        let opts = ScanOptions { nodes: 200, ..Default::default() };
        let roots = conjugate_scan(&e, &ray, 0.0, (0.0, 5.0), &opts).unwrap();
        assert_eq!(roots.len(), 1, "{roots:?}");
        assert!((roots[0] - PI).abs() < 1e-6);
    }

    #[test]
    fn skies_of_distinct_points_are_transverse() {
        let m = Minkowski::new(4).unwrap();
        let ray = LightRay::new(Event::new(&[0.0, 0.0, 0.0, 0.0]).unwrap(), &[0.6, 0.0, 0.8]).unwrap();
        let r = sky_intersection_rank(&m, &ray, 0.5, 2.0, &Tolerances::default()).unwrap();
        assert_eq!(r, 4);
    }
}
