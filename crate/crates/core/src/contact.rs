//! The contact form on the space of light rays, sky tangent spaces and the
//! celestial-vector test.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::curve::uniform_grid;
use crate::error::{Error, Result};
use crate::jacobi::{
    chart_velocity, propagate_family, propagate_jacobi, reduce_mod_gamma, sky_complement,
    JacobiState, TangentRayVector,
};
use crate::metric::{inner, Metric};
use crate::ode::Tolerances;
use crate::rays::{ray_coords, LightRay, RayChart};

/// `α(J) = g(J, γ')` and its sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactValue {
    pub value: f64,
    pub sign: i8,
}

impl ContactValue {
    pub fn new(value: f64, tol: f64) -> Self {
        let sign = if value > tol {
            1
        } else if value < -tol {
            -1
        } else {
            0
        };
        Self { value, sign }
    }
}

/// Contact value of a Jacobi state, `g(J(t), γ'(t))`.
pub fn contact_value(metric: &dyn Metric, state: &JacobiState) -> f64 {
    inner(metric, state.x.as_slice(), &state.j, &state.k)
}

/// Contact value of a reduced class.
pub fn contact_form(class: &TangentRayVector) -> ContactValue {
    ContactValue::new(class.contact_value(), 1e-12)
}

/// A basis of the tangent space at `γ` of the sky of `γ(s₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkyTangentBasis {
    pub ray: LightRay,
    pub s0: f64,
    /// Sky Jacobi fields at `s₀`: `J(s₀) = 0` and `J'(s₀)` spacelike.
    pub fields: Vec<JacobiState>,
}

impl SkyTangentBasis {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// The basis fields moved to the ray's anchor.
    pub fn at_anchor(&self, metric: &dyn Metric, tol: &Tolerances) -> Result<Vec<JacobiState>> {
        self.fields
            .iter()
            .map(|f| propagate_jacobi(metric, f, 0.0, tol))
            .collect()
    }

    /// Chart velocities `(ẋ, u̇)` of the basis elements.
    pub fn chart_components(
        &self,
        metric: &dyn Metric,
        chart: &RayChart,
        tol: &Tolerances,
    ) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        let (x, u) = ray_coords(chart, &self.ray)?;
        self.at_anchor(metric, tol)?
            .iter()
            .map(|st| {
                let coords = crate::jacobi::tn_chart(metric, chart, st, tol)?;
                chart_velocity(metric, chart, x.as_slice(), u.as_slice(), &coords.v, &coords.w)
            })
            .collect()
    }
}

/// The `m − 2` sky Jacobi fields of `γ(s₀)` whose derivatives at `s₀` are
/// a spacelike complement of `γ'(s₀)`.
pub fn sky_tangent_basis(
    metric: &dyn Metric,
    ray: &LightRay,
    s0: f64,
    tol: &Tolerances,
) -> Result<SkyTangentBasis> {
    let (x, k) = ray.state(metric, s0, tol)?;
    let fields = sky_complement(metric, &x, &k)?
        .into_iter()
        .map(|xi| JacobiState {
            t: s0,
            x: x.clone(),
            k: k.clone(),
            j: DVector::zeros(metric.dim()),
            dj: xi,
        })
        .collect();
    Ok(SkyTangentBasis {
        ray: ray.clone(),
        s0,
        fields,
    })
}

/// Options for [`is_celestial`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CelestialOptions {
    pub nodes: usize,
    /// Relative bound on `|α(J)|` before any search.
    pub contact_tol: f64,
    /// Relative bound on the reduced part at a witness.
    pub proportional_tol: f64,
    pub tol: Tolerances,
}

impl Default for CelestialOptions {
    fn default() -> Self {
        Self {
            nodes: 512,
            contact_tol: 1e-8,
            proportional_tol: 1e-7,
            tol: Tolerances::default(),
        }
    }
}

/// Frame norm of a coordinate vector at `x`.
pub(crate) fn frame_norm(metric: &dyn Metric, x: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    let p = x.as_slice();
    let frame = metric.frame(p)?;
    Ok(frame.to_frame(&metric.components(p), v).norm())
}

/// `q = g(J', J)` (half of `dh/dt` for `h = g(J, J)`) and its derivative
/// `q' = g(J', J') − g(R(J, γ')γ', J)`.
pub(crate) fn celestial_q(metric: &dyn Metric, st: &JacobiState) -> Result<(f64, f64)> {
    let p = st.x.as_slice();
    let g = metric.components(p);
    let geo = crate::curvature::PointGeometry::at(metric, p, true)?;
    let mut r = vec![0.0; st.x.len()];
    geo.curvature_operator(st.j.as_slice(), st.k.as_slice(), st.k.as_slice(), &mut r);
    let r = DVector::from_vec(r);
    let q = (st.dj.transpose() * &g * &st.j)[0];
    let dq = (st.dj.transpose() * &g * &st.dj)[0] - (r.transpose() * &g * &st.j)[0];
    Ok((q, dq))
}

/// Whether the reduced part of `J` vanishes relative to the field's size.
pub(crate) fn proportional_to_velocity(
    metric: &dyn Metric,
    st: &JacobiState,
    rel: f64,
) -> Result<bool> {
    let red = reduce_mod_gamma(metric, st)?;
    let wbar = red.w_bar.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = frame_norm(metric, &st.x, &st.j)?.max(frame_norm(metric, &st.x, &st.dj)?);
    Ok(wbar <= rel * scale || scale == 0.0)
}

/// Newton iteration on `q(t) = g(J', J) = 0` starting from `from`.
pub(crate) fn polish_root(
    metric: &dyn Metric,
    from: &JacobiState,
    t_start: f64,
    window: (f64, f64),
    tol: &Tolerances,
) -> Result<Option<JacobiState>> {
    let mut st = propagate_jacobi(metric, from, t_start, tol)?;
    for _ in 0..40 {
        let (q, dq) = celestial_q(metric, &st)?;
        if dq == 0.0 || !dq.is_finite() {
            return Ok(None);
        }
        let step = -q / dq;
        let t_new = st.t + step;
        if t_new < window.0 || t_new > window.1 {
            return Ok(None);
        }
        st = propagate_jacobi(metric, &st, t_new, tol)?;
        if step.abs() <= 1e-13 * (1.0 + t_new.abs()) {
            return Ok(Some(st));
        }
    }
    Ok(None)
}

/// Looks for `t*` in `t_range` with `J(t*) ∝ γ'(t*)`.
///
/// Errors with [`Error::NotCelestial`] when the contact value is nonzero;
/// returns `None` when `h = g(J, J)` has no zero in range.
pub fn is_celestial(
    metric: &dyn Metric,
    state: &JacobiState,
    t_range: (f64, f64),
    opts: &CelestialOptions,
) -> Result<Option<f64>> {
    let alpha = contact_value(metric, state);
    let scale = frame_norm(metric, &state.x, &state.j)?
        .max(frame_norm(metric, &state.x, &state.dj)?)
        .max(1.0)
        * frame_norm(metric, &state.x, &state.k)?;
    if alpha.abs() > opts.contact_tol * scale {
        return Err(Error::NotCelestial { value: alpha });
    }
    let grid = uniform_grid(t_range.0, t_range.1, opts.nodes.max(3));
    let fwd: Vec<f64> = grid.iter().copied().filter(|&t| t >= state.t).collect();
    let bwd: Vec<f64> = grid.iter().rev().copied().filter(|&t| t < state.t).collect();
    let field = [(state.j.clone(), state.dj.clone())];
    let mut states: Vec<JacobiState> = propagate_family(metric, state.t, &state.x, &state.k, &field, &bwd, &opts.tol)?
        .into_iter()
        .rev()
        .map(|mut v| v.remove(0))
        .collect();
    states.extend(
        propagate_family(metric, state.t, &state.x, &state.k, &field, &fwd, &opts.tol)?
            .into_iter()
            .map(|mut v| v.remove(0)),
    );
    let qs: Vec<f64> = states
        .iter()
        .map(|s| celestial_q(metric, s).map(|q| q.0))
        .collect::<Result<_>>()?;
    let mut candidates = Vec::new();
    for i in 0..states.len() {
        if proportional_to_velocity(metric, &states[i], opts.proportional_tol)? {
            candidates.push(states[i].t);
            continue;
        }
        if i + 1 < states.len() && qs[i] <= 0.0 && qs[i + 1] > 0.0 {
            if let Some(root) = polish_root(metric, &states[i], 0.5 * (grid[i] + grid[i + 1]), t_range, &opts.tol)? {
                if proportional_to_velocity(metric, &root, opts.proportional_tol)? {
                    candidates.push(root.t);
                }
            }
        }
    }
    Ok(candidates
        .into_iter()
        .min_by(|a, b| (a - state.t).abs().total_cmp(&(b - state.t).abs())))
}
