//! Parallel-transport Legendrian isotopies of skies along a curve, their
//! sign profiles, the causality classifier and celestial-curve recovery.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact::{celestial_q, contact_value, frame_norm, proportional_to_velocity};
use crate::curve::{uniform_grid, Curve, HermiteCurve};
use crate::error::{Error, Result};
use crate::geodesic::{causal_character_at, transport_propagator, CausalCharacter, NULL_TOL};
use crate::jacobi::{propagate_jacobi, JacobiState};
use crate::metric::{check_dim, Event, Metric};
use crate::ode::Tolerances;
use crate::rays::{canonicalize, Canonical, RayChart, DEFAULT_HORIZON};
use crate::sphere::{random_unit, sphere_samples};
use crate::variation::{variation_field, GeodesicVariation};

/// Default number of sphere samples for an `m`-dimensional space-time.
pub fn default_sphere_samples(m: usize) -> usize {
    if m <= 3 {
        64
    } else {
        256
    }
}

/// Default number of curve-parameter nodes.
pub const DEFAULT_S_NODES: usize = 201;

/// The sampled isotopy `F^μ(u, s) = γ_{[u_s]}`: null directions at `μ(start)`
/// transported in parallel along `μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotopyField {
    pub s_grid: Vec<f64>,
    /// Unit sphere samples `(u², …, u^m)` at `μ(start)`.
    pub samples: Vec<DVector<f64>>,
    /// Coordinate components of `E_1 + Σ u^j E_j` at `μ(start)`.
    pub initial: Vec<DVector<f64>>,
    /// Parallel propagators from `μ(start)` to `μ(s_j)`.
    pub propagators: Vec<DMatrix<f64>>,
    pub positions: Vec<DVector<f64>>,
    pub velocities: Vec<DVector<f64>>,
    start_frame: DMatrix<f64>,
}

impl IsotopyField {
    /// `u^i_{s_j}`.
    pub fn transported(&self, i: usize, j: usize) -> DVector<f64> {
        &self.propagators[j] * &self.initial[i]
    }

    /// Transport of `E_1 + Σ d^j E_j` (given at `μ(start)`) to `μ(s_j)`.
    pub fn transport_unit(&self, unit: &DVector<f64>, j: usize) -> DVector<f64> {
        let mut c = DVector::zeros(unit.len() + 1);
        c[0] = 1.0;
        c.rows_mut(1, unit.len()).copy_from(unit);
        &self.propagators[j] * (&self.start_frame * c)
    }

    /// The light ray `γ_{[u^i_{s_j}]}`, anchored on the chart surface.
    pub fn induced_ray(
        &self,
        metric: &dyn Metric,
        chart: &RayChart,
        i: usize,
        j: usize,
        tol: &Tolerances,
    ) -> Result<Canonical> {
        let u = self.transported(i, j);
        canonicalize(
            metric,
            chart.level,
            self.positions[j].as_slice(),
            u.as_slice(),
            DEFAULT_HORIZON,
            tol,
        )
    }
}

/// Builds the isotopy along `μ` from `n >= 4` sphere samples at `μ(start)`.
pub fn isotopy_from_curve(
    metric: &dyn Metric,
    curve: &dyn Curve,
    n: usize,
    s_grid: &[f64],
    tol: &Tolerances,
) -> Result<IsotopyField> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!(
            "isotopy needs >= 4 sphere samples, got {n}"
        )));
    }
    if s_grid.is_empty() || s_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("s-grid must be strictly increasing".into()));
    }
    let (start, end) = curve.interval();
    if s_grid[0] < start - 1e-12 || *s_grid.last().expect("non-empty") > end + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "s-grid leaves the curve interval {:?}",
            (start, end)
        )));
    }
    let p0 = curve.position(start)?;
    check_dim(metric, p0.len())?;
    let frame = metric.frame(p0.as_slice())?;
    let samples = sphere_samples(metric.dim(), n)?;
    let initial = samples
        .iter()
        .map(|d| {
            let mut c = DVector::zeros(d.len() + 1);
            c[0] = 1.0;
            c.rows_mut(1, d.len()).copy_from(d);
            frame.from_frame(&c)
        })
        .collect();
    let propagators = transport_propagator(metric, curve, s_grid, tol)?;
    let positions = s_grid.iter().map(|&s| curve.position(s)).collect::<Result<_>>()?;
    let velocities = s_grid.iter().map(|&s| curve.velocity(s)).collect::<Result<_>>()?;
    Ok(IsotopyField {
        s_grid: s_grid.to_vec(),
        samples,
        initial,
        propagators,
        positions,
        velocities,
        start_frame: frame.vectors,
    })
}

/// Values `g(μ'(s_j), u^i_{s_j})`; `values[i][j]` for sample `i`, node `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotopyProfile {
    pub s_grid: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl IsotopyProfile {
    pub fn samples(&self) -> usize {
        self.values.len()
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// Columns with `s ∈ [a, b]`.
    pub fn window(&self, a: f64, b: f64) -> Self {
        let keep: Vec<usize> = (0..self.s_grid.len())
            .filter(|&j| self.s_grid[j] >= a && self.s_grid[j] <= b)
            .collect();
        Self {
            s_grid: keep.iter().map(|&j| self.s_grid[j]).collect(),
            values: self
                .values
                .iter()
                .map(|row| keep.iter().map(|&j| row[j]).collect())
                .collect(),
        }
    }

    /// `(s, sample_index, value)` rows, node-major.
    pub fn rows(&self) -> Vec<(f64, usize, f64)> {
        let mut out = Vec::with_capacity(self.s_grid.len() * self.values.len());
        for (j, &s) in self.s_grid.iter().enumerate() {
            for (i, row) in self.values.iter().enumerate() {
                out.push((s, i, row[j]));
            }
        }
        out
    }
}

fn profile_from(
    metric: &dyn Metric,
    field: &IsotopyField,
    direction: impl Fn(usize, usize) -> DVector<f64> + Sync,
) -> IsotopyProfile {
    let n = field.samples.len();
    let columns: Vec<Vec<f64>> = (0..field.s_grid.len())
        .into_par_iter()
        .map(|j| {
            let g = metric.components(field.positions[j].as_slice());
            let gv = g * &field.velocities[j];
            (0..n).map(|i| gv.dot(&direction(i, j))).collect()
        })
        .collect();
    IsotopyProfile {
        s_grid: field.s_grid.clone(),
        values: (0..n)
            .map(|i| columns.iter().map(|c| c[i]).collect())
            .collect(),
    }
}

/// The sign profile of an isotopy field.
pub fn sign_profile(metric: &dyn Metric, field: &IsotopyField) -> IsotopyProfile {
    profile_from(metric, field, |i, j| field.transported(i, j))
}

/// Shape of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProfileClass {
    NonNegative,
    NonPositive,
    Mixed,
    Degenerate,
}

/// Causal verdict for the curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    CausalPast,
    CausalFuture,
    NotCausal,
    ConstantCurve,
}

impl ProfileClass {
    pub fn verdict(self) -> Verdict {
        match self {
            Self::NonNegative => Verdict::CausalPast,
            Self::NonPositive => Verdict::CausalFuture,
            Self::Mixed => Verdict::NotCausal,
            Self::Degenerate => Verdict::ConstantCurve,
        }
    }
}

/// Sign of one profile column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnSign {
    NonNegative,
    NonPositive,
    Zero,
    Mixed,
}

/// A maximal run of grid nodes sharing one column sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignInterval {
    pub start: f64,
    pub end: f64,
    pub sign: ColumnSign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalClass {
    pub class: ProfileClass,
    pub verdict: Verdict,
    /// Entries with absolute value below `band` count as zero.
    pub band: f64,
    pub intervals: Vec<SignInterval>,
}

impl CausalClass {
    /// Brackets `(end, start)` between consecutive runs of opposite strict
    /// sign, skipping zero runs.
    pub fn transitions(&self) -> Vec<(f64, f64)> {
        let signed: Vec<&SignInterval> = self
            .intervals
            .iter()
            .filter(|iv| iv.sign != ColumnSign::Zero)
            .collect();
        signed
            .windows(2)
            .filter(|w| w[0].sign != w[1].sign)
            .map(|w| (w[0].end, w[1].start))
            .collect()
    }
}

/// Tolerances for [`classify_profile`]: the zero band is
/// `max(rel·max|p|, abs)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub rel: f64,
    pub abs: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { rel: 1e-9, abs: 0.0 }
    }
}

pub fn classify_profile(profile: &IsotopyProfile, opts: &ClassifyOptions) -> CausalClass {
    let scale = profile.max_abs();
    let band = (opts.rel * scale).max(opts.abs);
    let ncols = profile.s_grid.len();
    let signs: Vec<ColumnSign> = (0..ncols)
        .map(|j| {
            let (lo, hi) = profile
                .values
                .iter()
                .map(|r| r[j])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            match (lo >= -band, hi <= band) {
                (true, true) => ColumnSign::Zero,
                (true, false) => ColumnSign::NonNegative,
                (false, true) => ColumnSign::NonPositive,
                (false, false) => ColumnSign::Mixed,
            }
        })
        .collect();
    let mut intervals: Vec<SignInterval> = Vec::new();
    for (j, &sign) in signs.iter().enumerate() {
        let s = profile.s_grid[j];
        match intervals.last_mut() {
            Some(iv) if iv.sign == sign => iv.end = s,
            _ => intervals.push(SignInterval {
                start: s,
                end: s,
                sign,
            }),
        }
    }
    let any = |c: ColumnSign| signs.contains(&c);
    let class = if scale <= band || signs.iter().all(|&c| c == ColumnSign::Zero) {
        ProfileClass::Degenerate
    } else if any(ColumnSign::Mixed) || (any(ColumnSign::NonNegative) && any(ColumnSign::NonPositive)) {
        ProfileClass::Mixed
    } else if any(ColumnSign::NonNegative) {
        ProfileClass::NonNegative
    } else {
        ProfileClass::NonPositive
    };
    CausalClass {
        class,
        verdict: class.verdict(),
        band,
        intervals,
    }
}

/// Verdict from the causal character of `μ'(s_j)` at each node; velocities
/// with frame norm at most `zero_tol` count as stationary.
pub fn pointwise_verdict(metric: &dyn Metric, field: &IsotopyField, zero_tol: f64) -> Result<Verdict> {
    let (mut past, mut future, mut space) = (false, false, false);
    for (p, v) in field.positions.iter().zip(&field.velocities) {
        if frame_norm(metric, p, v)? <= zero_tol {
            continue;
        }
        match causal_character_at(metric, p.as_slice(), v, NULL_TOL)? {
            CausalCharacter::Zero => {}
            CausalCharacter::Spacelike => space = true,
            c if c.is_past() => past = true,
            _ => future = true,
        }
    }
    Ok(if space || (past && future) {
        Verdict::NotCausal
    } else if past {
        Verdict::CausalPast
    } else if future {
        Verdict::CausalFuture
    } else {
        Verdict::ConstantCurve
    })
}

/// Outcome of the dual test: `v` is causal past iff `g(u, v) >= 0` for all
/// future null `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCausality {
    pub causal_past: bool,
    /// Minimum of `g(E_1 + Σ d^j E_j, v)` over the unit sphere.
    pub min_value: f64,
    /// Minimizing unit vector `d`.
    pub witness: Vec<f64>,
    pub character: CausalCharacter,
    pub agrees: bool,
}

/// Samples `n` future null directions at `p`, refines the smallest value of
/// `g(u, v)` by projected gradient steps on the sphere and compares with the
/// pointwise classification of `v`.
pub fn vector_dual_causality(
    metric: &dyn Metric,
    p: &Event,
    v: &DVector<f64>,
    n: usize,
) -> Result<DualCausality> {
    check_dim(metric, v.len())?;
    if v.iter().all(|&x| x == 0.0) {
        return Err(Error::InvalidArgument("zero vector".into()));
    }
    let m = metric.dim();
    let g = metric.components(p.coords());
    let frame = metric.frame(p.coords())?;
    let gv = &g * v;
    // g(E_a, v) for each frame vector
    let ge: DVector<f64> = frame.vectors.tr_mul(&gv);
    let value = |d: &DVector<f64>| ge[0] + d.dot(&ge.rows(1, m - 1));
    let samples = sphere_samples(m, n.max(1))?;
    let mut best = samples
        .iter()
        .min_by(|a, b| value(a).total_cmp(&value(b)))
        .expect("non-empty")
        .clone();
    let grad_full = ge.rows(1, m - 1).into_owned();
    let gnorm = grad_full.norm();
    if gnorm > 0.0 {
        for _ in 0..60 {
            let tangential = &grad_full - &best * best.dot(&grad_full);
            if tangential.norm() <= 1e-16 * gnorm {
                break;
            }
            let next = &best - tangential / gnorm;
            let nn = next.norm();
            if nn == 0.0 {
                break;
            }
            let next = next / nn;
            if value(&next) > value(&best) {
                break;
            }
            best = next;
        }
    }
    let min_value = value(&best);
    let vnorm = frame.to_frame(&g, v).norm();
    let causal_past = min_value >= -1e-12 * vnorm;
    let character = causal_character_at(metric, p.coords(), v, NULL_TOL)?;
    let agrees = causal_past == character.is_past();
    Ok(DualCausality {
        causal_past,
        min_value,
        witness: best.iter().copied().collect(),
        character,
        agrees,
    })
}

/// Options for [`celestial_recover`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoverOptions {
    pub nodes: usize,
    /// Half-width of the parameter window scanned for alternate roots.
    pub alternates_span: f64,
    pub alternates_nodes: usize,
    /// Lower bound on `∂²h/∂t² / (2‖J'‖²)` at a root.
    pub regularity: f64,
    pub tol: Tolerances,
}

impl Default for RecoverOptions {
    fn default() -> Self {
        Self {
            nodes: DEFAULT_S_NODES,
            alternates_span: 10.0,
            alternates_nodes: 512,
            regularity: 1e-10,
            tol: Tolerances::default(),
        }
    }
}

/// A null curve recovered from a celestial family of rays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CelestialRecovery {
    pub s: Vec<f64>,
    /// Root `t(s)` of `h(s, t) = g(J_s(t), J_s(t))`.
    pub t: Vec<f64>,
    /// `μ(s) = f(s, t(s))`.
    pub mu: Vec<Vec<f64>>,
    pub mu_prime: Vec<Vec<f64>>,
    /// `σ(s) = γ_s'(t(s))`.
    pub sigma: Vec<Vec<f64>>,
    /// `J_s(t(s)) = λ(s) σ(s)`.
    pub lambda: Vec<f64>,
    /// Other celestial roots at the seed, not continued.
    pub alternates: Vec<f64>,
    pub max_null_residual: f64,
    pub max_contact_residual: f64,
}

impl CelestialRecovery {
    /// Hermite interpolant through `(μ, μ')`.
    pub fn curve(&self) -> Result<HermiteCurve> {
        HermiteCurve::new(
            self.s.clone(),
            self.mu.iter().map(|v| DVector::from_column_slice(v)).collect(),
            self.mu_prime.iter().map(|v| DVector::from_column_slice(v)).collect(),
        )
    }
}

struct Root {
    t: f64,
    x: DVector<f64>,
    k: DVector<f64>,
    lambda: f64,
    contact: f64,
}

fn initial_state(metric: &dyn Metric, var: &dyn GeodesicVariation, s: f64) -> Result<JacobiState> {
    let [x, k, j, dj] = variation_field(metric, var, s)?;
    Ok(JacobiState { t: 0.0, x, k, j, dj })
}

fn solve_root(
    metric: &dyn Metric,
    var: &dyn GeodesicVariation,
    s: f64,
    t_pred: f64,
    opts: &RecoverOptions,
) -> Result<Root> {
    let st0 = initial_state(metric, var, s)?;
    let lost = |reason: String| Error::ContinuationLost { s, reason };
    let mut st = propagate_jacobi(metric, &st0, t_pred, &opts.tol)?;
    let mut converged = false;
    for _ in 0..50 {
        let (q, dq) = celestial_q(metric, &st)?;
        let scale = frame_norm(metric, &st.x, &st.dj)?.powi(2).max(f64::MIN_POSITIVE);
        if !(dq > opts.regularity * scale.max(1e-300)) || dq.abs() < 1e-300 {
            if proportional_to_velocity(metric, &st, 1e-7)? {
                return Err(Error::NonRegularCurve { s, curvature: dq });
            }
            return Err(lost(format!("dq/dt = {dq:e} at t = {}", st.t)));
        }
        let step = -q / dq;
        if !step.is_finite() || step.abs() > 1e3 {
            return Err(lost(format!("Newton step {step:e}")));
        }
        st = propagate_jacobi(metric, &st, st.t + step, &opts.tol)?;
        if step.abs() <= 1e-13 * (1.0 + st.t.abs()) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(lost("Newton iteration did not converge".into()));
    }
    let (_, dq) = celestial_q(metric, &st)?;
    let jn = frame_norm(metric, &st.x, &st.dj)?;
    if !(dq > opts.regularity * jn * jn) {
        return Err(Error::NonRegularCurve { s, curvature: dq });
    }
    if !proportional_to_velocity(metric, &st, 1e-7)? {
        return Err(lost(format!("root t = {} of dh/dt is not a zero of h", st.t)));
    }
    let p = st.x.as_slice();
    let g = metric.components(p);
    let frame = metric.frame(p)?;
    let c = frame.to_frame(&g, &st.k);
    let w = frame.to_frame(&g, &st.j);
    Ok(Root {
        t: st.t,
        contact: contact_value(metric, &st),
        lambda: w[0] / c[0],
        x: st.x,
        k: st.k,
    })
}

/// Celestial roots of the seed family in `[t0 − span, t0 + span]`, walking
/// outwards until the family leaves the metric's domain.
fn scan_roots(
    metric: &dyn Metric,
    var: &dyn GeodesicVariation,
    s0: f64,
    t0: f64,
    opts: &RecoverOptions,
) -> Result<Vec<f64>> {
    let st0 = initial_state(metric, var, s0)?;
    let n = opts.alternates_nodes.max(4) / 2;
    let mut roots = Vec::new();
    for dir in [-1.0, 1.0] {
        let Ok(mut prev) = propagate_jacobi(metric, &st0, t0, &opts.tol) else {
            continue;
        };
        let mut qprev = celestial_q(metric, &prev)?.0;
        for i in 1..=n {
            let t = t0 + dir * opts.alternates_span * i as f64 / n as f64;
            let Ok(next) = propagate_jacobi(metric, &prev, t, &opts.tol) else {
                break;
            };
            let qnext = celestial_q(metric, &next)?.0;
            let (lo, hi, qlo, qhi) = if dir > 0.0 {
                (&prev, &next, qprev, qnext)
            } else {
                (&next, &prev, qnext, qprev)
            };
            if qlo <= 0.0 && qhi > 0.0 {
                let window = (lo.t, hi.t);
                if let Some(r) = crate::contact::polish_root(metric, lo, 0.5 * (lo.t + hi.t), window, &opts.tol)? {
                    if proportional_to_velocity(metric, &r, 1e-7)? {
                        roots.push(r.t);
                    }
                }
            }
            prev = next;
            qprev = qnext;
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-8);
    Ok(roots)
}

/// Five-point derivative of samples on a uniform grid.
fn grid_derivative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    if n < 5 {
        return (0..n)
            .map(|i| {
                let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
                if a == b {
                    0.0
                } else {
                    (f[b] - f[a]) / (h * (b - a) as f64)
                }
            })
            .collect();
    }
    (0..n)
        .map(|i| {
            if i >= 2 && i + 2 < n {
                (-f[i + 2] + 8.0 * f[i + 1] - 8.0 * f[i - 1] + f[i - 2]) / (12.0 * h)
            } else if i < 2 {
                let o = i;
                let d0 = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h);
                let d1 = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h);
                if o == 0 {
                    d0
                } else {
                    d1
                }
            } else {
                let r: Vec<f64> = f.iter().rev().copied().collect();
                let o = n - 1 - i;
                let d0 = (-25.0 * r[0] + 48.0 * r[1] - 36.0 * r[2] + 16.0 * r[3] - 3.0 * r[4]) / (12.0 * h);
                let d1 = (-3.0 * r[0] - 10.0 * r[1] + 18.0 * r[2] - 6.0 * r[3] + r[4]) / (12.0 * h);
                -(if o == 0 { d0 } else { d1 })
            }
        })
        .collect()
}

/// Continues the root `t(s)` of `h(s, ·)` from the seed `(s₀, t₀)` across the
/// variation's interval and assembles `μ(s) = f(s, t(s))`.
pub fn celestial_recover(
    metric: &dyn Metric,
    var: &dyn GeodesicVariation,
    seed: (f64, f64),
    opts: &RecoverOptions,
) -> Result<CelestialRecovery> {
    let (a, b) = var.interval();
    let (s0, t0) = seed;
    if !(a < b) || s0 < a || s0 > b {
        return Err(Error::InvalidArgument(format!(
            "seed parameter {s0} outside the variation interval {:?}",
            (a, b)
        )));
    }
    if opts.nodes < 2 {
        return Err(Error::InvalidArgument("recovery needs >= 2 nodes".into()));
    }
    // the seed must sit on a zero of h
    let at_seed = propagate_jacobi(metric, &initial_state(metric, var, s0)?, t0, &opts.tol)?;
    let h = (at_seed.j.transpose() * metric.components(at_seed.x.as_slice()) * &at_seed.j)[0];
    let scale = frame_norm(metric, &at_seed.x, &at_seed.j)?
        .max(frame_norm(metric, &at_seed.x, &at_seed.dj)?);
    if h.abs() > 1e-6 * scale * scale.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "seed ({s0}, {t0}) is not on a zero of h (h = {h:e})"
        )));
    }
    let seed_root = solve_root(metric, var, s0, t0, opts)?;

    let grid = uniform_grid(a, b, opts.nodes);
    let step = grid[1] - grid[0];
    let mut solved: Vec<Option<Root>> = (0..grid.len()).map(|_| None).collect();
    for dir in [1isize, -1] {
        let (mut s_prev, mut t_prev) = (s0, seed_root.t);
        let mut slope = 0.0;
        let idx: Vec<usize> = if dir > 0 {
            (0..grid.len()).filter(|&i| grid[i] >= s0).collect()
        } else {
            (0..grid.len()).rev().filter(|&i| grid[i] < s0).collect()
        };
        for i in idx {
            let s = grid[i];
            let pred = t_prev + slope * (s - s_prev);
            let root = solve_root(metric, var, s, pred, opts)?;
            if (s - s_prev).abs() > 1e-14 {
                slope = (root.t - t_prev) / (s - s_prev);
            }
            s_prev = s;
            t_prev = root.t;
            solved[i] = Some(root);
        }
    }
    let roots: Vec<Root> = solved.into_iter().map(|r| r.expect("every node solved")).collect();
    let t: Vec<f64> = roots.iter().map(|r| r.t).collect();
    let dt = grid_derivative(&t, step);
    let mut mu_prime = Vec::with_capacity(roots.len());
    let mut max_null = 0.0_f64;
    for (r, d) in roots.iter().zip(&dt) {
        let v = &r.k * (r.lambda + d);
        let g = metric.components(r.x.as_slice());
        max_null = max_null.max((v.transpose() * g * &v)[0].abs());
        mu_prime.push(v.iter().copied().collect());
    }
    let alternates = scan_roots(metric, var, s0, seed_root.t, opts)?
        .into_iter()
        .filter(|&r| (r - seed_root.t).abs() > 1e-6)
        .collect();
    Ok(CelestialRecovery {
        s: grid,
        t,
        mu: roots.iter().map(|r| r.x.iter().copied().collect()).collect(),
        mu_prime,
        sigma: roots.iter().map(|r| r.k.iter().copied().collect()).collect(),
        lambda: roots.iter().map(|r| r.lambda).collect(),
        alternates,
        max_null_residual: max_null,
        max_contact_residual: roots.iter().fold(0.0_f64, |m, r| m.max(r.contact.abs())),
    })
}

/// Options for [`classify_celestial_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub recover: RecoverOptions,
    /// Sphere samples; `None` selects the dimension default.
    pub samples: Option<usize>,
    pub classify: ClassifyOptions,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            recover: RecoverOptions::default(),
            samples: None,
            // recovered velocities carry continuation noise well above 1e-12
            classify: ClassifyOptions { rel: 1e-9, abs: 1e-7 },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CelestialClassification {
    pub recovery: CelestialRecovery,
    pub field: IsotopyField,
    pub profile: IsotopyProfile,
    pub class: CausalClass,
}

/// Recovery, isotopy along the recovered curve, sign profile and class.
pub fn classify_celestial_curve(
    metric: &dyn Metric,
    var: &dyn GeodesicVariation,
    seed: (f64, f64),
    opts: &PipelineOptions,
) -> Result<CelestialClassification> {
    let recovery = celestial_recover(metric, var, seed, &opts.recover)?;
    let curve = recovery.curve()?;
    let n = opts.samples.unwrap_or_else(|| default_sphere_samples(metric.dim()));
    let field = isotopy_from_curve(metric, &curve, n, &recovery.s, &opts.recover.tol)?;
    let profile = sign_profile(metric, &field);
    let class = classify_profile(&profile, &opts.classify);
    Ok(CelestialClassification {
        recovery,
        field,
        profile,
        class,
    })
}

/// A family `φ_s` of diffeomorphisms of the unit sphere.
pub trait SphereReparam: Sync {
    fn apply(&self, s: f64, unit: &DVector<f64>) -> DVector<f64>;
}

impl<F: Fn(f64, &DVector<f64>) -> DVector<f64> + Sync> SphereReparam for F {
    fn apply(&self, s: f64, unit: &DVector<f64>) -> DVector<f64> {
        self(s, unit)
    }
}

/// `φ_s(d) = R(ωs)·Q·d`: a fixed orthogonal `Q` followed by a rotation by
/// angle `ωs` in the plane of the first two axes.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationReparam {
    pub q: DMatrix<f64>,
    pub omega: f64,
}

impl RotationReparam {
    /// Random `Q` (Haar) and `ω ∈ [−3, 3]`.
    pub fn random(dim: usize, seed: u64) -> Self {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cols: Vec<DVector<f64>> = Vec::with_capacity(dim);
        while cols.len() < dim {
            let mut v = random_unit(dim, &mut rng);
            for c in &cols {
                let d = v.dot(c);
                v -= c * d;
            }
            let n = v.norm();
            if n > 1e-6 {
                cols.push(v / n);
            }
        }
        Self {
            q: DMatrix::from_columns(&cols),
            omega: rng.gen_range(-3.0..3.0),
        }
    }
}

impl SphereReparam for RotationReparam {
    fn apply(&self, s: f64, unit: &DVector<f64>) -> DVector<f64> {
        let mut v = &self.q * unit;
        let (sn, cs) = (self.omega * s).sin_cos();
        let (a, b) = (v[0], v[1]);
        v[0] = cs * a - sn * b;
        v[1] = sn * a + cs * b;
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReparamCheck {
    pub original: CausalClass,
    pub reparametrized: CausalClass,
    pub equal: bool,
}

/// Classifies `F̃(u, s) = F(φ_s(u), s)` and compares with `F`.
pub fn reparam_invariance_check(
    metric: &dyn Metric,
    field: &IsotopyField,
    reparam: &dyn SphereReparam,
    opts: &ClassifyOptions,
) -> ReparamCheck {
    let original = classify_profile(&sign_profile(metric, field), opts);
    let moved = profile_from(metric, field, |i, j| {
        let d = reparam.apply(field.s_grid[j], &field.samples[i]);
        field.transport_unit(&d, j)
    });
    let reparametrized = classify_profile(&moved, opts);
    let equal = original.class == reparametrized.class;
    ReparamCheck {
        original,
        reparametrized,
        equal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{example_mu_curve, ExampleMuVariation, Minkowski};
    use crate::curve::CoefficientCurve;

    fn line(v: [f64; 3]) -> CoefficientCurve {
        CoefficientCurve::line((0.0, 1.0), &[0.0; 3], &v).unwrap()
    }

    #[test]
    fn straight_past_motion_is_nonnegative() {
        let m = Minkowski::new(3).unwrap();
        let grid = uniform_grid(0.0, 1.0, 11);
        let field = isotopy_from_curve(&m, &line([-1.0, 0.0, 0.0]), 16, &grid, &Tolerances::default()).unwrap();
        let prof = sign_profile(&m, &field);
        assert!(prof.values.iter().flatten().all(|v| (v - 1.0).abs() < 1e-14));
        let c = classify_profile(&prof, &ClassifyOptions::default());
        assert_eq!(c.class, ProfileClass::NonNegative);
        assert_eq!(c.verdict, Verdict::CausalPast);

        let field = isotopy_from_curve(&m, &line([1.0, 0.0, 0.0]), 16, &grid, &Tolerances::default()).unwrap();
        let c = classify_profile(&sign_profile(&m, &field), &ClassifyOptions::default());
        assert_eq!(c.verdict, Verdict::CausalFuture);

        let field = isotopy_from_curve(&m, &line([0.0, 0.0, 0.0]), 16, &grid, &Tolerances::default()).unwrap();
        let c = classify_profile(&sign_profile(&m, &field), &ClassifyOptions::default());
        assert_eq!(c.class, ProfileClass::Degenerate);
    }

    #[test]
    fn dual_test_examples() {
        let m = Minkowski::new(3).unwrap();
        let p = Event::new(&[0.0; 3]).unwrap();
        let d = vector_dual_causality(&m, &p, &DVector::from_vec(vec![0.0, 1.0, 0.0]), 256).unwrap();
        assert!(!d.causal_past && d.agrees);
        assert!((d.min_value + 1.0).abs() < 1e-12);
        let d = vector_dual_causality(&m, &p, &DVector::from_vec(vec![-1.0, 1.0, 0.0]), 256).unwrap();
        assert!(d.causal_past && d.agrees);
        let d = vector_dual_causality(&m, &p, &DVector::from_vec(vec![-1.0, 0.0, 0.0]), 256).unwrap();
        assert!(d.causal_past && d.character == CausalCharacter::TimelikePast);
    }

    #[test]
    fn example_mu_is_recovered() {
        let m = Minkowski::new(3).unwrap();
        let var = ExampleMuVariation::default();
        let opts = RecoverOptions { nodes: 41, ..Default::default() };
        let rec = celestial_recover(&m, &var, (0.0, 0.0), &opts).unwrap();
        for (s, (t, mu)) in rec.s.iter().zip(rec.t.iter().zip(&rec.mu)) {
            assert!(t.abs() < 1e-9);
            let e = example_mu_curve(*s);
            for k in 0..3 {
                assert!((mu[k] - e[k]).abs() < 1e-9);
            }
        }
        assert!(rec.max_null_residual < 1e-10);
    }

    #[test]
    fn grid_derivative_is_fourth_order() {
        let h = 0.01;
        let f: Vec<f64> = (0..50).map(|i| (i as f64 * h).sin()).collect();
        let d = grid_derivative(&f, h);
        for (i, di) in d.iter().enumerate() {
            assert!((di - (i as f64 * h).cos()).abs() < 1e-8, "{i}");
        }
    }
}
