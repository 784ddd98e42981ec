//! End-to-end checks of the pipelines against closed-form oracles.
//!
//! Each check draws its random probes from a seeded generator, so a run is
//! reproducible for a fixed [`CheckConfig`].

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{
    example_mu_curve, exact_mink3_contact, Bump, EinsteinStatic, ExampleMuVariation, Minkowski,
    PerturbedMinkowski,
};
use crate::contact::contact_value;
use crate::curvature::{cotton_tensor, PointGeometry};
use crate::curve::{uniform_grid, CoefficientCurve, Curve, BASIS_LEN};
use crate::error::Result;
use crate::geodesic::{causal_character_at, geodesic_state, NULL_TOL};
use crate::isotopy::{
    classify_celestial_curve, classify_profile, default_sphere_samples, isotopy_from_curve,
    pointwise_verdict, reparam_invariance_check, sign_profile, vector_dual_causality,
    ClassifyOptions, PipelineOptions, ProfileClass, RotationReparam, Verdict, DEFAULT_S_NODES,
};
use crate::jacobi::{
    conjugate_scan, coordinate_change, propagate_family, propagate_jacobi, reduce_mod_gamma,
    tn_chart, tn_chart_inverse, JacobiState, ScanOptions, TnCoords,
};
use crate::metric::{Event, Metric, MetricJet, TangentVector};
use crate::ode::Tolerances;
use crate::rays::{
    ray_coords, ray_from_coords, ray_from_event_direction_at, LightRay, RayChart, DEFAULT_HORIZON,
};
use crate::sphere::random_unit;
use crate::variation::NullCurveLift;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub seed: u64,
    pub tol: Tolerances,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            tol: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    /// Worst measured value of the primary statistic.
    pub residual: f64,
    pub threshold: f64,
    pub seconds: f64,
    pub detail: String,
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {}: {:.3e} (limit {:.1e}) in {:.2} s; {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.residual,
            self.threshold,
            self.seconds,
            self.detail
        )
    }
}

pub const CHECK_NAMES: [&str; 10] = [
    "contact-form exactness",
    "legendrian constancy",
    "jacobi vs variation",
    "celestial example reproduction",
    "causality iff sign",
    "dual causality",
    "conjugate points",
    "cotton tensor",
    "charts",
    "invariances",
];

type CheckFn = fn(&CheckConfig, &mut ChaCha8Rng) -> Result<Outcome>;

struct Outcome {
    passed: bool,
    residual: f64,
    threshold: f64,
    detail: String,
    budget: Option<f64>,
}

const CHECKS: [CheckFn; 10] = [
    contact_exactness,
    legendrian_constancy,
    jacobi_vs_variation,
    celestial_example,
    causality_iff_sign,
    dual_causality,
    conjugate_points,
    cotton,
    charts,
    invariances,
];

/// Runs check `id` (1-based).
pub fn run_check(id: u8, cfg: &CheckConfig) -> CheckReport {
    let idx = (id as usize).clamp(1, CHECKS.len()) - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(id as u64));
    let start = Instant::now();
    let out = CHECKS[idx](cfg, &mut rng);
    let seconds = start.elapsed().as_secs_f64();
    let name = CHECK_NAMES[idx].to_string();
    match out {
        Ok(o) => {
            let in_time = o.budget.map_or(true, |b| seconds < b);
            let mut detail = o.detail;
            if let Some(b) = o.budget {
                detail.push_str(&format!("; budget {b} s"));
            }
            CheckReport {
                id,
                name,
                passed: o.passed && in_time,
                residual: o.residual,
                threshold: o.threshold,
                seconds,
                detail,
            }
        }
        Err(e) => CheckReport {
            id,
            name,
            passed: false,
            residual: f64::NAN,
            threshold: f64::NAN,
            seconds,
            detail: format!("error: {e}"),
        },
    }
}

pub fn run_all(cfg: &CheckConfig) -> Vec<CheckReport> {
    (1..=10).map(|id| run_check(id, cfg)).collect()
}

fn uni(rng: &mut ChaCha8Rng, a: f64, b: f64) -> f64 {
    rng.gen_range(a..b)
}

fn vec_in(rng: &mut ChaCha8Rng, n: usize, a: f64, b: f64) -> Vec<f64> {
    (0..n).map(|_| uni(rng, a, b)).collect()
}

fn perturbed() -> PerturbedMinkowski {
    PerturbedMinkowski::new(0.5, Bump::default()).expect("valid default bump")
}

/// Random tangent vector to N: a Jacobi state on a random ray anchored at
/// `level`, with `J'` projected onto `g(J', k) = 0`.
fn random_state(
    metric: &dyn Metric,
    rng: &mut ChaCha8Rng,
    level: f64,
    tol: &Tolerances,
) -> Result<JacobiState> {
    let m = metric.dim();
    let mut anchor = vec![level];
    anchor.extend(vec_in(rng, m - 1, -1.0, 1.0));
    let unit = random_unit(m - 1, rng);
    let ray = LightRay::new(Event::new(&anchor)?, unit.as_slice())?;
    let mut st = JacobiState::on_ray(
        metric,
        &ray,
        0.0,
        &vec_in(rng, m, -1.0, 1.0),
        &vec_in(rng, m, -1.0, 1.0),
        tol,
    )?;
    let g = metric.components(st.x.as_slice());
    let e1 = metric.frame(st.x.as_slice())?.vector(0).clone();
    let gk = &g * &st.k;
    st.dj -= e1.clone() * (st.dj.dot(&gk) / e1.dot(&gk));
    Ok(st)
}

fn contact_exactness(cfg: &CheckConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let m = Minkowski::new(3)?;
    let chart = RayChart::angle();
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let theta = uni(rng, -PI, PI);
        let x = vec_in(rng, 2, -2.0, 2.0);
        let d = [uni(rng, -1.0, 1.0), uni(rng, -1.0, 1.0), uni(rng, -1.0, 1.0)];
        let st = crate::jacobi::tangent_from_chart_velocity(&m, &chart, &x, &[theta], &d[..2], &d[2..])?;
        // evaluate away from the anchor: the value is constant along the ray
        let st = propagate_jacobi(&m, &st, uni(rng, -3.0, 3.0), &cfg.tol)?;
        worst = worst.max((contact_value(&m, &st) - exact_mink3_contact(theta, d)).abs());
    }
    Ok(Outcome {
        passed: worst < 1e-8,
        residual: worst,
        threshold: 1e-8,
        detail: "1000 random (θ, tangent) pairs in Minkowski-3".into(),
        budget: Some(10.0),
    })
}

fn legendrian_constancy(cfg: &CheckConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mink = Minkowski::new(3)?;
    let pert = perturbed();
    // anchoring the perturbed case at t = −9.7 lets the span [0, 10] reach
    // into the curved region while staying inside t < ε
    let cases: [(&dyn Metric, f64); 2] = [(&mink, 0.0), (&pert, -9.7)];
    let stations = uniform_grid(0.0, 10.0, 21);
    let mut worst = 0.0_f64;
    for (metric, level) in cases {
        for _ in 0..100 {
            let st = random_state(metric, rng, level, &cfg.tol)?;
            let a0 = contact_value(metric, &st);
            let out = propagate_family(
                metric,
                0.0,
                &st.x,
                &st.k,
                &[(st.j.clone(), st.dj.clone())],
                &stations[1..],
                &cfg.tol,
            )?;
            for f in out.iter().flatten() {
                worst = worst.max((contact_value(metric, f) - a0).abs());
            }
        }
    }
    Ok(Outcome {
        passed: worst < 1e-8,
        residual: worst,
        threshold: 1e-8,
        detail: "100 random states each in Minkowski-3 and the perturbed metric over t in [0, 10]"
            .into(),
        budget: None,
    })
}

/// Worst relative deviation between the propagated Jacobi field and the
/// central difference (step 1e-4) of a random variation through rays.
fn variation_deviation(
    metric: &dyn Metric,
    rng: &mut ChaCha8Rng,
    anchor: Vec<f64>,
    t_eval: &[f64],
    tol: &Tolerances,
) -> Result<f64> {
    let m = metric.dim();
    let unit = random_unit(m - 1, rng);
    let dx = DVector::from_vec(vec_in(rng, m - 1, -0.5, 0.5));
    let du = DVector::from_vec(vec_in(rng, m - 1, -0.5, 0.5));
    let data = |s: f64| -> Result<(Vec<f64>, DVector<f64>)> {
        let mut p = anchor.clone();
        for i in 1..m {
            p[i] += s * dx[i - 1];
        }
        let u = &unit + &du * s;
        let u = &u / u.norm();
        let mut c = DVector::zeros(m);
        c[0] = 1.0;
        c.rows_mut(1, m - 1).copy_from(&u);
        let k = metric.frame(&p)?.from_frame(&c);
        Ok((p, k))
    };
    let (p0, k0) = data(0.0)?;
    let hk = 1e-3;
    let dk = (-data(2.0 * hk)?.1 + data(hk)?.1 * 8.0 - data(-hk)?.1 * 8.0 + data(-2.0 * hk)?.1)
        / (12.0 * hk);
    let mut j0 = DVector::zeros(m);
    j0.rows_mut(1, m - 1).copy_from(&dx);
    let geo = PointGeometry::at(metric, &p0, false)?;
    let mut corr = vec![0.0; m];
    geo.contract_gamma(j0.as_slice(), k0.as_slice(), &mut corr);
    let dj0 = dk + DVector::from_vec(corr);
    let x0 = DVector::from_vec(p0.clone());
    let fields = propagate_family(metric, 0.0, &x0, &k0, &[(j0, dj0)], t_eval, tol)?;

    let fine = Tolerances::new(1e-12, 1e-12);
    let h = 1e-4;
    let (pp, kp) = data(h)?;
    let (pm, km) = data(-h)?;
    let mut worst = 0.0_f64;
    for (f, &t) in fields.iter().zip(t_eval) {
        let gp = geodesic_state(metric, &pp, kp.as_slice(), 0.0, t, &fine)?.0;
        let gm = geodesic_state(metric, &pm, km.as_slice(), 0.0, t, &fine)?.0;
        let fd = (gp - gm) / (2.0 * h);
        let j = &f[0].j;
        worst = worst.max((j - &fd).amax() / j.amax().max(1e-6));
    }
    Ok(worst)
}

fn jacobi_vs_variation(cfg: &CheckConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let m3 = Minkowski::new(3)?;
    let m4 = Minkowski::new(4)?;
    let pert = perturbed();
    let es = EinsteinStatic::new();
    let mut worst = 0.0_f64;
    let mut parts = Vec::new();
    for _ in 0..50 {
        let a = vec![0.0, uni(rng, -1.0, 1.0), uni(rng, -1.0, 1.0)];
        worst = worst.max(variation_deviation(&m3, rng, a, &[1.0, 5.0], &cfg.tol)?);
    }
    parts.push(format!("minkowski-3 {worst:.1e}"));
    let mut w = 0.0_f64;
    for _ in 0..50 {
        let a = vec![0.0, uni(rng, -1.0, 1.0), uni(rng, -1.0, 1.0), uni(rng, -1.0, 1.0)];
        w = w.max(variation_deviation(&m4, rng, a, &[1.0, 5.0], &cfg.tol)?);
    }
    parts.push(format!("minkowski-4 {w:.1e}"));
    worst = worst.max(w);
    let mut w = 0.0_f64;
    for _ in 0..50 {
        let a = vec![-1.5, uni(rng, -1.0, 1.0), uni(rng, -1.0, 1.0)];
        w = w.max(variation_deviation(&pert, rng, a, &[1.0, 1.7], &cfg.tol)?);
    }
    parts.push(format!("perturbed {w:.1e}"));
    worst = worst.max(w);
    let mut w = 0.0_f64;
    for _ in 0..50 {
        let a = vec![0.0, uni(rng, 1.2, 1.9), uni(rng, 0.0, 2.0 * PI)];
        w = w.max(variation_deviation(&es, rng, a, &[0.5, 0.9], &cfg.tol)?);
    }
    parts.push(format!("einstein-static {w:.1e}"));
    worst = worst.max(w);
    Ok(Outcome {
        passed: worst < 1e-4,
        residual: worst,
        threshold: 1e-4,
        detail: format!("50 variations per metric: {}", parts.join(", ")),
        budget: None,
    })
}

fn celestial_example(_cfg: &CheckConfig, _rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let m = Minkowski::new(3)?;
    let var = ExampleMuVariation::default();
    let opts = PipelineOptions::default();
    let out = classify_celestial_curve(&m, &var, (0.0, 0.0), &opts)?;
    let rec = &out.recovery;
    let max_t = rec.t.iter().fold(0.0_f64, |a, t| a.max(t.abs()));
    let mut max_mu = 0.0_f64;
    for (s, mu) in rec.s.iter().zip(&rec.mu) {
        let e = example_mu_curve(*s);
        for k in 0..3 {
            max_mu = max_mu.max((mu[k] - e[k]).abs());
        }
    }
    // p(θ, s) = s(cos(s − θ) − 1) at the equispaced sample angles
    let n = out.profile.samples();
    let mut max_p = 0.0_f64;
    for (i, row) in out.profile.values.iter().enumerate() {
        let th = 2.0 * PI * i as f64 / n as f64;
        for (j, v) in row.iter().enumerate() {
            let s = out.profile.s_grid[j];
            max_p = max_p.max((v - s * ((s - th).cos() - 1.0)).abs());
        }
    }
    let step = rec.s[1] - rec.s[0];
    let transitions = out.class.transitions();
    let located = transitions.len() == 1 && {
        let (a, b) = transitions[0];
        a <= 0.0 && b >= 0.0 && 0.5 * (a + b) <= step && b - a <= 2.0 * step + 1e-12
    };
    let half = 0.5 * step;
    let past = classify_profile(&out.profile.window(-1.0, -half), &opts.classify);
    let future = classify_profile(&out.profile.window(half, 1.0), &opts.classify);
    let windows_ok = past.class == ProfileClass::NonNegative
        && past.verdict == Verdict::CausalPast
        && future.class == ProfileClass::NonPositive
        && future.verdict == Verdict::CausalFuture;
    let mixed = out.class.class == ProfileClass::Mixed && out.class.verdict == Verdict::NotCausal;
    let residual = max_t.max(max_mu);
    Ok(Outcome {
        passed: residual < 1e-6 && max_p < 1e-6 && mixed && located && windows_ok,
        residual,
        threshold: 1e-6,
        detail: format!(
            "max|t| {max_t:.1e}, max|μ − formula| {max_mu:.1e}, profile vs closed form {max_p:.1e}, \
             class {:?}, transitions {transitions:?}, s<0 {:?}, s>0 {:?}",
            out.class.class, past.verdict, future.verdict
        ),
        budget: Some(5.0),
    })
}

/// Coefficient row with value `c0 + Σ` of bounded-derivative terms; returns
/// the row and a bound on `|d/ds|` over `s ∈ [0, 1]`.
fn wiggle_row(rng: &mut ChaCha8Rng, c0: f64, amp: f64) -> ([f64; BASIS_LEN], f64) {
    // basis {1, s, s², sin, cos, s sin, s cos}; derivative bounds on [0, 1]
    let bounds = [0.0, 1.0, 2.0, 1.0, 1.0, 2.0, 2.0];
    let mut row = [0.0; BASIS_LEN];
    row[0] = c0;
    let mut bound = 0.0;
    for k in 1..BASIS_LEN {
        let c = uni(rng, -amp, amp);
        row[k] = c;
        bound += c.abs() * bounds[k];
    }
    (row, bound)
}

fn past_causal_curve(rng: &mut ChaCha8Rng, t0: f64) -> Result<CoefficientCurve> {
    let (x0, y0) = (uni(rng, -1.0, 1.0), uni(rng, -1.0, 1.0));
    let (rx, bx) = wiggle_row(rng, x0, 0.3);
    let (ry, by) = wiggle_row(rng, y0, 0.3);
    let speed = bx.hypot(by) + uni(rng, 0.05, 0.5);
    let mut rt = [0.0; BASIS_LEN];
    rt[0] = t0;
    rt[1] = -speed;
    rt[2] = -uni(rng, 0.0, 0.3);
    CoefficientCurve::new((0.0, 1.0), vec![rt, rx, ry])
}

fn spacelike_curve(rng: &mut ChaCha8Rng, t0: f64) -> Result<CoefficientCurve> {
    let (mut rt, bt) = wiggle_row(rng, t0, 0.05);
    rt[0] = t0;
    let (mut rx, bx) = wiggle_row(rng, 0.0, 0.05);
    let (mut ry, by) = wiggle_row(rng, 0.0, 0.05);
    let dir = uni(rng, 0.0, 2.0 * PI);
    let speed = bt + bx.hypot(by) + uni(rng, 0.1, 1.0);
    rx[1] += speed * dir.cos();
    ry[1] += speed * dir.sin();
    CoefficientCurve::new((0.0, 1.0), vec![rt, rx, ry])
}

fn causality_iff_sign(cfg: &CheckConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mink = Minkowski::new(3)?;
    let pert = perturbed();
    let grid = uniform_grid(0.0, 1.0, DEFAULT_S_NODES);
    let n = default_sphere_samples(3);
    let opts = ClassifyOptions::default();
    let mut wrong = 0usize;
    let mut disagreements = 0usize;
    let mut total = 0usize;
    // curves in the perturbed metric start at t = −0.1 and only decrease
    // (causal) or stay within (−0.5, −0.1) (spacelike)
    for (metric, t_past, t_space) in [(&mink as &dyn Metric, 0.0, 0.0), (&pert, -0.1, -0.3)] {
        for kind in 0..2 {
            for _ in 0..50 {
                let curve = if kind == 0 {
                    past_causal_curve(rng, t_past)?
                } else {
                    spacelike_curve(rng, t_space)?
                };
                let field = isotopy_from_curve(metric, &curve, n, &grid, &cfg.tol)?;
                let class = classify_profile(&sign_profile(metric, &field), &opts);
                let expect = if kind == 0 {
                    (ProfileClass::NonNegative, Verdict::CausalPast)
                } else {
                    (ProfileClass::Mixed, Verdict::NotCausal)
                };
                if (class.class, class.verdict) != expect {
                    wrong += 1;
                }
                if pointwise_verdict(metric, &field, 0.0)? != class.verdict {
                    disagreements += 1;
                }
                total += 1;
            }
        }
    }
    Ok(Outcome {
        passed: wrong == 0 && disagreements == 0,
        residual: (wrong + disagreements) as f64,
        threshold: 0.0,
        detail: format!(
            "{total} curves: {wrong} misclassified, {disagreements} disagreements with the pointwise oracle"
        ),
        budget: None,
    })
}

fn dual_causality(_cfg: &CheckConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mink = Minkowski::new(3)?;
    let pert = perturbed();
    let mut exceptions = 0usize;
    let mut in_band = 0usize;
    let mut total = 0usize;
    for (metric, t_range) in [(&mink as &dyn Metric, (-1.0, 1.0)), (&pert, (-0.4, 0.45))] {
        for i in 0..1000 {
            let p = Event::new(&[uni(rng, t_range.0, t_range.1), uni(rng, -1.0, 1.0), uni(rng, -1.0, 1.0)])?;
            let v = if i % 2 == 0 {
                DVector::from_vec(vec_in(rng, 3, -1.0, 1.0))
            } else {
                // near the cone: a null vector with a small time perturbation
                let frame = metric.frame(p.coords())?;
                let u = random_unit(2, rng);
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let eps = uni(rng, -1e-6, 1e-6);
                let c = DVector::from_vec(vec![sign * (1.0 + eps), u[0], u[1]]);
                frame.from_frame(&(c * uni(rng, 0.1, 3.0)))
            };
            let g = metric.components(p.coords());
            let norm = (v.transpose() * &g * &v)[0];
            let d = vector_dual_causality(metric, &p, &v, 256)?;
            total += 1;
            if !d.agrees {
                if norm.abs() < NULL_TOL {
                    in_band += 1;
                } else {
                    exceptions += 1;
                }
            }
        }
    }
    Ok(Outcome {
        passed: exceptions == 0,
        residual: exceptions as f64,
        threshold: 0.0,
        detail: format!("{total} vectors, {exceptions} exceptions outside the band, {in_band} inside"),
        budget: None,
    })
}

fn conjugate_points(cfg: &CheckConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let opts = ScanOptions {
        tol: cfg.tol,
        ..Default::default()
    };
    let mink = Minkowski::new(3)?;
    let th = uni(rng, -PI, PI);
    let ray = LightRay::new(Event::new(&[0.0, 0.3, -0.2])?, &[th.cos(), th.sin()])?;
    let flat = conjugate_scan(&mink, &ray, 0.0, (0.0, 10.0), &opts)?;
    let es = EinsteinStatic::new();
    // along the equator the ray stays inside the polar chart
    let ray = LightRay::new(Event::new(&[0.0, PI / 2.0, uni(rng, 0.0, 2.0 * PI)])?, &[0.0, 1.0])?;
    let roots = conjugate_scan(&es, &ray, 0.0, (0.0, 10.0), &opts)?;
    let first = roots.first().copied().unwrap_or(f64::NAN);
    let err = (first - PI).abs();
    Ok(Outcome {
        passed: flat.is_empty() && err < 1e-3,
        residual: if err.is_nan() { f64::INFINITY } else { err },
        threshold: 1e-3,
        detail: format!("minkowski roots {flat:?}, einstein-static roots {roots:?}"),
        budget: Some(10.0),
    })
}

/// Hides the exact jet of a metric, forcing finite-difference curvature.
#[derive(Debug)]
struct Jetless<'a>(&'a dyn Metric);

impl Metric for Jetless<'_> {
    fn name(&self) -> String {
        format!("{} (no jet)", self.0.name())
    }
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn components(&self, p: &[f64]) -> nalgebra::DMatrix<f64> {
        self.0.components(p)
    }
    fn jet(&self, _p: &[f64]) -> Option<MetricJet> {
        None
    }
    fn contains(&self, p: &[f64]) -> bool {
        self.0.contains(p)
    }
}

/// Closed-form Cotton tensor of the perturbed metric, with `f'''` from a
/// central difference of the exact `f''`.
fn cotton_oracle(bump: &Bump, t: f64) -> [[[f64; 3]; 3]; 3] {
    let h = 1e-5;
    let f = bump.jet(t)[0];
    let f3 = (bump.jet(t + h)[2] - bump.jet(t - h)[2]) / (2.0 * h);
    let mut c = [[[0.0; 3]; 3]; 3];
    c[0][0][1] = f * f3 / 4.0;
    c[0][1][0] = -c[0][0][1];
    c[1][0][1] = (1.0 - f) * f3 / 4.0;
    c[1][1][0] = -c[1][0][1];
    c[2][0][2] = -f3 / 4.0;
    c[2][2][0] = -c[2][0][2];
    c
}

fn cotton(_cfg: &CheckConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mink = Minkowski::new(3)?;
    let mut flat = 0.0_f64;
    for _ in 0..20 {
        let p = vec_in(rng, 3, -2.0, 2.0);
        flat = flat.max(cotton_tensor(&mink, &p)?.max_abs());
    }
    let pert = perturbed();
    let fd = Jetless(&pert);
    // noise floor: spread between the jet and pure finite-difference paths,
    // plus whatever leaks into components that vanish identically
    let mut noise = 0.0_f64;
    let mut cmax = 0.0_f64;
    let mut rel = 0.0_f64;
    let t = 0.25;
    let o = cotton_oracle(&pert.bump, t);
    for _ in 0..20 {
        let p = [t, uni(rng, -1.0, 1.0), uni(rng, -1.0, 1.0)];
        let c = cotton_tensor(&pert, &p)?;
        let c_fd = cotton_tensor(&fd, &p)?;
        for a in 0..3 {
            for b in 0..3 {
                for d in 0..3 {
                    let v = c.get(a, b, d);
                    let e = o[a][b][d];
                    cmax = cmax.max(v.abs());
                    noise = noise.max((v - c_fd.get(a, b, d)).abs());
                    if e == 0.0 {
                        noise = noise.max(v.abs());
                    } else if e.abs() > 1e-6 {
                        rel = rel.max((v - e).abs() / e.abs());
                    }
                }
            }
        }
    }
    let passed = flat < 1e-10 && cmax > 10.0 * noise && rel < 1e-4;
    Ok(Outcome {
        passed,
        residual: rel,
        threshold: 1e-4,
        detail: format!(
            "minkowski max|C| {flat:.1e}; perturbed max|C| {cmax:.3e} at t = {t}, noise floor {noise:.1e}"
        ),
        budget: None,
    })
}

fn charts(cfg: &CheckConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mink3 = Minkowski::new(3)?;
    let mink4 = Minkowski::new(4)?;
    let pert = perturbed();
    let cases: [(&dyn Metric, RayChart); 3] = [
        (&mink3, RayChart::angle()),
        (&mink4, RayChart::hemisphere()),
        (&pert, RayChart::hemisphere().at_level(0.25)),
    ];
    let mut ray_rt = 0.0_f64;
    let mut tn_rt = 0.0_f64;
    for (metric, chart) in cases {
        let m = metric.dim();
        for _ in 0..100 {
            let x = vec_in(rng, m - 1, -1.0, 1.0);
            let u: Vec<f64> = if chart.kind == crate::rays::ChartKind::Angle {
                vec![uni(rng, -3.1, 3.1)]
            } else {
                let d = random_unit(m - 1, rng);
                let d = if d[0] < 0.1 { -d } else { d };
                if d[0] < 0.1 {
                    continue;
                }
                d.iter().skip(1).copied().collect()
            };
            let ray = ray_from_coords(&chart, &x, &u)?;
            let (x2, u2) = ray_coords(&chart, &ray)?;
            let back = ray_from_coords(&chart, x2.as_slice(), u2.as_slice())?;
            ray_rt = ray_rt.max(back.distance(&ray));
            for (a, b) in x.iter().zip(x2.iter()).chain(u.iter().zip(u2.iter())) {
                ray_rt = ray_rt.max((a - b).abs());
            }
            let coords = TnCoords {
                x,
                u,
                v: vec_in(rng, m - 2, -1.0, 1.0),
                w: vec_in(rng, m - 1, -1.0, 1.0),
            };
            let (_, st) = tn_chart_inverse(metric, &chart, &coords)?;
            let t = uni(rng, -2.0, 0.2);
            let moved = propagate_jacobi(metric, &st, t, &cfg.tol)?;
            tn_rt = tn_rt.max(tn_chart(metric, &chart, &moved, &cfg.tol)?.max_diff(&coords));
        }
    }
    // block structure
    let mut block = 0.0_f64;
    for (metric, chart) in [(&mink3 as &dyn Metric, RayChart::angle()), (&mink4, RayChart::hemisphere())] {
        let m = metric.dim();
        for _ in 0..10 {
            let x = vec_in(rng, m - 1, -1.0, 1.0);
            let u = if m == 3 {
                vec![uni(rng, -3.0, 3.0)]
            } else {
                vec_in(rng, m - 2, -0.5, 0.5)
            };
            let cm = coordinate_change(metric, &chart, &x, &u)?;
            let nx = m - 1;
            let nu = u.len();
            for r in 0..nx + nu {
                for c in 0..nx + nu {
                    let expect = if r < nu {
                        // v rows: [B, I] with B = 0 in flat Cartesian frames
                        if c >= nx && c - nx == r {
                            1.0
                        } else {
                            0.0
                        }
                    } else if c < nx && r - nu == c {
                        1.0
                    } else {
                        0.0
                    };
                    block = block.max((cm.full[(r, c)] - expect).abs());
                }
            }
        }
    }
    let mut min_det = f64::INFINITY;
    let mut u_block = 0.0_f64;
    let chart = RayChart::hemisphere().at_level(0.25);
    for _ in 0..20 {
        let x = vec_in(rng, 2, -1.0, 1.0);
        let u = vec![uni(rng, -0.9, 0.9)];
        let cm = coordinate_change(&pert, &chart, &x, &u)?;
        min_det = min_det.min(cm.det_a().abs());
        // u̇ columns stay [I; 0] in any metric
        u_block = u_block
            .max((cm.full[(0, 2)] - 1.0).abs())
            .max(cm.full[(1, 2)].abs())
            .max(cm.full[(2, 2)].abs());
    }
    let worst = ray_rt.max(tn_rt).max(block).max(u_block);
    Ok(Outcome {
        passed: worst < 1e-8 && min_det > 1e-6,
        residual: worst,
        threshold: 1e-8,
        detail: format!(
            "ray round trip {ray_rt:.1e}, TN round trip {tn_rt:.1e}, minkowski block {block:.1e}, \
             perturbed u-block {u_block:.1e}, min |det A| {min_det:.3}"
        ),
        budget: None,
    })
}

fn invariances(cfg: &CheckConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mink = Minkowski::new(3)?;
    let pert = perturbed();
    // canonicalization under positive rescaling
    let mut scale = 0.0_f64;
    for (metric, t_range) in [(&mink as &dyn Metric, (-1.0, 1.0)), (&pert, (-0.5, 0.4))] {
        for _ in 0..20 {
            let p = Event::new(&[uni(rng, t_range.0, t_range.1), uni(rng, -1.0, 1.0), uni(rng, -1.0, 1.0)])?;
            let u = random_unit(2, rng);
            let k = metric
                .frame(p.coords())?
                .from_frame(&DVector::from_vec(vec![1.0, u[0], u[1]]));
            let chart = RayChart::default();
            let rays: Vec<LightRay> = [0.1, 1.0, 10.0]
                .iter()
                .map(|lam| {
                    let xi = TangentVector::new(p.clone(), (&k * *lam).as_slice())?;
                    ray_from_event_direction_at(metric, &chart, &p, &xi, DEFAULT_HORIZON, &cfg.tol)
                })
                .collect::<Result<_>>()?;
            scale = scale.max(rays[0].distance(&rays[1])).max(rays[2].distance(&rays[1]));
        }
    }
    // reduction under (at + b)γ'
    let mut shift = 0.0_f64;
    for metric in [&mink as &dyn Metric, &pert] {
        let st = random_state(metric, rng, -1.0, &cfg.tol)?;
        let st = propagate_jacobi(metric, &st, uni(rng, 0.0, 1.2), &cfg.tol)?;
        let base = reduce_mod_gamma(metric, &st)?;
        for _ in 0..100 {
            let r = reduce_mod_gamma(metric, &st.shifted(uni(rng, -5.0, 5.0), uni(rng, -5.0, 5.0)))?;
            for (a, b) in base.w_bar.iter().zip(&r.w_bar).chain(base.v_bar.iter().zip(&r.v_bar)) {
                shift = shift.max((a - b).abs());
            }
        }
    }
    // sphere reparametrizations
    let grid = uniform_grid(-1.0, 1.0, 101);
    let line = |v: [f64; 3]| CoefficientCurve::line((-1.0, 1.0), &[0.0; 3], &v);
    let helix = CoefficientCurve::new(
        (-1.0, 1.0),
        vec![
            [0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        ],
    )?;
    let example = crate::curve::FnCurve::new((-1.0, 1.0), |s| {
        DVector::from_column_slice(&example_mu_curve(s))
    })
    .with_velocity(|s| DVector::from_column_slice(&crate::catalog::example_mu_velocity(s)));
    let curves: Vec<(&str, Box<dyn Curve>)> = vec![
        ("past line", Box::new(line([-1.0, 0.0, 0.0])?)),
        ("future line", Box::new(line([1.0, 0.3, 0.0])?)),
        ("spacelike line", Box::new(line([0.2, 1.0, 0.0])?)),
        ("null helix", Box::new(helix)),
        ("celestial example", Box::new(example)),
    ];
    let opts = ClassifyOptions::default();
    let mut failures = Vec::new();
    for (name, curve) in &curves {
        let field = isotopy_from_curve(&mink, curve.as_ref(), 64, &grid, &cfg.tol)?;
        for r in 0..20 {
            let reparam = RotationReparam::random(2, cfg.seed ^ (r as u64 * 7919));
            let chk = reparam_invariance_check(&mink, &field, &reparam, &opts);
            if !chk.equal {
                failures.push(format!("{name}#{r}"));
            }
        }
    }
    let passed = scale < 1e-9 && shift < 1e-12 && failures.is_empty();
    Ok(Outcome {
        passed,
        residual: scale.max(shift),
        threshold: 1e-9,
        detail: format!(
            "rescaling {scale:.1e} (< 1e-9), shift {shift:.1e} (< 1e-12), reparametrization failures {failures:?}"
        ),
        budget: None,
    })
}

/// The lifted null helix `ν(s) = (−s, cos s, sin s)` in Minkowski-3, used as
/// a celestial test family with a known answer.
pub fn helix_lift() -> Result<NullCurveLift> {
    let helix = CoefficientCurve::new(
        (-1.0, 1.0),
        vec![
            [0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        ],
    )?;
    Ok(NullCurveLift::new(Arc::new(Minkowski::new(3)?), Arc::new(helix)))
}

/// Pointwise character of every sampled velocity, for reporting.
pub fn velocity_characters(
    metric: &dyn Metric,
    positions: &[DVector<f64>],
    velocities: &[DVector<f64>],
) -> Result<Vec<String>> {
    positions
        .iter()
        .zip(velocities)
        .map(|(p, v)| Ok(causal_character_at(metric, p.as_slice(), v, NULL_TOL)?.to_string()))
        .collect()
}
