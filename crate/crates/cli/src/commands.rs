use std::sync::Arc;

use lightray::catalog::{example_mu_curve, CatalogEntry, ExampleMuVariation};
use lightray::checks::{run_all, CheckConfig};
use lightray::contact::contact_value;
use lightray::curvature::cotton_tensor;
use lightray::curve::{uniform_grid, Curve};
use lightray::isotopy::{
    classify_celestial_curve, classify_profile, default_sphere_samples, isotopy_from_curve,
    pointwise_verdict, sign_profile, CausalClass, ClassifyOptions, PipelineOptions,
    RecoverOptions,
};
use lightray::jacobi::{
    conjugate_scan, coordinate_change, propagate_jacobi, reduce_mod_gamma,
    tangent_from_chart_velocity, JacobiState, ScanOptions,
};
use lightray::metric::inner;
use lightray::rays::{canonicalize, ray_coords, sky_sample_at, ChartKind, LightRay, DEFAULT_HORIZON};
use lightray::variation::{GeodesicVariation, NullCurveLift, SkyCurveVariation};
use lightray::{Event, Metric, Tolerances};
use nalgebra::DVector;
use serde::Serialize;
use serde_json::{json, Value};

use crate::envelope::{digest, CheckOutcome, Classification, ResultEnvelope};
use crate::scene::{
    ChartChoice, ChartName, ChartPoint, ChartSpec, ChartTangent, ConjugateSpec, ContactSpec,
    CottonSpec, IsotopySpec, JacobiSpec, RayData, RaySpec, RecoverSpec, SceneConfig, SkySpec,
    VariationSpec,
};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CommandName {
    Ray,
    Sky,
    Jacobi,
    Conjugate,
    Contact,
    Isotopy,
    Recover,
    Cotton,
    Chart,
    Selftest,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ray => "ray",
            Self::Sky => "sky",
            Self::Jacobi => "jacobi",
            Self::Conjugate => "conjugate",
            Self::Contact => "contact",
            Self::Isotopy => "isotopy",
            Self::Recover => "recover",
            Self::Cotton => "cotton",
            Self::Chart => "chart",
            Self::Selftest => "selftest",
        }
    }
}

/// Everything a command needs: the scene after command-line overrides.
pub struct Context {
    pub scene: SceneConfig,
    pub entry: CatalogEntry,
    pub seed: u64,
}

#[derive(Serialize)]
struct DigestInput<'a> {
    command: &'a str,
    scene: &'a SceneConfig,
    seed: u64,
}

impl Context {
    pub fn new(scene: SceneConfig, seed: u64) -> Result<Self, CliError> {
        scene.validate()?;
        let entry = scene.metric_entry()?;
        Ok(Self { scene, entry, seed })
    }

    fn metric(&self) -> &dyn Metric {
        self.entry.metric.as_ref()
    }

    fn tol(&self) -> Tolerances {
        self.scene.tolerances
    }

    fn envelope(&self, cmd: CommandName, payload: Value) -> ResultEnvelope {
        ResultEnvelope {
            command: cmd.as_str().into(),
            config_digest: digest(&DigestInput {
                command: cmd.as_str(),
                scene: &self.scene,
                seed: self.seed,
            }),
            payload,
            classifications: Vec::new(),
            checks: Vec::new(),
            profile: None,
        }
    }

    fn dim_check(&self, what: &str, v: &[f64], want: usize) -> Result<(), CliError> {
        if v.len() != want {
            return Err(CliError::Config(format!(
                "{what} has {} entries, expected {want}",
                v.len()
            )));
        }
        Ok(())
    }

    fn ray(&self, r: &RayData) -> Result<LightRay, CliError> {
        let m = self.metric().dim();
        self.dim_check("ray anchor", &r.anchor, m)?;
        self.dim_check("ray unit", &r.unit, m - 1)?;
        let ev = Event::new(&r.anchor).map_err(config)?;
        LightRay::new(ev, &r.unit).map_err(config)
    }
}

fn config(e: lightray::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// The serialized name of a unit enum variant.
fn tag<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

fn classification(subject: &str, c: &CausalClass) -> Classification {
    Classification {
        subject: subject.into(),
        class: tag(&c.class),
        verdict: tag(&c.verdict),
        intervals: c
            .intervals
            .iter()
            .map(|iv| (iv.start, iv.end, tag(&iv.sign)))
            .collect(),
    }
}

pub fn run(cmd: CommandName, ctx: &Context) -> Result<ResultEnvelope, CliError> {
    match cmd {
        CommandName::Ray => cmd_ray(ctx),
        CommandName::Sky => cmd_sky(ctx),
        CommandName::Jacobi => cmd_jacobi(ctx),
        CommandName::Conjugate => cmd_conjugate(ctx),
        CommandName::Contact => cmd_contact(ctx),
        CommandName::Isotopy => cmd_isotopy(ctx),
        CommandName::Recover => cmd_recover(ctx),
        CommandName::Cotton => cmd_cotton(ctx),
        CommandName::Chart => cmd_chart(ctx),
        CommandName::Selftest => cmd_selftest(ctx),
    }
}

/// A future null direction at `p`: frame components `(1, 1, 0, …)`.
fn default_null(metric: &dyn Metric, p: &[f64]) -> Result<Vec<f64>, CliError> {
    let mut c = DVector::zeros(metric.dim());
    c[0] = 1.0;
    c[1] = 1.0;
    Ok(vec_of(&metric.frame(p).map_err(config)?.from_frame(&c)))
}

fn origin(metric: &dyn Metric) -> Vec<f64> {
    let mut p = vec![0.0; metric.dim()];
    if metric.name().starts_with("einstein") {
        p[1] = std::f64::consts::FRAC_PI_2;
    }
    p
}

fn cmd_ray(ctx: &Context) -> Result<ResultEnvelope, CliError> {
    let metric = ctx.metric();
    let spec = match &ctx.scene.ray {
        Some(s) => s.clone(),
        None => {
            let event = origin(metric);
            RaySpec {
                direction: default_null(metric, &event)?,
                event,
                chart: ChartChoice::default(),
            }
        }
    };
    let m = metric.dim();
    ctx.dim_check("ray event", &spec.event, m)?;
    ctx.dim_check("ray direction", &spec.direction, m)?;
    let chart = spec.chart.chart();
    let tol = ctx.tol();
    let c = canonicalize(metric, chart.level, &spec.event, &spec.direction, DEFAULT_HORIZON, &tol)?;
    let t_event = c.ray_param(0.0);
    let (x, _) = c.ray.state(metric, t_event, &tol)?;
    let miss = x
        .iter()
        .zip(&spec.event)
        .fold(0.0_f64, |a, (p, q)| a.max((p - q).abs()));
    let (cx, cu) = ray_coords(&chart, &c.ray)?;
    let mut env = ctx.envelope(
        CommandName::Ray,
        json!({
            "anchor": c.ray.anchor().coords(),
            "unit": vec_of(c.ray.unit()),
            "chart": { "x": vec_of(&cx), "u": vec_of(&cu) },
            "t_event": t_event,
            "scale": c.scale,
        }),
    );
    env.checks.push(CheckOutcome::below("ray passes through event", miss, 1e-8));
    env.checks.push(CheckOutcome::below(
        "unit direction",
        (c.ray.unit().norm() - 1.0).abs(),
        1e-12,
    ));
    Ok(env)
}

fn cmd_sky(ctx: &Context) -> Result<ResultEnvelope, CliError> {
    let metric = ctx.metric();
    let spec = ctx.scene.sky.clone().unwrap_or_else(|| SkySpec {
        event: origin(metric),
        n: None,
        chart: ChartChoice::default(),
    });
    ctx.dim_check("sky event", &spec.event, metric.dim())?;
    let n = spec.n.unwrap_or_else(|| default_sphere_samples(metric.dim()));
    let chart = spec.chart.chart();
    let tol = ctx.tol();
    let p = Event::new(&spec.event).map_err(config)?;
    let rays = sky_sample_at(metric, &chart, &p, n, &tol)?;
    let mut miss = 0.0_f64;
    let mut out = Vec::with_capacity(rays.len());
    for r in &rays {
        let (x, _) = r.ray.state(metric, r.t_event, &tol)?;
        miss = miss.max((&x - &p.0).amax());
        out.push(json!({
            "anchor": r.ray.anchor().coords(),
            "unit": vec_of(r.ray.unit()),
            "t_event": r.t_event,
        }));
    }
    let mut env = ctx.envelope(CommandName::Sky, json!({ "event": spec.event, "rays": out }));
    env.checks.push(CheckOutcome::below("every ray passes through the event", miss, 1e-8));
    Ok(env)
}

fn cmd_jacobi(ctx: &Context) -> Result<ResultEnvelope, CliError> {
    let metric = ctx.metric();
    let m = metric.dim();
    let spec = match &ctx.scene.jacobi {
        Some(s) => s.clone(),
        None => {
            let mut unit = vec![0.0; m - 1];
            unit[0] = 1.0;
            let mut j = vec![0.0; m];
            j[m - 1] = 1.0;
            JacobiSpec {
                ray: RayData {
                    anchor: origin(metric),
                    unit,
                },
                j,
                dj: vec![0.0; m],
                stations: vec![0.0, 0.5, 1.0],
            }
        }
    };
    ctx.dim_check("J", &spec.j, m)?;
    ctx.dim_check("J'", &spec.dj, m)?;
    let tol = ctx.tol();
    let ray = ctx.ray(&spec.ray)?;
    let st = JacobiState::on_ray(metric, &ray, 0.0, &spec.j, &spec.dj, &tol)?;
    let g0 = contact_value(metric, &st);
    let slope = inner(metric, st.x.as_slice(), &st.dj, &st.k);
    let mut drift = 0.0_f64;
    let mut rows = Vec::new();
    for &t in &spec.stations {
        let s = propagate_jacobi(metric, &st, t, &tol)?;
        let value = contact_value(metric, &s);
        // g(J, γ') is affine in t with slope g(J', γ')
        drift = drift.max((value - g0 - slope * t).abs());
        let red = reduce_mod_gamma(metric, &s)?;
        rows.push(json!({
            "t": t,
            "x": vec_of(&s.x),
            "velocity": vec_of(&s.k),
            "j": vec_of(&s.j),
            "dj": vec_of(&s.dj),
            "g_j_velocity": value,
            "reduced": red,
        }));
    }
    let mut env = ctx.envelope(
        CommandName::Jacobi,
        json!({ "g_dj_velocity": slope, "stations": rows }),
    );
    env.checks.push(CheckOutcome::below("g(J, γ') affine along the ray", drift, 1e-8));
    Ok(env)
}

fn cmd_conjugate(ctx: &Context) -> Result<ResultEnvelope, CliError> {
    let metric = ctx.metric();
    let m = metric.dim();
    let spec = ctx.scene.conjugate.clone().unwrap_or_else(|| {
        let mut unit = vec![0.0; m - 1];
        // the equator of the Einstein static chart; any direction elsewhere
        unit[m - 2] = 1.0;
        ConjugateSpec {
            ray: RayData {
                anchor: origin(metric),
                unit,
            },
            tau: 0.0,
            t_range: (0.0, 10.0),
        }
    });
    let ray = ctx.ray(&spec.ray)?;
    let opts = ScanOptions {
        nodes: ctx.scene.sampling.t_nodes,
        tol: ctx.tol(),
        ..Default::default()
    };
    let roots = conjugate_scan(metric, &ray, spec.tau, spec.t_range, &opts)?;
    let mut env = ctx.envelope(
        CommandName::Conjugate,
        json!({ "tau": spec.tau, "t_range": spec.t_range, "roots": roots }),
    );
    if ctx.entry.oracles.straight_geodesics {
        env.checks.push(
            CheckOutcome::below("no conjugate points", roots.len() as f64, 0.5)
                .with_detail("flat metric"),
        );
    }
    if let Some(d) = ctx.entry.oracles.first_conjugate {
        let expect = spec.tau + d;
        if spec.t_range.0 <= spec.tau && expect <= spec.t_range.1 {
            let err = roots
                .iter()
                .find(|&&r| r > spec.tau + 1e-6)
                .map_or(f64::MAX, |r| (r - expect).abs());
            env.checks.push(
                CheckOutcome::below("first conjugate point", err, 1e-3)
                    .with_detail(format!("expected at {expect}")),
            );
        }
    }
    Ok(env)
}

fn cmd_contact(ctx: &Context) -> Result<ResultEnvelope, CliError> {
    let metric = ctx.metric();
    let spec = ctx.scene.contact.clone().unwrap_or_else(|| ContactSpec {
        chart: ChartChoice {
            kind: ChartName::Angle,
            level: 0.0,
        },
        tangents: [
            (0.0, [1.0, 0.0, 0.0]),
            (0.4, [0.0, 0.0, 1.0]),
            (std::f64::consts::FRAC_PI_2, [0.0, 1.0, 0.0]),
        ]
        .into_iter()
        .map(|(th, d)| ChartTangent {
            x: vec![0.0, 0.0],
            u: vec![th],
            dx: d[..2].to_vec(),
            du: d[2..].to_vec(),
        })
        .collect(),
    });
    let chart = spec.chart.chart();
    let oracle = ctx
        .entry
        .oracles
        .mink3_contact
        .filter(|_| chart.kind == ChartKind::Angle && chart.level == 0.0);
    let mut worst = 0.0_f64;
    let mut rows = Vec::new();
    for t in &spec.tangents {
        let st = tangent_from_chart_velocity(metric, &chart, &t.x, &t.u, &t.dx, &t.du)
            .map_err(|e| match e {
                lightray::Error::Dimension { .. } | lightray::Error::InvalidArgument(_) => config(e),
                other => CliError::Numerical(other),
            })?;
        let value = contact_value(metric, &st);
        let exact = match oracle {
            Some(f) if t.dx.len() == 2 && t.du.len() == 1 => {
                let e = f(t.u[0], [t.dx[0], t.dx[1], t.du[0]]);
                worst = worst.max((value - e).abs());
                Some(e)
            }
            _ => None,
        };
        rows.push(json!({ "tangent": t, "value": value, "exact": exact }));
    }
    let mut env = ctx.envelope(CommandName::Contact, json!({ "values": rows }));
    if oracle.is_some() {
        env.checks.push(CheckOutcome::below("scene tangents vs exact contact form", worst, 1e-8));
        let report = lightray::checks::run_check(1, &CheckConfig {
            seed: ctx.seed,
            tol: ctx.tol(),
        });
        env.checks.push(
            CheckOutcome::below("random tangents vs exact contact form", report.residual, 1e-8)
                .with_detail(report.detail),
        );
        if !report.passed {
            env.checks.last_mut().expect("just pushed").passed = false;
        }
    }
    Ok(env)
}

fn cmd_isotopy(ctx: &Context) -> Result<ResultEnvelope, CliError> {
    let metric = ctx.metric();
    let spec = ctx.scene.isotopy.clone().unwrap_or(IsotopySpec {
        curve: "past_timelike".into(),
        expect: None,
    });
    let curve = ctx.scene.curve(&spec.curve)?;
    let (a, b) = curve.interval();
    let grid = uniform_grid(a, b, ctx.scene.sampling.s_nodes.max(2));
    let n = ctx
        .scene
        .sampling
        .sphere
        .unwrap_or_else(|| default_sphere_samples(metric.dim()));
    let field = isotopy_from_curve(metric, &curve, n, &grid, &ctx.tol())?;
    let profile = sign_profile(metric, &field);
    let class = classify_profile(&profile, &ClassifyOptions::default());
    let pointwise = pointwise_verdict(metric, &field, 0.0)?;
    let mut env = ctx.envelope(
        CommandName::Isotopy,
        json!({
            "curve": spec.curve,
            "samples": n,
            "s_nodes": grid.len(),
            "max_abs": profile.max_abs(),
            "band": class.band,
            "transitions": class.transitions(),
            "pointwise_verdict": pointwise,
        }),
    );
    env.classifications.push(classification(&spec.curve, &class));
    env.checks.push(CheckOutcome {
        name: "sign criterion matches pointwise causal character".into(),
        passed: pointwise == class.verdict,
        residual: if pointwise == class.verdict { 0.0 } else { 1.0 },
        threshold: 0.5,
        detail: String::new(),
    });
    if let Some(want) = spec.expect {
        env.checks.push(CheckOutcome {
            name: "expected class".into(),
            passed: class.class == want,
            residual: if class.class == want { 0.0 } else { 1.0 },
            threshold: 0.5,
            detail: format!("expected {want:?}, got {:?}", class.class),
        });
    }
    env.profile = Some(profile);
    Ok(env)
}

fn cmd_recover(ctx: &Context) -> Result<ResultEnvelope, CliError> {
    let spec = ctx.scene.recover.clone().unwrap_or(RecoverSpec {
        variation: VariationSpec::ExampleMu {
            interval: (-1.0, 1.0),
        },
        seed: (0.0, 0.0),
    });
    let metric = ctx.metric();
    let var: Box<dyn GeodesicVariation> = match &spec.variation {
        VariationSpec::ExampleMu { interval } => {
            if metric.dim() != 3 || !ctx.entry.oracles.straight_geodesics {
                return Err(CliError::Config(
                    "the example_mu variation lives in Minkowski-3".into(),
                ));
            }
            Box::new(ExampleMuVariation {
                interval: *interval,
            })
        }
        VariationSpec::SkyCircle {
            event,
            interval,
            theta0,
            omega,
        } => {
            ctx.dim_check("sky circle event", event, metric.dim())?;
            Box::new(
                SkyCurveVariation::circle(
                    ctx.entry.metric.clone(),
                    Event::new(event).map_err(config)?,
                    *interval,
                    *theta0,
                    *omega,
                )
                .map_err(config)?,
            )
        }
        VariationSpec::NullLift { curve } => Box::new(NullCurveLift::new(
            ctx.entry.metric.clone(),
            Arc::new(ctx.scene.curve(curve)?),
        )),
    };
    let opts = PipelineOptions {
        recover: RecoverOptions {
            nodes: ctx.scene.sampling.s_nodes,
            tol: ctx.tol(),
            ..Default::default()
        },
        samples: ctx.scene.sampling.sphere,
        ..Default::default()
    };
    let out = classify_celestial_curve(metric, var.as_ref(), spec.seed, &opts)?;
    let rec = &out.recovery;
    let mut env = ctx.envelope(
        CommandName::Recover,
        json!({
            "variation": spec.variation,
            "seed": spec.seed,
            "recovery": rec,
            "transitions": out.class.transitions(),
        }),
    );
    env.classifications.push(classification("recovered curve", &out.class));
    env.checks.push(CheckOutcome::below("μ' null", rec.max_null_residual, 1e-8));
    env.checks.push(CheckOutcome::below(
        "g(J, γ') vanishes along μ",
        rec.max_contact_residual,
        1e-8,
    ));
    match &spec.variation {
        VariationSpec::ExampleMu { .. } => {
            let max_t = rec.t.iter().fold(0.0_f64, |a, t| a.max(t.abs()));
            let mut dev = 0.0_f64;
            for (s, mu) in rec.s.iter().zip(&rec.mu) {
                let e = example_mu_curve(*s);
                dev = (0..3).fold(dev, |d, k| d.max((mu[k] - e[k]).abs()));
            }
            env.checks.push(CheckOutcome::below("max |t(s)|", max_t, 1e-6));
            env.checks.push(CheckOutcome::below("μ vs closed form", dev, 1e-6));
        }
        VariationSpec::NullLift { curve } => {
            let c = ctx.scene.curve(curve)?;
            let mut dev = 0.0_f64;
            for (s, mu) in rec.s.iter().zip(&rec.mu) {
                let nu = c.position(*s)?;
                dev = mu.iter().zip(nu.iter()).fold(dev, |d, (a, b)| d.max((a - b).abs()));
            }
            env.checks.push(CheckOutcome::below("μ vs lifted curve", dev, 1e-6));
        }
        VariationSpec::SkyCircle { event, .. } => {
            let mut dev = 0.0_f64;
            for mu in &rec.mu {
                dev = mu.iter().zip(event).fold(dev, |d, (a, b)| d.max((a - b).abs()));
            }
            env.checks.push(CheckOutcome::below("μ stays at the sky's event", dev, 1e-6));
        }
    }
    env.profile = Some(out.profile);
    Ok(env)
}

fn cmd_cotton(ctx: &Context) -> Result<ResultEnvelope, CliError> {
    let metric = ctx.metric();
    if metric.dim() != 3 {
        return Err(CliError::Config(format!(
            "the Cotton tensor is computed in dimension 3, metric has {}",
            metric.dim()
        )));
    }
    let spec = ctx.scene.cotton.clone().unwrap_or_else(|| {
        let mut p = origin(metric);
        if metric.name().starts_with("perturbed") {
            p[0] = 0.25;
        }
        CottonSpec { points: vec![p] }
    });
    let mut rows = Vec::new();
    let mut antisym = 0.0_f64;
    let mut trace = 0.0_f64;
    for p in &spec.points {
        ctx.dim_check("cotton point", p, 3)?;
        let c = cotton_tensor(metric, p)?;
        let g = metric.components(p);
        let det = g.determinant();
        let ginv = g.try_inverse().ok_or(CliError::Numerical(lightray::Error::SingularMetric {
            at: p.clone(),
            det,
        }))?;
        let scale = c.max_abs().max(1.0);
        let mut comps = vec![vec![vec![0.0; 3]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    comps[i][j][k] = c.get(i, j, k);
                    antisym = antisym.max((c.get(i, j, k) + c.get(i, k, j)).abs() / scale);
                }
            }
        }
        for k in 0..3 {
            let tr: f64 = (0..3)
                .flat_map(|i| (0..3).map(move |j| (i, j)))
                .map(|(i, j)| ginv[(i, j)] * c.get(i, j, k))
                .sum();
            trace = trace.max(tr.abs() / scale);
        }
        rows.push(json!({ "point": p, "components": comps, "max_abs": c.max_abs() }));
    }
    let mut env = ctx.envelope(CommandName::Cotton, json!({ "points": rows }));
    env.checks.push(CheckOutcome::below("antisymmetric in the last pair", antisym, 1e-8));
    env.checks.push(CheckOutcome::below("trace-free", trace, 1e-6));
    Ok(env)
}

fn cmd_chart(ctx: &Context) -> Result<ResultEnvelope, CliError> {
    let metric = ctx.metric();
    let m = metric.dim();
    let spec = ctx.scene.chart.clone().unwrap_or_else(|| {
        let level = if metric.name().starts_with("perturbed") { 0.25 } else { 0.0 };
        ChartSpec {
            chart: ChartChoice {
                kind: ChartName::Hemisphere,
                level,
            },
            rays: vec![ChartPoint {
                x: origin(metric)[1..].to_vec(),
                u: vec![0.0; m - 2],
            }],
        }
    });
    let chart = spec.chart.chart();
    let mut rows = Vec::new();
    let mut min_det = f64::MAX;
    let mut block = 0.0_f64;
    for r in &spec.rays {
        ctx.dim_check("chart x", &r.x, m - 1)?;
        ctx.dim_check("chart u", &r.u, chart.sphere_dim(m))?;
        let cm = coordinate_change(metric, &chart, &r.x, &r.u)?;
        let det = cm.det_a();
        min_det = min_det.min(det.abs());
        let nx = m - 1;
        let nu = r.u.len();
        for row in 0..nx + nu {
            for col in nx..nx + nu {
                let want = if row == col - nx { 1.0 } else { 0.0 };
                block = block.max((cm.full[(row, col)] - want).abs());
            }
        }
        let full: Vec<Vec<f64>> = (0..cm.full.nrows())
            .map(|i| cm.full.row(i).iter().copied().collect())
            .collect();
        rows.push(json!({ "x": r.x, "u": r.u, "matrix": full, "det_a": det }));
    }
    let mut env = ctx.envelope(CommandName::Chart, json!({ "level": chart.level, "rays": rows }));
    env.checks.push(CheckOutcome {
        name: "A invertible".into(),
        passed: min_det > 1e-12,
        residual: min_det,
        threshold: 1e-12,
        detail: "min |det A| must exceed the threshold".into(),
    });
    env.checks.push(CheckOutcome::below("u̇ columns are [I; 0]", block, 1e-8));
    Ok(env)
}

fn cmd_selftest(ctx: &Context) -> Result<ResultEnvelope, CliError> {
    let reports = run_all(&CheckConfig {
        seed: ctx.seed,
        tol: ctx.tol(),
    });
    for r in &reports {
        eprintln!("{r}");
    }
    let passed = reports.iter().filter(|r| r.passed).count();
    let mut env = ctx.envelope(
        CommandName::Selftest,
        json!({ "criteria": reports.len(), "passed": passed }),
    );
    env.checks = reports
        .into_iter()
        .map(|r| CheckOutcome {
            name: format!("{} {}", r.id, r.name),
            passed: r.passed,
            residual: if r.residual.is_finite() { r.residual } else { f64::MAX },
            threshold: if r.threshold.is_finite() { r.threshold } else { 0.0 },
            detail: r.detail,
        })
        .collect();
    Ok(env)
}
