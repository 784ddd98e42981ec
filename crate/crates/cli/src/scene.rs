//! Scene configuration: metric, named curves, sampling, tolerances and the
//! per-command sections.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use lightray::catalog::{self, Bump, CatalogEntry, Oracles, PerturbedMinkowski};
use lightray::curve::{CoefficientCurve, BASIS_LEN};
use lightray::isotopy::ProfileClass;
use lightray::rays::RayChart;
use lightray::table::TableMetric;
use lightray::{MetricRef, Tolerances};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub metric: MetricSpec,
    #[serde(default)]
    pub curves: Vec<CurveSpec>,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ray: Option<RaySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sky: Option<SkySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jacobi: Option<JacobiSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conjugate: Option<ConjugateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact: Option<ContactSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isotopy: Option<IsotopySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recover: Option<RecoverSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cotton: Option<CottonSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartSpec>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            metric: MetricSpec::Catalog(CatalogSpec {
                name: "minkowski-3".into(),
                epsilon: None,
            }),
            curves: Vec::new(),
            sampling: Sampling::default(),
            tolerances: Tolerances::default(),
            output: OutputSpec::default(),
            ray: None,
            sky: None,
            jacobi: None,
            conjugate: None,
            contact: None,
            isotopy: None,
            recover: None,
            cotton: None,
            chart: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSpec {
    Catalog(CatalogSpec),
    Table(TableMetric),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogSpec {
    pub name: String,
    /// Width of the curved slab of the perturbed metric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

/// Coordinates as coefficient rows over `{1, s, s², sin s, cos s, s sin s, s cos s}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub name: String,
    pub interval: (f64, f64),
    pub coords: Vec<[f64; BASIS_LEN]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sampling {
    /// Sphere samples per isotopy; the dimension default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sphere: Option<usize>,
    pub s_nodes: usize,
    pub t_nodes: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            sphere: None,
            s_nodes: lightray::isotopy::DEFAULT_S_NODES,
            t_nodes: 1000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartName {
    #[default]
    Hemisphere,
    Angle,
}

/// Which chart and Cauchy level anchor rays.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChartChoice {
    pub kind: ChartName,
    pub level: f64,
}

impl ChartChoice {
    pub fn chart(&self) -> RayChart {
        match self.kind {
            ChartName::Hemisphere => RayChart::hemisphere(),
            ChartName::Angle => RayChart::angle(),
        }
        .at_level(self.level)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaySpec {
    pub event: Vec<f64>,
    /// Coordinate components of a future null vector at `event`.
    pub direction: Vec<f64>,
    #[serde(default)]
    pub chart: ChartChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkySpec {
    pub event: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default)]
    pub chart: ChartChoice,
}

/// A light ray by anchor event and unit spatial frame direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RayData {
    pub anchor: Vec<f64>,
    pub unit: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JacobiSpec {
    pub ray: RayData,
    pub j: Vec<f64>,
    pub dj: Vec<f64>,
    pub stations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConjugateSpec {
    pub ray: RayData,
    #[serde(default)]
    pub tau: f64,
    pub t_range: (f64, f64),
}

/// A tangent vector to N in chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartTangent {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub dx: Vec<f64>,
    pub du: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactSpec {
    pub chart: ChartChoice,
    pub tangents: Vec<ChartTangent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsotopySpec {
    pub curve: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<ProfileClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariationSpec {
    /// The celestial-curve example of Minkowski-3.
    ExampleMu {
        #[serde(default = "unit_interval")]
        interval: (f64, f64),
    },
    /// Rays through one event with directions on a circle.
    SkyCircle {
        event: Vec<f64>,
        interval: (f64, f64),
        theta0: f64,
        omega: f64,
    },
    /// Rays tangent to a named null curve.
    NullLift { curve: String },
}

fn unit_interval() -> (f64, f64) {
    (-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverSpec {
    pub variation: VariationSpec,
    #[serde(default)]
    pub seed: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CottonSpec {
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    #[serde(default)]
    pub chart: ChartChoice,
    pub rays: Vec<ChartPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartPoint {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl SceneConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let scene: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let t = &self.tolerances;
        if !(t.rtol > 0.0 && t.atol > 0.0 && t.max_steps > 0) {
            return Err(CliError::Config("tolerances must be positive".into()));
        }
        let m = self.metric_entry()?.metric.dim();
        for c in &self.curves {
            if c.coords.len() != m {
                return Err(CliError::Config(format!(
                    "curve '{}' has {} coordinates, metric has dimension {m}",
                    c.name,
                    c.coords.len()
                )));
            }
        }
        Ok(())
    }

    pub fn metric_entry(&self) -> Result<CatalogEntry, CliError> {
        match &self.metric {
            MetricSpec::Catalog(c) => {
                let mut entry = catalog::by_name(&c.name).map_err(config)?;
                if let Some(eps) = c.epsilon {
                    if !entry.name.starts_with("perturbed") {
                        return Err(CliError::Config(format!(
                            "'epsilon' only applies to the perturbed metric, not {}",
                            entry.name
                        )));
                    }
                    let metric = PerturbedMinkowski::new(eps, Bump::default()).map_err(config)?;
                    entry.name = lightray::Metric::name(&metric);
                    entry.metric = Arc::new(metric);
                }
                Ok(entry)
            }
            MetricSpec::Table(t) => {
                t.validate().map_err(config)?;
                Ok(CatalogEntry {
                    name: t.name.clone(),
                    metric: Arc::new(t.clone()) as MetricRef,
                    oracles: Oracles::default(),
                })
            }
        }
    }

    /// A named curve from the scene, else one of the built-in curves.
    pub fn curve(&self, name: &str) -> Result<CoefficientCurve, CliError> {
        if let Some(c) = self.curves.iter().find(|c| c.name == name) {
            return CoefficientCurve::new(c.interval, c.coords.clone()).map_err(config);
        }
        let m = self.metric_entry()?.metric.dim();
        builtin_curve(name, m).ok_or_else(|| CliError::Config(format!("unknown curve '{name}'")))
    }
}

fn config(e: lightray::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// Built-in test curves, in dimension `m`.
pub fn builtin_curve(name: &str, m: usize) -> Option<CoefficientCurve> {
    let mut rows = vec![[0.0; BASIS_LEN]; m];
    let interval = match name {
        "past_timelike" => {
            rows[0][1] = -1.0;
            (0.0, 1.0)
        }
        "future_timelike" => {
            rows[0][1] = 1.0;
            (0.0, 1.0)
        }
        "spacelike" => {
            rows[1][1] = 1.0;
            (0.0, 1.0)
        }
        // (s²/2, s sin s + cos s, −s cos s + sin s)
        "example_mu" if m == 3 => {
            rows[0][2] = 0.5;
            rows[1][4] = 1.0;
            rows[1][5] = 1.0;
            rows[2][3] = 1.0;
            rows[2][6] = -1.0;
            (-1.0, 1.0)
        }
        // (−s, cos s, sin s)
        "null_helix" if m == 3 => {
            rows[0][1] = -1.0;
            rows[1][4] = 1.0;
            rows[2][3] = 1.0;
            (-1.0, 1.0)
        }
        _ => return None,
    };
    CoefficientCurve::new(interval, rows).ok()
}

pub const BUILTIN_CURVES: [&str; 5] = [
    "past_timelike",
    "future_timelike",
    "spacelike",
    "example_mu",
    "null_helix",
];
