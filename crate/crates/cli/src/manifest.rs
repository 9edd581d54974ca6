//! Manifold files: a small JSON document describing a chart.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use statman_core::{builtin_chart, Chart, Family, FisherSource, GammaChart, JetStrategy, ModelSpec};

use crate::error::CliError;

pub const SCHEMA: &str = "statman/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldFile {
    pub schema: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<BuiltinSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomSection>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub jets: JetSettings,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinSection {
    pub family: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSection {
    /// Row-major expression matrix.
    pub metric: Vec<Vec<String>>,
    #[serde(default)]
    pub cubic: Vec<CubicEntry>,
}

/// One cubic component with one-based indices; the remaining permutations
/// are filled in by symmetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubicEntry {
    pub indices: [usize; 3],
    pub expr: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JetMode {
    #[default]
    Analytic,
    Fd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JetSettings {
    #[serde(default)]
    pub mode: JetMode,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

impl Default for JetSettings {
    fn default() -> Self {
        Self {
            mode: JetMode::Analytic,
            fd_step: default_fd_step(),
        }
    }
}

fn default_fd_step() -> f64 {
    statman_core::jets::DEFAULT_FD_STEP
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Default check tolerance for charts with analytic jets.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Default check tolerance when any field uses finite differences.
    #[serde(default = "default_fd_tol")]
    pub fd_tol: f64,
    /// Agreement required between quadrature and closed-form Fisher tensors.
    #[serde(default = "default_quad_tol")]
    pub quad_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            fd_tol: default_fd_tol(),
            quad_tol: default_quad_tol(),
        }
    }
}

fn default_tol() -> f64 {
    1e-8
}

fn default_fd_tol() -> f64 {
    1e-4
}

fn default_quad_tol() -> f64 {
    1e-6
}

/// A parsed file together with the chart it describes.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub file: ManifoldFile,
    pub chart: Chart,
}

impl Loaded {
    /// The file's tolerance for this chart's kind of jets.
    pub fn default_tol(&self) -> f64 {
        if self.chart.uses_finite_differences() {
            self.file.tolerances.fd_tol
        } else {
            self.file.tolerances.tol
        }
    }
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text).map_err(|message| CliError::Manifest {
        path: path.display().to_string(),
        message,
    })
}

/// Parses and builds a chart from file contents.
pub fn parse(text: &str) -> Result<Loaded, String> {
    let file: ManifoldFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let chart = build(&file)?;
    Ok(Loaded { file, chart })
}

fn build(file: &ManifoldFile) -> Result<Chart, String> {
    if file.schema != SCHEMA {
        return Err(format!("unsupported schema '{}', expected '{SCHEMA}'", file.schema));
    }
    let family = match (&file.builtin, &file.custom) {
        (Some(b), None) => builtin_family(b)?,
        (None, Some(c)) => custom_family(file, c)?,
        (Some(_), Some(_)) => return Err("give exactly one of 'builtin' and 'custom', not both".into()),
        (None, None) => return Err("missing 'builtin' or 'custom' section".into()),
    };
    let mut spec = ModelSpec::new(family).with_label(file.name.clone());
    if let Some(domain) = &file.domain {
        spec = spec.with_domain(domain.iter().map(|[lo, hi]| (*lo, *hi)).collect());
    }
    let mut chart = builtin_chart(&spec).map_err(|e| e.to_string())?;
    if let Some(dim) = file.dim {
        if dim != chart.dim() {
            return Err(format!("dim is {dim} but the chart has dimension {}", chart.dim()));
        }
    }
    if let Some(coords) = &file.coords {
        if coords.as_slice() != chart.coords() {
            return Err(format!(
                "coords {coords:?} do not match the chart's {:?}",
                chart.coords()
            ));
        }
    }
    let JetSettings { mode, fd_step } = file.jets;
    if mode == JetMode::Fd {
        if !(fd_step > 0.0 && fd_step.is_finite()) {
            return Err(format!("fd_step must be positive, got {fd_step}"));
        }
        chart = chart.with_strategy(JetStrategy::FiniteDifference { step: fd_step });
    }
    let t = file.tolerances;
    for (name, v) in [("tol", t.tol), ("fd_tol", t.fd_tol), ("quad_tol", t.quad_tol)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(format!("tolerance {name} must be positive, got {v}"));
        }
    }
    Ok(chart)
}

fn params<T: serde::de::DeserializeOwned>(family: &str, params: &Map<String, Value>) -> Result<T, String> {
    serde_json::from_value(Value::Object(params.clone())).map_err(|e| format!("bad params for {family}: {e}"))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DimParams {
    n: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SphereParams {
    #[serde(default = "unit")]
    radius: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NormalParams {
    #[serde(default)]
    source: FisherSource,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GammaParams {
    #[serde(default)]
    chart: GammaChart,
    #[serde(default)]
    source: FisherSource,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FlatParams {
    #[serde(default = "two")]
    n: usize,
    entries: Option<Vec<FlatEntry>>,
}

fn two() -> usize {
    2
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FlatEntry {
    indices: [usize; 3],
    value: f64,
}

fn builtin_family(b: &BuiltinSection) -> Result<Family, String> {
    let f = b.family.as_str();
    Ok(match f {
        "euclidean" => Family::Euclidean {
            n: params::<DimParams>(f, &b.params)?.n,
        },
        "sphere" => Family::Sphere {
            radius: params::<SphereParams>(f, &b.params)?.radius,
        },
        "hyperbolic" => {
            params::<NoParams>(f, &b.params)?;
            Family::Hyperbolic
        }
        "normal_fisher" => Family::NormalFisher {
            source: params::<NormalParams>(f, &b.params)?.source,
        },
        "gamma_fisher" => {
            let p: GammaParams = params(f, &b.params)?;
            Family::GammaFisher {
                chart: p.chart,
                source: p.source,
            }
        }
        "flat_with_cubic" => {
            let p: FlatParams = params(f, &b.params)?;
            let entries = match p.entries {
                None => match ModelSpec::flat_with_cubic().family {
                    Family::FlatWithCubic { entries, .. } => entries,
                    _ => unreachable!("flat_with_cubic() builds a FlatWithCubic family"),
                },
                Some(list) => list
                    .into_iter()
                    .map(|e| Ok((zero_based(e.indices, p.n)?, e.value)))
                    .collect::<Result<_, String>>()?,
            };
            Family::FlatWithCubic { n: p.n, entries }
        }
        other => {
            return Err(format!(
                "unknown family '{other}' (expected euclidean, sphere, hyperbolic, normal_fisher, gamma_fisher or flat_with_cubic)"
            ))
        }
    })
}

fn zero_based(indices: [usize; 3], n: usize) -> Result<[usize; 3], String> {
    if indices.iter().any(|&i| i == 0 || i > n) {
        return Err(format!("cubic entry {indices:?} has an index outside 1..={n}"));
    }
    Ok(indices.map(|i| i - 1))
}

fn custom_family(file: &ManifoldFile, c: &CustomSection) -> Result<Family, String> {
    let coords = file.coords.clone().ok_or("a custom chart needs 'coords'")?;
    let n = coords.len();
    let cubic = c
        .cubic
        .iter()
        .map(|e| Ok((zero_based(e.indices, n)?, e.expr.clone())))
        .collect::<Result<_, String>>()?;
    Ok(Family::Custom {
        coords,
        metric: c.metric.clone(),
        cubic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPHERE: &str = r#"{
        "schema": "statman/1",
        "name": "unit sphere",
        "dim": 2,
        "coords": ["theta", "phi"],
        "builtin": {"family": "sphere", "params": {"radius": 1.0}}
    }"#;

    #[test]
    fn parses_a_builtin() {
        let loaded = parse(SPHERE).unwrap();
        assert_eq!(loaded.chart.label(), "unit sphere");
        assert_eq!(loaded.default_tol(), 1e-8);
        assert_eq!(loaded.chart.domain()[0], (0.3, 2.8));
    }

    #[test]
    fn parses_a_custom_chart_with_one_based_cubic() {
        let text = r#"{
            "schema": "statman/1",
            "name": "polar",
            "coords": ["r", "t"],
            "custom": {"metric": [["1", "0"], ["0", "r^2"]], "cubic": [{"indices": [2, 1, 1], "expr": "r"}]},
            "box": [[0.5, 2], [0, 3]],
            "jets": {"mode": "fd"}
        }"#;
        let loaded = parse(text).unwrap();
        assert!(loaded.chart.uses_finite_differences());
        assert_eq!(loaded.default_tol(), 1e-4);
        assert!(loaded.chart.cubic_field(0, 1, 0).as_constant().is_none());
    }

    #[test]
    fn rejects_malformed_files() {
        let cases = [
            (SPHERE.replace("statman/1", "statman/0"), "unsupported schema"),
            (SPHERE.replace("\"dim\": 2", "\"dim\": 3"), "dimension"),
            (SPHERE.replace("\"phi\"", "\"psi\""), "coords"),
            (
                SPHERE.replace("\"radius\": 1.0", "\"radius\": 1.0, \"extra\": 1"),
                "unknown field",
            ),
            (SPHERE.replace("sphere\"", "torus\""), "unknown family"),
            (SPHERE.replace("\"name\"", "\"nom\""), "unknown field"),
        ];
        for (text, needle) in cases {
            let err = parse(&text).unwrap_err();
            assert!(err.contains(needle), "{err}");
        }
    }

    #[test]
    fn conflicting_cubic_entries_name_the_entry() {
        let text = r#"{
            "schema": "statman/1",
            "name": "bad",
            "coords": ["x", "y"],
            "custom": {
                "metric": [["1", "0"], ["0", "1"]],
                "cubic": [{"indices": [1, 1, 2], "expr": "x"}, {"indices": [2, 1, 1], "expr": "y"}]
            }
        }"#;
        let err = parse(text).unwrap_err();
        assert!(err.contains("[2, 1, 1]"), "{err}");
    }

    #[test]
    fn out_of_range_cubic_indices_are_rejected() {
        let text = r#"{
            "schema": "statman/1",
            "name": "bad",
            "coords": ["x", "y"],
            "custom": {"metric": [["1", "0"], ["0", "1"]], "cubic": [{"indices": [0, 1, 1], "expr": "1"}]}
        }"#;
        assert!(parse(text).unwrap_err().contains("outside 1..=2"));
    }
}
