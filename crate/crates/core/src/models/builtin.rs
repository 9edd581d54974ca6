//! Built-in model families.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::expr::parse_expression;
use super::fisher::{
    fisher_by_quadrature, fisher_with_rule, FisherTensors, GammaLikelihood, GammaParams, LogLikelihood,
    NormalLikelihood,
};
use crate::error::{Error, Result};
use crate::jets::{ScalarField, ValueFn, DEFAULT_FD_STEP};
use crate::structure::{complete_cubic, Chart};

/// Where a Fisher chart's fields come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherSource {
    /// Closed-form expressions with analytic jets.
    #[default]
    ClosedForm,
    /// A frozen quadrature rule with finite-difference jets.
    Quadrature,
}

/// Coordinates on the gamma family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaChart {
    #[default]
    ShapeRate,
    Natural,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Euclidean {
        n: usize,
    },
    Sphere {
        radius: f64,
    },
    Hyperbolic,
    NormalFisher {
        #[serde(default)]
        source: FisherSource,
    },
    GammaFisher {
        #[serde(default)]
        chart: GammaChart,
        #[serde(default)]
        source: FisherSource,
    },
    /// Euclidean metric with constant cubic entries (zero-based indices).
    FlatWithCubic {
        n: usize,
        entries: Vec<([usize; 3], f64)>,
    },
    /// Expression-defined chart (zero-based cubic indices).
    Custom {
        coords: Vec<String>,
        metric: Vec<Vec<String>>,
        cubic: Vec<([usize; 3], String)>,
    },
}

/// A family plus an optional sampling box and label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub domain: Option<Vec<(f64, f64)>>,
    pub label: Option<String>,
}

impl ModelSpec {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            domain: None,
            label: None,
        }
    }

    pub fn euclidean(n: usize) -> Self {
        Self::new(Family::Euclidean { n })
    }

    pub fn sphere(radius: f64) -> Self {
        Self::new(Family::Sphere { radius })
    }

    pub fn hyperbolic() -> Self {
        Self::new(Family::Hyperbolic)
    }

    pub fn normal_fisher() -> Self {
        Self::new(Family::NormalFisher {
            source: FisherSource::ClosedForm,
        })
    }

    pub fn gamma_fisher(chart: GammaChart, source: FisherSource) -> Self {
        Self::new(Family::GammaFisher { chart, source })
    }

    /// `g = δ` with `C₁₁₁ = 2`, everything else zero.
    pub fn flat_with_cubic() -> Self {
        Self::new(Family::FlatWithCubic {
            n: 2,
            entries: vec![([0, 0, 0], 2.0)],
        })
    }

    pub fn with_domain(mut self, domain: Vec<(f64, f64)>) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn numbered(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

fn parsed(src: &str, coords: &[String]) -> Result<ScalarField> {
    let e = parse_expression(src, coords)?;
    Ok(match e.as_constant() {
        Some(c) => ScalarField::constant(c),
        None => ScalarField::expression(e),
    })
}

fn metric_from(rows: &[&[&str]], coords: &[String]) -> Result<Vec<ScalarField>> {
    rows.iter().flat_map(|r| r.iter()).map(|s| parsed(s, coords)).collect()
}

fn identity_metric(n: usize) -> Vec<ScalarField> {
    (0..n * n)
        .map(|k| ScalarField::constant(if k / n == k % n { 1.0 } else { 0.0 }))
        .collect()
}

fn check_box(
    domain: &[(f64, f64)],
    axis: usize,
    name: &str,
    lo_exclusive: Option<f64>,
    hi_exclusive: Option<f64>,
) -> Result<()> {
    let Some(&(lo, hi)) = domain.get(axis) else {
        return Ok(());
    };
    if let Some(bound) = lo_exclusive {
        if !(lo > bound) {
            return Err(Error::Param(format!(
                "box for {name} must lie above {bound}, got [{lo}, {hi}]"
            )));
        }
    }
    if let Some(bound) = hi_exclusive {
        if !(hi < bound) {
            return Err(Error::Param(format!(
                "box for {name} must lie below {bound}, got [{lo}, {hi}]"
            )));
        }
    }
    Ok(())
}

/// The finest refinement level needed at the box corners and centre.
fn frozen_level(ll: &dyn LogLikelihood, domain: &[(f64, f64)], quad_tol: f64) -> Result<usize> {
    let (a, b) = (domain[0], domain[1]);
    let probes = [
        [a.0, b.0],
        [a.0, b.1],
        [a.1, b.0],
        [a.1, b.1],
        [0.5 * (a.0 + a.1), 0.5 * (b.0 + b.1)],
    ];
    let mut level = 0;
    for p in probes {
        level = level.max(fisher_by_quadrature(ll, &p, 3, quad_tol)?.level);
    }
    Ok(level)
}

/// Quadrature tolerance used when freezing a chart's rule.
const FREEZE_TOL: f64 = 1e-12;

/// Builds the chart for a model spec.
///
/// # Errors
/// [`Error::Param`] for invalid parameters or boxes outside the family's
/// domain; parse errors for custom expressions.
pub fn builtin_chart(spec: &ModelSpec) -> Result<Chart> {
    let (name, chart, default_box) = match &spec.family {
        Family::Euclidean { n } => {
            if *n < 2 {
                return Err(Error::Param(format!("euclidean needs n >= 2, got {n}")));
            }
            let c = Chart::new(
                "euclidean",
                numbered(*n),
                identity_metric(*n),
                complete_cubic(*n, vec![])?,
            )?;
            (format!("euclidean({n})"), c, vec![(-1.0, 1.0); *n])
        }
        Family::Sphere { radius } => {
            if !(radius.is_finite() && *radius > 0.0) {
                return Err(Error::Param(format!("sphere radius must be positive, got {radius}")));
            }
            let coords = names(&["theta", "phi"]);
            let r2 = radius * radius;
            let metric = vec![
                ScalarField::constant(r2),
                ScalarField::constant(0.0),
                ScalarField::constant(0.0),
                parsed(&format!("{r2:?}*sin(theta)^2"), &coords)?,
            ];
            let c = Chart::new("sphere", coords, metric, complete_cubic(2, vec![])?)?;
            (format!("sphere({radius})"), c, vec![(0.3, 2.8), (0.0, 2.0 * PI)])
        }
        Family::Hyperbolic => {
            let coords = names(&["x", "y"]);
            let metric = metric_from(&[&["1/y^2", "0"], &["0", "1/y^2"]], &coords)?;
            let c = Chart::new("hyperbolic", coords, metric, complete_cubic(2, vec![])?)?;
            ("hyperbolic".to_string(), c, vec![(-1.0, 1.0), (0.5, 2.0)])
        }
        Family::NormalFisher { source } => {
            let coords = names(&["mu", "sigma"]);
            let default_box = vec![(-1.0, 1.0), (0.5, 2.0)];
            let domain = spec.domain.clone().unwrap_or_else(|| default_box.clone());
            check_box(&domain, 1, "sigma", Some(0.0), None)?;
            let (metric, cubic) = match source {
                FisherSource::ClosedForm => {
                    let metric = metric_from(&[&["1/sigma^2", "0"], &["0", "2/sigma^2"]], &coords)?;
                    let cubic = complete_cubic(
                        2,
                        vec![
                            ([0, 0, 1], parsed("2/sigma^3", &coords)?),
                            ([1, 1, 1], parsed("8/sigma^3", &coords)?),
                        ],
                    )?;
                    (metric, cubic)
                }
                FisherSource::Quadrature => {
                    let ll: Arc<dyn LogLikelihood> = Arc::new(NormalLikelihood);
                    let level = frozen_level(ll.as_ref(), &domain, FREEZE_TOL)?;
                    quadrature_fields(ll, level, 2)
                }
            };
            let c = Chart::new("normal_fisher", coords, metric, cubic)?;
            ("normal_fisher".to_string(), c, default_box)
        }
        Family::GammaFisher { chart, source } => {
            let (coords, default_box) = match chart {
                GammaChart::ShapeRate => (names(&["k", "beta"]), vec![(0.5, 4.0), (0.5, 2.0)]),
                GammaChart::Natural => (names(&["theta1", "theta2"]), vec![(0.5, 4.0), (-2.0, -0.5)]),
            };
            let domain = spec.domain.clone().unwrap_or_else(|| default_box.clone());
            check_box(&domain, 0, coords[0].as_str(), Some(0.0), None)?;
            match chart {
                GammaChart::ShapeRate => check_box(&domain, 1, "beta", Some(0.0), None)?,
                GammaChart::Natural => check_box(&domain, 1, "theta2", None, Some(0.0))?,
            }
            let (metric, cubic) = match (source, chart) {
                (FisherSource::ClosedForm, GammaChart::ShapeRate) => {
                    let metric = metric_from(&[&["trigamma(k)", "-1/beta"], &["-1/beta", "k/beta^2"]], &coords)?;
                    let cubic = complete_cubic(
                        2,
                        vec![
                            ([0, 0, 0], parsed("polygamma(2, k)", &coords)?),
                            ([0, 1, 1], parsed("1/beta^2", &coords)?),
                            ([1, 1, 1], parsed("-2*k/beta^3", &coords)?),
                        ],
                    )?;
                    (metric, cubic)
                }
                (FisherSource::ClosedForm, GammaChart::Natural) => {
                    let metric = metric_from(
                        &[&["trigamma(theta1)", "-1/theta2"], &["-1/theta2", "theta1/theta2^2"]],
                        &coords,
                    )?;
                    let cubic = complete_cubic(
                        2,
                        vec![
                            ([0, 0, 0], parsed("polygamma(2, theta1)", &coords)?),
                            ([0, 1, 1], parsed("1/theta2^2", &coords)?),
                            ([1, 1, 1], parsed("-2*theta1/theta2^3", &coords)?),
                        ],
                    )?;
                    (metric, cubic)
                }
                (FisherSource::Quadrature, _) => {
                    let params = match chart {
                        GammaChart::ShapeRate => GammaParams::ShapeRate,
                        GammaChart::Natural => GammaParams::Natural,
                    };
                    // widen by the finite-difference reach so stencils stay covered
                    let reach = 4.0 * DEFAULT_FD_STEP * domain[0].1.abs().max(1.0);
                    let mut ll = GammaLikelihood::new(params);
                    ll.log_range = Some(GammaLikelihood::range_for_shapes(
                        (domain[0].0 - reach).max(0.5 * domain[0].0),
                        domain[0].1 + reach,
                    ));
                    let level = frozen_level(&ll, &domain, FREEZE_TOL)?;
                    quadrature_fields(Arc::new(ll), level, 2)
                }
            };
            let label = match chart {
                GammaChart::ShapeRate => "gamma_fisher",
                GammaChart::Natural => "gamma_fisher_natural",
            };
            let c = Chart::new(label, coords, metric, cubic)?;
            (label.to_string(), c, default_box)
        }
        Family::FlatWithCubic { n, entries } => {
            if *n < 2 {
                return Err(Error::Param(format!("flat_with_cubic needs n >= 2, got {n}")));
            }
            let fields = entries
                .iter()
                .map(|(idx, v)| {
                    if !v.is_finite() {
                        return Err(Error::Param(format!("cubic entry {idx:?} is not finite")));
                    }
                    Ok((*idx, ScalarField::constant(*v)))
                })
                .collect::<Result<Vec<_>>>()?;
            let c = Chart::new(
                "flat_with_cubic",
                numbered(*n),
                identity_metric(*n),
                complete_cubic(*n, fields)?,
            )?;
            ("flat_with_cubic".to_string(), c, vec![(-1.0, 1.0); *n])
        }
        Family::Custom { coords, metric, cubic } => {
            let n = coords.len();
            if metric.len() != n || metric.iter().any(|r| r.len() != n) {
                return Err(Error::Dimension(format!("metric must be {n} x {n}")));
            }
            let m = metric
                .iter()
                .flat_map(|r| r.iter())
                .map(|s| parsed(s, coords))
                .collect::<Result<Vec<_>>>()?;
            let entries = cubic
                .iter()
                .map(|(idx, s)| Ok((*idx, parsed(s, coords)?)))
                .collect::<Result<Vec<_>>>()?;
            let c = Chart::new("custom", coords.clone(), m, complete_cubic(n, entries)?)?;
            ("custom".to_string(), c, vec![(-1.0, 1.0); n])
        }
    };
    let domain = spec.domain.clone().unwrap_or(default_box);
    chart.with_label(spec.label.clone().unwrap_or(name)).with_domain(domain)
}

/// Entries kept per quadrature chart before the memo is reset.
const MEMO_CAPACITY: usize = 4096;

/// Fisher fields evaluated with the rule at a fixed refinement level, so
/// they are smooth in the parameters; derivatives by finite differences.
fn quadrature_fields(ll: Arc<dyn LogLikelihood>, level: usize, n: usize) -> (Vec<ScalarField>, Vec<ScalarField>) {
    type Eval = Arc<dyn Fn(&[f64]) -> Result<Arc<FisherTensors>> + Send + Sync>;
    // All fields share one memo so a stencil point is integrated once.
    let memo: Mutex<HashMap<Vec<u64>, Arc<FisherTensors>>> = Mutex::new(HashMap::new());
    let eval: Eval = Arc::new(move |theta: &[f64]| {
        let key: Vec<u64> = theta.iter().map(|t| t.to_bits()).collect();
        if let Some(hit) = memo.lock().expect("memo lock").get(&key) {
            return Ok(hit.clone());
        }
        let value = Arc::new(fisher_with_rule(ll.as_ref(), theta, &ll.rule(theta, level)?)?);
        let mut memo = memo.lock().expect("memo lock");
        if memo.len() >= MEMO_CAPACITY {
            memo.clear();
        }
        memo.insert(key, value.clone());
        Ok(value)
    });
    let mut metric: Vec<Option<ScalarField>> = vec![None; n * n];
    for i in 0..n {
        for j in i..n {
            let e = eval.clone();
            let f: ValueFn = Arc::new(move |theta: &[f64]| Ok(*e(theta)?.g.get(&[i, j])));
            let f = ScalarField::function(f, DEFAULT_FD_STEP);
            metric[i * n + j] = Some(f.clone());
            metric[j * n + i] = Some(f);
        }
    }
    let mut entries = Vec::new();
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                let e = eval.clone();
                let f: ValueFn = Arc::new(move |theta: &[f64]| {
                    Ok(*e(theta)?.c.as_ref().expect("cubic is always computed").get(&[i, j, k]))
                });
                entries.push(([i, j, k], ScalarField::function(f, DEFAULT_FD_STEP)));
            }
        }
    }
    let cubic = complete_cubic(n, entries).expect("one entry per multiset");
    (metric.into_iter().map(Option::unwrap).collect(), cubic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::riemann;
    use crate::diagnostics::{fit_constant_curvature, sample_points, Verdict};
    use crate::jets::Point;
    use crate::structure::{validate_statistical, ConnectionKind};

    fn all_specs() -> Vec<ModelSpec> {
        vec![
            ModelSpec::euclidean(3),
            ModelSpec::sphere(1.0),
            ModelSpec::hyperbolic(),
            ModelSpec::normal_fisher(),
            ModelSpec::gamma_fisher(GammaChart::ShapeRate, FisherSource::ClosedForm),
            ModelSpec::gamma_fisher(GammaChart::Natural, FisherSource::ClosedForm),
            ModelSpec::flat_with_cubic(),
        ]
    }

    #[test]
    fn every_builtin_is_a_statistical_structure() {
        for spec in all_specs() {
            let chart = builtin_chart(&spec).unwrap();
            let points = sample_points(chart.domain(), 10, 1).unwrap();
            let report = validate_statistical(&chart, &points, 1e-10);
            assert!(report.passed(), "{report:#?}");
        }
    }

    #[test]
    fn normal_levi_civita_has_curvature_minus_half() {
        let chart = builtin_chart(&ModelSpec::normal_fisher()).unwrap();
        let points = sample_points(chart.domain(), 10, 2).unwrap();
        let fit = fit_constant_curvature(&chart, &points, 1e-10, ConnectionKind::LeviCivita).unwrap();
        assert!((fit.k + 0.5).abs() < 1e-12, "{fit:?}");
        assert_eq!(fit.verdict, Verdict::Pass);
    }

    #[test]
    fn exponential_connections_of_the_gamma_family_are_flat() {
        for chart in [GammaChart::ShapeRate, GammaChart::Natural] {
            let chart = builtin_chart(&ModelSpec::gamma_fisher(chart, FisherSource::ClosedForm)).unwrap();
            for p in sample_points(chart.domain(), 6, 3).unwrap() {
                let geo = chart.local(&p).unwrap();
                for kind in [ConnectionKind::Nabla, ConnectionKind::NablaStar] {
                    let r = riemann(&geo.connection(kind)).values();
                    assert!(r.max_norm() < 1e-10, "{kind} at {p:?}: {}", r.max_norm());
                }
            }
        }
    }

    #[test]
    fn quadrature_charts_match_closed_forms() {
        let pairs = [
            (
                ModelSpec::new(Family::NormalFisher {
                    source: FisherSource::Quadrature,
                }),
                ModelSpec::normal_fisher(),
            ),
            (
                ModelSpec::gamma_fisher(GammaChart::ShapeRate, FisherSource::Quadrature),
                ModelSpec::gamma_fisher(GammaChart::ShapeRate, FisherSource::ClosedForm),
            ),
            (
                ModelSpec::gamma_fisher(GammaChart::Natural, FisherSource::Quadrature),
                ModelSpec::gamma_fisher(GammaChart::Natural, FisherSource::ClosedForm),
            ),
        ];
        for (quad, exact) in pairs {
            let quad = builtin_chart(&quad).unwrap();
            let exact = builtin_chart(&exact).unwrap();
            assert!(quad.uses_finite_differences());
            for p in sample_points(exact.domain(), 5, 4).unwrap() {
                let a = quad.local(&p).unwrap();
                let b = exact.local(&p).unwrap();
                assert!(a.metric.g.rel_defect(&b.metric.g).unwrap() < 1e-6, "g at {p:?}");
                assert!(
                    a.cubic.values().rel_defect(&b.cubic.values()).unwrap() < 1e-6,
                    "C at {p:?}"
                );
                let ga = a.connection(ConnectionKind::Nabla).values();
                let gb = b.connection(ConnectionKind::Nabla).values();
                assert!(ga.rel_defect(&gb).unwrap() < 1e-6, "Γ at {p:?}");
            }
        }
    }

    #[test]
    fn flat_with_cubic_has_the_expected_difference_tensor() {
        let chart = builtin_chart(&ModelSpec::flat_with_cubic()).unwrap();
        let geo = chart.local(&Point::new(vec![0.3, -0.2]).unwrap()).unwrap();
        let k = geo.k.values();
        assert_eq!(*k.get(&[0, 0, 0]), -1.0);
        assert_eq!(k.max_norm(), 1.0);
        assert_eq!(geo.tau().values().data(), &[-1.0, 0.0]);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let bad = [
            ModelSpec::euclidean(1),
            ModelSpec::sphere(0.0),
            ModelSpec::sphere(f64::NAN),
            ModelSpec::normal_fisher().with_domain(vec![(-1.0, 1.0), (-0.5, 2.0)]),
            ModelSpec::gamma_fisher(GammaChart::ShapeRate, FisherSource::ClosedForm)
                .with_domain(vec![(0.0, 1.0), (0.5, 2.0)]),
            ModelSpec::gamma_fisher(GammaChart::Natural, FisherSource::ClosedForm)
                .with_domain(vec![(0.5, 1.0), (-1.0, 0.5)]),
            ModelSpec::new(Family::FlatWithCubic {
                n: 2,
                entries: vec![([0, 0, 0], f64::INFINITY)],
            }),
        ];
        for spec in bad {
            assert!(matches!(builtin_chart(&spec), Err(Error::Param(_))), "{spec:?}");
        }
    }

    #[test]
    fn custom_charts_parse_and_label() {
        let spec = ModelSpec::new(Family::Custom {
            coords: vec!["u".into(), "v".into()],
            metric: vec![vec!["exp(u)".into(), "0".into()], vec!["0".into(), "1".into()]],
            cubic: vec![([0, 0, 0], "u*v".into())],
        })
        .with_label("mine");
        let chart = builtin_chart(&spec).unwrap();
        assert_eq!(chart.label(), "mine");
        assert_eq!(chart.domain(), &[(-1.0, 1.0), (-1.0, 1.0)]);
        assert!(!chart.uses_finite_differences());
    }
}
