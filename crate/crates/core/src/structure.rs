//! Statistical charts and the connections derived from them.
//!
//! A chart carries a metric field `g` and a totally symmetric cubic field `C`.
//! The primal connection is always `Γ̂ + K` with `K^k_ij = −½ g^kl C_ijl`, so
//! `∇g = C`; negating `C` swaps the primal and dual connections.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::curvature::covariant_derivative;
use crate::error::{Error, Result};
use crate::jets::{FieldSource, Jet, JetStrategy, Point, ScalarField, MAX_ORDER};
use crate::tensor::{invert, Metric, Tensor, Variance};

use Variance::{Lower, Upper};

/// Which affine connection of the `∇̂ + αK` family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectionKind {
    LeviCivita,
    Nabla,
    NablaStar,
    Alpha(f64),
}

impl ConnectionKind {
    /// The multiple of `K` added to the Levi-Civita coefficients.
    pub fn k_coefficient(self) -> f64 {
        match self {
            ConnectionKind::LeviCivita => 0.0,
            ConnectionKind::Nabla => 1.0,
            ConnectionKind::NablaStar => -1.0,
            ConnectionKind::Alpha(a) => a,
        }
    }
}

impl fmt::Display for ConnectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConnectionKind::LeviCivita => f.write_str("levi_civita"),
            ConnectionKind::Nabla => f.write_str("nabla"),
            ConnectionKind::NablaStar => f.write_str("nabla_star"),
            ConnectionKind::Alpha(a) => write!(f, "alpha({a})"),
        }
    }
}

/// Christoffel symbols at a point, stored as `gamma[k][i][j] = Γ^k_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionCoeffs {
    pub kind: ConnectionKind,
    pub gamma: Tensor,
}

/// A coordinate chart with metric and cubic fields.
#[derive(Debug, Clone)]
pub struct Chart {
    label: String,
    coords: Vec<String>,
    metric: Vec<ScalarField>,
    cubic: Vec<ScalarField>,
    cubic_scale: f64,
    domain: Vec<(f64, f64)>,
}

fn same_field(a: &ScalarField, b: &ScalarField) -> bool {
    match (a.source(), b.source()) {
        (FieldSource::Constant(x), FieldSource::Constant(y)) => x == y,
        (FieldSource::Expression(x), FieldSource::Expression(y)) => x == y,
        (FieldSource::Function(x), FieldSource::Function(y)) => std::sync::Arc::ptr_eq(x, y),
        _ => match (a.as_constant(), b.as_constant()) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        },
    }
}

/// Expands `(indices, field)` entries into a full `n³` cubic array. Each
/// multiset of indices may appear once; unlisted components are zero.
pub fn complete_cubic(n: usize, entries: Vec<([usize; 3], ScalarField)>) -> Result<Vec<ScalarField>> {
    let mut out: Vec<Option<ScalarField>> = vec![None; n * n * n];
    for (idx, field) in entries {
        if idx.iter().any(|&i| i >= n) {
            return Err(Error::Dimension(format!(
                "cubic index {idx:?} out of range for n = {n}"
            )));
        }
        let [a, b, c] = idx;
        for [i, j, k] in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            let slot = &mut out[(i * n + j) * n + k];
            match slot {
                Some(prev) if !same_field(prev, &field) => {
                    return Err(Error::Param(format!(
                        "cubic entry {:?} conflicts with an earlier entry for the same index multiset",
                        idx.map(|i| i + 1)
                    )));
                }
                _ => *slot = Some(field.clone()),
            }
        }
    }
    Ok(out
        .into_iter()
        .map(|f| f.unwrap_or_else(|| ScalarField::constant(0.0)))
        .collect())
}

impl Chart {
    /// Builds a chart from a row-major `n × n` metric and `n³` cubic array.
    ///
    /// # Errors
    /// [`Error::Dimension`] for `n < 2` or wrong array sizes, [`Error::Param`]
    /// when either field array is not symmetric slot-wise.
    pub fn new(
        label: impl Into<String>,
        coords: Vec<String>,
        metric: Vec<ScalarField>,
        cubic: Vec<ScalarField>,
    ) -> Result<Self> {
        let n = coords.len();
        if n < 2 {
            return Err(Error::Dimension(format!("charts need n >= 2, got {n}")));
        }
        if metric.len() != n * n || cubic.len() != n * n * n {
            return Err(Error::Dimension(format!(
                "expected {} metric and {} cubic fields, got {} and {}",
                n * n,
                n * n * n,
                metric.len(),
                cubic.len()
            )));
        }
        for i in 0..n {
            for j in 0..i {
                if !same_field(&metric[i * n + j], &metric[j * n + i]) {
                    return Err(Error::Param(format!(
                        "metric is not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let base = &cubic[(i * n + j) * n + k];
                    let others = [(j, i, k), (i, k, j), (k, j, i)];
                    if others
                        .iter()
                        .any(|&(a, b, c)| !same_field(base, &cubic[(a * n + b) * n + c]))
                    {
                        return Err(Error::Param(format!(
                            "cubic form is not totally symmetric at ({}, {}, {})",
                            i + 1,
                            j + 1,
                            k + 1
                        )));
                    }
                }
            }
        }
        Ok(Self {
            label: label.into(),
            domain: vec![(-1.0, 1.0); n],
            coords,
            metric,
            cubic,
            cubic_scale: 1.0,
        })
    }

    /// Sets the sampling box.
    pub fn with_domain(mut self, domain: Vec<(f64, f64)>) -> Result<Self> {
        if domain.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "box has {} intervals for a {}-dimensional chart",
                domain.len(),
                self.dim()
            )));
        }
        if let Some((lo, hi)) = domain
            .iter()
            .find(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
        {
            return Err(Error::Param(format!("invalid box interval [{lo}, {hi}]")));
        }
        self.domain = domain;
        Ok(self)
    }

    /// Applies one derivative strategy to every field.
    pub fn with_strategy(mut self, strategy: JetStrategy) -> Self {
        for f in self.metric.iter_mut().chain(self.cubic.iter_mut()) {
            *f = f.clone().with_strategy(strategy);
        }
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Same metric with cubic form `α·C`, whose primal connection is `∇^α`.
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut c = self.clone();
        c.cubic_scale *= alpha;
        c
    }

    /// The chart whose primal connection is this chart's dual.
    pub fn dual(&self) -> Self {
        self.scaled(-1.0)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn cubic_scale(&self) -> f64 {
        self.cubic_scale
    }

    pub fn metric_field(&self, i: usize, j: usize) -> &ScalarField {
        &self.metric[i * self.dim() + j]
    }

    pub fn cubic_field(&self, i: usize, j: usize, k: usize) -> &ScalarField {
        let n = self.dim();
        &self.cubic[(i * n + j) * n + k]
    }

    /// True when any field falls back to finite differences.
    pub fn uses_finite_differences(&self) -> bool {
        self.metric
            .iter()
            .chain(&self.cubic)
            .any(|f| matches!(f.strategy(), JetStrategy::FiniteDifference { .. }))
    }

    /// True when the cubic form is identically zero.
    pub fn cubic_is_zero(&self) -> bool {
        self.cubic_scale == 0.0 || self.cubic.iter().all(|f| f.as_constant() == Some(0.0))
    }

    fn check_point(&self, p: &Point) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, chart has {}",
                p.dim(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Metric jets with each unique entry evaluated once.
    pub fn metric_jet(&self, p: &Point, order: usize) -> Result<Tensor<Jet>> {
        self.check_point(p)?;
        let n = self.dim();
        let mut data = vec![None; n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.metric_field(i, j).eval_jet(p, order)?;
                data[j * n + i] = Some(v.clone());
                data[i * n + j] = Some(v);
            }
        }
        Tensor::from_data(n, vec![Lower, Lower], data.into_iter().map(Option::unwrap).collect())
    }

    /// Cubic-form jets (including the chart's scale) with each index multiset
    /// evaluated once.
    pub fn cubic_jet(&self, p: &Point, order: usize) -> Result<Tensor<Jet>> {
        self.check_point(p)?;
        let n = self.dim();
        let mut data: Vec<Option<Jet>> = vec![None; n * n * n];
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    let v = self.cubic_field(i, j, k).eval_jet(p, order)?.scale(self.cubic_scale);
                    for [a, b, c] in [[i, j, k], [i, k, j], [j, i, k], [j, k, i], [k, i, j], [k, j, i]] {
                        data[(a * n + b) * n + c] = Some(v.clone());
                    }
                }
            }
        }
        Tensor::from_data(n, vec![Lower; 3], data.into_iter().map(Option::unwrap).collect())
    }

    /// Jets of every geometric field needed up to curvature derivatives.
    pub fn local(&self, p: &Point) -> Result<LocalGeometry> {
        LocalGeometry::new(self, p, MAX_ORDER, MAX_ORDER - 1)
    }
}

/// Jets of `g`, `g⁻¹`, `C`, `Γ̂` and `K` at one point.
///
/// With the default orders (metric 3, cubic 2) connection coefficients carry
/// second derivatives, curvature first derivatives, and covariant derivatives
/// of curvature are available as values.
#[derive(Debug, Clone)]
pub struct LocalGeometry {
    pub point: Point,
    pub metric: Metric,
    pub g: Tensor<Jet>,
    pub g_inv: Tensor<Jet>,
    pub cubic: Tensor<Jet>,
    pub gamma_hat: Tensor<Jet>,
    pub k: Tensor<Jet>,
}

impl LocalGeometry {
    /// # Errors
    /// [`Error::SingularMetric`] at degenerate points, [`Error::Order`] when
    /// `metric_order` is 0 or above the maximum, plus field evaluation errors.
    pub fn new(chart: &Chart, p: &Point, metric_order: usize, cubic_order: usize) -> Result<Self> {
        if metric_order == 0 {
            return Err(Error::Order(0));
        }
        let n = chart.dim();
        let g = chart.metric_jet(p, metric_order)?;
        let metric = Metric::new(g.values(), p.coords())?;
        let (inv, _) = invert(g.data(), n).ok_or_else(|| Error::SingularMetric {
            point: p.coords().to_vec(),
            det: metric.det,
        })?;
        let g_inv = Tensor::from_data(n, vec![Upper, Upper], inv)?;
        let cubic = chart.cubic_jet(p, cubic_order)?;

        // Γ_{ij,l} = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
        let dg: Vec<Tensor<Jet>> = (0..n).map(|m| g.derivative(m)).collect();
        let first_kind = Tensor::from_fn(n, vec![Lower; 3], |x| {
            let (i, j, l) = (x[0], x[1], x[2]);
            (dg[i].get(&[j, l]) + dg[j].get(&[i, l]) - dg[l].get(&[i, j])).scale(0.5)
        });
        let gamma_hat = first_kind.raise_last(&g_inv);
        let k = cubic.raise_last(&g_inv).scale(-0.5);
        Ok(Self {
            point: p.clone(),
            metric,
            g,
            g_inv,
            cubic,
            gamma_hat,
            k,
        })
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// Coefficient jets `Γ̂ + s·K` for the given connection.
    pub fn connection(&self, kind: ConnectionKind) -> Tensor<Jet> {
        let s = kind.k_coefficient();
        if s == 0.0 {
            return self.gamma_hat.clone();
        }
        self.gamma_hat.add(&self.k.scale(s))
    }

    pub fn coefficients(&self, kind: ConnectionKind) -> ConnectionCoeffs {
        ConnectionCoeffs {
            kind,
            gamma: self.connection(kind).values(),
        }
    }

    /// `τ_i = K^m_im`.
    pub fn tau(&self) -> Tensor<Jet> {
        self.k.contract(0, 2).expect("K has an upper first slot")
    }
}

impl Tensor<Jet> {
    /// For a tensor with lower slots `(.., l)`, returns `g^{kl} T_{..l}` with the
    /// raised index moved to the front: `result[k][..] = Σ_l g^kl T[..][l]`.
    fn raise_last(&self, g_inv: &Tensor<Jet>) -> Tensor<Jet> {
        let last = self.rank() - 1;
        let raised = self.raise(last, g_inv).expect("last slot is lower");
        let mut order = vec![last];
        order.extend(0..last);
        raised.permute(&order)
    }
}

fn geometry_for_connection(chart: &Chart, p: &Point) -> Result<LocalGeometry> {
    LocalGeometry::new(chart, p, 1, 0)
}

/// Levi-Civita coefficients at `p`.
pub fn levi_civita(chart: &Chart, p: &Point) -> Result<ConnectionCoeffs> {
    Ok(geometry_for_connection(chart, p)?.coefficients(ConnectionKind::LeviCivita))
}

/// `K^k_ij = −½ g^kl C_ijl` at `p`, stored `[k][i][j]`.
pub fn difference_tensor(chart: &Chart, p: &Point) -> Result<Tensor> {
    Ok(geometry_for_connection(chart, p)?.k.values())
}

pub fn nabla(chart: &Chart, p: &Point) -> Result<ConnectionCoeffs> {
    Ok(geometry_for_connection(chart, p)?.coefficients(ConnectionKind::Nabla))
}

pub fn nabla_star(chart: &Chart, p: &Point) -> Result<ConnectionCoeffs> {
    Ok(geometry_for_connection(chart, p)?.coefficients(ConnectionKind::NablaStar))
}

pub fn alpha_connection(chart: &Chart, p: &Point, alpha: f64) -> Result<ConnectionCoeffs> {
    Ok(geometry_for_connection(chart, p)?.coefficients(ConnectionKind::Alpha(alpha)))
}

/// `(∇g)_ijk = ∂_i g_jk − Γ^l_ij g_lk − Γ^l_ik g_jl` for the given connection.
pub fn cubic_from_connection(chart: &Chart, p: &Point, kind: ConnectionKind) -> Result<Tensor> {
    let geo = geometry_for_connection(chart, p)?;
    Ok(covariant_derivative(&geo.g, &geo.connection(kind)).values())
}

/// One failed check at one sample point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: String,
    pub point: Vec<f64>,
    pub defect: f64,
    pub message: String,
}

/// Largest defect seen for a named check across all samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckDefect {
    pub name: String,
    pub defect: f64,
}

/// Outcome of [`validate_statistical`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub label: String,
    pub points_tested: usize,
    pub tol: f64,
    pub checks: Vec<CheckDefect>,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Per-point structural identities: `(name, relative defect)`.
pub fn structural_defects(chart: &Chart, geo: &LocalGeometry) -> Result<Vec<(&'static str, f64)>> {
    let n = geo.dim();
    let p = &geo.point;
    let g = geo.metric.g.clone();
    let mut out = Vec::new();

    let raw_metric = Tensor::from_fn(n, vec![Lower, Lower], |x| {
        chart.metric_field(x[0], x[1]).value(p).unwrap_or(f64::NAN)
    });
    out.push(("metric_symmetric", raw_metric.symmetry_defect(&[0, 1])?));
    let raw_cubic = Tensor::from_fn(n, vec![Lower; 3], |x| {
        chart.cubic_field(x[0], x[1], x[2]).value(p).unwrap_or(f64::NAN)
    });
    out.push(("cubic_totally_symmetric", raw_cubic.symmetry_defect(&[0, 1, 2])?));

    let c = geo.cubic.values();
    let kinds = [
        ConnectionKind::LeviCivita,
        ConnectionKind::Nabla,
        ConnectionKind::NablaStar,
    ];
    let conns: Vec<Tensor<Jet>> = kinds.iter().map(|&k| geo.connection(k)).collect();
    let torsion = conns
        .iter()
        .map(|t| t.values().symmetry_defect(&[1, 2]))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    out.push(("torsion_free", torsion));

    let grad_hat = covariant_derivative(&geo.g, &conns[0]).values();
    out.push(("levi_civita_metric_compatible", grad_hat.rel_defect(&c.scale(0.0))?));
    let grad = covariant_derivative(&geo.g, &conns[1]).values();
    out.push(("cubic_round_trip", grad.rel_defect(&c)?));
    let grad_star = covariant_derivative(&geo.g, &conns[2]).values();
    out.push(("dual_cubic_round_trip", grad_star.rel_defect(&c.scale(-1.0))?));

    // ∂_i g_jk = Γ^l_ij g_lk + Γ*^l_ik g_jl
    let gamma = conns[1].values();
    let gamma_star = conns[2].values();
    let dg = Tensor::from_fn(n, vec![Lower; 3], |x| geo.g.get(&[x[1], x[2]]).d1(x[0]));
    let paired = Tensor::from_fn(n, vec![Lower; 3], |x| {
        let (i, j, k) = (x[0], x[1], x[2]);
        (0..n)
            .map(|l| gamma.get(&[l, i, j]) * g.get(&[l, k]) + gamma_star.get(&[l, i, k]) * g.get(&[j, l]))
            .sum()
    });
    out.push(("duality", dg.rel_defect(&paired)?));

    let mean = gamma.add(&gamma_star).scale(0.5);
    out.push(("mean_law", mean.rel_defect(&conns[0].values())?));

    // τ_i against Γ^m_im − ∂_i log √|det g|, with ∂_i log √|det g| = ½ g^ab ∂_i g_ab.
    let tau = geo.tau().values();
    let g_inv = &geo.metric.g_inv;
    let tau_volume = Tensor::from_fn(n, vec![Lower], |x| {
        let i = x[0];
        let trace: f64 = (0..n).map(|m| gamma.get(&[m, i, m])).sum();
        let mut log_det = 0.0;
        for a in 0..n {
            for b in 0..n {
                log_det += 0.5 * g_inv.get(&[a, b]) * dg.get(&[i, a, b]);
            }
        }
        trace - log_det
    });
    out.push(("tau_volume_form", tau.rel_defect(&tau_volume)?));

    // g(K_i e_j, e_l) = g(e_j, K_i e_l)
    let k = geo.k.values();
    let lowered: Tensor = Tensor::from_fn(n, vec![Lower; 3], |x| {
        (0..n).map(|m| g.get(&[m, x[2]]) * k.get(&[m, x[0], x[1]])).sum::<f64>()
    });
    out.push(("k_self_adjoint", lowered.symmetry_defect(&[1, 2])?));
    Ok(out)
}

/// Checks at every sample that `(g, ∇)` is a statistical structure. Never
/// stops at the first failure; every violation is collected.
pub fn validate_statistical(chart: &Chart, points: &[Point], tol: f64) -> ValidationReport {
    let mut checks: Vec<CheckDefect> = Vec::new();
    let mut violations = Vec::new();
    let mut record = |name: &str, p: &Point, defect: f64, message: String, checks: &mut Vec<CheckDefect>| {
        match checks.iter_mut().find(|c| c.name == name) {
            Some(c) => c.defect = c.defect.max(defect),
            None => checks.push(CheckDefect {
                name: name.to_string(),
                defect,
            }),
        }
        if !(defect <= tol) {
            violations.push(Violation {
                check: name.to_string(),
                point: p.coords().to_vec(),
                defect,
                message,
            });
        }
    };
    for p in points {
        let geo = match LocalGeometry::new(chart, p, 1, 0) {
            Ok(g) => g,
            Err(e) => {
                record("metric_invertible", p, f64::MAX, e.to_string(), &mut checks);
                continue;
            }
        };
        record("metric_invertible", p, 0.0, String::new(), &mut checks);
        match structural_defects(chart, &geo) {
            Ok(defects) => {
                for (name, d) in defects {
                    record(name, p, d, format!("{name} defect {d:e} exceeds {tol:e}"), &mut checks);
                }
            }
            Err(e) => record("evaluation", p, f64::MAX, e.to_string(), &mut checks),
        }
    }
    ValidationReport {
        label: chart.label().to_string(),
        points_tested: points.len(),
        tol,
        checks,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::expr::parse_expression;

    fn coords(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("x{i}")).collect()
    }

    fn expr(src: &str, n: usize) -> ScalarField {
        ScalarField::expression(parse_expression(src, &coords(n)).unwrap())
    }

    fn flat(n: usize, entries: Vec<([usize; 3], ScalarField)>) -> Chart {
        let metric = (0..n * n)
            .map(|k| ScalarField::constant(if k / n == k % n { 1.0 } else { 0.0 }))
            .collect();
        Chart::new("flat", coords(n), metric, complete_cubic(n, entries).unwrap()).unwrap()
    }

    fn pt(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    #[test]
    fn euclidean_christoffels_vanish() {
        let c = flat(3, vec![]);
        let lc = levi_civita(&c, &pt(&[0.1, 0.2, 0.3])).unwrap();
        assert_eq!(lc.gamma.max_norm(), 0.0);
    }

    #[test]
    fn polar_christoffels() {
        let metric = vec![
            ScalarField::constant(1.0),
            ScalarField::constant(0.0),
            ScalarField::constant(0.0),
            expr("x1^2", 2),
        ];
        let cubic = complete_cubic(2, vec![]).unwrap();
        let c = Chart::new("polar", coords(2), metric, cubic).unwrap();
        let lc = levi_civita(&c, &pt(&[2.0, 0.7])).unwrap();
        assert!((lc.gamma.get(&[0, 1, 1]) + 2.0).abs() < 1e-14);
        assert!((lc.gamma.get(&[1, 0, 1]) - 0.5).abs() < 1e-14);
        assert!((lc.gamma.get(&[1, 1, 0]) - 0.5).abs() < 1e-14);
        assert_eq!(*lc.gamma.get(&[0, 0, 0]), 0.0);
    }

    #[test]
    fn flat_with_cubic_difference_tensor() {
        let c = flat(2, vec![([0, 0, 0], ScalarField::constant(2.0))]);
        let p = pt(&[0.3, -0.4]);
        let k = difference_tensor(&c, &p).unwrap();
        let mut want = Tensor::zeros(2, vec![Upper, Lower, Lower]);
        want.set(&[0, 0, 0], -1.0);
        assert_eq!(k, want);
        let conn = alpha_connection(&c, &p, 1.0).unwrap();
        assert_eq!(conn.gamma.data(), want.data());
        let back = cubic_from_connection(&c, &p, ConnectionKind::Nabla).unwrap();
        assert_eq!(*back.get(&[0, 0, 0]), 2.0);
    }

    #[test]
    fn zero_cubic_collapses_the_family() {
        let c = flat(2, vec![]);
        let p = pt(&[0.0, 0.0]);
        assert_eq!(difference_tensor(&c, &p).unwrap().max_norm(), 0.0);
        let a = nabla(&c, &p).unwrap().gamma;
        assert_eq!(a, nabla_star(&c, &p).unwrap().gamma);
        assert_eq!(a, alpha_connection(&c, &p, 0.0).unwrap().gamma);
    }

    #[test]
    fn alpha_family_relations() {
        let metric = vec![
            expr("exp(x2)", 2),
            expr("0.1*x1", 2),
            expr("0.1*x1", 2),
            expr("2+x1^2", 2),
        ];
        let cubic = complete_cubic(
            2,
            vec![
                ([0, 0, 0], expr("sin(x1)", 2)),
                ([0, 1, 1], expr("x1*x2", 2)),
                ([1, 1, 1], expr("1+x2", 2)),
            ],
        )
        .unwrap();
        let c = Chart::new("curved", coords(2), metric, cubic).unwrap();
        let p = pt(&[0.4, -0.3]);
        let lc = levi_civita(&c, &p).unwrap().gamma;
        let nab = nabla(&c, &p).unwrap().gamma;
        let star = nabla_star(&c, &p).unwrap().gamma;
        assert!(nab.add(&star).scale(0.5).max_diff(&lc).unwrap() < 1e-15);
        assert_eq!(alpha_connection(&c, &p, 1.0).unwrap().gamma, nab);
        assert_eq!(alpha_connection(&c, &p, -1.0).unwrap().gamma, star);
        // ∇^{−α} of the chart is (∇*)^α, the α-connection of the dual chart
        for a in [-1.0, 0.5, 2.0] {
            let lhs = alpha_connection(&c, &p, -a).unwrap().gamma;
            let rhs = alpha_connection(&c.dual(), &p, a).unwrap().gamma;
            assert!(lhs.max_diff(&rhs).unwrap() < 1e-15);
        }
        let cvals = c.cubic_jet(&p, 0).unwrap().values();
        for a in [-1.0, 0.5, 1.0] {
            let got = cubic_from_connection(&c, &p, ConnectionKind::Alpha(a)).unwrap();
            assert!(got.rel_defect(&cvals.scale(a)).unwrap() < 1e-13);
        }
        let lcg = cubic_from_connection(&c, &p, ConnectionKind::LeviCivita).unwrap();
        assert!(lcg.max_norm() < 1e-14);
    }

    #[test]
    fn asymmetric_cubic_is_rejected() {
        let n = 2;
        let metric = (0..4)
            .map(|k| ScalarField::constant(if k % 3 == 0 { 1.0 } else { 0.0 }))
            .collect();
        let mut cubic = vec![ScalarField::constant(0.0); 8];
        cubic[1] = ScalarField::constant(1.0); // C_112 only
        let err = Chart::new("bad", coords(n), metric, cubic).unwrap_err();
        assert!(matches!(err, Error::Param(_)));
    }

    #[test]
    fn conflicting_cubic_entries_are_rejected() {
        let err = complete_cubic(
            2,
            vec![
                ([0, 0, 1], ScalarField::constant(1.0)),
                ([1, 0, 0], ScalarField::constant(2.0)),
            ],
        )
        .unwrap_err();
        assert!(err.to_string().contains("[2, 1, 1]"));
    }

    #[test]
    fn validation_passes_on_curved_chart_and_collects_failures() {
        let metric = vec![
            expr("1/x2^2", 2),
            ScalarField::constant(0.0),
            ScalarField::constant(0.0),
            expr("1/x2^2", 2),
        ];
        let cubic = complete_cubic(2, vec![([0, 1, 1], expr("x1/x2^3", 2))]).unwrap();
        let c = Chart::new("h", coords(2), metric, cubic).unwrap();
        let pts = vec![pt(&[0.1, 1.0]), pt(&[0.3, 0.0]), pt(&[-0.5, 2.0])];
        let rep = validate_statistical(&c, &pts, 1e-10);
        assert_eq!(rep.points_tested, 3);
        assert_eq!(rep.violations.len(), 1, "{:?}", rep.violations);
        assert_eq!(rep.violations[0].point, vec![0.3, 0.0]);
        assert!(rep
            .checks
            .iter()
            .all(|c| c.name == "metric_invertible" || c.defect < 1e-12));
    }

    #[test]
    fn singular_metric_point_is_an_error() {
        let metric = vec![
            expr("x1", 2),
            ScalarField::constant(0.0),
            ScalarField::constant(0.0),
            ScalarField::constant(1.0),
        ];
        let c = Chart::new("s", coords(2), metric, complete_cubic(2, vec![]).unwrap()).unwrap();
        assert!(matches!(
            levi_civita(&c, &pt(&[0.0, 0.0])),
            Err(Error::SingularMetric { .. })
        ));
    }
}
