//! Sampled classification of a chart: conjugate symmetry, trace-freeness,
//! constant curvature, projective flatness, the two characterization
//! theorems and α-scans.
//!
//! Every check evaluates a defect at each sample point, takes the maximum and
//! turns it into a [`Verdict`] with a hysteresis band: `Pass` at or below
//! `tol`, `Fail` at or above `10·tol`, `Inconclusive` in between. Verdicts
//! describe the sampled points only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{
    covariant_derivative, div_k, identity_suite, lower04, reindex, ricci, riemann, suspension, ProjectivePack,
};
use crate::error::{Error, Result};
use crate::jets::Point;
use crate::structure::{validate_statistical, Chart, ConnectionKind, LocalGeometry, ValidationReport};
use crate::tensor::Tensor;

/// Width of the band between `Pass` and `Fail`, as a multiple of `tol`.
pub const HYSTERESIS: f64 = 10.0;

pub const DEFAULT_POINTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    /// Non-finite defects fail.
    pub fn from_defect(defect: f64, tol: f64) -> Self {
        if defect <= tol {
            Verdict::Pass
        } else if defect >= HYSTERESIS * tol || !defect.is_finite() {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    }

    /// Conjunction: any `Fail` fails, all `Pass` passes.
    pub fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Pass, Verdict::Pass) => Verdict::Pass,
            _ => Verdict::Inconclusive,
        }
    }

    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }
}

/// One named defect contributing to a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub defect: f64,
    pub verdict: Verdict,
}

/// Outcome of one sampled check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub verdict: Verdict,
    /// Maximum defect over the sample points.
    pub defect: f64,
    pub tol: f64,
    pub points_tested: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub components: Vec<Component>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl CheckResult {
    fn new(name: &str, defect: f64, tol: f64, points_tested: usize) -> Self {
        Self {
            name: name.to_string(),
            verdict: Verdict::from_defect(defect, tol),
            defect: finite(defect),
            tol,
            points_tested,
            components: Vec::new(),
            note: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict.is_pass()
    }
}

/// Quasi-random points in a box: a Halton sequence shifted modulo 1 by a
/// seeded random offset per axis. The same seed always gives the same points.
pub fn sample_points(domain: &[(f64, f64)], count: usize, seed: u64) -> Result<Vec<Point>> {
    const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if domain.is_empty() || domain.len() > PRIMES.len() {
        return Err(Error::Dimension(format!(
            "cannot sample a {}-dimensional box",
            domain.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifts: Vec<f64> = domain.iter().map(|_| rng.random::<f64>()).collect();
    (1..=count as u64)
        .map(|i| {
            let coords = domain
                .iter()
                .zip(PRIMES)
                .zip(&shifts)
                .map(|((&(lo, hi), base), shift)| {
                    let u = (radical_inverse(i, base) + shift).fract();
                    lo + u * (hi - lo)
                })
                .collect();
            Point::new(coords)
        })
        .collect()
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let (mut f, mut out) = (inv, 0.0);
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}

/// Evaluates `f` at each point in parallel, keeping point order.
fn per_point<T: Send>(points: &[Point], f: impl Fn(&Point) -> Result<T> + Sync) -> Result<Vec<T>> {
    points.par_iter().map(&f).collect()
}

/// Reports stay finite: NaN and infinities become `f64::MAX`, which still fails.
fn finite(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::MAX
    }
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values
        .into_iter()
        .fold(0.0, |m, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) })
}

/// `C = 0`, equivalently `K = 0`. The defect is `max ‖C‖_∞`; `‖K‖_∞` is
/// reported alongside.
pub fn check_conjugate_nabla(chart: &Chart, points: &[Point], tol: f64) -> Result<CheckResult> {
    let rows = per_point(points, |p| {
        let geo = LocalGeometry::new(chart, p, 1, 0)?;
        Ok((geo.cubic.values().max_norm(), geo.k.values().max_norm()))
    })?;
    let c = max_of(rows.iter().map(|r| r.0));
    let k = max_of(rows.iter().map(|r| r.1));
    let mut out = CheckResult::new("conjugate_nabla", c, tol, points.len());
    out.components = vec![component("cubic_norm", c, tol), component("k_norm", k, tol)];
    Ok(out)
}

fn component(name: &str, defect: f64, tol: f64) -> Component {
    Component {
        name: name.to_string(),
        defect: finite(defect),
        verdict: Verdict::from_defect(defect, tol),
    }
}

/// Combines verdicts of conditions that must be equivalent; a `Pass` next to
/// a `Fail` is a [`Error::Consistency`].
fn combine_equivalent(check: &str, components: &[Component]) -> Result<Verdict> {
    let pass = components.iter().find(|c| c.verdict == Verdict::Pass);
    let fail = components.iter().find(|c| c.verdict == Verdict::Fail);
    match (pass, fail) {
        (Some(p), Some(f)) => Err(Error::Consistency(format!(
            "{check}: '{}' passes ({:e}) but '{}' fails ({:e})",
            p.name, p.defect, f.name, f.defect
        ))),
        (Some(_), None) if components.iter().all(|c| c.verdict == Verdict::Pass) => Ok(Verdict::Pass),
        (None, Some(_)) if components.iter().all(|c| c.verdict == Verdict::Fail) => Ok(Verdict::Fail),
        _ => Ok(Verdict::Inconclusive),
    }
}

/// `R = R*`, tested through five equivalent conditions: `R = R*`, `∇C` and
/// `∇̂C` totally symmetric, `∇̂K` symmetric in its lower slots, and the
/// (0,4) curvature antisymmetric in its last pair.
pub fn check_conjugate_r(chart: &Chart, points: &[Point], tol: f64) -> Result<CheckResult> {
    let rows = per_point(points, |p| {
        let geo = chart.local(p)?;
        let g = &geo.metric.g;
        let hat = geo.connection(ConnectionKind::LeviCivita);
        let primal = geo.connection(ConnectionKind::Nabla);
        let r = riemann(&primal).values();
        let r_star = riemann(&geo.connection(ConnectionKind::NablaStar)).values();
        let dc = covariant_derivative(&geo.cubic, &primal).values();
        let dc_hat = covariant_derivative(&geo.cubic, &hat).values();
        let dk_hat = covariant_derivative(&geo.k, &hat).values();
        let r04 = lower04(&r, g);
        let swapped = reindex(&r04, |[x, y, z, w]| [x, y, w, z]).scale(-1.0);
        Ok([
            r.rel_defect(&r_star)?,
            dc.symmetry_defect(&[0, 1, 2, 3])?,
            dc_hat.symmetry_defect(&[0, 1, 2, 3])?,
            dk_hat.symmetry_defect(&[0, 2, 3])?,
            r04.rel_defect(&swapped)?,
        ])
    })?;
    let names = [
        "r_equals_r_star",
        "nabla_cubic_symmetric",
        "levi_civita_cubic_symmetric",
        "levi_civita_k_symmetric",
        "last_pair_antisymmetric",
    ];
    let components: Vec<Component> = names
        .iter()
        .enumerate()
        .map(|(i, name)| component(name, max_of(rows.iter().map(|r| r[i])), tol))
        .collect();
    let verdict = combine_equivalent("conjugate_r", &components)?;
    let mut out = CheckResult::new(
        "conjugate_r",
        max_of(components.iter().map(|c| c.defect)),
        tol,
        points.len(),
    );
    out.verdict = verdict;
    out.components = components;
    Ok(out)
}

/// `Ric = Ric*`, cross-checked against `2(div̂K − ∇̂τ)`.
pub fn check_conjugate_ric(chart: &Chart, points: &[Point], tol: f64) -> Result<CheckResult> {
    let rows = per_point(points, |p| {
        let geo = chart.local(p)?;
        let hat = geo.connection(ConnectionKind::LeviCivita);
        let ric = ricci(&riemann(&geo.connection(ConnectionKind::Nabla)).values());
        let ric_star = ricci(&riemann(&geo.connection(ConnectionKind::NablaStar)).values());
        let div_hat = div_k(&covariant_derivative(&geo.k, &hat).values());
        let dtau_hat = covariant_derivative(&geo.tau(), &hat).values();
        let scale = 1f64.max(ric.max_norm()).max(ric_star.max_norm());
        let cross = div_hat.sub(&dtau_hat).scale(2.0).max_norm() / scale;
        Ok([ric.rel_defect(&ric_star)?, cross])
    })?;
    let components = vec![
        component("ric_equals_ric_star", max_of(rows.iter().map(|r| r[0])), tol),
        component("divergence_form", max_of(rows.iter().map(|r| r[1])), tol),
    ];
    let verdict = combine_equivalent("conjugate_ric", &components)?;
    let mut out = CheckResult::new("conjugate_ric", components[0].defect, tol, points.len());
    out.verdict = verdict;
    out.components = components;
    Ok(out)
}

/// Symmetry of the Ricci tensor of the given connection (local equiaffinity).
pub fn check_ricci_symmetric(chart: &Chart, points: &[Point], tol: f64, kind: ConnectionKind) -> Result<CheckResult> {
    let rows = per_point(points, |p| {
        let geo = chart.local(p)?;
        ricci(&riemann(&geo.connection(kind)).values()).symmetry_defect(&[0, 1])
    })?;
    Ok(CheckResult::new(
        &format!("ricci_symmetric[{kind}]"),
        max_of(rows),
        tol,
        points.len(),
    ))
}

/// `τ = 0`; the defect is `max ‖τ‖_∞`.
pub fn check_trace_free(chart: &Chart, points: &[Point], tol: f64) -> Result<CheckResult> {
    let rows = per_point(points, |p| {
        let geo = LocalGeometry::new(chart, p, 1, 0)?;
        Ok(geo.tau().values().max_norm())
    })?;
    Ok(CheckResult::new("trace_free", max_of(rows), tol, points.len()))
}

/// Least-squares fit of `R = k (g ∧ Id)` at each point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantCurvatureFit {
    pub connection: ConnectionKind,
    /// Mean of the pointwise fits.
    pub k: f64,
    pub k_min: f64,
    pub k_max: f64,
    /// Worst pointwise `‖R − k_p T‖_∞ / max(1, ‖R‖_∞)`.
    pub pointwise_residual: f64,
    /// `(k_max − k_min) / max(1, |k|)`.
    pub spread: f64,
    /// `max(pointwise_residual, spread)`; the verdict is taken on this.
    pub residual: f64,
    pub verdict: Verdict,
    pub tol: f64,
    pub points_tested: usize,
}

impl ConstantCurvatureFit {
    pub fn as_check(&self) -> CheckResult {
        let mut out = CheckResult::new(
            &format!("constant_curvature[{}]", self.connection),
            self.residual,
            self.tol,
            self.points_tested,
        );
        out.components = vec![
            component("pointwise_residual", self.pointwise_residual, self.tol),
            component("k_spread", self.spread, self.tol),
        ];
        out.note = Some(format!("k = {:.12e}", self.k));
        out
    }
}

/// Pointwise `(k_p, residual_p)` for the curvature tensor `r` and metric `g`.
pub fn fit_pointwise(r: &Tensor, g: &Tensor) -> Result<(f64, f64)> {
    let t = suspension(g);
    let tt: f64 = t.data().iter().map(|v| v * v).sum();
    if !(tt > f64::MIN_POSITIVE) {
        return Err(Error::DegenerateFit(format!("⟨T, T⟩ = {tt:e}")));
    }
    let rt: f64 = r.data().iter().zip(t.data()).map(|(a, b)| a * b).sum();
    let k = rt / tt;
    let residual = r.max_diff(&t.scale(k))? / 1f64.max(r.max_norm());
    Ok((k, residual))
}

pub fn fit_constant_curvature(
    chart: &Chart,
    points: &[Point],
    tol: f64,
    kind: ConnectionKind,
) -> Result<ConstantCurvatureFit> {
    if points.is_empty() {
        return Err(Error::DegenerateFit("no sample points".into()));
    }
    let rows = per_point(points, |p| {
        let geo = chart.local(p)?;
        fit_pointwise(&riemann(&geo.connection(kind)).values(), &geo.metric.g)
    })?;
    let k = rows.iter().map(|r| r.0).sum::<f64>() / rows.len() as f64;
    let k_min = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let k_max = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let pointwise_residual = max_of(rows.iter().map(|r| r.1));
    let spread = (k_max - k_min) / 1f64.max(k.abs());
    let residual = pointwise_residual.max(spread);
    Ok(ConstantCurvatureFit {
        connection: kind,
        k: finite(k),
        k_min: finite(k_min),
        k_max: finite(k_max),
        pointwise_residual: finite(pointwise_residual),
        spread: finite(spread),
        residual: finite(residual),
        verdict: Verdict::from_defect(residual, tol),
        tol,
        points_tested: points.len(),
    })
}

/// Projective flatness of one connection. In dimension 2 this is total
/// symmetry of `∇Ric`; from dimension 3 on it is `P = 0`, with the `∇Ric`
/// symmetry reported as corroboration. Either way the connection's Ricci
/// tensor must be symmetric first; otherwise the result fails with a
/// `not equiaffine` note.
pub fn check_projectively_flat(chart: &Chart, points: &[Point], tol: f64, kind: ConnectionKind) -> Result<CheckResult> {
    let n = chart.dim();
    let rows = per_point(points, |p| {
        let geo = chart.local(p)?;
        let conn = geo.connection(kind);
        let r = riemann(&conn).values();
        let ric = ricci(&r);
        let pack = ProjectivePack::new(&conn)?;
        let dric = pack.nabla_ric.symmetry_defect(&[0, 1, 2])?;
        let p_defect = pack.p.max_norm() / 1f64.max(r.max_norm());
        Ok([ric.symmetry_defect(&[0, 1])?, dric, p_defect])
    })?;
    let name = format!("projectively_flat[{kind}]");
    let ric_sym = component("ricci_symmetric", max_of(rows.iter().map(|r| r[0])), tol);
    let dric = component("nabla_ricci_symmetric", max_of(rows.iter().map(|r| r[1])), tol);
    let p_zero = component("projective_curvature_zero", max_of(rows.iter().map(|r| r[2])), tol);
    let main = if n == 2 { dric.defect } else { p_zero.defect };
    let mut out = CheckResult::new(&name, main, tol, points.len());
    match ric_sym.verdict {
        Verdict::Fail => {
            out.verdict = Verdict::Fail;
            out.note = Some("not equiaffine: Ricci tensor is not symmetric".into());
        }
        Verdict::Inconclusive => out.verdict = out.verdict.and(Verdict::Inconclusive),
        Verdict::Pass => {}
    }
    out.components = if n == 2 {
        vec![ric_sym, dric]
    } else {
        vec![ric_sym, p_zero, dric]
    };
    Ok(out)
}

/// Result of comparing equivalent characterizations on a chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub theorem: String,
    /// Always `"sampled"`: agreement is observed on the sample points of one
    /// chart, not established globally.
    pub scope: String,
    /// Whether the standing hypothesis held on the samples.
    pub hypothesis_met: bool,
    /// `(label, verdict)` for each characterization, in order.
    pub conditions: Vec<(String, Verdict)>,
    /// `Some(true)` when every condition was decided and they agree,
    /// `Some(false)` on a decided disagreement, `None` when some condition is
    /// inconclusive or the hypothesis fails.
    pub agree: Option<bool>,
    /// Fitted curvature of the primal connection.
    pub k: f64,
    /// When the constant-curvature condition holds: the defect of
    /// `Ric = (n − 1) k g`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ricci_consequence: Option<f64>,
    pub checks: Vec<CheckResult>,
    pub points_tested: usize,
}

impl TheoremReport {
    pub fn disagrees(&self) -> bool {
        self.agree == Some(false)
    }
}

const SAMPLED: &str = "sampled";

fn agreement(conditions: &[(String, Verdict)]) -> Option<bool> {
    if conditions.iter().any(|c| c.1 == Verdict::Inconclusive) {
        return None;
    }
    Some(conditions.windows(2).all(|w| w[0].1 == w[1].1))
}

fn ricci_consequence(chart: &Chart, points: &[Point], k: f64) -> Result<f64> {
    let n = chart.dim() as f64;
    let rows = per_point(points, |p| {
        let geo = chart.local(p)?;
        let ric = ricci(&riemann(&geo.connection(ConnectionKind::Nabla)).values());
        ric.rel_defect(&geo.metric.g.scale((n - 1.0) * k))
    })?;
    Ok(finite(max_of(rows)))
}

/// Compares (A) `∇` has constant curvature with (B) `R = R*` and `∇*`
/// projectively flat.
pub fn verify_constant_curvature_characterization(chart: &Chart, points: &[Point], tol: f64) -> Result<TheoremReport> {
    let fit = fit_constant_curvature(chart, points, tol, ConnectionKind::Nabla)?;
    let conj = check_conjugate_r(chart, points, tol)?;
    let pflat = check_projectively_flat(&chart.dual(), points, tol, ConnectionKind::Nabla)?;
    let conditions = vec![
        ("constant_curvature".to_string(), fit.verdict),
        (
            "conjugate_r_and_dual_projectively_flat".to_string(),
            conj.verdict.and(pflat.verdict),
        ),
    ];
    let ricci_consequence = if fit.verdict.is_pass() {
        Some(ricci_consequence(chart, points, fit.k)?)
    } else {
        None
    };
    Ok(TheoremReport {
        theorem: "constant_curvature_characterization".into(),
        scope: SAMPLED.into(),
        hypothesis_met: true,
        agree: agreement(&conditions),
        conditions,
        k: fit.k,
        ricci_consequence,
        checks: vec![fit.as_check(), conj, relabel(pflat, "projectively_flat[dual]")],
        points_tested: points.len(),
    })
}

/// For trace-free structures, compares (A) constant curvature, (B) `R = R*`
/// with `∇*` projectively flat, and (C) `Ric = Ric*` with `∇*` projectively
/// flat.
pub fn verify_trace_free_characterization(chart: &Chart, points: &[Point], tol: f64) -> Result<TheoremReport> {
    let trace = check_trace_free(chart, points, tol)?;
    let fit = fit_constant_curvature(chart, points, tol, ConnectionKind::Nabla)?;
    let conj_r = check_conjugate_r(chart, points, tol)?;
    let conj_ric = check_conjugate_ric(chart, points, tol)?;
    let pflat = check_projectively_flat(&chart.dual(), points, tol, ConnectionKind::Nabla)?;
    let conditions = vec![
        ("constant_curvature".to_string(), fit.verdict),
        (
            "conjugate_r_and_dual_projectively_flat".to_string(),
            conj_r.verdict.and(pflat.verdict),
        ),
        (
            "conjugate_ric_and_dual_projectively_flat".to_string(),
            conj_ric.verdict.and(pflat.verdict),
        ),
    ];
    let hypothesis_met = trace.passed();
    let ricci_consequence = if fit.verdict.is_pass() {
        Some(ricci_consequence(chart, points, fit.k)?)
    } else {
        None
    };
    Ok(TheoremReport {
        theorem: "trace_free_characterization".into(),
        scope: SAMPLED.into(),
        hypothesis_met,
        agree: if hypothesis_met { agreement(&conditions) } else { None },
        conditions,
        k: fit.k,
        ricci_consequence,
        checks: vec![
            trace,
            fit.as_check(),
            conj_r,
            conj_ric,
            relabel(pflat, "projectively_flat[dual]"),
        ],
        points_tested: points.len(),
    })
}

fn relabel(mut c: CheckResult, name: &str) -> CheckResult {
    c.name = name.to_string();
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub conjugate_r: Verdict,
    pub k: f64,
    pub residual: f64,
    pub constant_curvature: Verdict,
    /// Repeats [`AlphaScan::hypothesis_g_not_cc`] so each row stands alone.
    pub hypothesis_g_not_cc: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaScan {
    pub rows: Vec<AlphaRow>,
    /// True when the Levi-Civita connection itself is not of constant
    /// curvature on the samples.
    pub hypothesis_g_not_cc: bool,
    pub tol: f64,
    pub points_tested: usize,
}

/// Conjugate symmetry and constant-curvature fits of `∇^α` over a grid of α.
pub fn alpha_scan(chart: &Chart, alphas: &[f64], points: &[Point], tol: f64) -> Result<AlphaScan> {
    let lc = fit_constant_curvature(chart, points, tol, ConnectionKind::LeviCivita)?;
    let hypothesis_g_not_cc = lc.verdict == Verdict::Fail;
    let rows = alphas
        .iter()
        .map(|&alpha| {
            let scaled = chart.scaled(alpha);
            let conj = check_conjugate_r(&scaled, points, tol)?;
            let fit = fit_constant_curvature(&scaled, points, tol, ConnectionKind::Nabla)?;
            Ok(AlphaRow {
                alpha,
                conjugate_r: conj.verdict,
                k: fit.k,
                residual: fit.residual,
                constant_curvature: fit.verdict,
                hypothesis_g_not_cc,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AlphaScan {
        rows,
        hypothesis_g_not_cc,
        tol,
        points_tested: points.len(),
    })
}

/// One identity aggregated over the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityRow {
    pub name: String,
    /// Worst defect over the points where the identity applies (over all
    /// points when it applies nowhere).
    pub defect: f64,
    pub tol: f64,
    pub applicable: bool,
    pub verdict: Verdict,
}

/// Runs the identity suite at every point and keeps the worst defect of each
/// identity.
pub fn identity_table(chart: &Chart, points: &[Point], alphas: &[f64], tol: f64) -> Result<Vec<IdentityRow>> {
    let per = per_point(points, |p| identity_suite(&chart.local(p)?, alphas, tol))?;
    let Some(first) = per.first() else {
        return Ok(Vec::new());
    };
    Ok(first
        .iter()
        .enumerate()
        .map(|(i, proto)| {
            let entries: Vec<_> = per.iter().map(|row| &row[i]).collect();
            let applicable = entries.iter().any(|e| e.applicable);
            let defect = max_of(entries.iter().filter(|e| e.applicable || !applicable).map(|e| e.defect));
            let tol = tol * proto.tol_factor;
            IdentityRow {
                name: proto.name.clone(),
                defect: finite(defect),
                tol,
                applicable,
                verdict: Verdict::from_defect(defect, tol),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    pub points: usize,
    pub seed: u64,
    pub tol: f64,
    /// Connection used by the constant-curvature and projective checks.
    pub connection: ConnectionKind,
    pub alphas: Vec<f64>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            points: DEFAULT_POINTS,
            seed: 0,
            tol: 1e-8,
            connection: ConnectionKind::Nabla,
            alphas: crate::curvature::DEFAULT_ALPHAS.to_vec(),
        }
    }
}

/// Everything `check` reports about a chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub label: String,
    pub dim: usize,
    pub seed: u64,
    pub points_tested: usize,
    pub tol: f64,
    pub validation: ValidationReport,
    pub identities: Vec<IdentityRow>,
    pub checks: Vec<CheckResult>,
    pub theorems: Vec<TheoremReport>,
    pub alpha_scan: AlphaScan,
    /// Contradictions between conditions that must agree.
    pub consistency_errors: Vec<String>,
}

impl DiagnosticsReport {
    /// Validation, identities and theorem agreement all passed without any
    /// inconclusive outcome; classifications do not count.
    pub fn passed(&self) -> bool {
        self.validation.passed()
            && self.consistency_errors.is_empty()
            && self.identities.iter().all(|r| !r.applicable || r.verdict.is_pass())
            && self.theorems.iter().all(|t| !t.hypothesis_met || t.agree == Some(true))
    }
}

/// Runs validation, the identity suite, every classifier, both theorem
/// verifiers and an α-scan. Consistency errors are collected into the report
/// instead of aborting; other errors propagate.
pub fn run_diagnostics(chart: &Chart, config: &DiagnosticsConfig) -> Result<DiagnosticsReport> {
    let points = sample_points(chart.domain(), config.points, config.seed)?;
    let tol = config.tol;
    let validation = validate_statistical(chart, &points, tol);
    if !validation.passed() {
        return Ok(DiagnosticsReport {
            label: chart.label().to_string(),
            dim: chart.dim(),
            seed: config.seed,
            points_tested: points.len(),
            tol,
            validation,
            identities: Vec::new(),
            checks: Vec::new(),
            theorems: Vec::new(),
            alpha_scan: AlphaScan {
                rows: Vec::new(),
                hypothesis_g_not_cc: false,
                tol,
                points_tested: 0,
            },
            consistency_errors: Vec::new(),
        });
    }
    let mut consistency_errors = Vec::new();
    let mut keep = |name: &str, r: Result<CheckResult>| -> Result<CheckResult> {
        match r {
            Err(Error::Consistency(msg)) => {
                consistency_errors.push(msg.clone());
                let mut c = CheckResult::new(name, 0.0, tol, points.len());
                c.verdict = Verdict::Inconclusive;
                c.note = Some(msg);
                Ok(c)
            }
            other => other,
        }
    };

    let identities = identity_table(chart, &points, &config.alphas, tol)?;
    let conj_nabla = check_conjugate_nabla(chart, &points, tol)?;
    let conj_r = keep("conjugate_r", check_conjugate_r(chart, &points, tol))?;
    let conj_ric = keep("conjugate_ric", check_conjugate_ric(chart, &points, tol))?;
    let ric_sym = check_ricci_symmetric(chart, &points, tol, ConnectionKind::Nabla)?;
    let trace = check_trace_free(chart, &points, tol)?;
    let fit = fit_constant_curvature(chart, &points, tol, config.connection)?;
    let pflat = check_projectively_flat(chart, &points, tol, config.connection)?;
    let pflat_dual = relabel(
        check_projectively_flat(&chart.dual(), &points, tol, ConnectionKind::Nabla)?,
        "projectively_flat[dual]",
    );

    // ∇ = ∇* ⇒ R = R* ⇒ Ric = Ric* ⇒ Ric symmetric.
    let chain = [&conj_nabla, &conj_r, &conj_ric, &ric_sym];
    for pair in chain.windows(2) {
        if pair[0].verdict == Verdict::Pass && pair[1].verdict == Verdict::Fail {
            consistency_errors.push(format!("{} passes but {} fails", pair[0].name, pair[1].name));
        }
    }

    let mut theorems = Vec::new();
    for t in [
        verify_constant_curvature_characterization(chart, &points, tol),
        verify_trace_free_characterization(chart, &points, tol),
    ] {
        match t {
            Ok(t) => theorems.push(t),
            Err(Error::Consistency(msg)) => consistency_errors.push(msg),
            Err(e) => return Err(e),
        }
    }
    let alpha_scan = match alpha_scan(chart, &config.alphas, &points, tol) {
        Ok(scan) => scan,
        Err(Error::Consistency(msg)) => {
            consistency_errors.push(msg);
            AlphaScan {
                rows: Vec::new(),
                hypothesis_g_not_cc: false,
                tol,
                points_tested: points.len(),
            }
        }
        Err(e) => return Err(e),
    };
    consistency_errors.sort();
    consistency_errors.dedup();

    Ok(DiagnosticsReport {
        label: chart.label().to_string(),
        dim: chart.dim(),
        seed: config.seed,
        points_tested: points.len(),
        tol,
        validation,
        identities,
        checks: vec![
            conj_nabla,
            conj_r,
            conj_ric,
            ric_sym,
            trace,
            fit.as_check(),
            pflat,
            pflat_dual,
        ],
        theorems,
        alpha_scan,
        consistency_errors,
    })
}
