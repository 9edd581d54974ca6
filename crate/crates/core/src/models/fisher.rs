//! Fisher metric and cubic tensor by quadrature.
//!
//! `g_ij = E[∂_iℓ ∂_jℓ]` and `C_ijk = E[∂_iℓ ∂_jℓ ∂_kℓ]`, with scores taken
//! from order-1 jets of the log-density in the parameters. Each family
//! supplies its own expectation rule; refinement doubles the node count until
//! successive results agree within the quadrature tolerance.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::jets::Jet;
use crate::special::{ln_gamma, polygamma};
use crate::tensor::{Tensor, Variance};

use Variance::Lower;

/// Node count at refinement level 0.
pub const BASE_NODES: usize = 64;
/// Highest refinement level tried before giving up.
pub const MAX_LEVEL: usize = 5;
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

/// Sample points and weights approximating `E[f(X)]` as `Σ w_i f(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// A one-dimensional parametric density.
pub trait LogLikelihood: Send + Sync {
    fn dim(&self) -> usize;

    /// `ℓ(x; θ)` with `θ` given as jets.
    fn log_density(&self, x: f64, theta: &[Jet]) -> Result<Jet>;

    /// Expectation rule under `p(·; θ)` with `BASE_NODES · 2^level` nodes.
    fn rule(&self, theta: &[f64], level: usize) -> Result<Rule>;

    /// Scores `∂_θ ℓ(x; θ)`.
    fn score(&self, x: f64, theta: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        let vars: Vec<Jet> = (0..n).map(|i| Jet::variable(n, 1, i, theta[i])).collect();
        Ok(self.log_density(x, &vars)?.gradient().to_vec())
    }

    /// Scores at every node of a rule. Families override this to hoist
    /// parameter-only terms out of the loop.
    fn scores(&self, points: &[f64], theta: &[f64]) -> Result<Vec<Vec<f64>>> {
        points.iter().map(|&x| self.score(x, theta)).collect()
    }
}

/// Probabilists' Gauss–Hermite rule (weight `e^{−z²/2}/√(2π)`), computed by
/// Golub–Welsch. Weights sum to one.
pub fn gauss_hermite(nodes: usize) -> Rule {
    let mut jacobi = DMatrix::<f64>::zeros(nodes, nodes);
    for i in 1..nodes {
        let b = (i as f64).sqrt();
        jacobi[(i, i - 1)] = b;
        jacobi[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..nodes)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // symmetrize against eigen-solver noise
    for i in 0..nodes / 2 {
        let j = nodes - 1 - i;
        let z = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-z, w);
        pairs[j] = (z, w);
    }
    if nodes % 2 == 1 {
        pairs[nodes / 2].0 = 0.0;
    }
    Rule {
        points: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

fn gauss_hermite_cached(nodes: usize) -> Arc<Rule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Rule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry(nodes)
        .or_insert_with(|| Arc::new(gauss_hermite(nodes)))
        .clone()
}

/// Univariate normal in `(μ, σ)`.
#[derive(Debug, Clone, Default)]
pub struct NormalLikelihood;

impl LogLikelihood for NormalLikelihood {
    fn dim(&self) -> usize {
        2
    }

    fn log_density(&self, x: f64, theta: &[Jet]) -> Result<Jet> {
        let (mu, sigma) = (&theta[0], &theta[1]);
        if !(sigma.value() > 0.0) {
            return Err(Error::Domain(format!("sigma must be positive, got {}", sigma.value())));
        }
        let z = (mu.scale(-1.0).add_const(x)) / sigma.clone();
        Ok((z.clone() * z).scale(-0.5) - sigma.ln()
            + Jet::constant(2, mu.order(), -0.5 * (2.0 * std::f64::consts::PI).ln()))
    }

    fn rule(&self, theta: &[f64], level: usize) -> Result<Rule> {
        let (mu, sigma) = (theta[0], theta[1]);
        if !(sigma > 0.0) {
            return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
        }
        let mut r = gauss_hermite_cached(BASE_NODES << level).as_ref().clone();
        for z in &mut r.points {
            *z = mu + sigma * *z;
        }
        Ok(r)
    }
}

/// Parametrisation of the gamma family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaParams {
    /// `(k, β)`: shape and rate.
    ShapeRate,
    /// `(θ₁, θ₂) = (k, −β)`.
    Natural,
}

/// Gamma family. Expectations use the trapezoid rule in `s = ln(βx)`, where
/// the density `exp(ks − e^s − ln Γ(k))` decays doubly exponentially on the
/// right and exponentially on the left.
#[derive(Debug, Clone)]
pub struct GammaLikelihood {
    pub params: GammaParams,
    /// Fixed integration range in `s`; derived from `k` when `None`.
    pub log_range: Option<(f64, f64)>,
}

impl GammaLikelihood {
    pub fn new(params: GammaParams) -> Self {
        Self {
            params,
            log_range: None,
        }
    }

    /// A range in `s` that captures the density to below 1e-17 for every shape
    /// in `[k_lo, k_hi]`.
    pub fn range_for_shapes(k_lo: f64, k_hi: f64) -> (f64, f64) {
        let lo = k_lo.ln().min(0.0) - 45.0 / k_lo - 5.0;
        let hi = k_hi.ln().max(0.0) + 5.0;
        (lo, hi)
    }

    fn shape_rate(&self, theta: &[f64]) -> Result<(f64, f64)> {
        let (k, b) = match self.params {
            GammaParams::ShapeRate => (theta[0], theta[1]),
            GammaParams::Natural => (theta[0], -theta[1]),
        };
        if !(k > 0.0 && b > 0.0) {
            return Err(Error::Domain(format!(
                "gamma needs shape > 0 and rate > 0, got ({k}, {b})"
            )));
        }
        Ok((k, b))
    }
}

impl LogLikelihood for GammaLikelihood {
    fn dim(&self) -> usize {
        2
    }

    fn log_density(&self, x: f64, theta: &[Jet]) -> Result<Jet> {
        let vals: Vec<f64> = theta.iter().map(Jet::value).collect();
        let (k, _) = self.shape_rate(&vals)?;
        if !(x > 0.0) {
            return Err(Error::Domain(format!("gamma sample must be positive, got {x}")));
        }
        let shape = &theta[0];
        let rate = match self.params {
            GammaParams::ShapeRate => theta[1].clone(),
            GammaParams::Natural => theta[1].scale(-1.0),
        };
        let lg = shape.compose([ln_gamma(k), polygamma(0, k), polygamma(1, k), polygamma(2, k)]);
        Ok(shape.clone() * rate.ln() - lg + shape.add_const(-1.0).scale(x.ln()) - rate.scale(x))
    }

    fn scores(&self, points: &[f64], theta: &[f64]) -> Result<Vec<Vec<f64>>> {
        let (k, b) = self.shape_rate(theta)?;
        let shape_part = b.ln() - polygamma(0, k);
        let rate_sign = match self.params {
            GammaParams::ShapeRate => 1.0,
            GammaParams::Natural => -1.0,
        };
        points
            .iter()
            .map(|&x| {
                if !(x > 0.0) {
                    return Err(Error::Domain(format!("gamma sample must be positive, got {x}")));
                }
                Ok(vec![shape_part + x.ln(), rate_sign * (k / b - x)])
            })
            .collect()
    }

    fn rule(&self, theta: &[f64], level: usize) -> Result<Rule> {
        let (k, b) = self.shape_rate(theta)?;
        let (lo, hi) = self.log_range.unwrap_or_else(|| Self::range_for_shapes(k, k));
        let intervals = BASE_NODES << level;
        let h = (hi - lo) / intervals as f64;
        let lg = ln_gamma(k);
        let mut points = Vec::with_capacity(intervals + 1);
        let mut weights = Vec::with_capacity(intervals + 1);
        for i in 0..=intervals {
            let s = lo + h * i as f64;
            let end = if i == 0 || i == intervals { 0.5 } else { 1.0 };
            points.push(s.exp() / b);
            weights.push(end * h * (k * s - s.exp() - lg).exp());
        }
        Ok(Rule { points, weights })
    }
}

/// Fisher tensors at one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherTensors {
    pub g: Tensor,
    /// Present when requested with order 3.
    pub c: Option<Tensor>,
    /// `E[∂_iℓ]`, which vanishes for a correctly normalised density.
    pub score_mean: Vec<f64>,
    /// `Σ w_i − 1`.
    pub mass_error: f64,
    /// Refinement level at which successive results agreed.
    pub level: usize,
}

/// Fisher metric and cubic tensor with one fixed rule.
pub fn fisher_with_rule(ll: &dyn LogLikelihood, theta: &[f64], rule: &Rule) -> Result<FisherTensors> {
    let n = ll.dim();
    let mut g = vec![0.0; n * n];
    let mut c = vec![0.0; n * n * n];
    let mut mean = vec![0.0; n];
    let mut mass = 0.0;
    let scores = ll.scores(&rule.points, theta)?;
    for (s, &w) in scores.iter().zip(&rule.weights) {
        if w == 0.0 {
            continue;
        }
        mass += w;
        for i in 0..n {
            mean[i] += w * s[i];
            for j in 0..n {
                let sij = w * s[i] * s[j];
                g[i * n + j] += sij;
                for k in 0..n {
                    c[(i * n + j) * n + k] += sij * s[k];
                }
            }
        }
    }
    Ok(FisherTensors {
        g: Tensor::from_data(n, vec![Lower, Lower], g)?,
        c: Some(Tensor::from_data(n, vec![Lower; 3], c)?.symmetrize(&[0, 1, 2])?),
        score_mean: mean,
        mass_error: mass - 1.0,
        level: 0,
    })
}

/// Refines until successive levels agree within `quad_tol` (relative to
/// `max(1, |value|)`), then checks normalisation and the score mean.
///
/// # Errors
/// [`Error::Param`] for `order ∉ {2, 3}`, [`Error::Quadrature`] on
/// non-convergence or an unnormalised density.
pub fn fisher_by_quadrature(
    ll: &dyn LogLikelihood,
    theta: &[f64],
    order: usize,
    quad_tol: f64,
) -> Result<FisherTensors> {
    if !(order == 2 || order == 3) {
        return Err(Error::Param(format!("quadrature order must be 2 or 3, got {order}")));
    }
    if theta.len() != ll.dim() {
        return Err(Error::Dimension(format!(
            "expected {} parameters, got {}",
            ll.dim(),
            theta.len()
        )));
    }
    let mut prev: Option<FisherTensors> = None;
    for level in 0..=MAX_LEVEL {
        let mut cur = fisher_with_rule(ll, theta, &ll.rule(theta, level)?)?;
        cur.level = level;
        if let Some(p) = &prev {
            let dg = p.g.rel_defect(&cur.g)?;
            let dc = p.c.as_ref().unwrap().rel_defect(cur.c.as_ref().unwrap())?;
            if dg.max(dc) <= quad_tol {
                if cur.mass_error.abs() > quad_tol {
                    return Err(Error::Quadrature(format!(
                        "density mass differs from 1 by {:e}",
                        cur.mass_error
                    )));
                }
                if let Some(m) = cur.score_mean.iter().find(|m| m.abs() > quad_tol.max(1e-12)) {
                    return Err(Error::Quadrature(format!("score mean {m:e} is not zero")));
                }
                if order == 2 {
                    cur.c = None;
                }
                return Ok(cur);
            }
        }
        prev = Some(cur);
    }
    Err(Error::Quadrature(format!(
        "no convergence to {quad_tol:e} within {} nodes",
        BASE_NODES << MAX_LEVEL
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::trigamma;

    #[test]
    fn hermite_rule_moments() {
        let r = gauss_hermite(64);
        let m = |p: i32| -> f64 { r.points.iter().zip(&r.weights).map(|(z, w)| w * z.powi(p)).sum() };
        assert!((m(0) - 1.0).abs() < 1e-13);
        assert!(m(1).abs() < 1e-13);
        assert!((m(2) - 1.0).abs() < 1e-12);
        assert!((m(4) - 3.0).abs() < 1e-11);
        assert!((m(6) - 15.0).abs() < 1e-10);
    }

    #[test]
    fn normal_fisher_at_unit_scale() {
        let f = fisher_by_quadrature(&NormalLikelihood, &[0.0, 1.0], 3, 1e-12).unwrap();
        let want = Tensor::from_data(2, vec![Lower, Lower], vec![1.0, 0.0, 0.0, 2.0]).unwrap();
        assert!(f.g.max_diff(&want).unwrap() < 1e-12);
        let c = f.c.unwrap();
        assert!((c.get(&[0, 0, 1]) - 2.0).abs() < 1e-12);
        assert!((c.get(&[1, 1, 1]) - 8.0).abs() < 1e-11);
        assert!(c.get(&[0, 0, 0]).abs() < 1e-12);
        assert!(f.score_mean.iter().all(|m| m.abs() < 1e-12));
    }

    #[test]
    fn gamma_fisher_at_shape_two() {
        let ll = GammaLikelihood::new(GammaParams::ShapeRate);
        let f = fisher_by_quadrature(&ll, &[2.0, 1.0], 3, 1e-12).unwrap();
        let want = [trigamma(2.0), -1.0, -1.0, 2.0];
        for (a, b) in f.g.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!(f.score_mean.iter().all(|m| m.abs() < 1e-10));
        assert!(f.mass_error.abs() < 1e-12);
    }

    #[test]
    fn gamma_batched_scores_match_jet_scores() {
        for params in [GammaParams::ShapeRate, GammaParams::Natural] {
            let ll = GammaLikelihood::new(params);
            let theta = match params {
                GammaParams::ShapeRate => [2.5, 1.3],
                GammaParams::Natural => [2.5, -1.3],
            };
            let xs = [0.01, 0.7, 3.0, 11.0];
            for (x, batched) in xs.iter().zip(ll.scores(&xs, &theta).unwrap()) {
                let jet = ll.score(*x, &theta).unwrap();
                for (a, b) in batched.iter().zip(&jet) {
                    assert!((a - b).abs() < 1e-13 * b.abs().max(1.0), "{params:?} x={x}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn order_two_omits_cubic() {
        let f = fisher_by_quadrature(&NormalLikelihood, &[0.3, 1.5], 2, 1e-12).unwrap();
        assert!(f.c.is_none());
        assert!(matches!(
            fisher_by_quadrature(&NormalLikelihood, &[0.0, 1.0], 4, 1e-12),
            Err(Error::Param(_))
        ));
    }

    /// A density that integrates to 1/2 must be rejected.
    struct HalfMass;

    impl LogLikelihood for HalfMass {
        fn dim(&self) -> usize {
            2
        }
        fn log_density(&self, x: f64, theta: &[Jet]) -> Result<Jet> {
            NormalLikelihood.log_density(x, theta)
        }
        fn rule(&self, theta: &[f64], level: usize) -> Result<Rule> {
            let mut r = NormalLikelihood.rule(theta, level)?;
            r.weights.iter_mut().for_each(|w| *w *= 0.5);
            Ok(r)
        }
    }

    #[test]
    fn unnormalised_density_is_a_quadrature_error() {
        assert!(matches!(
            fisher_by_quadrature(&HalfMass, &[0.0, 1.0], 3, 1e-10),
            Err(Error::Quadrature(_))
        ));
    }
}
