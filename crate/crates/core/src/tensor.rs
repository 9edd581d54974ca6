//! Dense small tensors at a point.
//!
//! Components are stored row-major over the slots in declared order, each
//! slot carrying its own [`Variance`]. The component type is generic so the
//! same algebra runs on plain values (`f64`) and on jets ([`Jet`]), the latter
//! being how differentiated fields are assembled.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jets::Jet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variance {
    Upper,
    Lower,
}

use Variance::{Lower, Upper};

/// Ring operations needed by the tensor algebra.
pub trait Scalar: Clone + std::fmt::Debug + Send + Sync {
    fn zero_like(&self) -> Self;
    fn constant_like(&self, v: f64) -> Self;
    fn plus(&self, o: &Self) -> Self;
    fn minus(&self, o: &Self) -> Self;
    fn times(&self, o: &Self) -> Self;
    fn scaled(&self, s: f64) -> Self;
    fn recip(&self) -> Self;
    fn value(&self) -> f64;
}

impl Scalar for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn constant_like(&self, v: f64) -> Self {
        v
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn minus(&self, o: &Self) -> Self {
        self - o
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn scaled(&self, s: f64) -> Self {
        self * s
    }
    fn recip(&self) -> Self {
        1.0 / self
    }
    fn value(&self) -> f64 {
        *self
    }
}

impl Scalar for Jet {
    fn zero_like(&self) -> Self {
        Jet::constant(self.nvars(), self.order(), 0.0)
    }
    fn constant_like(&self, v: f64) -> Self {
        Jet::constant(self.nvars(), self.order(), v)
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn minus(&self, o: &Self) -> Self {
        self - o
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn scaled(&self, s: f64) -> Self {
        self.scale(s)
    }
    fn recip(&self) -> Self {
        Jet::recip(self)
    }
    fn value(&self) -> f64 {
        Jet::value(self)
    }
}

/// A dense tensor with `dim^rank` components.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f64> {
    dim: usize,
    variance: Vec<Variance>,
    data: Vec<T>,
}

/// Iterates over all multi-indices of the given rank in row-major order.
fn for_each_index(dim: usize, rank: usize, mut f: impl FnMut(&[usize])) {
    let total = dim.pow(rank as u32);
    let mut idx = vec![0usize; rank];
    for _ in 0..total {
        f(&idx);
        for s in (0..rank).rev() {
            idx[s] += 1;
            if idx[s] < dim {
                break;
            }
            idx[s] = 0;
        }
    }
}

pub(crate) fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

impl<T: Scalar> Tensor<T> {
    pub fn from_fn(dim: usize, variance: Vec<Variance>, mut f: impl FnMut(&[usize]) -> T) -> Self {
        let mut data = Vec::with_capacity(dim.pow(variance.len() as u32));
        for_each_index(dim, variance.len(), |idx| data.push(f(idx)));
        Self { dim, variance, data }
    }

    pub fn from_data(dim: usize, variance: Vec<Variance>, data: Vec<T>) -> Result<Self> {
        let want = dim.pow(variance.len() as u32);
        if data.len() != want {
            return Err(Error::Shape(format!("expected {want} components, got {}", data.len())));
        }
        Ok(Self { dim, variance, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, idx: &[usize]) -> &T {
        &self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: T) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    fn zero(&self) -> T {
        self.data[0].zero_like()
    }

    pub fn map<U: Scalar>(&self, f: impl FnMut(&T) -> U) -> Tensor<U> {
        Tensor {
            dim: self.dim,
            variance: self.variance.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }

    fn assert_same_shape(&self, o: &Self) {
        assert!(
            self.dim == o.dim && self.variance == o.variance,
            "tensor shape mismatch: {:?} vs {:?}",
            self.variance,
            o.variance
        );
    }

    fn same_shape(&self, o: &Self) -> Result<()> {
        if self.dim != o.dim || self.variance != o.variance {
            return Err(Error::Shape(format!(
                "dim {} {:?} vs dim {} {:?}",
                self.dim, self.variance, o.dim, o.variance
            )));
        }
        Ok(())
    }

    /// # Panics
    /// On shape mismatch.
    pub fn add(&self, o: &Self) -> Self {
        self.assert_same_shape(o);
        Self {
            dim: self.dim,
            variance: self.variance.clone(),
            data: self.data.iter().zip(&o.data).map(|(a, b)| a.plus(b)).collect(),
        }
    }

    /// # Panics
    /// On shape mismatch.
    pub fn sub(&self, o: &Self) -> Self {
        self.assert_same_shape(o);
        Self {
            dim: self.dim,
            variance: self.variance.clone(),
            data: self.data.iter().zip(&o.data).map(|(a, b)| a.minus(b)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v.scaled(s))
    }

    /// Relabels slots: slot `s` of the result is slot `order[s]` of `self`.
    ///
    /// With `order = [1, 0, 2, 3]`, `result[x, y, z, w] = self[y, x, z, w]`.
    pub fn permute(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.rank());
        let variance = order.iter().map(|&s| self.variance[s]).collect();
        let mut src = vec![0; self.rank()];
        Self::from_fn(self.dim, variance, |idx| {
            for (s, &o) in order.iter().enumerate() {
                src[o] = idx[s];
            }
            self.get(&src).clone()
        })
    }

    pub fn swap_slots(&self, a: usize, b: usize) -> Self {
        let mut order: Vec<usize> = (0..self.rank()).collect();
        order.swap(a, b);
        self.permute(&order)
    }

    pub fn outer(&self, o: &Self) -> Self {
        assert_eq!(self.dim, o.dim);
        let r = self.rank();
        let mut variance = self.variance.clone();
        variance.extend_from_slice(&o.variance);
        Self::from_fn(self.dim, variance, |idx| self.get(&idx[..r]).times(o.get(&idx[r..])))
    }

    /// Trace over two slots of opposite variance.
    pub fn contract(&self, a: usize, b: usize) -> Result<Self> {
        if a == b || a >= self.rank() || b >= self.rank() {
            return Err(Error::Shape(format!(
                "bad contraction slots ({a}, {b}) for rank {}",
                self.rank()
            )));
        }
        if self.variance[a] == self.variance[b] {
            return Err(Error::Variance(format!(
                "cannot contract slots {a} and {b}: both {:?}",
                self.variance[a]
            )));
        }
        let keep: Vec<usize> = (0..self.rank()).filter(|&s| s != a && s != b).collect();
        let variance = keep.iter().map(|&s| self.variance[s]).collect();
        let mut src = vec![0; self.rank()];
        Ok(Self::from_fn(self.dim, variance, |idx| {
            for (k, &s) in keep.iter().enumerate() {
                src[s] = idx[k];
            }
            let mut acc = self.zero();
            for m in 0..self.dim {
                src[a] = m;
                src[b] = m;
                acc = acc.plus(self.get(&src));
            }
            acc
        }))
    }

    /// Contracts `slot` of `self` against a rank-2 tensor `m` on its first slot:
    /// `result[.., a, ..] = Σ_b m[a, b] self[.., b, ..]`, with the slot's variance
    /// replaced by `m`'s first-slot variance.
    fn apply_on_slot(&self, slot: usize, m: &Self) -> Self {
        let mut variance = self.variance.clone();
        variance[slot] = m.variance[0];
        let mut src = vec![0; self.rank()];
        Self::from_fn(self.dim, variance, |idx| {
            src.copy_from_slice(idx);
            let a = idx[slot];
            let mut acc = self.zero();
            for b in 0..self.dim {
                src[slot] = b;
                acc = acc.plus(&m.get(&[a, b]).times(self.get(&src)));
            }
            acc
        })
    }

    /// Lowers an upper slot with the metric `g` (a symmetric (0,2) tensor).
    pub fn lower(&self, slot: usize, g: &Self) -> Result<Self> {
        if g.variance != [Lower, Lower] {
            return Err(Error::Variance("lowering needs a (0,2) metric".into()));
        }
        if self.variance.get(slot) != Some(&Upper) {
            return Err(Error::Variance(format!("slot {slot} is not an upper index")));
        }
        Ok(self.apply_on_slot(slot, g))
    }

    /// Raises a lower slot with the inverse metric (a symmetric (2,0) tensor).
    pub fn raise(&self, slot: usize, g_inv: &Self) -> Result<Self> {
        if g_inv.variance != [Upper, Upper] {
            return Err(Error::Variance("raising needs a (2,0) inverse metric".into()));
        }
        if self.variance.get(slot) != Some(&Lower) {
            return Err(Error::Variance(format!("slot {slot} is not a lower index")));
        }
        Ok(self.apply_on_slot(slot, g_inv))
    }

    fn check_slots(&self, slots: &[usize]) -> Result<()> {
        if slots.iter().any(|&s| s >= self.rank()) {
            return Err(Error::Shape(format!("slot out of range in {slots:?}")));
        }
        if let Some(&first) = slots.first() {
            if slots.iter().any(|&s| self.variance[s] != self.variance[first]) {
                return Err(Error::Variance(format!("slots {slots:?} mix upper and lower indices")));
            }
        }
        Ok(())
    }

    fn slot_permutations(&self, slots: &[usize]) -> Vec<Self> {
        permutations(slots.len())
            .into_iter()
            .map(|p| {
                let mut order: Vec<usize> = (0..self.rank()).collect();
                for (k, &pk) in p.iter().enumerate() {
                    order[slots[k]] = slots[pk];
                }
                self.permute(&order)
            })
            .collect()
    }

    /// Average over all permutations of the listed slots.
    pub fn symmetrize(&self, slots: &[usize]) -> Result<Self> {
        self.check_slots(slots)?;
        let perms = self.slot_permutations(slots);
        let k = perms.len() as f64;
        let sum = perms.iter().skip(1).fold(perms[0].clone(), |acc, t| acc.add(t));
        Ok(sum.scale(1.0 / k))
    }

    /// `max_σ ‖t − σt‖_∞ / max(1, ‖t‖_∞)` over permutations of the listed slots.
    pub fn symmetry_defect(&self, slots: &[usize]) -> Result<f64> {
        self.check_slots(slots)?;
        let norm = self.data.iter().fold(0.0f64, |m, v| m.max(v.value().abs()));
        let worst = self
            .slot_permutations(slots)
            .iter()
            .map(|p| {
                self.data
                    .iter()
                    .zip(&p.data)
                    .fold(0.0f64, |m, (a, b)| m.max((a.value() - b.value()).abs()))
            })
            .fold(0.0, f64::max);
        Ok(worst / norm.max(1.0))
    }

    pub fn is_totally_symmetric(&self, slots: &[usize], tol: f64) -> Result<bool> {
        Ok(self.symmetry_defect(slots)? <= tol)
    }

    /// Component values as a plain tensor.
    pub fn values(&self) -> Tensor<f64> {
        self.map(|v| v.value())
    }

    /// `‖a − b‖_∞`.
    pub fn max_diff(&self, o: &Self) -> Result<f64> {
        self.same_shape(o)?;
        Ok(self
            .data
            .iter()
            .zip(&o.data)
            .fold(0.0f64, |m, (a, b)| m.max((a.value() - b.value()).abs())))
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.value().abs()))
    }

    /// `‖a − b‖_∞ / max(1, ‖a‖_∞, ‖b‖_∞)`.
    pub fn rel_defect(&self, o: &Self) -> Result<f64> {
        let d = self.max_diff(o)?;
        Ok(d / 1f64.max(self.max_norm()).max(o.max_norm()))
    }
}

impl Tensor<f64> {
    pub fn zeros(dim: usize, variance: Vec<Variance>) -> Self {
        Self::from_fn(dim, variance, |_| 0.0)
    }

    /// The (1,1) identity `δ^i_j`.
    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, vec![Upper, Lower], |i| if i[0] == i[1] { 1.0 } else { 0.0 })
    }

    /// Rank-0 value.
    pub fn scalar(&self) -> f64 {
        assert_eq!(self.rank(), 0);
        self.data[0]
    }
}

impl Tensor<Jet> {
    /// `∂_m` of every component.
    pub fn derivative(&self, m: usize) -> Self {
        self.map(|j| j.derivative(m))
    }

    /// Smallest jet order among the components.
    pub fn order(&self) -> usize {
        self.data.iter().map(Jet::order).min().unwrap_or(0)
    }
}

/// `‖a − b‖_∞` as a free function.
pub fn max_norm(a: &Tensor, b: &Tensor) -> Result<f64> {
    a.max_diff(b)
}

/// Relative defect `‖a − b‖_∞ / max(1, ‖a‖_∞, ‖b‖_∞)`.
pub fn rel_defect(a: &Tensor, b: &Tensor) -> Result<f64> {
    a.rel_defect(b)
}

/// Inverts an `n × n` row-major matrix by Gauss–Jordan elimination with
/// partial pivoting on component values. Returns the inverse and the
/// determinant value; `None` when a pivot vanishes.
pub(crate) fn invert<T: Scalar>(m: &[T], n: usize) -> Option<(Vec<T>, f64)> {
    let mut a = m.to_vec();
    let one = m[0].constant_like(1.0);
    let zero = m[0].zero_like();
    let mut inv: Vec<T> = (0..n * n)
        .map(|k| if k / n == k % n { one.clone() } else { zero.clone() })
        .collect();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r * n + col].value().abs().total_cmp(&a[s * n + col].value().abs()))?;
        if a[piv * n + col].value() == 0.0 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
                inv.swap(piv * n + k, col * n + k);
            }
            det = -det;
        }
        let p = a[col * n + col].clone();
        det *= p.value();
        let pinv = p.recip();
        for k in 0..n {
            a[col * n + k] = a[col * n + k].times(&pinv);
            inv[col * n + k] = inv[col * n + k].times(&pinv);
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * n + col].clone();
            for k in 0..n {
                let ak = a[col * n + k].times(&f);
                let ik = inv[col * n + k].times(&f);
                a[r * n + k] = a[r * n + k].minus(&ak);
                inv[r * n + k] = inv[r * n + k].minus(&ik);
            }
        }
    }
    Some((inv, det))
}

/// The metric at a point, with its inverse, determinant and signature.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub g: Tensor,
    pub g_inv: Tensor,
    pub det: f64,
    /// Counts of positive and negative eigenvalues.
    pub signature: (usize, usize),
}

/// Relative threshold below which a metric is treated as singular.
pub const SINGULAR_DET_RATIO: f64 = 1e-12;

impl Metric {
    /// # Errors
    /// [`Error::SingularMetric`] when `|det g| < 1e-12 · (max |g_ij|)^n`.
    pub fn new(g: Tensor, point: &[f64]) -> Result<Self> {
        if g.variance() != [Lower, Lower] {
            return Err(Error::Variance("metric must be a (0,2) tensor".into()));
        }
        let n = g.dim();
        let singular = |det: f64| Error::SingularMetric {
            point: point.to_vec(),
            det,
        };
        let (inv, det) = invert(g.data(), n).ok_or_else(|| singular(0.0))?;
        if is_singular(det, g.max_norm(), n) {
            return Err(singular(det));
        }
        let m = DMatrix::from_row_slice(n, n, g.data());
        let eig = SymmetricEigen::new(m).eigenvalues;
        let pos = eig.iter().filter(|&&e| e > 0.0).count();
        Ok(Self {
            g_inv: Tensor::from_data(n, vec![Upper, Upper], inv)?,
            g,
            det,
            signature: (pos, n - pos),
        })
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }
}

pub(crate) fn is_singular(det: f64, scale: f64, n: usize) -> bool {
    !det.is_finite() || det.abs() < SINGULAR_DET_RATIO * scale.max(f64::MIN_POSITIVE).powi(n as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(dim: usize, variance: Vec<Variance>, data: Vec<f64>) -> Tensor {
        Tensor::from_data(dim, variance, data).unwrap()
    }

    #[test]
    fn trace_of_identity() {
        assert_eq!(Tensor::identity(3).contract(0, 1).unwrap().scalar(), 3.0);
    }

    #[test]
    fn trace_of_diagonal() {
        let m = t(2, vec![Upper, Lower], vec![1.0, 0.0, 0.0, 2.0]);
        assert_eq!(m.contract(0, 1).unwrap().scalar(), 3.0);
    }

    #[test]
    fn same_variance_contraction_is_rejected() {
        let m = t(2, vec![Lower, Lower], vec![1.0, 0.0, 0.0, 2.0]);
        assert!(matches!(m.contract(0, 1), Err(Error::Variance(_))));
    }

    #[test]
    fn euclidean_raise_is_identity() {
        let delta = t(3, vec![Upper, Upper], Tensor::identity(3).data().to_vec());
        let v = t(3, vec![Lower], vec![1.0, -2.0, 0.5]);
        assert_eq!(v.raise(0, &delta).unwrap().data(), v.data());
    }

    #[test]
    fn lower_then_raise_roundtrip() {
        let g = t(2, vec![Lower, Lower], vec![2.0, 0.3, 0.3, 1.5]);
        let m = Metric::new(g.clone(), &[0.0, 0.0]).unwrap();
        let v = t(2, vec![Upper, Lower], vec![1.0, 2.0, 3.0, 4.0]);
        let back = v.lower(0, &g).unwrap().raise(0, &m.g_inv).unwrap();
        assert!(back.max_diff(&v).unwrap() < 1e-12);
    }

    #[test]
    fn raise_on_upper_slot_is_variance_error() {
        let g = t(2, vec![Upper, Upper], vec![1.0, 0.0, 0.0, 1.0]);
        let v = t(2, vec![Upper], vec![1.0, 2.0]);
        assert!(matches!(v.raise(0, &g), Err(Error::Variance(_))));
    }

    #[test]
    fn explicit_asymmetry_is_detected() {
        let mut c = Tensor::zeros(2, vec![Lower; 3]);
        c.set(&[0, 0, 1], 1.0);
        assert!(!c.is_totally_symmetric(&[0, 1, 2], 1e-12).unwrap());
        let s = c.symmetrize(&[0, 1, 2]).unwrap();
        assert!(s.is_totally_symmetric(&[0, 1, 2], 1e-15).unwrap());
        assert!((s.get(&[1, 0, 0]) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mixed_variance_symmetrization_is_rejected() {
        let k = Tensor::zeros(2, vec![Upper, Lower, Lower]);
        assert!(matches!(k.symmetrize(&[0, 1]), Err(Error::Variance(_))));
    }

    #[test]
    fn defect_formulas() {
        let a = Tensor::zeros(2, vec![Lower]);
        let b = t(2, vec![Lower], vec![0.0, 2.0]);
        assert_eq!(rel_defect(&a, &a).unwrap(), 0.0);
        assert_eq!(max_norm(&a, &b).unwrap(), 2.0);
        assert_eq!(rel_defect(&a, &b).unwrap(), 1.0);
        let c = Tensor::zeros(2, vec![Upper]);
        assert!(matches!(rel_defect(&a, &c), Err(Error::Shape(_))));
    }

    #[test]
    fn permute_semantics() {
        let r = Tensor::from_fn(2, vec![Lower; 3], |i| (i[0] * 100 + i[1] * 10 + i[2]) as f64);
        let p = r.permute(&[1, 2, 0]);
        // p[x, y, z] = r[z, x, y]
        assert_eq!(*p.get(&[0, 1, 1]), 101.0);
        assert_eq!(*r.swap_slots(0, 2).get(&[1, 0, 0]), 1.0);
    }

    #[test]
    fn metric_inverse_and_signature() {
        let g = t(
            3,
            vec![Lower, Lower],
            vec![-1.0, 0.0, 0.0, 0.0, 2.0, 0.5, 0.0, 0.5, 1.0],
        );
        let m = Metric::new(g.clone(), &[0.0; 3]).unwrap();
        assert_eq!(m.signature, (2, 1));
        let prod = g.outer(&m.g_inv).contract(1, 2).unwrap();
        let id = Tensor::identity(3);
        let prod = t(3, vec![Upper, Lower], prod.swap_slots(0, 1).data().to_vec());
        assert!(prod.max_diff(&id).unwrap() < 1e-12);
        assert!((m.det - (-1.75)).abs() < 1e-12);
    }

    #[test]
    fn singular_metric_fails_loudly() {
        let g = t(2, vec![Lower, Lower], vec![1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(Metric::new(g, &[0.5, 0.5]), Err(Error::SingularMetric { .. })));
    }

    #[test]
    fn jet_matrix_inverse_matches_value_inverse() {
        let x = [0.4, 1.3];
        let g: Vec<Jet> = vec![
            (Jet::variable(2, 2, 0, x[0]).exp()),
            Jet::variable(2, 2, 1, x[1]).scale(0.1),
            Jet::variable(2, 2, 1, x[1]).scale(0.1),
            Jet::variable(2, 2, 0, x[0]).add_const(2.0),
        ];
        let (inv, det) = invert(&g, 2).unwrap();
        let vals: Vec<f64> = g.iter().map(Jet::value).collect();
        let (vinv, vdet) = invert(&vals, 2).unwrap();
        assert!((det - vdet).abs() < 1e-14);
        for (a, b) in inv.iter().zip(&vinv) {
            assert!((a.value() - b).abs() < 1e-14);
        }
        // d(g^{-1}) = -g^{-1} dg g^{-1}
        for m in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut want = 0.0;
                    for a in 0..2 {
                        for b in 0..2 {
                            want -= vinv[i * 2 + a] * g[a * 2 + b].d1(m) * vinv[b * 2 + j];
                        }
                    }
                    assert!((inv[i * 2 + j].d1(m) - want).abs() < 1e-13);
                }
            }
        }
    }
}
