//! Truncated multivariate Taylor arithmetic ("jets") up to third order, and
//! the scalar fields a chart is built from.
//!
//! A [`Jet`] at a point stores the value and the dense, symmetric arrays of
//! first, second and third partial derivatives. Arithmetic on jets follows the
//! Leibniz rule and the univariate chain rule, so any expression evaluated in
//! jet arithmetic carries its exact derivatives to rounding. Binary operations
//! truncate to the smaller of the two operand orders, and [`Jet::derivative`]
//! lowers the order by one, which is how every differentiated geometric object
//! (Christoffel symbols, curvature, covariant derivatives) is produced.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::models::expr::Expr;

/// Highest derivative order carried by a jet.
pub const MAX_ORDER: usize = 3;

/// Coordinates of a chart point.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Dimension("a point needs at least one coordinate".into()));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("non-finite coordinate {bad}")));
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

fn block_len(n: usize, order: usize) -> usize {
    (0..=order).map(|k| n.pow(k as u32)).sum()
}

/// Value and partial derivatives (orders 1..=`order`) of a scalar field at a point.
#[derive(Clone, PartialEq)]
pub struct Jet {
    n: usize,
    order: usize,
    c: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("order", &self.order)
            .field("value", &self.value())
            .field("grad", &self.gradient())
            .finish()
    }
}

impl Jet {
    /// A constant: all partials zero. Constants are exact at every order.
    pub fn constant(n: usize, order: usize, value: f64) -> Self {
        let mut c = vec![0.0; block_len(n, order)];
        c[0] = value;
        Self { n, order, c }
    }

    /// The coordinate function `x^i` evaluated at `x`.
    pub fn variable(n: usize, order: usize, i: usize, x: f64) -> Self {
        let mut j = Self::constant(n, order, x);
        if order >= 1 {
            j.c[1 + i] = 1.0;
        }
        j
    }

    /// Assembles a jet from dense derivative arrays (row-major, length `n^k`).
    pub fn from_parts(n: usize, value: f64, d1: &[f64], d2: &[f64], d3: &[f64]) -> Self {
        let order = if !d3.is_empty() {
            3
        } else if !d2.is_empty() {
            2
        } else if !d1.is_empty() {
            1
        } else {
            0
        };
        let mut c = Vec::with_capacity(block_len(n, order));
        c.push(value);
        c.extend_from_slice(d1);
        c.extend_from_slice(d2);
        c.extend_from_slice(d3);
        assert_eq!(c.len(), block_len(n, order), "derivative arrays do not match n = {n}");
        Self { n, order, c }
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    fn off(&self, k: usize) -> usize {
        block_len(self.n, k - 1)
    }

    /// First partials; empty for order 0.
    pub fn gradient(&self) -> &[f64] {
        if self.order < 1 {
            return &[];
        }
        &self.c[1..1 + self.n]
    }

    /// Second partials, row-major `n × n`; empty below order 2.
    pub fn hessian(&self) -> &[f64] {
        if self.order < 2 {
            return &[];
        }
        let o = self.off(2);
        &self.c[o..o + self.n * self.n]
    }

    /// Third partials, row-major `n × n × n`; empty below order 3.
    pub fn third(&self) -> &[f64] {
        if self.order < 3 {
            return &[];
        }
        let o = self.off(3);
        &self.c[o..o + self.n.pow(3)]
    }

    pub fn d1(&self, i: usize) -> f64 {
        self.gradient()[i]
    }

    pub fn d2(&self, i: usize, j: usize) -> f64 {
        self.hessian()[i * self.n + j]
    }

    pub fn d3(&self, i: usize, j: usize, k: usize) -> f64 {
        self.third()[(i * self.n + j) * self.n + k]
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }

    /// Drops derivatives above `order`.
    pub fn truncate(&self, order: usize) -> Self {
        if order >= self.order {
            return self.clone();
        }
        Self {
            n: self.n,
            order,
            c: self.c[..block_len(self.n, order)].to_vec(),
        }
    }

    /// `∂_m` of the field, one order lower.
    ///
    /// # Panics
    /// If the jet has order 0.
    pub fn derivative(&self, m: usize) -> Self {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let n = self.n;
        let order = self.order - 1;
        let mut c = Vec::with_capacity(block_len(n, order));
        c.push(self.d1(m));
        if order >= 1 {
            let o = self.off(2) + m * n;
            c.extend_from_slice(&self.c[o..o + n]);
        }
        if order >= 2 {
            let o = self.off(3) + m * n * n;
            c.extend_from_slice(&self.c[o..o + n * n]);
        }
        Self { n, order, c }
    }

    fn zip_order(&self, other: &Jet) -> usize {
        assert_eq!(self.n, other.n, "jets over different variable counts");
        self.order.min(other.order)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            n: self.n,
            order: self.order,
            c: self.c.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add_const(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.c[0] += s;
        out
    }

    /// Applies a univariate function given its value and first three
    /// derivatives at `self.value()`.
    pub fn compose(&self, phi: [f64; 4]) -> Self {
        let n = self.n;
        let mut out = Self::constant(n, self.order, phi[0]);
        if self.order >= 1 {
            for (slot, d) in out.c[1..=n].iter_mut().zip(self.gradient()) {
                *slot = phi[1] * d;
            }
        }
        if self.order >= 2 {
            let f1 = self.gradient();
            let f2 = self.hessian();
            let o = out.off(2);
            for i in 0..n {
                for j in 0..n {
                    out.c[o + i * n + j] = phi[2] * f1[i] * f1[j] + phi[1] * f2[i * n + j];
                }
            }
        }
        if self.order >= 3 {
            let f1 = self.gradient();
            let f2 = self.hessian();
            let f3 = self.third();
            let o = out.off(3);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let idx = (i * n + j) * n + k;
                        out.c[o + idx] = phi[3] * f1[i] * f1[j] * f1[k]
                            + phi[2] * (f2[i * n + j] * f1[k] + f2[i * n + k] * f1[j] + f2[j * n + k] * f1[i])
                            + phi[1] * f3[idx];
                    }
                }
            }
        }
        out
    }

    pub fn recip(&self) -> Self {
        let x = self.value();
        let r = 1.0 / x;
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose([e, e, e, e])
    }

    pub fn ln(&self) -> Self {
        let x = self.value();
        let r = 1.0 / x;
        self.compose([x.ln(), r, -r * r, 2.0 * r * r * r])
    }

    pub fn sqrt(&self) -> Self {
        let x = self.value();
        let s = x.sqrt();
        self.compose([s, 0.5 / s, -0.25 / (s * x), 0.375 / (s * x * x)])
    }

    /// `self^p` for a constant real exponent.
    pub fn powf(&self, p: f64) -> Self {
        let x = self.value();
        if p == p.trunc() && p.abs() < 64.0 {
            return self.powi(p as i32);
        }
        self.compose([
            x.powf(p),
            p * x.powf(p - 1.0),
            p * (p - 1.0) * x.powf(p - 2.0),
            p * (p - 1.0) * (p - 2.0) * x.powf(p - 3.0),
        ])
    }

    pub fn powi(&self, p: i32) -> Self {
        let x = self.value();
        let pf = p as f64;
        let term = |k: i32| if p - k == 0 { 1.0 } else { x.powi(p - k) };
        let d1 = if p == 0 { 0.0 } else { pf * term(1) };
        let d2 = if p == 0 || p == 1 {
            0.0
        } else {
            pf * (pf - 1.0) * term(2)
        };
        let d3 = if (0..=2).contains(&p) {
            0.0
        } else {
            pf * (pf - 1.0) * (pf - 2.0) * term(3)
        };
        self.compose([x.powi(p), d1, d2, d3])
    }

    /// Total symmetry defect of the stored partial arrays (zero for jets
    /// produced by jet arithmetic).
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        if self.order >= 2 {
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((self.d2(i, j) - self.d2(j, i)).abs());
                }
            }
        }
        if self.order >= 3 {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let v = self.d3(i, j, k);
                        for w in [self.d3(j, i, k), self.d3(k, j, i), self.d3(i, k, j)] {
                            worst = worst.max((v - w).abs());
                        }
                    }
                }
            }
        }
        worst
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let order = self.zip_order(rhs);
        let len = block_len(self.n, order);
        Jet {
            n: self.n,
            order,
            c: (0..len).map(|i| self.c[i] + rhs.c[i]).collect(),
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let order = self.zip_order(rhs);
        let len = block_len(self.n, order);
        Jet {
            n: self.n,
            order,
            c: (0..len).map(|i| self.c[i] - rhs.c[i]).collect(),
        }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let n = self.n;
        let order = self.zip_order(rhs);
        let (f0, g0) = (self.value(), rhs.value());
        let mut out = Jet::constant(n, order, f0 * g0);
        if order >= 1 {
            let (f1, g1) = (self.gradient(), rhs.gradient());
            for i in 0..n {
                out.c[1 + i] = f1[i] * g0 + f0 * g1[i];
            }
        }
        if order >= 2 {
            let (f1, g1) = (self.gradient(), rhs.gradient());
            let (f2, g2) = (self.hessian(), rhs.hessian());
            let o = out.off(2);
            for i in 0..n {
                for j in 0..n {
                    let ij = i * n + j;
                    out.c[o + ij] = f2[ij] * g0 + f1[i] * g1[j] + f1[j] * g1[i] + f0 * g2[ij];
                }
            }
        }
        if order >= 3 {
            let (f1, g1) = (self.gradient(), rhs.gradient());
            let (f2, g2) = (self.hessian(), rhs.hessian());
            let (f3, g3) = (self.third(), rhs.third());
            let o = out.off(3);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let ijk = (i * n + j) * n + k;
                        let (ij, ik, jk) = (i * n + j, i * n + k, j * n + k);
                        out.c[o + ijk] = f3[ijk] * g0
                            + f2[ij] * g1[k]
                            + f2[ik] * g1[j]
                            + f2[jk] * g1[i]
                            + f1[i] * g2[jk]
                            + f1[j] * g2[ik]
                            + f1[k] * g2[ij]
                            + f0 * g3[ijk];
                    }
                }
            }
        }
        out
    }
}

impl Div for &Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: &Jet) -> Jet {
        self * &rhs.recip()
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// Nested central-difference jet of a value-only function.
///
/// The step along axis `i` is `h · max(1, |x_i|)`. Partials of order `k` use
/// the `2^k`-point product stencil at steps `h` and `2h`, combined by one
/// Richardson step to cancel the `h²` error term. The result is exactly
/// symmetric because only sorted index tuples are evaluated.
pub fn fd_jet<F>(f: F, p: &Point, order: usize, h: f64) -> Result<Jet>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if order > MAX_ORDER {
        return Err(Error::Order(order));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Param(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let x = p.coords();
    let n = x.len();
    let steps: Vec<f64> = x.iter().map(|xi| h * xi.abs().max(1.0)).collect();
    let mut cache: HashMap<Vec<i32>, f64> = HashMap::new();
    let mut eval = |offset: &[i32]| -> Result<f64> {
        if let Some(v) = cache.get(offset) {
            return Ok(*v);
        }
        let q: Vec<f64> = (0..n).map(|a| x[a] + offset[a] as f64 * steps[a]).collect();
        let v = f(&q)?;
        if !v.is_finite() {
            return Err(Error::Domain(format!("field is not finite at {q:?}")));
        }
        cache.insert(offset.to_vec(), v);
        Ok(v)
    };

    let value = eval(&vec![0; n])?;
    let mut stencil = |idx: &[usize], m: i32| -> Result<f64> {
        let r = idx.len();
        let mut acc = 0.0;
        for signs in 0..(1u32 << r) {
            let mut offset = vec![0i32; n];
            let mut sign = 1.0;
            for (bit, &axis) in idx.iter().enumerate() {
                if signs & (1 << bit) != 0 {
                    offset[axis] -= m;
                    sign = -sign;
                } else {
                    offset[axis] += m;
                }
            }
            acc += sign * eval(&offset)?;
        }
        let denom: f64 = idx.iter().map(|&a| 2.0 * m as f64 * steps[a]).product();
        Ok(acc / denom)
    };
    let mut partial = |idx: &[usize]| -> Result<f64> {
        let fine = stencil(idx, 1)?;
        let coarse = stencil(idx, 2)?;
        Ok((4.0 * fine - coarse) / 3.0)
    };

    let mut d1 = Vec::new();
    let mut d2 = Vec::new();
    let mut d3 = Vec::new();
    if order >= 1 {
        d1 = (0..n).map(|i| partial(&[i])).collect::<Result<_>>()?;
    }
    if order >= 2 {
        d2 = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = partial(&[i, j])?;
                d2[i * n + j] = v;
                d2[j * n + i] = v;
            }
        }
    }
    if order >= 3 {
        d3 = vec![0.0; n * n * n];
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    let v = partial(&[i, j, k])?;
                    for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                        d3[(a * n + b) * n + c] = v;
                    }
                }
            }
        }
    }
    Ok(Jet::from_parts(n, value, &d1, &d2, &d3))
}

/// A value-only field, evaluated through finite differences.
pub type ValueFn = Arc<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>;

#[derive(Clone)]
pub enum FieldSource {
    Constant(f64),
    Expression(Arc<Expr>),
    Function(ValueFn),
}

impl fmt::Debug for FieldSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSource::Constant(c) => write!(f, "Constant({c})"),
            FieldSource::Expression(e) => write!(f, "Expression({e})"),
            FieldSource::Function(_) => write!(f, "Function(..)"),
        }
    }
}

/// How derivatives of a field are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JetStrategy {
    Analytic,
    FiniteDifference { step: f64 },
}

/// Default base step for finite-difference jets.
pub const DEFAULT_FD_STEP: f64 = 1e-3;

/// A scalar field on a chart. Immutable and shareable across threads.
#[derive(Debug, Clone)]
pub struct ScalarField {
    source: FieldSource,
    strategy: JetStrategy,
}

impl ScalarField {
    pub fn constant(c: f64) -> Self {
        Self {
            source: FieldSource::Constant(c),
            strategy: JetStrategy::Analytic,
        }
    }

    pub fn expression(expr: Expr) -> Self {
        Self {
            source: FieldSource::Expression(Arc::new(expr)),
            strategy: JetStrategy::Analytic,
        }
    }

    /// A value-only function; its derivatives always come from finite differences.
    pub fn function(f: ValueFn, step: f64) -> Self {
        Self {
            source: FieldSource::Function(f),
            strategy: JetStrategy::FiniteDifference { step },
        }
    }

    /// Same source, different derivative strategy. Function sources stay on
    /// finite differences.
    pub fn with_strategy(mut self, strategy: JetStrategy) -> Self {
        if matches!(self.source, FieldSource::Function(_)) && strategy == JetStrategy::Analytic {
            return self;
        }
        self.strategy = strategy;
        self
    }

    pub fn source(&self) -> &FieldSource {
        &self.source
    }

    pub fn strategy(&self) -> JetStrategy {
        match self.source {
            FieldSource::Constant(_) => JetStrategy::Analytic,
            _ => self.strategy,
        }
    }

    /// `Some(c)` if the field is a literal constant.
    pub fn as_constant(&self) -> Option<f64> {
        match &self.source {
            FieldSource::Constant(c) => Some(*c),
            FieldSource::Expression(e) => e.as_constant(),
            FieldSource::Function(_) => None,
        }
    }

    pub fn value(&self, p: &Point) -> Result<f64> {
        match &self.source {
            FieldSource::Constant(c) => Ok(*c),
            FieldSource::Expression(e) => e.eval_value(p.coords()),
            FieldSource::Function(f) => f(p.coords()),
        }
    }

    /// Value and partials up to `order` at `p`.
    pub fn eval_jet(&self, p: &Point, order: usize) -> Result<Jet> {
        if order > MAX_ORDER {
            return Err(Error::Order(order));
        }
        let n = p.dim();
        match (&self.source, self.strategy()) {
            (FieldSource::Constant(c), _) => Ok(Jet::constant(n, order, *c)),
            (FieldSource::Expression(e), JetStrategy::Analytic) => e.eval_jet(p.coords(), order),
            (FieldSource::Expression(e), JetStrategy::FiniteDifference { step }) => {
                fd_jet(|q| e.eval_value(q), p, order, step)
            }
            (FieldSource::Function(f), JetStrategy::FiniteDifference { step }) => fd_jet(|q| f(q), p, order, step),
            (FieldSource::Function(_), JetStrategy::Analytic) => unreachable!(),
        }
    }
}

/// Free-function form of [`ScalarField::eval_jet`].
pub fn eval_jet(field: &ScalarField, p: &Point, order: usize) -> Result<Jet> {
    field.eval_jet(p, order)
}
