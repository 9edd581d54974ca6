//! A small expression language for chart fields.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?          (right associative)
//! atom    := number | name | name '(' sum (',' sum)* ')' | '(' sum ')'
//! ```
//!
//! Names are chart coordinates (`x1..xn` always, plus any declared coordinate
//! names), the constant `pi`, and the functions `sin cos exp log sqrt pow
//! digamma trigamma polygamma`.

use std::fmt;

use crate::error::{Error, Result};
use crate::jets::{Jet, MAX_ORDER};
use crate::special::polygamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Pow,
    Digamma,
    Trigamma,
    Polygamma,
}

impl Func {
    const ALL: [(&'static str, Func, usize); 9] = [
        ("sin", Func::Sin, 1),
        ("cos", Func::Cos, 1),
        ("exp", Func::Exp, 1),
        ("log", Func::Log, 1),
        ("sqrt", Func::Sqrt, 1),
        ("pow", Func::Pow, 2),
        ("digamma", Func::Digamma, 1),
        ("trigamma", Func::Trigamma, 1),
        ("polygamma", Func::Polygamma, 2),
    ];

    fn lookup(name: &str) -> Option<(Func, usize)> {
        Self::ALL.iter().find(|(n, _, _)| *n == name).map(|(_, f, a)| (*f, *a))
    }

    pub fn name(self) -> &'static str {
        Self::ALL.iter().find(|(_, f, _)| *f == self).unwrap().0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Zero-based coordinate index.
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => write!(f, "Neg({a})"),
            Expr::Add(a, b) => write!(f, "Add({a}, {b})"),
            Expr::Sub(a, b) => write!(f, "Sub({a}, {b})"),
            Expr::Mul(a, b) => write!(f, "Mul({a}, {b})"),
            Expr::Div(a, b) => write!(f, "Div({a}, {b})"),
            Expr::Pow(a, b) => write!(f, "Pow({a}, {b})"),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl Expr {
    /// Largest coordinate index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.max_var().max(b.max_var())
            }
            Expr::Call(_, args) => args.iter().filter_map(Expr::max_var).max(),
        }
    }

    /// The value of a coordinate-free expression.
    pub fn as_constant(&self) -> Option<f64> {
        if self.max_var().is_some() {
            return None;
        }
        self.eval_value(&[]).ok()
    }

    pub fn eval_value(&self, x: &[f64]) -> Result<f64> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => *x
                .get(*i)
                .ok_or_else(|| Error::Dimension(format!("coordinate x{} not present", i + 1)))?,
            Expr::Neg(a) => -a.eval_value(x)?,
            Expr::Add(a, b) => a.eval_value(x)? + b.eval_value(x)?,
            Expr::Sub(a, b) => a.eval_value(x)? - b.eval_value(x)?,
            Expr::Mul(a, b) => a.eval_value(x)? * b.eval_value(x)?,
            Expr::Div(a, b) => {
                let d = b.eval_value(x)?;
                if d == 0.0 {
                    return Err(Error::Domain("division by zero".into()));
                }
                a.eval_value(x)? / d
            }
            Expr::Pow(a, b) => pow_value(a.eval_value(x)?, b.eval_value(x)?, b.max_var().is_none())?,
            Expr::Call(func, args) => {
                let v0 = args[0].eval_value(x)?;
                match func {
                    Func::Sin => v0.sin(),
                    Func::Cos => v0.cos(),
                    Func::Exp => v0.exp(),
                    Func::Log => positive("log", v0)?.ln(),
                    Func::Sqrt => {
                        if v0 < 0.0 {
                            return Err(Error::Domain(format!("sqrt of negative value {v0}")));
                        }
                        v0.sqrt()
                    }
                    Func::Pow => pow_value(v0, args[1].eval_value(x)?, args[1].max_var().is_none())?,
                    Func::Digamma => polygamma(0, positive("digamma", v0)?),
                    Func::Trigamma => polygamma(1, positive("trigamma", v0)?),
                    Func::Polygamma => {
                        let m = polygamma_order(v0)?;
                        let arg = args[1].eval_value(x)?;
                        polygamma(m, positive("polygamma", arg)?)
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain(format!("non-finite value in {self}")))
        }
    }

    /// Evaluates the expression in jet arithmetic over `x.len()` variables.
    pub fn eval_jet(&self, x: &[f64], order: usize) -> Result<Jet> {
        if order > MAX_ORDER {
            return Err(Error::Order(order));
        }
        let n = x.len();
        let j = match self {
            Expr::Num(v) => Jet::constant(n, order, *v),
            Expr::Var(i) => {
                if *i >= n {
                    return Err(Error::Dimension(format!("coordinate x{} not present", i + 1)));
                }
                Jet::variable(n, order, *i, x[*i])
            }
            Expr::Neg(a) => -a.eval_jet(x, order)?,
            Expr::Add(a, b) => a.eval_jet(x, order)? + b.eval_jet(x, order)?,
            Expr::Sub(a, b) => a.eval_jet(x, order)? - b.eval_jet(x, order)?,
            Expr::Mul(a, b) => a.eval_jet(x, order)? * b.eval_jet(x, order)?,
            Expr::Div(a, b) => {
                let d = b.eval_jet(x, order)?;
                if d.value() == 0.0 {
                    return Err(Error::Domain("division by zero".into()));
                }
                a.eval_jet(x, order)? / d
            }
            Expr::Pow(a, b) => pow_jet(a, b, x, order)?,
            Expr::Call(func, args) => {
                let a = || args[0].eval_jet(x, order);
                match func {
                    Func::Sin => a()?.sin(),
                    Func::Cos => a()?.cos(),
                    Func::Exp => a()?.exp(),
                    Func::Log => {
                        let a = a()?;
                        positive("log", a.value())?;
                        a.ln()
                    }
                    Func::Sqrt => {
                        let a = a()?;
                        positive("sqrt", a.value())?;
                        a.sqrt()
                    }
                    Func::Pow => pow_jet(&args[0], &args[1], x, order)?,
                    Func::Digamma => polygamma_jet(0, &a()?)?,
                    Func::Trigamma => polygamma_jet(1, &a()?)?,
                    Func::Polygamma => {
                        let m = args[0]
                            .as_constant()
                            .ok_or_else(|| Error::Domain("polygamma order must be a constant".into()))?;
                        polygamma_jet(polygamma_order(m)?, &args[1].eval_jet(x, order)?)?
                    }
                }
            }
        };
        if j.is_finite() {
            Ok(j)
        } else {
            Err(Error::Domain(format!("non-finite jet in {self}")))
        }
    }
}

fn positive(what: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Domain(format!("{what} needs a positive argument, got {v}")))
    }
}

fn polygamma_order(m: f64) -> Result<u32> {
    if m >= 0.0 && m == m.trunc() && m <= 8.0 {
        Ok(m as u32)
    } else {
        Err(Error::Domain(format!(
            "polygamma order must be an integer in 0..=8, got {m}"
        )))
    }
}

fn polygamma_jet(m: u32, a: &Jet) -> Result<Jet> {
    let x = positive("polygamma", a.value())?;
    Ok(a.compose([
        polygamma(m, x),
        polygamma(m + 1, x),
        polygamma(m + 2, x),
        polygamma(m + 3, x),
    ]))
}

fn pow_value(base: f64, exp: f64, const_exp: bool) -> Result<f64> {
    if const_exp && exp == exp.trunc() {
        if base == 0.0 && exp < 0.0 {
            return Err(Error::Domain("zero raised to a negative power".into()));
        }
        // Same routine as `Jet::powf`, so values and jets agree bit for bit.
        if exp.abs() < 64.0 {
            return Ok(base.powi(exp as i32));
        }
        return Ok(base.powf(exp));
    }
    Ok(positive("non-integer power base", base)?.powf(exp))
}

fn pow_jet(a: &Expr, b: &Expr, x: &[f64], order: usize) -> Result<Jet> {
    let base = a.eval_jet(x, order)?;
    if let Some(p) = b.as_constant() {
        if p == p.trunc() {
            if base.value() == 0.0 && p < 0.0 {
                return Err(Error::Domain("zero raised to a negative power".into()));
            }
            return Ok(base.powf(p));
        }
        positive("non-integer power base", base.value())?;
        return Ok(base.powf(p));
    }
    positive("non-integer power base", base.value())?;
    let e = b.eval_jet(x, order)?;
    Ok((e * base.ln()).exp())
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    coords: &'a [String],
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| Error::Parse {
                position: start,
                message: format!("malformed number '{text}'"),
                expected: vec!["number".into()],
            })?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else if "+-*/^(),".contains(c) {
            out.push((Tok::Sym(c), i));
            i += 1;
        } else {
            return Err(Error::Parse {
                position: i,
                message: format!("unexpected character '{c}'"),
                expected: vec!["number".into(), "name".into(), "operator".into()],
            });
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn at(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, message: impl Into<String>, expected: &[&str]) -> Result<T> {
        Err(Error::Parse {
            position: self.at(),
            message: message.into(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            let msg = format!("expected '{c}', found {}", describe(self.peek()));
            self.fail(msg, &[&c.to_string()])
        }
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        loop {
            match self.peek() {
                Tok::Sym('+') => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.product()?));
                }
                Tok::Sym('-') => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.product()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Sym('*') => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Sym('/') => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Sym('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if *self.peek() == Tok::Sym('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let start = self.at();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Sym('(') => {
                let e = self.sum()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::Sym('(') {
                    let Some((func, arity)) = Func::lookup(&name) else {
                        self.pos -= 1;
                        let expected: Vec<&str> = Func::ALL.iter().map(|(n, _, _)| *n).collect();
                        return Err(Error::Parse {
                            position: start,
                            message: format!("unknown function '{name}'"),
                            expected: expected.iter().map(|s| s.to_string()).collect(),
                        });
                    };
                    self.bump();
                    let mut args = vec![self.sum()?];
                    while *self.peek() == Tok::Sym(',') {
                        self.bump();
                        args.push(self.sum()?);
                    }
                    self.expect(')')?;
                    if args.len() != arity {
                        return Err(Error::Parse {
                            position: start,
                            message: format!("{name} takes {arity} argument(s), got {}", args.len()),
                            expected: vec![],
                        });
                    }
                    return Ok(Expr::Call(func, args));
                }
                if name == "pi" {
                    return Ok(Expr::Num(std::f64::consts::PI));
                }
                if let Some(i) = self.coords.iter().position(|c| *c == name) {
                    return Ok(Expr::Var(i));
                }
                if let Some(i) = name
                    .strip_prefix('x')
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|i| (1..=self.coords.len()).contains(i))
                {
                    return Ok(Expr::Var(i - 1));
                }
                let mut expected: Vec<String> = (1..=self.coords.len()).map(|i| format!("x{i}")).collect();
                expected.extend(self.coords.iter().cloned());
                expected.push("pi".into());
                expected.dedup();
                Err(Error::Parse {
                    position: start,
                    message: format!("unknown coordinate or constant '{name}'"),
                    expected,
                })
            }
            other => {
                self.pos = self.pos.saturating_sub(1);
                let msg = format!("expected an operand, found {}", describe(&other));
                Err(Error::Parse {
                    position: start,
                    message: msg,
                    expected: vec!["number".into(), "name".into(), "(".into(), "-".into()],
                })
            }
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Sym(c) => format!("'{c}'"),
        Tok::End => "end of input".into(),
    }
}

/// Parses `src` over the given coordinate names (`x1..xn` are always accepted).
pub fn parse_expression(src: &str, coords: &[String]) -> Result<Expr> {
    if src.trim().is_empty() {
        return Err(Error::Parse {
            position: 0,
            message: "empty expression".into(),
            expected: vec!["number".into(), "name".into(), "(".into()],
        });
    }
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
        coords,
    };
    let e = p.sum()?;
    if *p.peek() != Tok::End {
        let msg = format!("unexpected {}", describe(p.peek()));
        return p.fail(msg, &["+", "-", "*", "/", "^", "end of input"]);
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn precedence_of_power_over_division() {
        let e = parse_expression("1/x2^2", &names(2)).unwrap();
        assert_eq!(e.to_string(), "Div(1, Pow(x2, 2))");
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let e = parse_expression("-x1^2", &names(1)).unwrap();
        assert_eq!(e.to_string(), "Neg(Pow(x1, 2))");
        assert_eq!(e.eval_value(&[3.0]).unwrap(), -9.0);
    }

    #[test]
    fn power_is_right_associative_and_others_left() {
        let e = parse_expression("2^3^2", &[]).unwrap();
        assert_eq!(e.eval_value(&[]).unwrap(), 512.0);
        let e = parse_expression("8-3-2", &[]).unwrap();
        assert_eq!(e.eval_value(&[]).unwrap(), 3.0);
        let e = parse_expression("8/4/2", &[]).unwrap();
        assert_eq!(e.eval_value(&[]).unwrap(), 1.0);
    }

    #[test]
    fn sin_exp_jet() {
        let e = parse_expression("sin(x1)*exp(-x2)", &names(2)).unwrap();
        let j = e.eval_jet(&[0.0, 0.0], 1).unwrap();
        assert_eq!(j.value(), 0.0);
        assert_eq!(j.gradient(), &[1.0, 0.0]);
    }

    #[test]
    fn unknown_coordinate_is_rejected() {
        match parse_expression("x3", &names(2)) {
            Err(Error::Parse {
                position,
                message,
                expected,
            }) => {
                assert_eq!(position, 0);
                assert!(message.contains("x3"));
                assert!(expected.contains(&"x2".to_string()));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn named_coordinates_alias_positional_ones() {
        let coords = vec!["mu".to_string(), "sigma".to_string()];
        let a = parse_expression("1/sigma^2", &coords).unwrap();
        let b = parse_expression("1/x2^2", &coords).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn syntax_errors_report_position() {
        match parse_expression("x1 + * 2", &names(1)) {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 5),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_expression("(x1", &names(1)),
            Err(Error::Parse { position: 3, .. })
        ));
        assert!(matches!(parse_expression("", &names(1)), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_expression("foo(x1)", &names(1)),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_expression("pow(x1)", &names(1)),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn trigamma_jet_carries_higher_polygammas() {
        let e = parse_expression("trigamma(x1)", &names(1)).unwrap();
        let j = e.eval_jet(&[2.0], 3).unwrap();
        assert!((j.value() - polygamma(1, 2.0)).abs() < 1e-15);
        assert!((j.d1(0) - polygamma(2, 2.0)).abs() < 1e-15);
        assert!((j.d3(0, 0, 0) - polygamma(4, 2.0)).abs() < 1e-13);
    }

    #[test]
    fn constants_fold() {
        let e = parse_expression("2*pi - polygamma(1, 2)", &[]).unwrap();
        assert!((e.as_constant().unwrap() - (2.0 * std::f64::consts::PI - polygamma(1, 2.0))).abs() < 1e-15);
        assert_eq!(parse_expression("x1", &names(1)).unwrap().as_constant(), None);
    }

    #[test]
    fn scientific_literals() {
        let e = parse_expression("1.5e-3*x1 + 2E2", &names(1)).unwrap();
        assert!((e.eval_value(&[2.0]).unwrap() - 200.003).abs() < 1e-12);
    }
}
