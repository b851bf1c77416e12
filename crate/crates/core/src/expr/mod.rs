//! Scalar expressions over `x1..xn` and `t` with exact forward-mode derivatives.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'x'<index> | 't' | func '(' sum ')' | '(' sum ')'
//! func    := exp | ln | sin | cos | sqrt
//! ```
//!
//! Numbers are decimal with optional scientific exponent (`2.5e-3`). There is
//! no implicit multiplication: `2x1` is a syntax error. Variables are 1-based.
//!
//! A literal integer exponent (`x1^4`, `(t+1)^-2`) is evaluated by repeated
//! multiplication so derivatives of polynomials stay exact. Any other exponent
//! is evaluated as `exp(b ln a)` and requires `a > 0`.

mod dual;
mod parse;

use std::collections::BTreeSet;
use std::fmt;

pub use dual::{Dual, Scalar};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier '{name}' at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("variable '{name}' at offset {offset} is out of range for dimension {dimension}")]
    VariableOutOfRange {
        offset: usize,
        name: String,
        dimension: usize,
    },
    #[error("expression dimension must be at least 1")]
    ZeroDimension,
    #[error("empty expression")]
    Empty,
    #[error("point has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("expression references t but no time was supplied")]
    MissingTime,
    #[error("{kind} in '{node}'")]
    Domain { kind: DomainKind, node: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    LogOfNonPositive,
    SqrtOfNegative,
    DivisionByZero,
    PowerOfNonPositiveBase,
    NonFinite,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DomainKind::LogOfNonPositive => "logarithm of a non-positive value",
            DomainKind::SqrtOfNegative => "square root of a negative value",
            DomainKind::DivisionByZero => "division by zero",
            DomainKind::PowerOfNonPositiveBase => "real power of a non-positive base",
            DomainKind::NonFinite => "non-finite result",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }
}

/// Abstract syntax tree node. Variable indices are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Time,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    PowInt(Box<Node>, i32),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn collect(&self, vars: &mut BTreeSet<usize>, time: &mut bool) {
        match self {
            Node::Const(_) => {}
            Node::Var(i) => {
                vars.insert(*i);
            }
            Node::Time => *time = true,
            Node::Neg(a) | Node::PowInt(a, _) | Node::Call(_, a) => a.collect(vars, time),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                a.collect(vars, time);
                b.collect(vars, time);
            }
        }
    }

    fn eval<T: Scalar>(&self, vars: &[T], time: Option<T>) -> Result<T, ExprError> {
        let domain = |kind| ExprError::Domain {
            kind,
            node: self.to_string(),
        };
        let value = match self {
            Node::Const(v) => T::constant(*v),
            Node::Var(i) => vars[*i],
            Node::Time => time.ok_or(ExprError::MissingTime)?,
            Node::Neg(a) => -a.eval(vars, time)?,
            Node::Add(a, b) => a.eval(vars, time)? + b.eval(vars, time)?,
            Node::Sub(a, b) => a.eval(vars, time)? - b.eval(vars, time)?,
            Node::Mul(a, b) => a.eval(vars, time)? * b.eval(vars, time)?,
            Node::Div(a, b) => {
                let num = a.eval(vars, time)?;
                let den = b.eval(vars, time)?;
                if den.re() == 0.0 {
                    return Err(domain(DomainKind::DivisionByZero));
                }
                num / den
            }
            Node::PowInt(a, k) => {
                let base = a.eval(vars, time)?;
                if *k < 0 && base.re() == 0.0 {
                    return Err(domain(DomainKind::DivisionByZero));
                }
                powi(base, *k)
            }
            Node::Pow(a, b) => {
                let base = a.eval(vars, time)?;
                let exponent = b.eval(vars, time)?;
                if base.re() <= 0.0 {
                    return Err(domain(DomainKind::PowerOfNonPositiveBase));
                }
                (exponent * base.ln()).exp()
            }
            Node::Call(func, a) => {
                let arg = a.eval(vars, time)?;
                match func {
                    Func::Exp => arg.exp(),
                    Func::Ln => {
                        if arg.re() <= 0.0 {
                            return Err(domain(DomainKind::LogOfNonPositive));
                        }
                        arg.ln()
                    }
                    Func::Sin => arg.sin(),
                    Func::Cos => arg.cos(),
                    Func::Sqrt => {
                        if arg.re() < 0.0 {
                            return Err(domain(DomainKind::SqrtOfNegative));
                        }
                        arg.sqrt()
                    }
                }
            }
        };
        Ok(value)
    }
}

fn powi<T: Scalar>(base: T, k: i32) -> T {
    let mut n = k.unsigned_abs();
    let mut acc = T::constant(1.0);
    let mut b = base;
    while n > 0 {
        if n & 1 == 1 {
            acc = acc * b;
        }
        n >>= 1;
        if n > 0 {
            b = b * b;
        }
    }
    if k < 0 {
        T::constant(1.0) / acc
    } else {
        acc
    }
}

fn needs_parens(node: &Node) -> bool {
    !matches!(node, Node::Const(_) | Node::Var(_) | Node::Time | Node::Call(..))
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(v) => write!(f, "{v:?}"),
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Time => f.write_str("t"),
            Node::Neg(a) => {
                if needs_parens(a) {
                    write!(f, "-({a})")
                } else {
                    write!(f, "-{a}")
                }
            }
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "({a} * {b})"),
            Node::Div(a, b) => write!(f, "({a} / {b})"),
            Node::PowInt(a, k) => write!(f, "({a})^({k})"),
            Node::Pow(a, b) => write!(f, "({a})^({b})"),
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// A parsed, immutable scalar expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    dimension: usize,
    variables: Vec<usize>,
    uses_time: bool,
}

impl Expression {
    /// Parses `source` over variables `x1..x{dimension}` (and `t` when
    /// `allow_t` is set).
    pub fn parse(source: &str, dimension: usize, allow_t: bool) -> Result<Self, ExprError> {
        if dimension == 0 {
            return Err(ExprError::ZeroDimension);
        }
        Self::parse_inner(source, dimension, allow_t)
    }

    /// Parses an expression in `t` only, as used for matrix path entries.
    pub fn parse_in_time(source: &str) -> Result<Self, ExprError> {
        Self::parse_inner(source, 0, true)
    }

    fn parse_inner(source: &str, dimension: usize, allow_t: bool) -> Result<Self, ExprError> {
        if source.trim().is_empty() {
            return Err(ExprError::Empty);
        }
        let root = parse::Parser::new(source, dimension, allow_t)?.parse()?;
        Ok(Self::from_node(root, dimension))
    }

    pub fn from_node(root: Node, dimension: usize) -> Self {
        let mut vars = BTreeSet::new();
        let mut uses_time = false;
        root.collect(&mut vars, &mut uses_time);
        Self {
            root,
            dimension,
            variables: vars.into_iter().collect(),
            uses_time,
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Number of distinct variables referenced.
    pub fn arity(&self) -> usize {
        self.variables.len()
    }

    pub fn uses_time(&self) -> bool {
        self.uses_time
    }

    fn check_point(&self, point: &[f64], time: Option<f64>) -> Result<(), ExprError> {
        if point.len() != self.dimension {
            return Err(ExprError::DimensionMismatch {
                expected: self.dimension,
                found: point.len(),
            });
        }
        if self.uses_time && time.is_none() {
            return Err(ExprError::MissingTime);
        }
        Ok(())
    }

    fn finish<T: Scalar>(&self, value: T) -> Result<T, ExprError> {
        if value.is_finite() {
            Ok(value)
        } else {
            Err(ExprError::Domain {
                kind: DomainKind::NonFinite,
                node: self.root.to_string(),
            })
        }
    }

    pub fn eval(&self, point: &[f64], time: Option<f64>) -> Result<f64, ExprError> {
        self.check_point(point, time)?;
        let v = self.root.eval(point, time)?;
        self.finish(v)
    }

    /// Exact gradient, one dual pass per referenced variable.
    pub fn grad(&self, point: &[f64], time: Option<f64>) -> Result<Vec<f64>, ExprError> {
        self.check_point(point, time)?;
        let mut out = vec![0.0; self.dimension];
        if self.variables.is_empty() {
            // still surface domain errors
            self.eval(point, time)?;
            return Ok(out);
        }
        let mut seeded: Vec<Dual<f64>> = point.iter().map(|&x| Dual::constant(x)).collect();
        let time = time.map(Dual::constant);
        for &i in &self.variables {
            seeded[i].eps = 1.0;
            let v = self.finish(self.root.eval(&seeded, time)?)?;
            out[i] = v.eps;
            seeded[i].eps = 0.0;
        }
        Ok(out)
    }

    /// Value and gradient together.
    pub fn value_and_grad(&self, point: &[f64], time: Option<f64>) -> Result<(f64, Vec<f64>), ExprError> {
        let value = self.eval(point, time)?;
        Ok((value, self.grad(point, time)?))
    }

    /// Symmetric matrix of second partials via nested duals, row-major.
    ///
    /// Each unordered pair `(i, j)` is evaluated once and written to both
    /// `[i][j]` and `[j][i]`, so the result is bitwise symmetric.
    pub fn hessian(&self, point: &[f64], time: Option<f64>) -> Result<Vec<f64>, ExprError> {
        self.check_point(point, time)?;
        let n = self.dimension;
        let mut out = vec![0.0; n * n];
        if self.variables.is_empty() {
            self.eval(point, time)?;
            return Ok(out);
        }
        let mut seeded: Vec<Dual<Dual<f64>>> = point.iter().map(|&x| Dual::constant(x)).collect();
        let time = time.map(Dual::constant);
        for (a, &i) in self.variables.iter().enumerate() {
            for &j in &self.variables[a..] {
                seeded[i].eps.re = 1.0;
                seeded[j].re.eps = 1.0;
                let v = self.finish(self.root.eval(&seeded, time)?)?;
                out[i * n + j] = v.eps.eps;
                out[j * n + i] = v.eps.eps;
                seeded[i].eps.re = 0.0;
                seeded[j].re.eps = 0.0;
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX31: &str = "96*x2 - 84*x2^2 + 28*x2^3 - 3*x2^4 - 10*(x1-2)^2";

    fn ex31() -> Expression {
        Expression::parse(EX31, 2, false).unwrap()
    }

    #[test]
    fn parses_example_quadratic() {
        let e = Expression::parse("4 - (x1-1)^2 - (x2-1)^2", 2, false).unwrap();
        assert_eq!(e.arity(), 2);
        assert_eq!(e.eval(&[1.0, 1.0], None).unwrap(), 4.0);
    }

    #[test]
    fn single_variable() {
        let e = Expression::parse("x1", 1, false).unwrap();
        assert_eq!(e.root(), &Node::Var(0));
        assert_eq!(e.grad(&[3.0], None).unwrap(), vec![1.0]);
    }

    #[test]
    fn trailing_operator_reports_offset() {
        let err = Expression::parse("x1 +", 1, false).unwrap_err();
        match err {
            ExprError::Syntax { offset, .. } => assert_eq!(offset, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_implicit_multiplication() {
        assert!(matches!(
            Expression::parse("2x1", 1, false),
            Err(ExprError::Syntax { offset: 1, .. })
        ));
    }

    #[test]
    fn identifier_errors() {
        assert!(matches!(
            Expression::parse("x3 + 1", 2, false),
            Err(ExprError::VariableOutOfRange { offset: 0, .. })
        ));
        assert!(matches!(
            Expression::parse("x0", 2, false),
            Err(ExprError::VariableOutOfRange { .. })
        ));
        assert!(matches!(
            Expression::parse("1 + t", 2, false),
            Err(ExprError::UnknownIdentifier { offset: 4, .. })
        ));
        assert!(matches!(
            Expression::parse("foo(x1)", 1, false),
            Err(ExprError::UnknownIdentifier { .. })
        ));
        assert!(Expression::parse("1 + t", 2, true).is_ok());
        assert!(matches!(Expression::parse("   ", 1, false), Err(ExprError::Empty)));
        assert!(matches!(
            Expression::parse("x1", 0, false),
            Err(ExprError::ZeroDimension)
        ));
    }

    #[test]
    fn precedence() {
        let e = Expression::parse("-x1^2", 1, false).unwrap();
        assert_eq!(e.eval(&[3.0], None).unwrap(), -9.0);
        // right-associative; the non-literal exponent takes the exp/ln path
        let e = Expression::parse("2^3^2", 1, false).unwrap();
        assert!((e.eval(&[0.0], None).unwrap() - 512.0).abs() < 1e-12);
        let e = Expression::parse("1 - 2 - 3", 1, false).unwrap();
        assert_eq!(e.eval(&[0.0], None).unwrap(), -4.0);
        let e = Expression::parse("8 / 4 / 2", 1, false).unwrap();
        assert_eq!(e.eval(&[0.0], None).unwrap(), 1.0);
        let e = Expression::parse("2 * 3 + 4 * 5", 1, false).unwrap();
        assert_eq!(e.eval(&[0.0], None).unwrap(), 26.0);
        let e = Expression::parse("2.5e-1 * x1", 1, false).unwrap();
        assert_eq!(e.eval(&[4.0], None).unwrap(), 1.0);
    }

    #[test]
    fn example_3_1_values() {
        let f = ex31();
        assert_eq!(f.eval(&[2.0, 1.0], None).unwrap(), 37.0);
        assert_eq!(f.eval(&[2.0, 2.0], None).unwrap(), 32.0);
        assert_eq!(f.eval(&[2.0, 4.0], None).unwrap(), 64.0);
        assert_eq!(
            Expression::parse("0", 2, false)
                .unwrap()
                .eval(&[5.0, -1.0], None)
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn example_3_1_gradient() {
        let f = ex31();
        assert_eq!(f.grad(&[2.0, 1.0], None).unwrap(), vec![0.0, 0.0]);
        // printed gradient -20(x1-2), -12(x2-1)(x2-2)(x2-4) at the origin:
        // -20·(-2) = 40 and -12·(-1)(-2)(-4) = 96
        assert_eq!(f.grad(&[0.0, 0.0], None).unwrap(), vec![40.0, 96.0]);
        let e = Expression::parse("x1", 3, false).unwrap();
        assert_eq!(e.grad(&[0.3, 0.2, 0.1], None).unwrap(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn example_3_1_hessian() {
        let f = ex31();
        assert_eq!(f.hessian(&[2.0, 1.0], None).unwrap(), vec![-20.0, 0.0, 0.0, -36.0]);
        assert_eq!(f.hessian(&[2.0, 2.0], None).unwrap(), vec![-20.0, 0.0, 0.0, 24.0]);
        let q = Expression::parse("4 - (x1-1)^2 - (x2-1)^2", 2, false).unwrap();
        assert_eq!(q.hessian(&[-7.0, 0.3], None).unwrap(), vec![-2.0, 0.0, 0.0, -2.0]);
    }

    #[test]
    fn mixed_partials() {
        let e = Expression::parse("x1^2 * x2^3 + sin(x1*x2)", 2, false).unwrap();
        let (x, y) = (0.4, -1.3);
        let h = e.hessian(&[x, y], None).unwrap();
        let s = (x * y).sin();
        let c = (x * y).cos();
        let hxy = 6.0 * x * y * y + c - x * y * s;
        assert!((h[1] - hxy).abs() < 1e-13);
        assert_eq!(h[1].to_bits(), h[2].to_bits());
        assert!((h[0] - (2.0 * y.powi(3) - y * y * s)).abs() < 1e-13);
        assert!((h[3] - (6.0 * x * x * y - x * x * s)).abs() < 1e-13);
    }

    #[test]
    fn domain_errors_name_the_node() {
        let e = Expression::parse("ln(x1 - 1)", 1, false).unwrap();
        match e.eval(&[0.5], None).unwrap_err() {
            ExprError::Domain { kind, node } => {
                assert_eq!(kind, DomainKind::LogOfNonPositive);
                assert!(node.contains("ln"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let e = Expression::parse("1 / x1", 1, false).unwrap();
        assert!(matches!(
            e.eval(&[0.0], None),
            Err(ExprError::Domain {
                kind: DomainKind::DivisionByZero,
                ..
            })
        ));
        let e = Expression::parse("sqrt(x1)", 1, false).unwrap();
        assert!(matches!(
            e.eval(&[-1.0], None),
            Err(ExprError::Domain {
                kind: DomainKind::SqrtOfNegative,
                ..
            })
        ));
        let e = Expression::parse("x1^0.5", 1, false).unwrap();
        assert!(matches!(
            e.grad(&[-1.0], None),
            Err(ExprError::Domain {
                kind: DomainKind::PowerOfNonPositiveBase,
                ..
            })
        ));
        let e = Expression::parse("x1^-2", 1, false).unwrap();
        assert!(matches!(
            e.eval(&[0.0], None),
            Err(ExprError::Domain {
                kind: DomainKind::DivisionByZero,
                ..
            })
        ));
    }

    #[test]
    fn time_handling() {
        let e = Expression::parse_in_time("(t+1)^-2").unwrap();
        assert!(e.uses_time());
        assert_eq!(e.eval(&[], Some(1.0)).unwrap(), 0.25);
        assert_eq!(e.eval(&[], None), Err(ExprError::MissingTime));
        assert!(matches!(
            Expression::parse_in_time("x1 + t"),
            Err(ExprError::VariableOutOfRange { .. })
        ));
    }

    #[test]
    fn real_exponent_matches_powf() {
        let e = Expression::parse("x1^2.5", 1, false).unwrap();
        let g = e.grad(&[1.7], None).unwrap()[0];
        assert!((g - 2.5 * 1.7_f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn display_reparses() {
        let f = ex31();
        let again = Expression::parse(&f.to_string(), 2, false).unwrap();
        for p in [[0.0, 0.0], [2.0, 1.0], [-0.5, 3.3]] {
            assert_eq!(f.eval(&p, None).unwrap(), again.eval(&p, None).unwrap());
        }
    }
}
