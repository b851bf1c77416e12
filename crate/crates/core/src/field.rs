//! The ingredients of `x' = P(t)∇f(x)`: the scalar field `f` on a box domain
//! and the symmetric matrix path `P(t)`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{ExprError, Expression};
use crate::linalg::{eigen_smallest, LinalgError, SymMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("point {point:?} lies outside the domain")]
    OutsideDomain { point: Vec<f64> },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("matrix path entry ({row}, {col}) must depend on t only")]
    EntryNotInTime { row: usize, col: usize },
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("no validation sample times")]
    NoSamples,
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Axis-aligned box `D = Π [lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(bounds: &[(f64, f64)]) -> Result<Self, FieldError> {
        if bounds.is_empty() {
            return Err(FieldError::InvalidDomain("box has no axes".into()));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(FieldError::InvalidDomain(format!(
                    "axis {} has bounds [{lo}, {hi}]",
                    i + 1
                )));
            }
        }
        Ok(Self {
            lo: bounds.iter().map(|b| b.0).collect(),
            hi: bounds.iter().map(|b| b.1).collect(),
        })
    }

    /// The cube `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self, FieldError> {
        Self::new(&vec![(lo, hi); n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.lo)
                .zip(&self.hi)
                .all(|((v, lo), hi)| *lo <= *v && *v <= *hi)
    }

    /// Distance from an interior point to the nearest wall.
    pub fn wall_distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.lo)
            .zip(&self.hi)
            .map(|((v, lo), hi)| (v - lo).min(hi - v))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_width(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(lo, hi)| hi - lo)
            .fold(f64::INFINITY, f64::min)
    }
}

/// A field supplied as code rather than a parsed expression.
///
/// Implementations may reject points inside the box (the unit-disk field in
/// the gallery rejects `r > 1`) by returning `OutsideDomain`.
pub trait ProceduralField: Send + Sync + fmt::Debug {
    fn value(&self, x: &[f64]) -> Result<f64, FieldError>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, FieldError>;
    /// Row-major, exactly symmetric.
    fn hessian(&self, x: &[f64]) -> Result<Vec<f64>, FieldError>;
}

#[derive(Debug, Clone)]
pub enum FieldSource {
    Expression(Expression),
    Procedural(Arc<dyn ProceduralField>),
}

/// The scalar field `f` on its box domain `D`.
#[derive(Debug, Clone)]
pub struct ScalarField {
    source: FieldSource,
    domain: BoxDomain,
}

impl ScalarField {
    pub fn from_expression(expr: Expression, domain: BoxDomain) -> Result<Self, FieldError> {
        if expr.dimension() != domain.dim() {
            return Err(FieldError::DimensionMismatch {
                expected: domain.dim(),
                found: expr.dimension(),
            });
        }
        if expr.uses_time() {
            return Err(FieldError::InvalidDomain("f must not depend on t".into()));
        }
        Ok(Self {
            source: FieldSource::Expression(expr),
            domain,
        })
    }

    /// Parses `source` over `x1..xn` with `n` the box dimension.
    pub fn parse(source: &str, domain: BoxDomain) -> Result<Self, FieldError> {
        let expr = Expression::parse(source, domain.dim(), false)?;
        Self::from_expression(expr, domain)
    }

    pub fn procedural(field: Arc<dyn ProceduralField>, domain: BoxDomain) -> Self {
        Self {
            source: FieldSource::Procedural(field),
            domain,
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn source(&self) -> &FieldSource {
        &self.source
    }

    fn check(&self, x: &[f64]) -> Result<(), FieldError> {
        if x.len() != self.dim() {
            return Err(FieldError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        if !self.domain.contains(x) {
            return Err(FieldError::OutsideDomain { point: x.to_vec() });
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, FieldError> {
        self.check(x)?;
        match &self.source {
            FieldSource::Expression(e) => Ok(e.eval(x, None)?),
            FieldSource::Procedural(p) => p.value(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, FieldError> {
        self.check(x)?;
        match &self.source {
            FieldSource::Expression(e) => Ok(e.grad(x, None)?),
            FieldSource::Procedural(p) => p.gradient(x),
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Result<SymMatrix, FieldError> {
        self.check(x)?;
        let data = match &self.source {
            FieldSource::Expression(e) => e.hessian(x, None)?,
            FieldSource::Procedural(p) => p.hessian(x)?,
        };
        Ok(SymMatrix::from_row_major(self.dim(), data)?)
    }

    /// Whether `f` can be evaluated at `x`, i.e. `x` lies in the effective domain.
    pub fn accepts(&self, x: &[f64]) -> bool {
        self.value(x).is_ok()
    }
}

/// Symmetric matrix-valued function of `t ≥ 0`, stored as its upper triangle.
#[derive(Debug, Clone)]
pub struct MatrixPath {
    n: usize,
    /// Upper triangle, row by row: (0,0), (0,1), .., (0,n-1), (1,1), ..
    upper: Vec<Expression>,
}

impl MatrixPath {
    /// Builds from upper-triangle entries in `t`, row by row.
    pub fn from_upper(n: usize, upper: Vec<Expression>) -> Result<Self, FieldError> {
        let expected = n * (n + 1) / 2;
        if n == 0 || upper.len() != expected {
            return Err(FieldError::DimensionMismatch {
                expected,
                found: upper.len(),
            });
        }
        let mut k = 0;
        for row in 0..n {
            for col in row..n {
                if upper[k].dimension() != 0 {
                    return Err(FieldError::EntryNotInTime { row, col });
                }
                k += 1;
            }
        }
        Ok(Self { n, upper })
    }

    /// Parses an `n × n` grid of sources, reading only the upper triangle.
    pub fn parse_upper<S: AsRef<str>>(n: usize, rows: &[Vec<S>]) -> Result<Self, FieldError> {
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        if rows.len() != n {
            return Err(FieldError::DimensionMismatch {
                expected: n,
                found: rows.len(),
            });
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(FieldError::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            for src in &row[i..] {
                upper.push(Expression::parse_in_time(src.as_ref())?);
            }
        }
        Self::from_upper(n, upper)
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(&SymMatrix::identity(n))
    }

    pub fn constant(m: &SymMatrix) -> Self {
        let n = m.dim();
        let mut upper = Vec::new();
        for i in 0..n {
            for j in i..n {
                upper.push(Expression::from_node(crate::expr::Node::Const(m.get(i, j)), 0));
            }
        }
        Self { n, upper }
    }

    /// Diagonal path from per-entry sources in `t`.
    pub fn diagonal<S: AsRef<str>>(entries: &[S]) -> Result<Self, FieldError> {
        let n = entries.len();
        let zero = "0";
        let rows: Vec<Vec<&str>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { entries[i].as_ref() } else { zero })
                    .collect()
            })
            .collect();
        Self::parse_upper(n, &rows)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn upper_entries(&self) -> &[Expression] {
        &self.upper
    }

    /// `P(t)`, exactly symmetric by construction.
    pub fn at(&self, t: f64) -> Result<SymMatrix, FieldError> {
        if t < 0.0 {
            return Err(FieldError::NegativeTime(t));
        }
        let n = self.n;
        let mut vals = self.upper.iter().map(|e| e.eval(&[], Some(t)));
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = vals.next().expect("upper triangle length checked at construction")?;
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Ok(SymMatrix::from_row_major(n, data)?)
    }

    /// `λ₁(P(t))`.
    pub fn lambda_min(&self, t: f64) -> Result<f64, FieldError> {
        Ok(eigen_smallest(&self.at(t)?)?)
    }
}

/// `x' = P(t)∇f(x)`.
#[derive(Debug, Clone)]
pub struct System {
    field: ScalarField,
    matrix: MatrixPath,
}

impl System {
    pub fn new(field: ScalarField, matrix: MatrixPath) -> Result<Self, FieldError> {
        if field.dim() != matrix.dim() {
            return Err(FieldError::DimensionMismatch {
                expected: field.dim(),
                found: matrix.dim(),
            });
        }
        Ok(Self { field, matrix })
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn matrix(&self) -> &MatrixPath {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn with_matrix(&self, matrix: MatrixPath) -> Result<Self, FieldError> {
        Self::new(self.field.clone(), matrix)
    }

    /// The vector field `P(t)∇f(x)`.
    pub fn rhs(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, FieldError> {
        let g = self.field.gradient(x)?;
        let p = self.matrix.at(t)?;
        Ok(p.mul_vec(&g))
    }
}

/// Default H0 validation times: `t = 0` plus 63 log-spaced points in `[1e-3, 1e4]`.
pub fn default_sample_times() -> Vec<f64> {
    let mut out = vec![0.0];
    let (a, b) = (-3.0_f64, 4.0_f64);
    for k in 0..63 {
        out.push(10f64.powf(a + (b - a) * k as f64 / 62.0));
    }
    out
}

pub const DEFAULT_PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct H0Report {
    /// `(t, λ₁(P(t)))` per sample.
    pub samples: Vec<(f64, f64)>,
    pub min_lambda1: f64,
    pub psd_tol: f64,
    pub passed: bool,
    /// Symmetry holds by construction (upper triangle mirrored).
    pub symmetry: &'static str,
    /// Times at which `λ₁ < -psd_tol`.
    pub violations: Vec<f64>,
}

/// Sampled check that `P(t)` is positive semi-definite.
pub fn validate_h0(system: &System, sample_times: &[f64], psd_tol: f64) -> Result<H0Report, FieldError> {
    if sample_times.is_empty() {
        return Err(FieldError::NoSamples);
    }
    if system.field.dim() != system.matrix.dim() {
        return Err(FieldError::DimensionMismatch {
            expected: system.field.dim(),
            found: system.matrix.dim(),
        });
    }
    let mut samples = Vec::with_capacity(sample_times.len());
    for &t in sample_times {
        samples.push((t, system.matrix.lambda_min(t)?));
    }
    let min_lambda1 = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let violations: Vec<f64> = samples.iter().filter(|s| s.1 < -psd_tol).map(|s| s.0).collect();
    Ok(H0Report {
        passed: violations.is_empty(),
        samples,
        min_lambda1,
        psd_tol,
        symmetry: "structural (upper triangle mirrored)",
        violations,
    })
}
