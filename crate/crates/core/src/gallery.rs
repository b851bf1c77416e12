//! Built-in worked examples with closed-form oracles.
//!
//! * `ex21`: `f = 4 − (x1−1)² − (x2−1)²`, `P(t) = diag((t+1)⁻², (t+1)⁻¹)`.
//!   The eigenvalue integral converges, so the maximum at `(1,1)` is stable but
//!   not asymptotically stable.
//! * `ex22`: a C¹ radial field on the unit disk built from cubic pieces, with
//!   circles of critical points `r = 2⁻ⁿ` accumulating at the maximum at the
//!   origin. `P = I`.
//! * `ex31`: `f = 96x2 − 84x2² + 28x2³ − 3x2⁴ − 10(x1−2)²`, maxima at `(2,1)`
//!   and `(2,4)`, saddle at `(2,2)`.
//!
//! The radial spline is truncated after `depth` pieces. The gap `[−2⁻ᴺ, 0]` is
//! closed by one more Hermite cubic from `(1 − 4⁻ᴺ)/3` to `1/3` with zero end
//! slopes, which keeps `p` C¹ and the origin a strict maximum with `p''(0) = −2`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::equilibria::Classification;
use crate::field::{BoxDomain, FieldError, MatrixPath, ProceduralField, ScalarField, System};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GalleryError {
    #[error("unknown gallery id '{0}' (expected ex21, ex22 or ex31)")]
    UnknownId(String),
    #[error("spline depth {0} is outside 2..=40")]
    DepthOutOfRange(usize),
    #[error("matrix path has dimension {0}, expected 2")]
    BadMatrix(usize),
    #[error("gallery self-test failed: {0}")]
    SelfTest(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GalleryId {
    Ex21,
    Ex22,
    Ex31,
}

impl GalleryId {
    pub const ALL: [GalleryId; 3] = [GalleryId::Ex21, GalleryId::Ex22, GalleryId::Ex31];

    pub fn as_str(self) -> &'static str {
        match self {
            GalleryId::Ex21 => "ex21",
            GalleryId::Ex22 => "ex22",
            GalleryId::Ex31 => "ex31",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            GalleryId::Ex21 => {
                "quadratic maximum with P(t) = diag((t+1)^-2, (t+1)^-1): stable, not asymptotically stable"
            }
            GalleryId::Ex22 => "radial C1 spline with critical circles r = 2^-n accumulating at the maximum (P = I)",
            GalleryId::Ex31 => "quartic field with maxima (2,1), (2,4) and saddle (2,2); basin estimates by level sets",
        }
    }

    /// Builds the entry with default parameters (depth 20, identity matrix).
    pub fn build(self) -> Result<GalleryEntry, GalleryError> {
        match self {
            GalleryId::Ex21 => example_2_1(),
            GalleryId::Ex22 => example_2_2(DEFAULT_DEPTH),
            GalleryId::Ex31 => example_3_1(None),
        }
    }
}

impl fmt::Display for GalleryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GalleryId {
    type Err = GalleryError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ex21" => Ok(GalleryId::Ex21),
            "ex22" => Ok(GalleryId::Ex22),
            "ex31" => Ok(GalleryId::Ex31),
            other => Err(GalleryError::UnknownId(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnownCriticalPoint {
    pub location: Vec<f64>,
    pub value: f64,
    pub classification: Classification,
}

#[derive(Debug, Clone)]
pub struct GalleryEntry {
    pub id: GalleryId,
    pub system: System,
    /// Isolated critical points known in closed form.
    pub critical_points: Vec<KnownCriticalPoint>,
    /// Radii of circles consisting entirely of critical points (ex22).
    pub critical_circles: Vec<f64>,
    pub notes: Vec<String>,
    pub spline: Option<Arc<PiecewiseCubic>>,
}

pub const DEFAULT_DEPTH: usize = 20;

pub const EX21_F: &str = "4 - (x1-1)^2 - (x2-1)^2";
pub const EX21_P: [&str; 2] = ["(t+1)^-2", "(t+1)^-1"];
pub const EX31_F: &str = "96*x2 - 84*x2^2 + 28*x2^3 - 3*x2^4 - 10*(x1-2)^2";

fn self_test(ok: bool, what: &str) -> Result<(), GalleryError> {
    if ok {
        Ok(())
    } else {
        Err(GalleryError::SelfTest(what.to_string()))
    }
}

pub fn example_2_1() -> Result<GalleryEntry, GalleryError> {
    let field = ScalarField::parse(EX21_F, BoxDomain::cube(2, -3.0, 5.0)?)?;
    let system = System::new(field, MatrixPath::diagonal(&EX21_P)?)?;
    self_test(system.field().value(&[1.0, 1.0])? == 4.0, "f(1,1) = 4")?;
    self_test(system.matrix().lambda_min(1.0)? == 0.25, "λ₁(P(1)) = 1/4")?;
    Ok(GalleryEntry {
        id: GalleryId::Ex21,
        system,
        critical_points: vec![KnownCriticalPoint {
            location: vec![1.0, 1.0],
            value: 4.0,
            classification: Classification::IsolatedLocalMax,
        }],
        critical_circles: Vec::new(),
        notes: vec![
            "λ₁(P(t)) = (t+1)^-2 is integrable, so only uniform stability is certified".into(),
            "closed form x1 = 1 + c1·exp(2/(t+1)), x2 = 1 + c2·(t+1)^-2".into(),
        ],
        spline: None,
    })
}

/// Closed-form solution of the `ex21` system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example21Solution {
    pub c1: f64,
    pub c2: f64,
}

impl Example21Solution {
    /// Constants fixed by `x(t0) = x0`.
    pub fn through(x0: [f64; 2], t0: f64) -> Self {
        Self {
            c1: (x0[0] - 1.0) * (-2.0 / (t0 + 1.0)).exp(),
            c2: (x0[1] - 1.0) * (t0 + 1.0).powi(2),
        }
    }

    pub fn at(&self, t: f64) -> [f64; 2] {
        [
            1.0 + self.c1 * (2.0 / (t + 1.0)).exp(),
            1.0 + self.c2 * (t + 1.0).powi(-2),
        ]
    }

    /// `lim_{t→∞} x(t) = (1 + c1, 1)`.
    pub fn limit(&self) -> [f64; 2] {
        [1.0 + self.c1, 1.0]
    }
}

/// One cubic `α(x−s)³ + β(x−s)² + γ(x−s) + δ` on `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicPiece {
    pub start: f64,
    pub end: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl CubicPiece {
    pub fn value(&self, x: f64) -> f64 {
        let s = x - self.start;
        ((self.alpha * s + self.beta) * s + self.gamma) * s + self.delta
    }

    pub fn slope(&self, x: f64) -> f64 {
        let s = x - self.start;
        (3.0 * self.alpha * s + 2.0 * self.beta) * s + self.gamma
    }

    pub fn curvature(&self, x: f64) -> f64 {
        6.0 * self.alpha * (x - self.start) + 2.0 * self.beta
    }
}

/// The even C¹ function `p` on `[−1, 1]` assembled from cubic pieces.
///
/// On `[xₙ, xₙ₊₁]` with `xₙ = −2⁻ⁿ`, the piece is
/// `−2ⁿ⁺²(x−xₙ)³ + 3(x−xₙ)² + (1 − 4⁻ⁿ)/3`, joining the levels
/// `zₙ = (1 − 4⁻ⁿ)/3` with zero slope at every knot.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseCubic {
    depth: usize,
    /// `depth` regular pieces followed by the closing piece on `[x_depth, 0]`.
    pieces: Vec<CubicPiece>,
}

impl PiecewiseCubic {
    pub fn new(depth: usize) -> Result<Self, GalleryError> {
        if !(2..=40).contains(&depth) {
            return Err(GalleryError::DepthOutOfRange(depth));
        }
        let mut pieces: Vec<CubicPiece> = (0..depth)
            .map(|n| CubicPiece {
                start: Self::knot(n),
                end: Self::knot(n + 1),
                alpha: -(2f64.powi(n as i32 + 2)),
                beta: 3.0,
                gamma: 0.0,
                delta: Self::level(n),
            })
            .collect();
        // Hermite cubic with zero end slopes from z_N to 1/3 over width h.
        let h = 2f64.powi(-(depth as i32));
        let rise = 4f64.powi(-(depth as i32)) / 3.0;
        pieces.push(CubicPiece {
            start: Self::knot(depth),
            end: 0.0,
            alpha: -2.0 * rise / (h * h * h),
            beta: 3.0 * rise / (h * h),
            gamma: 0.0,
            delta: Self::level(depth),
        });
        Ok(Self { depth, pieces })
    }

    /// `xₙ = −2⁻ⁿ`.
    pub fn knot(n: usize) -> f64 {
        -(2f64.powi(-(n as i32)))
    }

    /// `zₙ = (1 − 4⁻ⁿ)/3`.
    pub fn level(n: usize) -> f64 {
        (1.0 - 4f64.powi(-(n as i32))) / 3.0
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn pieces(&self) -> &[CubicPiece] {
        &self.pieces
    }

    /// Index of the piece containing `x ∈ [−1, 0]`.
    fn piece_index(&self, x: f64) -> usize {
        if x >= Self::knot(self.depth) {
            return self.depth;
        }
        let guess = (-(-x).log2()).floor().clamp(0.0, (self.depth - 1) as f64) as usize;
        let mut n = guess;
        while n > 0 && x < self.pieces[n].start {
            n -= 1;
        }
        while n + 1 < self.depth && x > self.pieces[n].end {
            n += 1;
        }
        n
    }

    /// `p(x)` for `|x| ≤ 1`, by even reflection.
    pub fn value(&self, x: f64) -> f64 {
        let y = -x.abs();
        self.pieces[self.piece_index(y)].value(y)
    }

    /// `p'(x)`; odd in `x`.
    pub fn slope(&self, x: f64) -> f64 {
        let y = -x.abs();
        let d = self.pieces[self.piece_index(y)].slope(y);
        if x > 0.0 {
            -d
        } else {
            d
        }
    }

    /// `p''(x)` from the piece containing `−|x|`; even in `x`.
    pub fn curvature(&self, x: f64) -> f64 {
        let y = -x.abs();
        self.pieces[self.piece_index(y)].curvature(y)
    }
}

/// `f(x) = p(−|x|)` on the closed unit disk.
#[derive(Debug, Clone)]
pub struct RadialSplineField {
    spline: Arc<PiecewiseCubic>,
}

impl RadialSplineField {
    pub fn new(spline: Arc<PiecewiseCubic>) -> Self {
        Self { spline }
    }

    fn radius(&self, x: &[f64]) -> Result<f64, FieldError> {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r > 1.0 {
            return Err(FieldError::OutsideDomain { point: x.to_vec() });
        }
        Ok(r)
    }

    /// `q'(r)` for the radial profile `q(r) = p(−r)`.
    fn radial_slope(&self, r: f64) -> f64 {
        -self.spline.slope(-r)
    }
}

impl ProceduralField for RadialSplineField {
    fn value(&self, x: &[f64]) -> Result<f64, FieldError> {
        let r = self.radius(x)?;
        Ok(self.spline.value(-r))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, FieldError> {
        let r = self.radius(x)?;
        if r == 0.0 {
            return Ok(vec![0.0; x.len()]);
        }
        let q1 = self.radial_slope(r);
        Ok(x.iter().map(|v| q1 * v / r).collect())
    }

    fn hessian(&self, x: &[f64]) -> Result<Vec<f64>, FieldError> {
        let n = x.len();
        let r = self.radius(x)?;
        let q2 = self.spline.curvature(-r);
        let mut h = vec![0.0; n * n];
        if r == 0.0 {
            for i in 0..n {
                h[i * n + i] = q2;
            }
            return Ok(h);
        }
        let tangential = self.radial_slope(r) / r;
        for i in 0..n {
            for j in i..n {
                let outer = x[i] * x[j] / (r * r);
                let id = if i == j { 1.0 } else { 0.0 };
                let v = q2 * outer + tangential * (id - outer);
                h[i * n + j] = v;
                h[j * n + i] = v;
            }
        }
        Ok(h)
    }
}

pub fn example_2_2(depth: usize) -> Result<GalleryEntry, GalleryError> {
    let spline = Arc::new(PiecewiseCubic::new(depth)?);
    let field = ScalarField::procedural(
        Arc::new(RadialSplineField::new(spline.clone())),
        BoxDomain::cube(2, -1.0, 1.0)?,
    );
    let system = System::new(field, MatrixPath::identity(2))?;
    self_test((spline.value(0.0) - 1.0 / 3.0).abs() < 1e-15, "p(0) = 1/3")?;
    self_test(PiecewiseCubic::level(1) == 0.25, "z₁ = 1/4")?;
    self_test(system.field().gradient(&[0.5, 0.0])?[0] == 0.0, "∇f = 0 on r = 1/2")?;
    Ok(GalleryEntry {
        id: GalleryId::Ex22,
        system,
        critical_points: vec![KnownCriticalPoint {
            location: vec![0.0, 0.0],
            value: 1.0 / 3.0,
            classification: Classification::IsolatedLocalMax,
        }],
        critical_circles: (1..=depth).map(|n| 2f64.powi(-(n as i32))).collect(),
        notes: vec![
            format!(
                "spline truncated after {depth} pieces; [-2^-{depth}, 0] is closed by one Hermite cubic rising to 1/3"
            ),
            "every circle r = 2^-n is a set of critical points, so the origin is not an isolated critical point".into(),
            "gradient at the origin is the zero vector (one-sided derivative of p at 0 is zero)".into(),
        ],
        spline: Some(spline),
    })
}

/// `∇f` of `ex31` as printed: `(−20(x1−2), −12(x2−1)(x2−2)(x2−4))`.
pub fn example_3_1_printed_gradient(x: &[f64]) -> [f64; 2] {
    [-20.0 * (x[0] - 2.0), -12.0 * (x[1] - 1.0) * (x[1] - 2.0) * (x[1] - 4.0)]
}

pub fn example_3_1(matrix: Option<MatrixPath>) -> Result<GalleryEntry, GalleryError> {
    let matrix = matrix.unwrap_or_else(|| MatrixPath::identity(2));
    if matrix.dim() != 2 {
        return Err(GalleryError::BadMatrix(matrix.dim()));
    }
    let field = ScalarField::parse(EX31_F, BoxDomain::new(&[(-1.0, 5.0), (-1.0, 6.0)])?)?;
    let system = System::new(field, matrix)?;
    let f = system.field();
    self_test(f.value(&[2.0, 1.0])? == 37.0, "f(2,1) = 37")?;
    self_test(f.value(&[2.0, 2.0])? == 32.0, "f(2,2) = 32")?;
    self_test(f.value(&[2.0, 4.0])? == 64.0, "f(2,4) = 64")?;
    self_test(
        f.gradient(&[0.5, 3.0])?.as_slice() == example_3_1_printed_gradient(&[0.5, 3.0]).as_slice(),
        "autodiff gradient matches printed gradient",
    )?;
    let cp = |x: f64, y: f64, value: f64, classification| KnownCriticalPoint {
        location: vec![x, y],
        value,
        classification,
    };
    Ok(GalleryEntry {
        id: GalleryId::Ex31,
        system,
        critical_points: vec![
            cp(2.0, 1.0, 37.0, Classification::IsolatedLocalMax),
            cp(2.0, 2.0, 32.0, Classification::Saddle),
            cp(2.0, 4.0, 64.0, Classification::IsolatedLocalMax),
        ],
        critical_circles: Vec::new(),
        notes: vec![
            "c = 33 separates the two maxima (saddle value 32)".into(),
            "c = 20 anchored at (2,4) contains both maxima and the saddle".into(),
        ],
        spline: None,
    })
}
