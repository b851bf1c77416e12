//! Small dense symmetric eigensolver and adaptive quadrature.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("Jacobi iteration did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix data has length {found}, expected {expected}")]
    BadShape { expected: usize, found: usize },
    #[error("adaptive quadrature hit the subdivision limit; partial estimate {partial}")]
    Quadrature { partial: f64 },
    #[error("invalid quadrature interval [{a}, {b}]")]
    BadInterval { a: f64, b: f64 },
}

/// Row-major `n × n` real symmetric matrix. Symmetry is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m
    }

    /// Builds the matrix from its upper triangle; `upper(i, j)` is called for
    /// `i <= j` and mirrored.
    pub fn from_upper<F: FnMut(usize, usize) -> f64>(n: usize, mut upper: F) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = upper(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    /// Wraps row-major data, rejecting anything not exactly symmetric.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != n * n {
            return Err(LinalgError::BadShape {
                expected: n * n,
                found: data.len(),
            });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if data[i * n + j] != data[j * n + i] {
                    return Err(LinalgError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// `v · M v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        self.mul_vec(v).iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

const MAX_SWEEPS: usize = 100;

/// All eigenvalues in ascending order, by cyclic Jacobi rotations.
pub fn eigen_all(m: &SymMatrix) -> Result<Vec<f64>, LinalgError> {
    let n = m.n;
    let mut a = m.data.clone();
    if n <= 1 {
        return Ok(a);
    }
    let scale = m.frobenius_norm();
    if scale == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += a[i * n + j] * a[i * n + j];
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while off(&a) > f64::EPSILON * 1e-3 * scale {
        if sweeps == MAX_SWEEPS {
            return Err(LinalgError::NoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Smallest eigenvalue, `λ₁`.
pub fn eigen_smallest(m: &SymMatrix) -> Result<f64, LinalgError> {
    if m.n == 1 {
        return Ok(m.data[0]);
    }
    Ok(eigen_all(m)?[0])
}

const MAX_DEPTH: usize = 50;

/// Adaptive Simpson quadrature of `g` over `[a, b]` to absolute tolerance `tol`.
///
/// Panels are halved until the two-panel estimate agrees with the one-panel
/// estimate to `15·tol`; the accepted value carries the Richardson correction.
pub fn integrate_adaptive<G: Fn(f64) -> f64>(g: G, a: f64, b: f64, tol: f64) -> Result<f64, LinalgError> {
    try_integrate_adaptive(|t| Ok::<_, LinalgError>(g(t)), a, b, tol)
}

/// As [`integrate_adaptive`] for integrands that can fail.
pub fn try_integrate_adaptive<G, E>(g: G, a: f64, b: f64, tol: f64) -> Result<f64, E>
where
    G: Fn(f64) -> Result<f64, E>,
    E: From<LinalgError>,
{
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(LinalgError::BadInterval { a, b }.into());
    }
    if a == b {
        return Ok(0.0);
    }
    let fa = g(a)?;
    let fb = g(b)?;
    let m = 0.5 * (a + b);
    let fm = g(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut failed = false;
    let value = simpson_step(&g, a, b, fa, fm, fb, whole, tol, MAX_DEPTH, &mut failed)?;
    if failed {
        return Err(LinalgError::Quadrature { partial: value }.into());
    }
    Ok(value)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<G, E>(
    g: &G,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
    failed: &mut bool,
) -> Result<f64, E>
where
    G: Fn(f64) -> Result<f64, E>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = g(lm)?;
    let frm = g(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 || lm <= a || rm >= b {
        *failed = true;
        return Ok(left + right + delta / 15.0);
    }
    let l = simpson_step(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, failed)?;
    let r = simpson_step(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, failed)?;
    Ok(l + r)
}
