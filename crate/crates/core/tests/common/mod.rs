#![allow(dead_code)]

use modgrad::field::{BoxDomain, MatrixPath, ScalarField, System};
use modgrad::SymMatrix;
use rand::Rng;

/// Random expression in `x1..xn` built from polynomial terms and smooth
/// functions whose arguments stay in their domains.
pub fn random_expression<R: Rng>(rng: &mut R, n: usize, depth: usize) -> String {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.7) {
            format!("x{}", rng.gen_range(1..=n))
        } else {
            format!("{:.3}", rng.gen_range(-2.0..2.0))
        };
    }
    let a = random_expression(rng, n, depth - 1);
    match rng.gen_range(0..10) {
        0 | 1 => format!("({a} + {})", random_expression(rng, n, depth - 1)),
        2 => format!("({a} - {})", random_expression(rng, n, depth - 1)),
        3 | 4 => format!("({a} * {})", random_expression(rng, n, depth - 1)),
        5 => format!("({a})^{}", rng.gen_range(2..=3)),
        6 => format!("sin({a})"),
        7 => format!("cos({a})"),
        8 => format!("ln(1 + ({a})^2)"),
        _ => format!("sqrt(2 + sin({a}))"),
    }
}

/// Random polynomial of total degree ≤ `degree` with coefficients in [-1, 1].
pub fn random_polynomial<R: Rng>(rng: &mut R, n: usize, degree: usize) -> String {
    let terms = rng.gen_range(2..=6);
    let mut out = Vec::new();
    for _ in 0..terms {
        let coeff: f64 = rng.gen_range(-1.0..1.0);
        let deg = rng.gen_range(1..=degree);
        let mut factors = vec![format!("{coeff:.4}")];
        for _ in 0..deg {
            factors.push(format!("x{}", rng.gen_range(1..=n)));
        }
        out.push(factors.join("*"));
    }
    out.join(" + ")
}

/// Random symmetric positive semi-definite matrix `BᵀB`, sometimes rank deficient.
pub fn random_psd<R: Rng>(rng: &mut R, n: usize) -> SymMatrix {
    let rank = rng.gen_range(1..=n);
    let b: Vec<Vec<f64>> = (0..rank)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    SymMatrix::from_upper(n, |i, j| b.iter().map(|row| row[i] * row[j]).sum())
}

/// Random diagonal path `diag(aᵢ·(t+1)^-pᵢ)`.
pub fn random_decaying_diagonal<R: Rng>(rng: &mut R, n: usize) -> MatrixPath {
    let entries: Vec<String> = (0..n)
        .map(|_| format!("{:.3}*(t+1)^-{:.3}", rng.gen_range(0.1..2.0), rng.gen_range(0.0..2.5)))
        .collect();
    MatrixPath::diagonal(&entries).unwrap()
}

pub fn system(f: &str, domain: BoxDomain, p: MatrixPath) -> System {
    System::new(ScalarField::parse(f, domain).unwrap(), p).unwrap()
}

/// Classical fixed-step RK4 for `x' = P(t)∇f(x)`.
pub fn rk4(system: &System, x0: &[f64], t0: f64, t_end: f64, h: f64) -> Vec<f64> {
    let steps = ((t_end - t0) / h).round() as usize;
    let h = (t_end - t0) / steps as f64;
    let mut x = x0.to_vec();
    let add = |x: &[f64], k: &[f64], s: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let k1 = system.rhs(t, &x).unwrap();
        let k2 = system.rhs(t + 0.5 * h, &add(&x, &k1, 0.5 * h)).unwrap();
        let k3 = system.rhs(t + 0.5 * h, &add(&x, &k2, 0.5 * h)).unwrap();
        let k4 = system.rhs(t + h, &add(&x, &k3, h)).unwrap();
        for j in 0..x.len() {
            x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    x
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Central-difference gradient with step `h`.
pub fn central_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

pub fn analytic_2x2(a: f64, b: f64, d: f64) -> Vec<f64> {
    let m = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    vec![m - r, m + r]
}

/// Trigonometric roots of the characteristic cubic of a symmetric 3×3 matrix.
pub fn analytic_3x3(m: &SymMatrix) -> Vec<f64> {
    let g = |i, j| m.get(i, j);
    let p1 = g(0, 1).powi(2) + g(0, 2).powi(2) + g(1, 2).powi(2);
    let q = m.trace() / 3.0;
    let p2 = (g(0, 0) - q).powi(2) + (g(1, 1) - q).powi(2) + (g(2, 2) - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return vec![q; 3];
    }
    let b = |i, j| (g(i, j) - if i == j { q } else { 0.0 }) / p;
    let det_b = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
        + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
    let phi = (det_b / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let mut out = vec![lo, 3.0 * q - hi - lo, hi];
    out.sort_by(f64::total_cmp);
    out
}
