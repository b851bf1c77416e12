//! Critical points of `f`: discovery by damped Newton iteration on `∇f = 0`,
//! classification from the Hessian spectrum, and a sampled isolation probe.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::field::{FieldError, ScalarField};
use crate::linalg::{eigen_all, LinalgError, SymMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriaError {
    #[error("shell of radius {radius} around {center:?} leaves the domain")]
    ShellExitsDomain { center: Vec<f64>, radius: f64 },
    #[error("isolation probe needs at least 8 samples per shell, got {0}")]
    TooFewSamples(usize),
    #[error("isolation probe needs at least one positive shell radius")]
    NoShells,
    #[error("grid needs at least 2 nodes per axis, got {0}")]
    GridTooSmall(usize),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    IsolatedLocalMax,
    LocalMin,
    Saddle,
    Degenerate,
}

/// Sampled evidence about hypothesis H2. Never a proof.
#[derive(Debug, Clone, PartialEq)]
pub enum Isolation {
    /// `|∇f|` stayed above the floor on every shell.
    IsolatedEvidence { min_grad_norm: f64 },
    /// A shell sample with `|∇f| ≤ grad_floor`.
    NotIsolated {
        witness: Vec<f64>,
        radius: f64,
        grad_norm: f64,
    },
    /// Smallest `|∇f|` within a decade above the floor.
    Inconclusive { min_grad_norm: f64 },
}

impl Isolation {
    pub fn is_isolated(&self) -> bool {
        matches!(self, Isolation::IsolatedEvidence { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    /// `f(location)`.
    pub value: f64,
    pub grad_norm: f64,
    pub classification: Classification,
    /// Ascending.
    pub hessian_spectrum: Vec<f64>,
    pub isolation: Isolation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinderOptions {
    pub grid_per_axis: usize,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Relative to `‖H‖_F`.
    pub degeneracy_tol: f64,
    pub grad_floor: f64,
    pub samples_per_shell: usize,
    pub shell_count: usize,
}

impl Default for FinderOptions {
    fn default() -> Self {
        Self {
            grid_per_axis: 20,
            newton_tol: 1e-10,
            max_newton_iters: 100,
            degeneracy_tol: 1e-7,
            grad_floor: 1e-8,
            samples_per_shell: 64,
            shell_count: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPointSet {
    pub points: Vec<CriticalPoint>,
    pub seeds: usize,
    /// Seeds whose Newton run failed to converge or left the domain.
    pub non_converged: usize,
}

/// Sign pattern of the Hessian spectrum, with eigenvalues inside
/// `±degeneracy_tol·‖H‖_F` treated as zero.
pub fn classify(spectrum: &[f64], hessian_norm: f64, degeneracy_tol: f64) -> Classification {
    let tol = degeneracy_tol * hessian_norm;
    if hessian_norm == 0.0 || spectrum.iter().any(|l| l.abs() <= tol) {
        Classification::Degenerate
    } else if spectrum.iter().all(|&l| l < 0.0) {
        Classification::IsolatedLocalMax
    } else if spectrum.iter().all(|&l| l > 0.0) {
        Classification::LocalMin
    } else {
        Classification::Saddle
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting; `None` if
/// a pivot falls below `rel_pivot · max|A|`.
fn solve(a: &[f64], b: &[f64], n: usize, rel_pivot: f64) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    let scale = m.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))?;
        if m[piv * n + col].abs() <= rel_pivot * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            rhs.swap(col, piv);
        }
        for row in (col + 1)..n {
            let f = m[row * n + col] / m[col * n + col];
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = ((row + 1)..n).map(|k| m[row * n + k] * x[k]).sum();
        x[row] = (rhs[row] - s) / m[row * n + row];
    }
    Some(x)
}

/// One Newton step on `∇f = 0`. Falls back to the Levenberg step
/// `(HᵀH + μ²I)δ = −Hᵀg`, `μ = 1e-6·‖H‖_F`, when `H` is near-singular.
fn newton_step(h: &SymMatrix, g: &[f64]) -> Option<Vec<f64>> {
    let n = g.len();
    let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
    if let Some(step) = solve(h.as_slice(), &neg_g, n, 1e-10) {
        return Some(step);
    }
    let mu = 1e-6 * h.frobenius_norm();
    if mu == 0.0 {
        return None;
    }
    let mut normal = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            normal[i * n + j] = (0..n).map(|k| h.get(k, i) * h.get(k, j)).sum();
        }
        normal[i * n + i] += mu * mu;
    }
    let htg = h.mul_vec(&neg_g);
    solve(&normal, &htg, n, 0.0)
}

fn newton(field: &ScalarField, seed: &[f64], tol: f64, max_iters: usize) -> Option<Vec<f64>> {
    let mut x = seed.to_vec();
    for _ in 0..max_iters {
        let g = field.gradient(&x).ok()?;
        if norm(&g) <= tol {
            // one polishing step if it helps
            if let Some(step) = field.hessian(&x).ok().and_then(|h| newton_step(&h, &g)) {
                let y: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a + d).collect();
                if let Ok(gy) = field.gradient(&y) {
                    if norm(&gy) < norm(&g) {
                        return Some(y);
                    }
                }
            }
            return Some(x);
        }
        let h = field.hessian(&x).ok()?;
        let step = newton_step(&h, &g)?;
        for (xi, d) in x.iter_mut().zip(&step) {
            *xi += d;
        }
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    let g = field.gradient(&x).ok()?;
    (norm(&g) <= tol).then_some(x)
}

fn grid_seeds(field: &ScalarField, per_axis: usize) -> Vec<Vec<f64>> {
    let d = field.domain();
    let n = d.dim();
    let total = per_axis.pow(n as u32);
    let mut seeds = Vec::with_capacity(total + 1);
    for idx in 0..total {
        let mut rem = idx;
        let mut p = Vec::with_capacity(n);
        for axis in 0..n {
            let k = rem % per_axis;
            rem /= per_axis;
            let (lo, hi) = (d.lo()[axis], d.hi()[axis]);
            p.push(lo + (hi - lo) * k as f64 / (per_axis - 1) as f64);
        }
        seeds.push(p);
    }
    seeds.push(d.lo().iter().zip(d.hi()).map(|(lo, hi)| 0.5 * (lo + hi)).collect());
    seeds
}

/// Finds critical points with the given grid and Newton settings; the
/// remaining knobs take their defaults.
pub fn find_critical_points(
    field: &ScalarField,
    grid_per_axis: usize,
    newton_tol: f64,
    max_newton_iters: usize,
) -> Result<CriticalPointSet, EquilibriaError> {
    find_critical_points_with(
        field,
        &FinderOptions {
            grid_per_axis,
            newton_tol,
            max_newton_iters,
            ..FinderOptions::default()
        },
    )
}

/// Seeds Newton's method from every node of a `grid_per_axis^n` grid plus the
/// box centre, keeps the first root found within `10·newton_tol` of each
/// other, then classifies each root and probes its isolation.
pub fn find_critical_points_with(
    field: &ScalarField,
    opts: &FinderOptions,
) -> Result<CriticalPointSet, EquilibriaError> {
    if opts.grid_per_axis < 2 {
        return Err(EquilibriaError::GridTooSmall(opts.grid_per_axis));
    }
    let seeds = grid_seeds(field, opts.grid_per_axis);
    let roots: Vec<Option<Vec<f64>>> = seeds
        .par_iter()
        .map(|s| newton(field, s, opts.newton_tol, opts.max_newton_iters).filter(|x| field.domain().contains(x)))
        .collect();

    let dedup = 10.0 * opts.newton_tol;
    let mut kept: Vec<Vec<f64>> = Vec::new();
    let mut non_converged = 0;
    for root in roots {
        match root {
            Some(x) => {
                if !kept.iter().any(|k| dist(k, &x) <= dedup) {
                    kept.push(x);
                }
            }
            None => non_converged += 1,
        }
    }

    let mut points = Vec::with_capacity(kept.len());
    for x in kept {
        let g = field.gradient(&x)?;
        let h = field.hessian(&x)?;
        let spectrum = eigen_all(&h)?;
        points.push(CriticalPoint {
            value: field.value(&x)?,
            grad_norm: norm(&g),
            classification: classify(&spectrum, h.frobenius_norm(), opts.degeneracy_tol),
            hessian_spectrum: spectrum,
            isolation: Isolation::Inconclusive {
                min_grad_norm: f64::NAN,
            },
            location: x,
        });
    }
    // deterministic order regardless of thread scheduling: lexicographic
    points.sort_by(|a, b| {
        a.location
            .iter()
            .zip(&b.location)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let isolations: Vec<Isolation> = points
        .par_iter()
        .map(|p| {
            let shells = default_shells(field, &p.location, &points, opts.shell_count);
            isolation_probe_with(field, &p.location, &shells, opts.samples_per_shell, opts.grad_floor).unwrap_or(
                Isolation::Inconclusive {
                    min_grad_norm: f64::NAN,
                },
            )
        })
        .collect();
    for (p, iso) in points.iter_mut().zip(isolations) {
        p.isolation = iso;
    }

    Ok(CriticalPointSet {
        points,
        seeds: seeds.len(),
        non_converged,
    })
}

/// Dyadic shell radii `r0·2^-k`, `k = 0..count`, with `r0` the largest power
/// of two not exceeding a quarter of the narrowest box side, 0.9 of the wall
/// distance, or half the distance to the nearest other non-degenerate
/// critical point.
pub fn default_shells(field: &ScalarField, point: &[f64], others: &[CriticalPoint], count: usize) -> Vec<f64> {
    let d = field.domain();
    let mut bound = (0.25 * d.min_width()).min(0.9 * d.wall_distance(point));
    for o in others {
        let r = dist(&o.location, point);
        if r > 0.0 && o.classification != Classification::Degenerate {
            bound = bound.min(0.5 * r);
        }
    }
    if !(bound > 0.0) {
        return Vec::new();
    }
    let r0 = 2f64.powi(bound.log2().floor() as i32);
    (0..count).map(|k| r0 * 2f64.powi(-(k as i32))).collect()
}

/// Deterministic, approximately uniform points on the sphere `|x − c| = r`.
pub fn shell_points(center: &[f64], radius: f64, count: usize) -> Vec<Vec<f64>> {
    let n = center.len();
    match n {
        1 => vec![vec![center[0] - radius], vec![center[0] + radius]],
        2 => (0..count)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / count as f64;
                vec![center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            })
            .collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + n as u64);
            (0..count)
                .map(|_| {
                    let dir: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
                    let len = norm(&dir);
                    center.iter().zip(&dir).map(|(c, d)| c + radius * d / len).collect()
                })
                .collect()
        }
    }
}

/// Samples `|∇f|` on each shell with the default gradient floor `1e-8`.
pub fn isolation_probe(
    field: &ScalarField,
    point: &[f64],
    shell_radii: &[f64],
    samples_per_shell: usize,
) -> Result<Isolation, EquilibriaError> {
    isolation_probe_with(field, point, shell_radii, samples_per_shell, 1e-8)
}

pub fn isolation_probe_with(
    field: &ScalarField,
    point: &[f64],
    shell_radii: &[f64],
    samples_per_shell: usize,
    grad_floor: f64,
) -> Result<Isolation, EquilibriaError> {
    if samples_per_shell < 8 {
        return Err(EquilibriaError::TooFewSamples(samples_per_shell));
    }
    if shell_radii.is_empty() || shell_radii.iter().any(|r| !(*r > 0.0)) {
        return Err(EquilibriaError::NoShells);
    }
    let wall = field.domain().wall_distance(point);
    let mut min_norm = f64::INFINITY;
    for &r in shell_radii {
        if r > wall {
            return Err(EquilibriaError::ShellExitsDomain {
                center: point.to_vec(),
                radius: r,
            });
        }
        for x in shell_points(point, r, samples_per_shell) {
            let g = norm(&field.gradient(&x)?);
            if g <= grad_floor {
                return Ok(Isolation::NotIsolated {
                    witness: x,
                    radius: r,
                    grad_norm: g,
                });
            }
            min_norm = min_norm.min(g);
        }
    }
    if min_norm <= 10.0 * grad_floor {
        Ok(Isolation::Inconclusive {
            min_grad_norm: min_norm,
        })
    } else {
        Ok(Isolation::IsolatedEvidence {
            min_grad_norm: min_norm,
        })
    }
}

/// Box–Muller standard normal.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::BoxDomain;

    fn ex31() -> ScalarField {
        ScalarField::parse(
            "96*x2 - 84*x2^2 + 28*x2^3 - 3*x2^4 - 10*(x1-2)^2",
            BoxDomain::new(&[(-1.0, 5.0), (-1.0, 6.0)]).unwrap(),
        )
        .unwrap()
    }

    fn quadratic() -> ScalarField {
        ScalarField::parse("4 - (x1-1)^2 - (x2-1)^2", BoxDomain::cube(2, -1.0, 3.0).unwrap()).unwrap()
    }

    #[test]
    fn classification_rules() {
        assert_eq!(classify(&[-36.0, -20.0], 41.0, 1e-7), Classification::IsolatedLocalMax);
        assert_eq!(classify(&[-20.0, 24.0], 31.0, 1e-7), Classification::Saddle);
        assert_eq!(classify(&[1.0, 2.0], 2.2, 1e-7), Classification::LocalMin);
        assert_eq!(classify(&[-6.0, 1e-15], 6.0, 1e-7), Classification::Degenerate);
        assert_eq!(classify(&[0.0, 0.0], 0.0, 1e-7), Classification::Degenerate);
    }

    #[test]
    fn example_3_1_critical_set() {
        let set = find_critical_points(&ex31(), 20, 1e-10, 100).unwrap();
        let expected = [
            ([2.0, 1.0], 37.0, Classification::IsolatedLocalMax),
            ([2.0, 2.0], 32.0, Classification::Saddle),
            ([2.0, 4.0], 64.0, Classification::IsolatedLocalMax),
        ];
        assert_eq!(set.points.len(), 3, "{:?}", set.points);
        for (p, (loc, val, class)) in set.points.iter().zip(expected) {
            assert!(dist(&p.location, &loc) < 1e-8);
            assert!((p.value - val).abs() < 1e-9);
            assert_eq!(p.classification, class);
            assert!(p.isolation.is_isolated());
        }
    }

    #[test]
    fn example_2_1_field_has_one_max() {
        let f = ScalarField::parse("4 - (x1-1)^2 - (x2-1)^2", BoxDomain::cube(2, -1.0, 3.0).unwrap()).unwrap();
        let set = find_critical_points(&f, 20, 1e-10, 100).unwrap();
        assert_eq!(set.points.len(), 1);
        assert!(dist(&set.points[0].location, &[1.0, 1.0]) < 1e-12);
        assert_eq!(set.points[0].classification, Classification::IsolatedLocalMax);
    }

    #[test]
    fn linear_field_has_none() {
        let f = ScalarField::parse("x1 + x2", BoxDomain::cube(2, 0.0, 1.0).unwrap()).unwrap();
        let set = find_critical_points(&f, 20, 1e-10, 50).unwrap();
        assert!(set.points.is_empty());
        assert_eq!(set.non_converged, set.seeds);
    }

    #[test]
    fn isolation_of_quadratic_max() {
        let f = quadratic();
        match isolation_probe(&f, &[1.0, 1.0], &[0.5, 0.1, 0.01], 64).unwrap() {
            Isolation::IsolatedEvidence { min_grad_norm } => {
                // |∇f| = 2r on shell r
                assert!((min_grad_norm - 0.02).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn isolation_detects_critical_circle() {
        // f = -(r² - 1/4)², whose gradient vanishes on r = 1/2
        let f = ScalarField::parse("-(x1^2 + x2^2 - 0.25)^2", BoxDomain::cube(2, -1.0, 1.0).unwrap()).unwrap();
        match isolation_probe(&f, &[0.0, 0.0], &[0.5], 16).unwrap() {
            Isolation::NotIsolated { witness, radius, .. } => {
                assert_eq!(radius, 0.5);
                assert!((norm(&witness) - 0.5).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn isolation_probe_errors() {
        let f = quadratic();
        assert!(matches!(
            isolation_probe(&f, &[1.0, 1.0], &[0.5], 4),
            Err(EquilibriaError::TooFewSamples(4))
        ));
        assert!(matches!(
            isolation_probe(&f, &[1.0, 1.0], &[3.0], 8),
            Err(EquilibriaError::ShellExitsDomain { .. })
        ));
        assert!(matches!(
            isolation_probe(&f, &[1.0, 1.0], &[], 8),
            Err(EquilibriaError::NoShells)
        ));
    }

    #[test]
    fn shells_are_dyadic_and_bounded() {
        let f = ex31();
        let set = find_critical_points(&f, 20, 1e-10, 100).unwrap();
        let shells = default_shells(&f, &[2.0, 1.0], &set.points, 4);
        // saddle at distance 1 caps r0 at 0.5
        assert_eq!(shells, vec![0.5, 0.25, 0.125, 0.0625]);
    }

    #[test]
    fn three_d_shell_points_lie_on_sphere() {
        let pts = shell_points(&[1.0, 2.0, 3.0], 0.25, 32);
        assert_eq!(pts.len(), 32);
        for p in pts {
            assert!((dist(&p, &[1.0, 2.0, 3.0]) - 0.25).abs() < 1e-14);
        }
    }
}
