//! Stability verdicts for an equilibrium of `x' = P(t)∇f(x)`.
//!
//! Three hypotheses are checked:
//!
//! * H1: `x̄` is an isolated local maximum of `f` (Hessian sign pattern plus a
//!   direct comparison of `f` on two shells around `x̄`);
//! * H2: `x̄` is an isolated critical point (sampled, see [`Isolation`]);
//! * H3: the eigenvalue condition `∫₀^∞ λ₁(P(t)) dt = ∞` (graded verdict from a
//!   finite horizon, see [`ec_check`]).
//!
//! H1 alone gives uniform stability; H1, H2 and H3 together give uniform
//! asymptotic stability. Uniformity in the starting time holds in principle;
//! the descent checks only spot-check it at `t0 ∈ {0, 1, 10}`.

use rayon::prelude::*;
use thiserror::Error;

use crate::equilibria::{
    default_shells, isolation_probe_with, shell_points, Classification, CriticalPoint, EquilibriaError, FinderOptions,
    Isolation,
};
use crate::field::{FieldError, MatrixPath, System};
use crate::linalg::{try_integrate_adaptive, LinalgError};
use crate::ode::{lyapunov_trace, simulate, OdeError, SimulateOptions, Status};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("eigenvalue-condition horizon must be at least 100, got {0}")]
    HorizonTooShort(f64),
    #[error("quadrature tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("quadrature of λ₁ failed: {0}")]
    Quadrature(LinalgError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Equilibria(#[from] EquilibriaError),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

impl From<LinalgError> for StabilityError {
    fn from(e: LinalgError) -> Self {
        StabilityError::Quadrature(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcKind {
    DivergentLikely,
    ConvergentLikely,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcVerdict {
    pub kind: EcKind,
    /// `I(T) = ∫₀ᵀ max(λ₁, 0) dt`.
    pub horizon_integral: f64,
    pub horizon: f64,
    /// `I(T) − I(T/2)`.
    pub tail_increment: f64,
    /// Fitted `p` in `λ₁ ≈ C·t⁻ᵖ` over `[T/10, T]`; `None` when λ₁ vanishes there.
    pub tail_exponent: Option<f64>,
    /// True if negative λ₁ values were clipped to zero.
    pub clipped: bool,
    pub evidence: String,
}

/// Dead-band around the borderline exponent `p = 1`.
pub const EXPONENT_BAND: f64 = 0.05;
/// Relative growth of `I` over `[T/2, T]` that counts as divergence.
pub const GROWTH_THRESHOLD: f64 = 0.05;
const FIT_POINTS: usize = 32;

/// Numerical verdict on `∫₀^∞ λ₁(P(t)) dt = ∞` from the horizon `[0, T]`.
///
/// * `DivergentLikely` if the fitted tail exponent is `≤ 0.95`, or if `I` grew
///   by at least 5% over `[T/2, T]` while `λ₁(T)` is still at least 1% of the
///   mean rate over that window.
/// * `ConvergentLikely` if the exponent is `≥ 1.05` and the growth test did
///   not fire, or if `λ₁` vanishes on the tail and `I(T) − I(T/2) ≤ 10·quad_tol`.
/// * `Inconclusive` otherwise.
pub fn ec_check(matrix: &MatrixPath, horizon: f64, quad_tol: f64) -> Result<EcVerdict, StabilityError> {
    if !(horizon >= 100.0) || !horizon.is_finite() {
        return Err(StabilityError::HorizonTooShort(horizon));
    }
    if !(quad_tol > 0.0) {
        return Err(StabilityError::BadTolerance(quad_tol));
    }
    let clipped = std::sync::atomic::AtomicBool::new(false);
    let lambda = |t: f64| -> Result<f64, StabilityError> {
        let l = matrix.lambda_min(t)?;
        if l < 0.0 {
            clipped.store(true, std::sync::atomic::Ordering::Relaxed);
            return Ok(0.0);
        }
        Ok(l)
    };
    let half = 0.5 * horizon;
    let head = try_integrate_adaptive(lambda, 0.0, half, 0.5 * quad_tol)?;
    let tail = try_integrate_adaptive(lambda, half, horizon, 0.5 * quad_tol)?;
    let total = head + tail;

    let mut fit = Vec::with_capacity(FIT_POINTS);
    for k in 0..FIT_POINTS {
        let t = horizon * 10f64.powf(-1.0 + k as f64 / (FIT_POINTS - 1) as f64);
        let l = lambda(t)?;
        if l > 0.0 {
            fit.push((t.ln(), l.ln()));
        }
    }
    let exponent = if fit.len() >= FIT_POINTS / 2 {
        Some(-slope(&fit))
    } else {
        None
    };
    let end_rate = lambda(horizon)?;
    let mean_rate = tail / half;
    let growth = if total > 0.0 { tail / total } else { 0.0 };
    let growth_fires = growth >= GROWTH_THRESHOLD && end_rate >= 0.01 * mean_rate;

    let (kind, why) = match exponent {
        None if tail <= 10.0 * quad_tol => (EcKind::ConvergentLikely, "λ₁ vanishes on the tail".to_string()),
        None => (
            EcKind::Inconclusive,
            "λ₁ vanishes at the tail samples but the tail integral does not".to_string(),
        ),
        Some(p) if p <= 1.0 - EXPONENT_BAND => (
            EcKind::DivergentLikely,
            format!("tail exponent {p:.4} ≤ {}", 1.0 - EXPONENT_BAND),
        ),
        Some(_) if growth_fires => (
            EcKind::DivergentLikely,
            format!(
                "I grew by {:.2}% over [T/2, T] with λ₁(T) = {end_rate:.3e}",
                100.0 * growth
            ),
        ),
        Some(p) if p >= 1.0 + EXPONENT_BAND => (
            EcKind::ConvergentLikely,
            format!(
                "tail exponent {p:.4} ≥ {} and I grew by only {:.2}% over [T/2, T]",
                1.0 + EXPONENT_BAND,
                100.0 * growth
            ),
        ),
        Some(p) => (
            EcKind::Inconclusive,
            format!("tail exponent {p:.4} inside the dead-band around 1"),
        ),
    };
    let clipped = clipped.into_inner();
    let mut evidence = format!("I({horizon:e}) = {total:.6e}, I(T) - I(T/2) = {tail:.6e}; {why}");
    if clipped {
        evidence.push_str("; negative λ₁ values were clipped to 0");
    }
    Ok(EcVerdict {
        kind,
        horizon_integral: total,
        horizon,
        tail_increment: tail,
        tail_exponent: exponent,
        clipped,
        evidence,
    })
}

/// Least-squares slope of `y` against `x`.
fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conclusion {
    UniformlyAsymptoticallyStable,
    UniformlyStable,
    NoCertificate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct H1Verdict {
    pub passed: bool,
    pub classification: Classification,
    /// Outer and inner probe radii `r` and `r/4`.
    pub probe_radii: [f64; 2],
    /// Largest `f` among the probe points; must stay below `f(x̄)`.
    pub max_probe_value: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentRun {
    pub start: Vec<f64>,
    pub t0: f64,
    pub status: Status,
    pub samples: usize,
    pub max_increase: f64,
    pub max_bound_excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentSummary {
    pub radius: f64,
    pub runs: Vec<DescentRun>,
    pub max_increase: f64,
    pub max_bound_excess: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub equilibrium: CriticalPoint,
    pub h1: H1Verdict,
    pub h2: Isolation,
    pub h3: EcVerdict,
    pub descent: DescentSummary,
    pub conclusion: Conclusion,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyOptions {
    /// Isolation-probe and classification knobs.
    pub finder: FinderOptions,
    pub ec_horizon: f64,
    pub quad_tol: f64,
    /// Points per shell in the local-max confirmation.
    pub probe_points: usize,
    pub descent_trajectories: usize,
    /// Length of each descent trajectory.
    pub descent_span: f64,
    pub descent_start_times: Vec<f64>,
    /// Allowed increase of `V` between samples.
    pub descent_monotone_tol: f64,
    /// Allowed excess in `V' ≤ −λ₁|∇f|²`.
    pub descent_bound_tol: f64,
    pub simulate: SimulateOptions,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            finder: FinderOptions::default(),
            ec_horizon: 1e4,
            quad_tol: 1e-10,
            probe_points: 16,
            descent_trajectories: 8,
            descent_span: 20.0,
            descent_start_times: vec![0.0, 1.0, 10.0],
            descent_monotone_tol: 1e-7,
            descent_bound_tol: 1e-10,
            simulate: SimulateOptions::default(),
        }
    }
}

/// Certifies every point of `points`, computing the eigenvalue condition once.
pub fn certify_all(
    system: &System,
    points: &[CriticalPoint],
    opts: &CertifyOptions,
) -> Result<Vec<StabilityReport>, StabilityError> {
    let ec = ec_check(system.matrix(), opts.ec_horizon, opts.quad_tol)?;
    points
        .iter()
        .map(|p| certify_with_ec(system, p, points, &ec, opts))
        .collect()
}

/// Certifies one equilibrium. `others` are the remaining known critical
/// points; they bound the probe radii.
pub fn certify(
    system: &System,
    point: &CriticalPoint,
    others: &[CriticalPoint],
    opts: &CertifyOptions,
) -> Result<StabilityReport, StabilityError> {
    let ec = ec_check(system.matrix(), opts.ec_horizon, opts.quad_tol)?;
    certify_with_ec(system, point, others, &ec, opts)
}

fn certify_with_ec(
    system: &System,
    point: &CriticalPoint,
    others: &[CriticalPoint],
    ec: &EcVerdict,
    opts: &CertifyOptions,
) -> Result<StabilityReport, StabilityError> {
    let field = system.field();
    let x = &point.location;
    let mut notes = Vec::new();
    let shells = default_shells(field, x, others, opts.finder.shell_count.max(1));
    let Some(&r0) = shells.first() else {
        notes.push("equilibrium lies on the box wall; no probe shell fits".into());
        return Ok(StabilityReport {
            equilibrium: point.clone(),
            h1: H1Verdict {
                passed: false,
                classification: point.classification,
                probe_radii: [0.0, 0.0],
                max_probe_value: f64::NAN,
                reason: "no probe shell fits inside the box".into(),
            },
            h2: Isolation::Inconclusive {
                min_grad_norm: f64::NAN,
            },
            h3: ec.clone(),
            descent: DescentSummary {
                radius: 0.0,
                runs: Vec::new(),
                max_increase: f64::NAN,
                max_bound_excess: f64::NAN,
                passed: false,
            },
            conclusion: Conclusion::NoCertificate,
            notes,
        });
    };

    let h1 = h1_check(system, point, r0, opts)?;
    let h2 = isolation_probe_with(field, x, &shells, opts.finder.samples_per_shell, opts.finder.grad_floor)?;
    let descent = descent_checks(system, x, 0.5 * r0, opts)?;

    let conclusion = if !h1.passed {
        Conclusion::NoCertificate
    } else if !descent.passed {
        notes.push("a descent trajectory violated the Lyapunov checks; no certificate issued".into());
        Conclusion::NoCertificate
    } else if h2.is_isolated() && ec.kind == EcKind::DivergentLikely {
        Conclusion::UniformlyAsymptoticallyStable
    } else {
        Conclusion::UniformlyStable
    };
    if h1.passed {
        if !h2.is_isolated() {
            notes.push("isolation not supported by the shell probe; asymptotic stability not certified".into());
        }
        if ec.kind != EcKind::DivergentLikely {
            notes.push("eigenvalue condition not supported; asymptotic stability not certified".into());
        }
    }
    notes.push(format!(
        "uniformity in t0 spot-checked at t0 ∈ {:?} only",
        opts.descent_start_times
    ));
    Ok(StabilityReport {
        equilibrium: point.clone(),
        h1,
        h2,
        h3: ec.clone(),
        descent,
        conclusion,
        notes,
    })
}

fn h1_check(
    system: &System,
    point: &CriticalPoint,
    r: f64,
    opts: &CertifyOptions,
) -> Result<H1Verdict, StabilityError> {
    let field = system.field();
    let x = &point.location;
    let peak = field.value(x)?;
    let radii = [r, 0.25 * r];
    let mut max_probe = f64::NEG_INFINITY;
    for radius in radii {
        for p in shell_points(x, radius, opts.probe_points) {
            max_probe = max_probe.max(field.value(&p)?);
        }
    }
    let hnorm = point.hessian_spectrum.iter().map(|l| l * l).sum::<f64>().sqrt();
    let nsd = point
        .hessian_spectrum
        .iter()
        .all(|&l| l <= opts.finder.degeneracy_tol * hnorm);
    let hessian_ok = match point.classification {
        Classification::IsolatedLocalMax => true,
        Classification::Degenerate => nsd,
        _ => false,
    };
    let probes_ok = max_probe < peak;
    let reason = match (hessian_ok, probes_ok) {
        (true, true) => format!("f < {peak} at every probe point"),
        (false, _) => format!("Hessian pattern {:?} is not a local maximum", point.classification),
        (true, false) => format!("probe value {max_probe} is not below f(x̄) = {peak}"),
    };
    Ok(H1Verdict {
        passed: hessian_ok && probes_ok,
        classification: point.classification,
        probe_radii: radii,
        max_probe_value: max_probe,
        reason,
    })
}

/// Simulates trajectories from a shell around `anchor` and checks that
/// `V = f(x̄) − f` never increases and `V' ≤ −λ₁|∇f|²` at every sample.
pub fn descent_checks(
    system: &System,
    anchor: &[f64],
    radius: f64,
    opts: &CertifyOptions,
) -> Result<DescentSummary, StabilityError> {
    let starts = shell_points(anchor, radius, opts.descent_trajectories.max(2));
    let starts: Vec<_> = starts.into_iter().take(opts.descent_trajectories).collect();
    let t0s = if opts.descent_start_times.is_empty() {
        vec![0.0]
    } else {
        opts.descent_start_times.clone()
    };
    let sim = opts
        .simulate
        .clone()
        .with_target(anchor.to_vec(), opts.simulate.convergence_radius);
    let runs: Result<Vec<DescentRun>, StabilityError> = starts
        .par_iter()
        .enumerate()
        .map(|(k, start)| {
            let t0 = t0s[k % t0s.len()];
            let traj = simulate(system, start, t0, t0 + opts.descent_span, &sim)?;
            let trace = lyapunov_trace(system, &traj, anchor)?;
            Ok(DescentRun {
                start: start.clone(),
                t0,
                status: traj.status.clone(),
                samples: trace.rows.len(),
                max_increase: trace.max_increase(),
                max_bound_excess: trace.max_bound_excess(),
            })
        })
        .collect();
    let runs = runs?;
    let max_increase = runs.iter().map(|r| r.max_increase).fold(0.0, f64::max);
    let max_bound_excess = runs
        .iter()
        .map(|r| r.max_bound_excess)
        .fold(f64::NEG_INFINITY, f64::max);
    let passed = !runs.is_empty()
        && max_increase <= opts.descent_monotone_tol
        && max_bound_excess <= opts.descent_bound_tol
        && runs.iter().all(|r| !matches!(r.status, Status::StepFailure { .. }));
    Ok(DescentSummary {
        radius,
        runs,
        max_increase,
        max_bound_excess,
        passed,
    })
}
