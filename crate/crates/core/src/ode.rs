//! Adaptive Dormand–Prince 5(4) integration of `x' = P(t)∇f(x)` and the
//! Lyapunov trace `V(x) = f(x̄) − f(x)` along its solutions.

use thiserror::Error;

use crate::field::{FieldError, System};
use crate::linalg::eigen_smallest;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("initial point {0:?} is outside the domain")]
    StartOutsideDomain(Vec<f64>),
    #[error("invalid time span [{t0}, {t_end}]")]
    BadTimeSpan { t0: f64, t_end: f64 },
    #[error("invalid options: {0}")]
    BadOptions(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Initial step; estimated from the local derivative scale when `None`.
    pub h_init: Option<f64>,
    pub h_min: f64,
    /// Defaults to `(t_end − t0)/10`.
    pub h_max: Option<f64>,
    pub convergence_radius: f64,
    /// Candidate equilibria; the trajectory stops once it settles on one.
    pub targets: Vec<Vec<f64>>,
    /// `|P(t)∇f(x)|` must also fall below this before convergence is declared.
    pub rhs_floor: f64,
    pub max_steps: usize,
    /// Cap on `h·ρ`, with `ρ` the local Jacobian scale estimated from the last
    /// two stages; `0` disables the cap. Below about 1.03 every stage of a
    /// linearly decaying mode keeps its sign, so trajectories neither oscillate
    /// around an attracting equilibrium nor step across a critical set.
    pub stability_factor: f64,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            h_init: None,
            h_min: 1e-12,
            h_max: None,
            convergence_radius: 1e-6,
            targets: Vec::new(),
            rhs_floor: 1e-10,
            max_steps: 2_000_000,
            stability_factor: 0.9,
        }
    }
}

impl SimulateOptions {
    pub fn with_target(mut self, target: Vec<f64>, radius: f64) -> Self {
        self.targets = vec![target];
        self.convergence_radius = radius;
        self
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    ReachedEnd,
    /// Settled on `targets[target]` at `time`.
    Converged {
        target: usize,
        time: f64,
    },
    /// The last sample is the first point found outside the domain.
    LeftDomain {
        exit: Vec<f64>,
    },
    StepFailure {
        time: f64,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
}

/// Continuous extension of one accepted step.
#[derive(Debug, Clone, PartialEq)]
struct DenseSegment {
    t: f64,
    h: f64,
    /// Five coefficient vectors of length n, concatenated.
    coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub samples: Vec<Sample>,
    pub status: Status,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    dense: Vec<DenseSegment>,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least the initial sample")
    }

    pub fn final_time(&self) -> f64 {
        self.last().t
    }

    /// Step sizes between consecutive samples.
    pub fn step_sizes(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.windows(2).map(|w| w[1].t - w[0].t)
    }

    /// State at `t` from the 4th-order continuous extension; `None` outside
    /// the integrated span.
    pub fn state_at(&self, t: f64) -> Option<Vec<f64>> {
        let first = self.samples.first()?;
        if t == first.t {
            return Some(first.x.clone());
        }
        let idx = self.dense.partition_point(|s| s.t + s.h < t);
        let seg = self.dense.get(idx)?;
        if t < seg.t || t > seg.t + seg.h {
            return None;
        }
        let n = seg.coeffs.len() / 5;
        let theta = (t - seg.t) / seg.h;
        let theta1 = 1.0 - theta;
        let c = |k: usize, i: usize| seg.coeffs[k * n + i];
        Some(
            (0..n)
                .map(|i| c(0, i) + theta * (c(1, i) + theta1 * (c(2, i) + theta * (c(3, i) + theta1 * c(4, i)))))
                .collect(),
        )
    }

    /// States at each requested time that lies in the integrated span.
    pub fn checkpoints(&self, times: &[f64]) -> Vec<(f64, Vec<f64>)> {
        times.iter().filter_map(|&t| self.state_at(t).map(|x| (t, x))).collect()
    }
}

/// Long-horizon checkpoints at which `x(t)` is reported.
pub const CHECKPOINT_TIMES: [f64; 4] = [10.0, 100.0, 1000.0, 10000.0];

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// error coefficients: 5th-order minus embedded 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// dense output
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// PI controller (Gustafsson), as in Hairer's DOPRI5.
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
/// Consecutive step halvings tolerated when a stage leaves the domain.
const DOMAIN_RETRIES: usize = 12;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn axpy(y: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = y.to_vec();
    for (c, k) in terms {
        let s = h * c;
        for (o, v) in out.iter_mut().zip(k.iter()) {
            *o += s * v;
        }
    }
    out
}

struct Stepper<'a> {
    system: &'a System,
}

struct StepResult {
    y_new: Vec<f64>,
    k7: Vec<f64>,
    err: f64,
    dense: Vec<f64>,
    /// `|k7 − k6| / |y7 − y6|`; both stages sit at `t + h`.
    stiffness: Option<f64>,
}

enum StageFailure {
    Domain(Vec<f64>),
}

impl<'a> Stepper<'a> {
    fn f(&self, t: f64, y: &[f64]) -> Result<Vec<f64>, StageFailure> {
        self.system.rhs(t, y).map_err(|_| StageFailure::Domain(y.to_vec()))
    }

    fn step(&self, t: f64, y: &[f64], k1: &[f64], h: f64, opts: &SimulateOptions) -> Result<StepResult, StageFailure> {
        let y2 = axpy(y, h, &[(A21, k1)]);
        let k2 = self.f(t + C2 * h, &y2)?;
        let y3 = axpy(y, h, &[(A31, k1), (A32, &k2)]);
        let k3 = self.f(t + C3 * h, &y3)?;
        let y4 = axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]);
        let k4 = self.f(t + C4 * h, &y4)?;
        let y5 = axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        let k5 = self.f(t + C5 * h, &y5)?;
        let y6 = axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        let k6 = self.f(t + h, &y6)?;
        let y_new = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = self.f(t + h, &y_new)?;

        let n = y.len();
        let mut err_sq = 0.0;
        for i in 0..n {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(y_new[i].abs());
            err_sq += (e / sc) * (e / sc);
        }
        let err = (err_sq / n as f64).sqrt();

        let mut dense = vec![0.0; 5 * n];
        for i in 0..n {
            let ydiff = y_new[i] - y[i];
            let bspl = h * k1[i] - ydiff;
            dense[i] = y[i];
            dense[n + i] = ydiff;
            dense[2 * n + i] = bspl;
            dense[3 * n + i] = ydiff - h * k7[i] - bspl;
            dense[4 * n + i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        let num = dist(&k7, &k6);
        let den = dist(&y_new, &y6);
        let scale = 1.0 + norm(&y_new);
        let stiffness = (den > 1e3 * f64::EPSILON * scale).then(|| num / den);
        Ok(StepResult {
            y_new,
            k7,
            err,
            dense,
            stiffness,
        })
    }
}

/// Initial step from the derivative scale (Hairer, Nørsett & Wanner, II.4).
fn initial_step(system: &System, t0: f64, y0: &[f64], f0: &[f64], opts: &SimulateOptions, h_max: f64) -> f64 {
    let sc: Vec<f64> = y0.iter().map(|y| opts.abs_tol + opts.rel_tol * y.abs()).collect();
    let rms = |v: &[f64]| (v.iter().zip(&sc).map(|(a, s)| (a / s) * (a / s)).sum::<f64>() / v.len() as f64).sqrt();
    let d0 = rms(y0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(h_max);
    let y1 = axpy(y0, h0, &[(1.0, f0)]);
    let h1 = match system.rhs(t0 + h0, &y1) {
        Ok(f1) => {
            let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
            let d2 = rms(&diff) / h0;
            let m = d1.max(d2);
            if m <= 1e-15 {
                (h0 * 1e-3).max(1e-6)
            } else {
                (0.01 / m).powf(0.2)
            }
        }
        Err(_) => h0,
    };
    (100.0 * h0).min(h1).min(h_max).max(opts.h_min)
}

/// Integrates the system from `(t0, x0)` to `t_end`.
pub fn simulate(
    system: &System,
    x0: &[f64],
    t0: f64,
    t_end: f64,
    opts: &SimulateOptions,
) -> Result<Trajectory, OdeError> {
    if !(t0 >= 0.0 && t0 < t_end && t_end.is_finite()) {
        return Err(OdeError::BadTimeSpan { t0, t_end });
    }
    if !(opts.rel_tol > 0.0 && opts.abs_tol > 0.0 && opts.h_min > 0.0) {
        return Err(OdeError::BadOptions("tolerances and h_min must be positive".into()));
    }
    if x0.len() != system.dim() || !system.field().domain().contains(x0) {
        return Err(OdeError::StartOutsideDomain(x0.to_vec()));
    }
    let h_max = opts.h_max.unwrap_or((t_end - t0) / 10.0);
    if h_max < opts.h_min {
        return Err(OdeError::BadOptions("h_max is below h_min".into()));
    }
    let stepper = Stepper { system };
    let mut traj = Trajectory {
        t0,
        samples: vec![Sample { t: t0, x: x0.to_vec() }],
        status: Status::ReachedEnd,
        accepted_steps: 0,
        rejected_steps: 0,
        dense: Vec::new(),
    };

    let mut k1 = match system.rhs(t0, x0) {
        Ok(k) => k,
        Err(_) => {
            traj.status = Status::LeftDomain { exit: x0.to_vec() };
            return Ok(traj);
        }
    };
    if let Some(target) = converged(opts, x0, &k1) {
        traj.status = Status::Converged { target, time: t0 };
        return Ok(traj);
    }

    let mut t = t0;
    let mut y = x0.to_vec();
    let mut h = opts
        .h_init
        .unwrap_or_else(|| initial_step(system, t0, x0, &k1, opts, h_max))
        .clamp(opts.h_min, h_max);
    let mut fac_old = 1e-4_f64;
    let mut last_rejected = false;
    let mut domain_retries = 0;
    // last usable stiffness estimate; held while the estimate drowns in round-off
    let mut rho = 0.0_f64;

    loop {
        if traj.accepted_steps + traj.rejected_steps >= opts.max_steps {
            traj.status = Status::StepFailure {
                time: t,
                reason: format!("step budget of {} exhausted", opts.max_steps),
            };
            return Ok(traj);
        }
        let remaining = t_end - t;
        let last = h >= remaining;
        let h_try = if last { remaining } else { h };

        let result = match stepper.step(t, &y, &k1, h_try, opts) {
            Ok(r) => r,
            Err(StageFailure::Domain(point)) => {
                traj.rejected_steps += 1;
                domain_retries += 1;
                if domain_retries > DOMAIN_RETRIES || h_try * 0.5 < opts.h_min {
                    traj.samples.push(Sample {
                        t: t + h_try,
                        x: point.clone(),
                    });
                    traj.status = Status::LeftDomain { exit: point };
                    return Ok(traj);
                }
                h = h_try * 0.5;
                last_rejected = true;
                continue;
            }
        };

        if !result.err.is_finite() {
            traj.rejected_steps += 1;
            if h_try * 0.5 < opts.h_min {
                traj.status = Status::StepFailure {
                    time: t,
                    reason: "non-finite error estimate".into(),
                };
                return Ok(traj);
            }
            h = h_try * 0.5;
            last_rejected = true;
            continue;
        }

        let err = result.err;
        let fac11 = err.powf(EXPO1);
        if err <= 1.0 {
            domain_retries = 0;
            let fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            fac_old = err.max(1e-4);
            let mut h_new = (h_try / fac).min(h_max);
            if last_rejected {
                h_new = h_new.min(h_try);
            }
            if let Some(estimate) = result.stiffness {
                rho = estimate;
            }
            if rho > 0.0 && opts.stability_factor > 0.0 {
                h_new = h_new.min(opts.stability_factor / rho);
            }
            last_rejected = false;

            let t_new = if last { t_end } else { t + h_try };
            traj.accepted_steps += 1;
            traj.dense.push(DenseSegment {
                t,
                h: h_try,
                coeffs: result.dense,
            });
            if !system.field().domain().contains(&result.y_new) {
                traj.samples.push(Sample {
                    t: t_new,
                    x: result.y_new.clone(),
                });
                traj.status = Status::LeftDomain { exit: result.y_new };
                return Ok(traj);
            }
            traj.samples.push(Sample {
                t: t_new,
                x: result.y_new.clone(),
            });
            t = t_new;
            y = result.y_new;
            k1 = result.k7;
            if let Some(target) = converged(opts, &y, &k1) {
                traj.status = Status::Converged { target, time: t };
                return Ok(traj);
            }
            if last {
                traj.status = Status::ReachedEnd;
                return Ok(traj);
            }
            h = h_new.max(opts.h_min);
        } else {
            traj.rejected_steps += 1;
            if h_try <= opts.h_min {
                traj.status = Status::StepFailure {
                    time: t,
                    reason: format!("error {err:.3e} not reducible at h_min"),
                };
                return Ok(traj);
            }
            let fac = (fac11 / SAFETY).min(1.0 / FAC_MIN);
            h = (h_try / fac).max(opts.h_min);
            last_rejected = true;
        }
    }
}

fn converged(opts: &SimulateOptions, x: &[f64], rhs: &[f64]) -> Option<usize> {
    if opts.targets.is_empty() || norm(rhs) >= opts.rhs_floor {
        return None;
    }
    opts.targets
        .iter()
        .position(|target| dist(target, x) < opts.convergence_radius)
}

/// One row of the Lyapunov trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    /// `V_x(t) = f(x̄) − f(x(t))`.
    pub v: f64,
    /// `V'_x(t) = −(P(t)∇f)·∇f`, from the formula.
    pub v_dot: f64,
    pub lambda1: f64,
    pub grad_norm2: f64,
}

impl TraceRow {
    /// Slack in `V'_x ≤ −λ₁|∇f|²`; non-positive when the bound holds.
    pub fn bound_excess(&self) -> f64 {
        self.v_dot + self.lambda1 * self.grad_norm2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovTrace {
    pub anchor: Vec<f64>,
    /// `M = f(x̄)`.
    pub peak: f64,
    pub rows: Vec<TraceRow>,
}

impl LyapunovTrace {
    /// Largest increase of `V_x` between consecutive rows (≤ 0 for monotone descent).
    pub fn max_increase(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| w[1].v - w[0].v)
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0)
    }

    /// Largest `V'_x + λ₁|∇f|²` over all rows.
    pub fn max_bound_excess(&self) -> f64 {
        self.rows
            .iter()
            .map(TraceRow::bound_excess)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Evaluates `V = f(x̄) − f` and its trajectory derivative at every sample.
///
/// The final sample of a trajectory that left the domain is skipped.
pub fn lyapunov_trace(system: &System, traj: &Trajectory, anchor: &[f64]) -> Result<LyapunovTrace, FieldError> {
    let field = system.field();
    let peak = field.value(anchor)?;
    let samples = match traj.status {
        Status::LeftDomain { .. } => &traj.samples[..traj.samples.len() - 1],
        _ => &traj.samples[..],
    };
    let mut rows = Vec::with_capacity(samples.len());
    for s in samples {
        let value = field.value(&s.x)?;
        let g = field.gradient(&s.x)?;
        let p = system.matrix().at(s.t)?;
        let pg = p.mul_vec(&g);
        let v_dot = -pg.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        rows.push(TraceRow {
            t: s.t,
            v: peak - value,
            v_dot,
            lambda1: eigen_smallest(&p)?,
            grad_norm2: g.iter().map(|a| a * a).sum(),
        });
    }
    Ok(LyapunovTrace {
        anchor: anchor.to_vec(),
        peak,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{BoxDomain, MatrixPath, ScalarField};

    fn ex21() -> System {
        let field = ScalarField::parse("4 - (x1-1)^2 - (x2-1)^2", BoxDomain::cube(2, -3.0, 5.0).unwrap()).unwrap();
        System::new(field, MatrixPath::diagonal(&["(t+1)^-2", "(t+1)^-1"]).unwrap()).unwrap()
    }

    fn closed_form(t: f64) -> [f64; 2] {
        [
            1.0 + (-2.0f64).exp() * (2.0 / (t + 1.0)).exp(),
            1.0 + (t + 1.0).powi(-2),
        ]
    }

    #[test]
    fn matches_closed_form_on_samples_and_dense_output() {
        let traj = simulate(&ex21(), &[2.0, 2.0], 0.0, 100.0, &SimulateOptions::default()).unwrap();
        assert_eq!(traj.status, Status::ReachedEnd);
        for s in &traj.samples {
            let e = closed_form(s.t);
            assert!((s.x[0] - e[0]).abs() < 1e-6 && (s.x[1] - e[1]).abs() < 1e-6);
        }
        for k in 0..=1000 {
            let t = 0.1 * k as f64;
            let x = traj.state_at(t).unwrap();
            let e = closed_form(t);
            assert!((x[0] - e[0]).abs() < 1e-6, "t={t}");
            assert!((x[1] - e[1]).abs() < 1e-6, "t={t}");
        }
        assert!(traj.state_at(100.5).is_none());
    }

    #[test]
    fn steps_respect_bounds() {
        let opts = SimulateOptions::default();
        let traj = simulate(&ex21(), &[2.0, 2.0], 0.0, 100.0, &opts).unwrap();
        let n = traj.samples.len();
        for (i, h) in traj.step_sizes().enumerate() {
            assert!(h <= 10.0 + 1e-12);
            if i + 2 < n {
                assert!(h >= opts.h_min);
            }
            assert!(h > 0.0);
        }
    }

    #[test]
    fn equilibrium_start_is_converged() {
        let opts = SimulateOptions::default().with_target(vec![1.0, 1.0], 1e-6);
        let traj = simulate(&ex21(), &[1.0, 1.0], 0.0, 10.0, &opts).unwrap();
        assert_eq!(traj.status, Status::Converged { target: 0, time: 0.0 });

        // without a target the solution still stays put
        let traj = simulate(&ex21(), &[1.0, 1.0], 0.0, 10.0, &SimulateOptions::default()).unwrap();
        for s in &traj.samples {
            assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn leaves_domain() {
        let field = ScalarField::parse("x1", BoxDomain::cube(1, 0.0, 1.0).unwrap()).unwrap();
        let sys = System::new(field, MatrixPath::identity(1)).unwrap();
        let traj = simulate(&sys, &[0.5], 0.0, 10.0, &SimulateOptions::default()).unwrap();
        match &traj.status {
            Status::LeftDomain { exit } => assert!(exit[0] > 1.0),
            other => panic!("unexpected {other:?}"),
        }
        for s in &traj.samples[..traj.samples.len() - 1] {
            assert!(s.x[0] <= 1.0);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let sys = ex21();
        let o = SimulateOptions::default();
        assert!(matches!(
            simulate(&sys, &[9.0, 0.0], 0.0, 1.0, &o),
            Err(OdeError::StartOutsideDomain(_))
        ));
        assert!(matches!(
            simulate(&sys, &[0.0, 0.0], 1.0, 1.0, &o),
            Err(OdeError::BadTimeSpan { .. })
        ));
        assert!(matches!(
            simulate(&sys, &[0.0, 0.0], -1.0, 1.0, &o),
            Err(OdeError::BadTimeSpan { .. })
        ));
    }

    #[test]
    fn trace_examples() {
        let sys = ex21();
        let traj = simulate(&sys, &[2.0, 2.0], 0.0, 5.0, &SimulateOptions::default()).unwrap();
        let trace = lyapunov_trace(&sys, &traj, &[1.0, 1.0]).unwrap();
        let first = trace.rows[0];
        assert_eq!(first.v, 2.0);
        assert_eq!(first.v_dot, -8.0);
        assert_eq!(first.lambda1, 1.0);
        assert_eq!(first.grad_norm2, 8.0);
        assert!(trace.max_increase() <= 1e-7);
        assert!(trace.max_bound_excess() <= 1e-10);

        let still = simulate(&sys, &[1.0, 1.0], 0.0, 1.0, &SimulateOptions::default()).unwrap();
        let trace = lyapunov_trace(&sys, &still, &[1.0, 1.0]).unwrap();
        assert!(trace.rows.iter().all(|r| r.v == 0.0 && r.v_dot == 0.0));
    }
}
