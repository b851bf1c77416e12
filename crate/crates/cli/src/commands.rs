use std::path::PathBuf;

use modgrad::basin::{check_hypotheses, extract_component, suggest_level, verify_basin, BasinError};
use modgrad::equilibria::{find_critical_points_with, Classification, CriticalPoint};
use modgrad::field::validate_h0;
use modgrad::gallery::GalleryId;
use modgrad::ode::{lyapunov_trace, simulate};
use modgrad::stability::{certify_all, ec_check, StabilityError};
use serde_json::{json, Value};

use crate::config::AnalysisConfig;
use crate::json;
use crate::output::{self, Outputs};
use crate::CliError;

pub struct Run {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub quiet: bool,
}

impl Run {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn finish(&self, outputs: Outputs) -> Result<(), CliError> {
        for path in outputs.write_all(&self.out_dir)? {
            self.say(format!("wrote {}", path.display()));
        }
        Ok(())
    }
}

fn numeric(e: impl std::fmt::Display) -> CliError {
    CliError::Numeric(e.to_string())
}

fn point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.6}")).collect();
    format!("({})", parts.join(", "))
}

/// Sampled PSD check of `P(t)`; failure is a configuration error.
fn require_h0(cfg: &AnalysisConfig) -> Result<Value, CliError> {
    let report = validate_h0(&cfg.system, &cfg.sample_times, cfg.psd_tol).map_err(numeric)?;
    if !report.passed {
        return Err(CliError::Config(format!(
            "H0 fails: P(t) is not positive semi-definite (min λ₁ = {:.6e} at {} of {} sample times, first t = {})",
            report.min_lambda1,
            report.violations.len(),
            report.samples.len(),
            report.violations[0]
        )));
    }
    Ok(json::h0(&report))
}

fn critical_points(cfg: &AnalysisConfig) -> Result<Vec<CriticalPoint>, CliError> {
    Ok(find_critical_points_with(cfg.system.field(), &cfg.finder)
        .map_err(numeric)?
        .points)
}

pub fn analyze(cfg: &AnalysisConfig, run: &Run) -> Result<(), CliError> {
    let h0 = require_h0(cfg)?;
    let set = find_critical_points_with(cfg.system.field(), &cfg.finder).map_err(numeric)?;
    let reports = certify_all(&cfg.system, &set.points, &cfg.certify).map_err(numeric)?;
    for r in &reports {
        let p = &r.equilibrium;
        run.say(format!(
            "{} f = {:.9} {}: {}",
            point(&p.location),
            p.value,
            json::classification(p.classification),
            json::conclusion(r.conclusion)
        ));
    }
    if reports.is_empty() {
        run.say("no critical points found in the box");
    }
    let mut outputs = Outputs::default();
    outputs.json(
        "report.json",
        &json!({
            "command": "analyze",
            "system": json::system(cfg),
            "h0": h0,
            "finder": { "seeds": set.seeds, "non_converged": set.non_converged },
            "equilibria": reports.iter().map(json::stability_report).collect::<Vec<_>>(),
        }),
    );
    run.finish(outputs)
}

pub struct SimulateArgs {
    pub x0: Vec<f64>,
    pub t0: f64,
    pub t_end: f64,
    pub anchor: Option<Vec<f64>>,
}

pub fn simulate_cmd(cfg: &AnalysisConfig, args: &SimulateArgs, run: &Run) -> Result<(), CliError> {
    let n = cfg.system.dim();
    if args.x0.len() != n {
        return Err(CliError::Config(format!(
            "--x0 needs {n} coordinates, got {}",
            args.x0.len()
        )));
    }
    if !(args.t0 >= 0.0 && args.t0 < args.t_end && args.t_end.is_finite()) {
        return Err(CliError::Config(format!(
            "need 0 ≤ t0 < t_end, got [{}, {}]",
            args.t0, args.t_end
        )));
    }
    if !cfg.system.field().domain().contains(&args.x0) {
        return Err(CliError::Config(format!(
            "--x0 {} lies outside the box",
            point(&args.x0)
        )));
    }
    if let Some(a) = &args.anchor {
        if a.len() != n || !cfg.system.field().domain().contains(a) {
            return Err(CliError::Config("--anchor must be a point of the box".into()));
        }
    }
    require_h0(cfg)?;
    let targets: Vec<Vec<f64>> = critical_points(cfg)?
        .into_iter()
        .filter(|p| p.classification != Classification::Degenerate)
        .map(|p| p.location)
        .collect();
    let opts = modgrad::SimulateOptions {
        targets: targets.clone(),
        ..cfg.simulate.clone()
    };
    let traj = simulate(&cfg.system, &args.x0, args.t0, args.t_end, &opts).map_err(numeric)?;
    let last = traj.last();
    let anchor = match (&args.anchor, &traj.status) {
        (Some(a), _) => a.clone(),
        (None, modgrad::Status::Converged { target, .. }) => targets[*target].clone(),
        (None, _) => targets
            .iter()
            .min_by(|a, b| dist(a, &last.x).total_cmp(&dist(b, &last.x)))
            .cloned()
            .unwrap_or_else(|| last.x.clone()),
    };
    let trace = lyapunov_trace(&cfg.system, &traj, &anchor).map_err(numeric)?;
    run.say(format!("status: {}", json::status_label(&traj.status)));
    run.say(format!("final: t = {} x = {}", last.t, point(&last.x)));
    run.say(format!(
        "steps: {} accepted, {} rejected; Lyapunov anchor {}: max V increase {:.3e}, max bound excess {:.3e}",
        traj.accepted_steps,
        traj.rejected_steps,
        point(&anchor),
        trace.max_increase(),
        trace.max_bound_excess()
    ));
    let mut outputs = Outputs::default();
    outputs.text("trajectory.csv", output::trajectory_csv(&traj));
    outputs.text("lyapunov.csv", output::lyapunov_csv(&trace));
    run.finish(outputs)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub struct BasinArgs {
    pub anchor: Vec<f64>,
    pub c: Option<f64>,
    pub resolution: Option<usize>,
    pub samples: Option<usize>,
    pub t_end: Option<f64>,
}

fn basin_error(e: BasinError) -> CliError {
    match e {
        BasinError::Field(_) | BasinError::Ode(_) => numeric(e),
        _ => CliError::Config(e.to_string()),
    }
}

pub fn basin(cfg: &AnalysisConfig, args: &BasinArgs, run: &Run) -> Result<(), CliError> {
    let n = cfg.system.dim();
    let field = cfg.system.field();
    if args.anchor.len() != n {
        return Err(CliError::Config(format!(
            "--anchor needs {n} coordinates, got {}",
            args.anchor.len()
        )));
    }
    if !field.domain().contains(&args.anchor) {
        return Err(CliError::Config(format!(
            "anchor {} is outside the box",
            point(&args.anchor)
        )));
    }
    let peak = field.value(&args.anchor).map_err(numeric)?;
    if let Some(c) = args.c {
        if !(c < peak) {
            return Err(CliError::Config(format!(
                "c must be below f(anchor): c = {c}, f(anchor) = {peak}"
            )));
        }
    }
    require_h0(cfg)?;
    let cps = critical_points(cfg)?;
    let (c, level_source) = match args.c {
        Some(c) => (c, json!({ "kind": "given" })),
        None => {
            let s = suggest_level(&cps, peak).ok_or_else(|| {
                CliError::Config("no saddle below f(anchor) to suggest a level from; pass --c".into())
            })?;
            run.say(format!(
                "heuristic level c = {} from the saddle {} (f = {})",
                s.c,
                point(&s.saddle),
                s.saddle_value
            ));
            (
                s.c,
                json!({ "kind": "heuristic", "saddle": json::vector(&s.saddle), "saddle_value": json::num(s.saddle_value) }),
            )
        }
    };
    let resolution = vec![args.resolution.unwrap_or(cfg.basin.resolution); n];
    let comp = extract_component(field, &args.anchor, c, &resolution).map_err(basin_error)?;
    let hyp = check_hypotheses(&comp, field, &cps, cfg.basin.tol_boundary);
    let samples = args.samples.unwrap_or(cfg.basin.samples);
    let t_end = args.t_end.unwrap_or(cfg.basin.t_end);
    let verification =
        verify_basin(&cfg.system, &comp, samples, t_end, cfg.basin.converge_radius, run.seed).map_err(basin_error)?;

    let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
    run.say(format!(
        "component at {} with c = {}: {} cells, volume {:.6}",
        point(&args.anchor),
        c,
        comp.masked_count(),
        comp.masked_volume()
    ));
    run.say(format!(
        "H4 {} ({} wall cells), H5 {} ({} of {} crossings off f = c), H6 {} ({} other critical points inside)",
        verdict(hyp.h4.passed),
        hyp.h4.witnesses.len(),
        verdict(hyp.h5.passed),
        hyp.h5.witnesses.len(),
        hyp.h5.checked,
        verdict(hyp.h6.passed),
        hyp.h6.witnesses.len()
    ));
    for w in &hyp.h6.witnesses {
        run.say(format!("  H6 witness {}", point(w)));
    }
    run.say(format!(
        "verification: {}/{} starts converged to the anchor by t = {t_end}",
        verification.converged_count, verification.sample_count
    ));

    let mut outputs = Outputs::default();
    if n == 2 {
        outputs.bytes("mask.pgm", output::mask_pgm(&comp));
    }
    outputs.text("cells.csv", output::cells_csv(&comp));
    outputs.text("boundary.csv", output::boundary_csv(&comp));
    outputs.json(
        "hypotheses.json",
        &json!({
            "command": "basin",
            "system": json::system(cfg),
            "component": json::component(&comp),
            "level": level_source,
            "critical_points": cps.iter().map(json::critical_point).collect::<Vec<_>>(),
            "hypotheses": json::hypotheses(&hyp),
        }),
    );
    let mut ver = json::verification(&verification);
    ver["seed"] = json!(run.seed);
    ver["t_end"] = json::num(t_end);
    ver["converge_radius"] = json::num(cfg.basin.converge_radius);
    outputs.json("verification.json", &ver);
    if n == 2 {
        outputs.text("basin.svg", output::basin_svg(&comp, &cps, &hyp.h6.witnesses));
    }
    run.finish(outputs)
}

pub fn ec(cfg: &AnalysisConfig, horizon: Option<f64>, run: &Run) -> Result<(), CliError> {
    let horizon = horizon.unwrap_or(cfg.certify.ec_horizon);
    let v = ec_check(cfg.system.matrix(), horizon, cfg.certify.quad_tol).map_err(|e| match e {
        StabilityError::HorizonTooShort(_) | StabilityError::BadTolerance(_) => CliError::Config(e.to_string()),
        _ => numeric(e),
    })?;
    run.say(format!("{}: {}", json::ec_kind(v.kind), v.evidence));
    match v.tail_exponent {
        Some(p) => run.say(format!(
            "I(T) = {:.9e} at T = {horizon:e}; fitted tail exponent {p:.6}",
            v.horizon_integral
        )),
        None => run.say(format!(
            "I(T) = {:.9e} at T = {horizon:e}; no tail exponent",
            v.horizon_integral
        )),
    }
    let mut outputs = Outputs::default();
    outputs.json(
        "ec.json",
        &json!({ "command": "ec", "system": json::system(cfg), "ec": json::ec(&v) }),
    );
    run.finish(outputs)
}

pub fn gallery_list() {
    for id in GalleryId::ALL {
        println!("{:<5} {}", id.as_str(), id.description());
    }
}
