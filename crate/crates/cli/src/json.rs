//! JSON views of the library's result types.
//!
//! Every float is written with 17 significant digits so identical runs give
//! byte-identical files. Non-finite values become `null`.

use std::str::FromStr;

use modgrad::basin::{BoundaryCrossing, CrossingKind, GridComponent, HypothesisReport};
use modgrad::equilibria::{Classification, CriticalPoint, Isolation};
use modgrad::field::{FieldSource, H0Report, System};
use modgrad::ode::Status;
use modgrad::stability::{Conclusion, DescentRun, EcKind, EcVerdict, StabilityReport};
use modgrad::BasinVerification;
use serde_json::{json, Map, Number, Value};

use crate::config::{AnalysisConfig, Source};

pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(Number::from_str(&format!("{x:.16e}")).expect("formatted float is valid JSON"))
    } else {
        Value::Null
    }
}

pub fn vector(xs: &[f64]) -> Value {
    Value::Array(xs.iter().copied().map(num).collect())
}

fn vectors(xs: &[Vec<f64>]) -> Value {
    Value::Array(xs.iter().map(|x| vector(x)).collect())
}

pub fn classification(c: Classification) -> &'static str {
    match c {
        Classification::IsolatedLocalMax => "IsolatedLocalMax",
        Classification::LocalMin => "LocalMin",
        Classification::Saddle => "Saddle",
        Classification::Degenerate => "Degenerate",
    }
}

pub fn conclusion(c: Conclusion) -> &'static str {
    match c {
        Conclusion::UniformlyAsymptoticallyStable => "UniformlyAsymptoticallyStable",
        Conclusion::UniformlyStable => "UniformlyStable",
        Conclusion::NoCertificate => "NoCertificate",
    }
}

pub fn ec_kind(k: EcKind) -> &'static str {
    match k {
        EcKind::DivergentLikely => "DivergentLikely",
        EcKind::ConvergentLikely => "ConvergentLikely",
        EcKind::Inconclusive => "Inconclusive",
    }
}

pub fn status(s: &Status) -> Value {
    match s {
        Status::ReachedEnd => json!({ "kind": "ReachedEnd" }),
        Status::Converged { target, time } => json!({ "kind": "Converged", "target": target, "time": num(*time) }),
        Status::LeftDomain { exit } => json!({ "kind": "LeftDomain", "exit": vector(exit) }),
        Status::StepFailure { time, reason } => json!({ "kind": "StepFailure", "time": num(*time), "reason": reason }),
    }
}

pub fn status_label(s: &Status) -> String {
    match s {
        Status::ReachedEnd => "ReachedEnd".into(),
        Status::Converged { time, .. } => format!("Converged at t = {time:.6}"),
        Status::LeftDomain { .. } => "LeftDomain".into(),
        Status::StepFailure { time, reason } => format!("StepFailure at t = {time:.6}: {reason}"),
    }
}

pub fn isolation(i: &Isolation) -> Value {
    match i {
        Isolation::IsolatedEvidence { min_grad_norm } => {
            json!({ "kind": "IsolatedEvidence", "min_grad_norm": num(*min_grad_norm) })
        }
        Isolation::NotIsolated {
            witness,
            radius,
            grad_norm,
        } => json!({
            "kind": "NotIsolated",
            "witness": vector(witness),
            "radius": num(*radius),
            "grad_norm": num(*grad_norm),
        }),
        Isolation::Inconclusive { min_grad_norm } => {
            json!({ "kind": "Inconclusive", "min_grad_norm": num(*min_grad_norm) })
        }
    }
}

pub fn critical_point(p: &CriticalPoint) -> Value {
    json!({
        "location": vector(&p.location),
        "value": num(p.value),
        "grad_norm": num(p.grad_norm),
        "classification": classification(p.classification),
        "hessian_spectrum": vector(&p.hessian_spectrum),
        "isolation": isolation(&p.isolation),
    })
}

pub fn ec(v: &EcVerdict) -> Value {
    json!({
        "kind": ec_kind(v.kind),
        "horizon": num(v.horizon),
        "horizon_integral": num(v.horizon_integral),
        "tail_increment": num(v.tail_increment),
        "tail_exponent": v.tail_exponent.map_or(Value::Null, num),
        "clipped": v.clipped,
        "evidence": v.evidence,
    })
}

fn descent_run(r: &DescentRun) -> Value {
    json!({
        "start": vector(&r.start),
        "t0": num(r.t0),
        "status": status(&r.status),
        "samples": r.samples,
        "max_increase": num(r.max_increase),
        "max_bound_excess": num(r.max_bound_excess),
    })
}

pub fn stability_report(r: &StabilityReport) -> Value {
    json!({
        "equilibrium": critical_point(&r.equilibrium),
        "h1": {
            "passed": r.h1.passed,
            "classification": classification(r.h1.classification),
            "probe_radii": vector(&r.h1.probe_radii),
            "max_probe_value": num(r.h1.max_probe_value),
            "reason": r.h1.reason,
        },
        "h2": isolation(&r.h2),
        "h3": ec(&r.h3),
        "descent": {
            "radius": num(r.descent.radius),
            "max_increase": num(r.descent.max_increase),
            "max_bound_excess": num(r.descent.max_bound_excess),
            "passed": r.descent.passed,
            "runs": r.descent.runs.iter().map(descent_run).collect::<Vec<_>>(),
        },
        "conclusion": conclusion(r.conclusion),
        "notes": r.notes,
    })
}

pub fn h0(r: &H0Report) -> Value {
    json!({
        "passed": r.passed,
        "psd_tol": num(r.psd_tol),
        "min_lambda1": num(r.min_lambda1),
        "sample_count": r.samples.len(),
        "violations": vector(&r.violations),
        "symmetry": r.symmetry,
    })
}

#[allow(clippy::needless_range_loop)]
pub fn system(cfg: &AnalysisConfig) -> Value {
    let s: &System = &cfg.system;
    let d = s.field().domain();
    let bounds: Vec<Value> = d
        .lo()
        .iter()
        .zip(d.hi())
        .map(|(lo, hi)| json!([num(*lo), num(*hi)]))
        .collect();
    let n = s.dim();
    let entries = s.matrix().upper_entries();
    let mut rows = vec![vec![String::new(); n]; n];
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            rows[i][j] = entries[k].to_string();
            rows[j][i] = entries[k].to_string();
            k += 1;
        }
    }
    let mut out = Map::new();
    if let Source::Gallery {
        id,
        depth,
        matrix_override,
    } = &cfg.source
    {
        out.insert("gallery".into(), json!(id.as_str()));
        if let Some(d) = depth {
            out.insert("depth".into(), json!(d));
        }
        out.insert("matrix_override".into(), json!(matrix_override));
    }
    out.insert("dimension".into(), json!(n));
    let f = match s.field().source() {
        FieldSource::Expression(e) => json!(e.to_string()),
        FieldSource::Procedural(_) => json!("procedural"),
    };
    out.insert("f".into(), f);
    out.insert("P".into(), json!(rows));
    out.insert("box".into(), Value::Array(bounds));
    Value::Object(out)
}

fn crossing_kind(k: CrossingKind) -> &'static str {
    match k {
        CrossingKind::LevelC => "LevelC",
        CrossingKind::LevelM => "LevelM",
        CrossingKind::Other => "Other",
    }
}

fn crossing(c: &BoundaryCrossing) -> Value {
    json!({
        "point": vector(&c.point),
        "value": num(c.value),
        "tolerance": num(c.tolerance),
        "kind": crossing_kind(c.kind),
    })
}

pub fn component(c: &GridComponent) -> Value {
    json!({
        "anchor": vector(&c.anchor),
        "c": num(c.c),
        "peak": num(c.peak),
        "resolution": c.grid.resolution(),
        "masked_cells": c.masked_count(),
        "masked_volume": num(c.masked_volume()),
        "boundary_cells": c.boundary_cells.len(),
    })
}

pub fn hypotheses(r: &HypothesisReport) -> Value {
    json!({
        "all_passed": r.all_passed(),
        "h4": { "passed": r.h4.passed, "witnesses": vectors(&r.h4.witnesses) },
        "h5": {
            "passed": r.h5.passed,
            "checked": r.h5.checked,
            "max_deviation": num(r.h5.max_deviation),
            "witnesses": r.h5.witnesses.iter().map(crossing).collect::<Vec<_>>(),
        },
        "h6": { "passed": r.h6.passed, "witnesses": vectors(&r.h6.witnesses) },
    })
}

pub fn verification(v: &BasinVerification) -> Value {
    json!({
        "sample_count": v.sample_count,
        "converged_count": v.converged_count,
        "all_converged": v.all_converged(),
        "starts": vectors(&v.starts),
        "failures": v.failures.iter().map(|f| json!({
            "start": vector(&f.start),
            "status": status(&f.status),
            "final_state": vector(&f.final_state),
        })).collect::<Vec<_>>(),
        "note": v.note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        assert_eq!(num(0.1).to_string(), "1.0000000000000001e-1");
        assert_eq!(num(-2.0).to_string(), "-2.0000000000000000e+0");
        assert_eq!(num(f64::NAN), Value::Null);
        let back: f64 = serde_json::from_str::<Value>(&num(1.0 / 3.0).to_string())
            .unwrap()
            .as_f64()
            .unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }
}
