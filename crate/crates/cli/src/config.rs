//! Analysis config: one JSON document describing `(f, P, D)` and the knobs of
//! every stage. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use modgrad::basin::MIN_RESOLUTION;
use modgrad::equilibria::FinderOptions;
use modgrad::expr::Expression;
use modgrad::field::{default_sample_times, BoxDomain, MatrixPath, ScalarField, System, DEFAULT_PSD_TOL};
use modgrad::gallery::{example_2_2, example_3_1, GalleryId, DEFAULT_DEPTH};
use modgrad::ode::SimulateOptions;
use modgrad::stability::CertifyOptions;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Number(f64),
    Text(String),
}

impl Entry {
    fn source(&self) -> String {
        match self {
            Entry::Number(v) => format!("{v:?}"),
            Entry::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Named(String),
    Grid(Vec<Vec<Entry>>),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub gallery: Option<String>,
    /// Spline depth for `ex22`.
    pub depth: Option<usize>,
    pub dimension: Option<usize>,
    pub f: Option<String>,
    #[serde(rename = "P")]
    pub p: Option<MatrixSpec>,
    #[serde(rename = "box")]
    pub bounds: Option<Vec<[f64; 2]>>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub options: RawOptions,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOptions {
    #[serde(default)]
    pub h0: H0Section,
    #[serde(default)]
    pub finder: FinderSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub certify: CertifySection,
    #[serde(default)]
    pub basin: BasinSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct H0Section {
    pub psd_tol: Option<f64>,
    pub sample_times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinderSection {
    pub grid_per_axis: Option<usize>,
    pub newton_tol: Option<f64>,
    pub max_newton_iters: Option<usize>,
    pub degeneracy_tol: Option<f64>,
    pub grad_floor: Option<f64>,
    pub samples_per_shell: Option<usize>,
    pub shell_count: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub h_init: Option<f64>,
    pub h_min: Option<f64>,
    pub h_max: Option<f64>,
    pub convergence_radius: Option<f64>,
    pub rhs_floor: Option<f64>,
    pub max_steps: Option<usize>,
    pub stability_factor: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySection {
    pub ec_horizon: Option<f64>,
    pub quad_tol: Option<f64>,
    pub probe_points: Option<usize>,
    pub descent_trajectories: Option<usize>,
    pub descent_span: Option<f64>,
    pub descent_start_times: Option<Vec<f64>>,
    pub descent_monotone_tol: Option<f64>,
    pub descent_bound_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasinSection {
    pub resolution: Option<usize>,
    pub samples: Option<usize>,
    pub t_end: Option<f64>,
    pub converge_radius: Option<f64>,
    pub tol_boundary: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasinOptions {
    pub resolution: usize,
    pub samples: usize,
    pub t_end: f64,
    pub converge_radius: f64,
    pub tol_boundary: Option<f64>,
}

impl Default for BasinOptions {
    fn default() -> Self {
        Self {
            resolution: 256,
            samples: 100,
            t_end: 50.0,
            converge_radius: 1e-3,
            tol_boundary: None,
        }
    }
}

/// How the system was specified, echoed into every report.
#[derive(Debug, Clone)]
pub enum Source {
    Gallery {
        id: GalleryId,
        depth: Option<usize>,
        matrix_override: bool,
    },
    Inline,
}

#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub source: Source,
    pub system: System,
    pub psd_tol: f64,
    pub sample_times: Vec<f64>,
    pub finder: FinderOptions,
    pub simulate: SimulateOptions,
    pub certify: CertifyOptions,
    pub basin: BasinOptions,
    pub output: Option<PathBuf>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(format!("{name} must be positive and finite, got {v}")))
    }
}

pub fn load(path: &Path) -> Result<AnalysisConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<AnalysisConfig, CliError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| bad(format!("invalid config: {e}")))?;
    build(raw)
}

/// Config for a built-in example with every option at its default.
pub fn gallery(id: GalleryId, depth: Option<usize>) -> Result<AnalysisConfig, CliError> {
    build(RawConfig {
        gallery: Some(id.as_str().to_string()),
        depth,
        ..RawConfig::default()
    })
}

fn build(raw: RawConfig) -> Result<AnalysisConfig, CliError> {
    let (source, system) = match &raw.gallery {
        Some(name) => gallery_system(&raw, name)?,
        None => (Source::Inline, inline_system(&raw)?),
    };
    let o = &raw.options;

    let psd_tol = o.h0.psd_tol.unwrap_or(DEFAULT_PSD_TOL);
    if !(psd_tol >= 0.0) {
        return Err(bad(format!("options.h0.psd_tol must be non-negative, got {psd_tol}")));
    }
    let sample_times = o.h0.sample_times.clone().unwrap_or_else(default_sample_times);
    if sample_times.is_empty() || sample_times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(bad("options.h0.sample_times must be a non-empty list of times ≥ 0"));
    }

    let mut finder = FinderOptions::default();
    let s = &o.finder;
    if let Some(v) = s.grid_per_axis {
        finder.grid_per_axis = v;
    }
    if let Some(v) = s.newton_tol {
        finder.newton_tol = positive("options.finder.newton_tol", v)?;
    }
    if let Some(v) = s.max_newton_iters {
        finder.max_newton_iters = v;
    }
    if let Some(v) = s.degeneracy_tol {
        finder.degeneracy_tol = positive("options.finder.degeneracy_tol", v)?;
    }
    if let Some(v) = s.grad_floor {
        if !(v >= 0.0) {
            return Err(bad(format!("options.finder.grad_floor must be non-negative, got {v}")));
        }
        finder.grad_floor = v;
    }
    if let Some(v) = s.samples_per_shell {
        finder.samples_per_shell = v;
    }
    if let Some(v) = s.shell_count {
        finder.shell_count = v;
    }

    let mut simulate = SimulateOptions::default();
    let s = &o.simulate;
    if let Some(v) = s.rel_tol {
        simulate.rel_tol = positive("options.simulate.rel_tol", v)?;
    }
    if let Some(v) = s.abs_tol {
        simulate.abs_tol = positive("options.simulate.abs_tol", v)?;
    }
    if let Some(v) = s.h_init {
        simulate.h_init = Some(positive("options.simulate.h_init", v)?);
    }
    if let Some(v) = s.h_min {
        simulate.h_min = positive("options.simulate.h_min", v)?;
    }
    if let Some(v) = s.h_max {
        simulate.h_max = Some(positive("options.simulate.h_max", v)?);
    }
    if let Some(v) = s.convergence_radius {
        simulate.convergence_radius = positive("options.simulate.convergence_radius", v)?;
    }
    if let Some(v) = s.rhs_floor {
        simulate.rhs_floor = positive("options.simulate.rhs_floor", v)?;
    }
    if let Some(v) = s.max_steps {
        simulate.max_steps = v;
    }
    if let Some(v) = s.stability_factor {
        if !(v >= 0.0) {
            return Err(bad(format!(
                "options.simulate.stability_factor must be non-negative, got {v}"
            )));
        }
        simulate.stability_factor = v;
    }

    let mut certify = CertifyOptions {
        finder: finder.clone(),
        simulate: simulate.clone(),
        ..CertifyOptions::default()
    };
    let s = &o.certify;
    if let Some(v) = s.ec_horizon {
        certify.ec_horizon = positive("options.certify.ec_horizon", v)?;
    }
    if let Some(v) = s.quad_tol {
        certify.quad_tol = positive("options.certify.quad_tol", v)?;
    }
    if let Some(v) = s.probe_points {
        certify.probe_points = v;
    }
    if let Some(v) = s.descent_trajectories {
        certify.descent_trajectories = v;
    }
    if let Some(v) = s.descent_span {
        certify.descent_span = positive("options.certify.descent_span", v)?;
    }
    if let Some(v) = &s.descent_start_times {
        certify.descent_start_times = v.clone();
    }
    if let Some(v) = s.descent_monotone_tol {
        certify.descent_monotone_tol = positive("options.certify.descent_monotone_tol", v)?;
    }
    if let Some(v) = s.descent_bound_tol {
        certify.descent_bound_tol = positive("options.certify.descent_bound_tol", v)?;
    }

    let mut basin = BasinOptions::default();
    let s = &o.basin;
    if let Some(v) = s.resolution {
        if v < MIN_RESOLUTION {
            return Err(bad(format!(
                "options.basin.resolution must be at least {MIN_RESOLUTION}, got {v}"
            )));
        }
        basin.resolution = v;
    }
    if let Some(v) = s.samples {
        basin.samples = v;
    }
    if let Some(v) = s.t_end {
        basin.t_end = positive("options.basin.t_end", v)?;
    }
    if let Some(v) = s.converge_radius {
        basin.converge_radius = positive("options.basin.converge_radius", v)?;
    }
    if let Some(v) = s.tol_boundary {
        basin.tol_boundary = Some(positive("options.basin.tol_boundary", v)?);
    }

    Ok(AnalysisConfig {
        source,
        system,
        psd_tol,
        sample_times,
        finder,
        simulate,
        certify,
        basin,
        output: raw.output,
    })
}

fn gallery_system(raw: &RawConfig, name: &str) -> Result<(Source, System), CliError> {
    let id: GalleryId = name.parse().map_err(|e: modgrad::GalleryError| bad(e.to_string()))?;
    if raw.f.is_some() || raw.bounds.is_some() {
        return Err(bad("'f' and 'box' cannot be combined with 'gallery'"));
    }
    if let Some(n) = raw.dimension {
        if n != 2 {
            return Err(bad(format!("gallery examples are two-dimensional, got dimension {n}")));
        }
    }
    if raw.depth.is_some() && id != GalleryId::Ex22 {
        return Err(bad("'depth' only applies to gallery ex22"));
    }
    let matrix = raw.p.as_ref().map(|p| matrix_path(p, 2)).transpose()?;
    let entry = match id {
        GalleryId::Ex22 => example_2_2(raw.depth.unwrap_or(DEFAULT_DEPTH)),
        GalleryId::Ex31 => example_3_1(matrix.clone()),
        GalleryId::Ex21 => id.build(),
    }
    .map_err(|e| bad(e.to_string()))?;
    let system = match (&matrix, id) {
        (Some(m), GalleryId::Ex21 | GalleryId::Ex22) => {
            entry.system.with_matrix(m.clone()).map_err(|e| bad(e.to_string()))?
        }
        _ => entry.system,
    };
    let depth = (id == GalleryId::Ex22).then(|| raw.depth.unwrap_or(DEFAULT_DEPTH));
    Ok((
        Source::Gallery {
            id,
            depth,
            matrix_override: matrix.is_some(),
        },
        system,
    ))
}

fn inline_system(raw: &RawConfig) -> Result<System, CliError> {
    if raw.depth.is_some() {
        return Err(bad("'depth' only applies to gallery ex22"));
    }
    let f = raw.f.as_ref().ok_or_else(|| bad("missing 'f' (or 'gallery')"))?;
    let bounds = raw.bounds.as_ref().ok_or_else(|| bad("missing 'box'"))?;
    let pairs: Vec<(f64, f64)> = bounds.iter().map(|b| (b[0], b[1])).collect();
    let domain = BoxDomain::new(&pairs).map_err(|e| bad(format!("box: {e}")))?;
    let n = domain.dim();
    if let Some(d) = raw.dimension {
        if d != n {
            return Err(bad(format!("dimension is {d} but box has {n} axes")));
        }
    }
    let field = ScalarField::parse(f, domain).map_err(|e| bad(format!("f: {e}")))?;
    let p = raw.p.as_ref().ok_or_else(|| bad("missing 'P'"))?;
    let matrix = matrix_path(p, n)?;
    System::new(field, matrix).map_err(|e| bad(e.to_string()))
}

#[allow(clippy::needless_range_loop)]
fn matrix_path(spec: &MatrixSpec, n: usize) -> Result<MatrixPath, CliError> {
    match spec {
        MatrixSpec::Named(name) if name == "identity" => Ok(MatrixPath::identity(n)),
        MatrixSpec::Named(name) => Err(bad(format!(
            "P must be \"identity\" or an {n}×{n} array, got \"{name}\""
        ))),
        MatrixSpec::Grid(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(bad(format!("P must be an {n}×{n} array of expressions in t")));
            }
            let sources: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(Entry::source).collect()).collect();
            for i in 0..n {
                for j in 0..i {
                    let lower =
                        Expression::parse_in_time(&sources[i][j]).map_err(|e| bad(format!("P[{i}][{j}]: {e}")))?;
                    let upper =
                        Expression::parse_in_time(&sources[j][i]).map_err(|e| bad(format!("P[{j}][{i}]: {e}")))?;
                    if lower.to_string() != upper.to_string() {
                        return Err(bad(format!(
                            "P is not symmetric: P[{i}][{j}] = {} but P[{j}][{i}] = {}",
                            sources[i][j], sources[j][i]
                        )));
                    }
                }
            }
            MatrixPath::parse_upper(n, &sources).map_err(|e| bad(format!("P: {e}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse(r#"{"gallery": "ex31", "optoins": {}}"#).unwrap_err();
        assert!(matches!(err, CliError::Config(m) if m.contains("optoins")));
        let err = parse(r#"{"gallery": "ex31", "options": {"finder": {"grid": 3}}}"#).unwrap_err();
        assert!(matches!(err, CliError::Config(m) if m.contains("grid")));
    }

    #[test]
    fn inline_system_with_matrix_grid() {
        let cfg = parse(
            r#"{"f": "4 - (x1-1)^2 - (x2-1)^2", "box": [[-3, 5], [-3, 5]],
                "P": [["(t+1)^-2", 0], [0, "(t+1)^-1"]], "options": {"simulate": {"rel_tol": 1e-8}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.system.dim(), 2);
        assert_eq!(cfg.simulate.rel_tol, 1e-8);
        assert_eq!(cfg.certify.simulate.rel_tol, 1e-8);
        let p = cfg.system.matrix().at(1.0).unwrap();
        assert_eq!((p.get(0, 0), p.get(1, 1), p.get(0, 1)), (0.25, 0.5, 0.0));
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let err = parse(r#"{"f": "x1*x2", "box": [[-1, 1], [-1, 1]], "P": [["1", "t"], ["0", "1"]]}"#).unwrap_err();
        assert!(matches!(err, CliError::Config(m) if m.contains("symmetric")));
    }

    #[test]
    fn gallery_conflicts() {
        assert!(parse(r#"{"gallery": "ex31", "f": "x1"}"#).is_err());
        assert!(parse(r#"{"gallery": "ex31", "depth": 4}"#).is_err());
        assert!(parse(r#"{"gallery": "ex99"}"#).is_err());
        let cfg = parse(r#"{"gallery": "ex22", "depth": 6}"#).unwrap();
        assert!(matches!(cfg.source, Source::Gallery { depth: Some(6), .. }));
        let cfg = parse(r#"{"gallery": "ex31", "P": [["2", "0"], ["0", "1"]]}"#).unwrap();
        assert_eq!(cfg.system.matrix().at(0.0).unwrap().get(0, 0), 2.0);
    }

    #[test]
    fn dimension_must_match_box() {
        assert!(parse(r#"{"dimension": 3, "f": "x1", "box": [[0, 1]], "P": "identity"}"#).is_err());
        assert!(parse(r#"{"dimension": 1, "f": "x1", "box": [[0, 1]], "P": "identity"}"#).is_ok());
    }
}
