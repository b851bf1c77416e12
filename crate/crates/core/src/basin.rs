//! Inner estimates of a basin of attraction from sublevel components.
//!
//! For a strict local maximum `x̄` with `M = f(x̄)` and a level `c < M`, the
//! set `O = {x̄} ∪ {x : c < f(x) < M}` has a connected component `E` containing
//! `x̄`. If `E` is bounded with closure inside the domain (H4), `f = c` on the
//! boundary of `E` (H5), and `x̄` is the only critical point in the closure
//! (H6), then every trajectory starting in `E` converges to `x̄`.
//!
//! `E` is approximated on a regular grid by cell-centre sampling and a
//! face-connected flood fill, which under-approximates thin necks rather than
//! leaking through them.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::equilibria::{Classification, CriticalPoint};
use crate::field::{BoxDomain, FieldError, ScalarField, System};
use crate::ode::{simulate, OdeError, SimulateOptions, Status};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BasinError {
    #[error("anchor {0:?} is outside the box")]
    AnchorOutsideBox(Vec<f64>),
    #[error("c must be below f(anchor): c = {c}, f(anchor) = {peak}")]
    LevelNotBelowPeak { c: f64, peak: f64 },
    #[error("resolution must be at least {min} cells per axis, got {found}")]
    ResolutionTooSmall { min: usize, found: usize },
    #[error("expected {expected} resolution entries, got {found}")]
    ResolutionMismatch { expected: usize, found: usize },
    #[error("grid extraction supports dimension ≤ {MAX_GRID_DIM}, got {0}")]
    DimensionTooHigh(usize),
    #[error("sample count must be positive")]
    NoSamples,
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

pub const MIN_RESOLUTION: usize = 32;
pub const MAX_GRID_DIM: usize = 4;
const BISECTION_STEPS: usize = 40;

/// Regular cell grid over a box. Cell indices are flattened with axis 0
/// varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    domain: BoxDomain,
    resolution: Vec<usize>,
}

impl Grid {
    pub fn new(domain: BoxDomain, resolution: &[usize]) -> Result<Self, BasinError> {
        if resolution.len() != domain.dim() {
            return Err(BasinError::ResolutionMismatch {
                expected: domain.dim(),
                found: resolution.len(),
            });
        }
        Ok(Self {
            domain,
            resolution: resolution.to_vec(),
        })
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn dim(&self) -> usize {
        self.resolution.len()
    }

    pub fn cell_count(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        (self.domain.hi()[axis] - self.domain.lo()[axis]) / self.resolution[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.cell_width(a)).product()
    }

    pub fn cell_diagonal(&self) -> f64 {
        (0..self.dim()).map(|a| self.cell_width(a).powi(2)).sum::<f64>().sqrt()
    }

    pub fn unflatten(&self, mut cell: usize) -> Vec<usize> {
        self.resolution
            .iter()
            .map(|&r| {
                let i = cell % r;
                cell /= r;
                i
            })
            .collect()
    }

    pub fn flatten(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(&self.resolution)
            .rev()
            .fold(0, |acc, (&i, &r)| acc * r + i)
    }

    pub fn center(&self, cell: usize) -> Vec<f64> {
        self.unflatten(cell)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.domain.lo()[a] + (i as f64 + 0.5) * self.cell_width(a))
            .collect()
    }

    /// Lower corner of a cell.
    pub fn corner(&self, cell: usize) -> Vec<f64> {
        self.unflatten(cell)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.domain.lo()[a] + i as f64 * self.cell_width(a))
            .collect()
    }

    /// Cell containing `x`; points on the upper wall belong to the last cell.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.dim() || !self.domain.contains(x) {
            return None;
        }
        let index: Vec<usize> = (0..self.dim())
            .map(|a| {
                let k = ((x[a] - self.domain.lo()[a]) / self.cell_width(a)).floor() as usize;
                k.min(self.resolution[a] - 1)
            })
            .collect();
        Some(self.flatten(&index))
    }

    /// Face neighbours; `None` marks a face on the box wall.
    pub fn face_neighbours(&self, cell: usize) -> Vec<Option<usize>> {
        let index = self.unflatten(cell);
        let mut out = Vec::with_capacity(2 * self.dim());
        let mut stride = 1;
        for (a, &r) in self.resolution.iter().enumerate() {
            out.push(if index[a] > 0 { Some(cell - stride) } else { None });
            out.push(if index[a] + 1 < r { Some(cell + stride) } else { None });
            stride *= r;
        }
        out
    }

    pub fn touches_wall(&self, cell: usize) -> bool {
        self.unflatten(cell)
            .iter()
            .zip(&self.resolution)
            .any(|(&i, &r)| i == 0 || i + 1 == r)
    }
}

/// Grid approximation of the component `E` of `{x̄} ∪ {c < f < M}` containing `x̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridComponent {
    pub grid: Grid,
    /// One flag per cell.
    pub mask: Vec<bool>,
    pub c: f64,
    /// `M = f(x̄)`.
    pub peak: f64,
    pub anchor: Vec<f64>,
    pub anchor_cell: usize,
    /// Masked cells with an unmasked or out-of-box face neighbour, ascending.
    pub boundary_cells: Vec<usize>,
}

impl GridComponent {
    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Total volume (area for n = 2) of masked cells.
    pub fn masked_volume(&self) -> f64 {
        self.masked_count() as f64 * self.grid.cell_volume()
    }

    pub fn masked_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i)
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        self.grid.cell_of(x).is_some_and(|c| self.mask[c])
    }

    /// True if no cell is masked in both components.
    pub fn is_disjoint_from(&self, other: &GridComponent) -> bool {
        self.grid == other.grid && !self.mask.iter().zip(&other.mask).any(|(a, b)| *a && *b)
    }

    fn predicate(&self, field: &ScalarField, x: &[f64]) -> bool {
        in_level_band(field, x, self.c, self.peak)
    }
}

/// `c < f(x) < M`, with points where `f` cannot be evaluated counted as outside.
fn in_level_band(field: &ScalarField, x: &[f64], c: f64, peak: f64) -> bool {
    field.value(x).is_ok_and(|v| c < v && v < peak)
}

pub fn extract_component(
    field: &ScalarField,
    anchor: &[f64],
    c: f64,
    resolution: &[usize],
) -> Result<GridComponent, BasinError> {
    let n = field.dim();
    if n > MAX_GRID_DIM {
        return Err(BasinError::DimensionTooHigh(n));
    }
    let grid = Grid::new(field.domain().clone(), resolution)?;
    if let Some(&r) = resolution.iter().find(|&&r| r < MIN_RESOLUTION) {
        return Err(BasinError::ResolutionTooSmall {
            min: MIN_RESOLUTION,
            found: r,
        });
    }
    let anchor_cell = grid
        .cell_of(anchor)
        .ok_or_else(|| BasinError::AnchorOutsideBox(anchor.to_vec()))?;
    let peak = field.value(anchor)?;
    if !(c < peak) {
        return Err(BasinError::LevelNotBelowPeak { c, peak });
    }

    let mut band: Vec<bool> = (0..grid.cell_count())
        .into_par_iter()
        .map(|cell| in_level_band(field, &grid.center(cell), c, peak))
        .collect();
    band[anchor_cell] = true;

    let mut mask = vec![false; band.len()];
    let mut queue = VecDeque::from([anchor_cell]);
    mask[anchor_cell] = true;
    while let Some(cell) = queue.pop_front() {
        for nb in grid.face_neighbours(cell).into_iter().flatten() {
            if band[nb] && !mask[nb] {
                mask[nb] = true;
                queue.push_back(nb);
            }
        }
    }

    let boundary_cells = (0..mask.len())
        .filter(|&cell| {
            mask[cell]
                && grid
                    .face_neighbours(cell)
                    .into_iter()
                    .any(|nb| nb.is_none_or(|nb| !mask[nb]))
        })
        .collect();
    Ok(GridComponent {
        grid,
        mask,
        c,
        peak,
        anchor: anchor.to_vec(),
        anchor_cell,
        boundary_cells,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct H4Verdict {
    pub passed: bool,
    /// Centres of masked cells on the box wall.
    pub witnesses: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingKind {
    /// `f ≈ c` at the crossing.
    LevelC,
    /// `f ≈ M` at the crossing: the component wraps around a cap above `M`.
    LevelM,
    /// Neither level; `f` is undefined or jumps across the face.
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCrossing {
    pub point: Vec<f64>,
    pub value: f64,
    pub tolerance: f64,
    pub kind: CrossingKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct H5Verdict {
    pub passed: bool,
    pub checked: usize,
    /// Largest `|f − c|` over all refined crossings.
    pub max_deviation: f64,
    /// Crossings that are not on `f = c`.
    pub witnesses: Vec<BoundaryCrossing>,
    /// Every refined crossing, for plotting the boundary.
    pub crossings: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct H6Verdict {
    pub passed: bool,
    /// Critical points other than the anchor lying in masked cells.
    pub witnesses: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub h4: H4Verdict,
    pub h5: H5Verdict,
    pub h6: H6Verdict,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.h4.passed && self.h5.passed && self.h6.passed
    }
}

/// Checks H4–H6 on a grid component.
///
/// `tol_boundary = None` uses `2·L·(cell diagonal)` per crossing, with `L`
/// the larger `|∇f|` at the two cell centres.
pub fn check_hypotheses(
    component: &GridComponent,
    field: &ScalarField,
    critical_points: &[CriticalPoint],
    tol_boundary: Option<f64>,
) -> HypothesisReport {
    let grid = &component.grid;

    let h4_witnesses: Vec<Vec<f64>> = component
        .boundary_cells
        .iter()
        .filter(|&&cell| grid.touches_wall(cell))
        .map(|&cell| grid.center(cell))
        .collect();

    let faces: Vec<(usize, usize)> = component
        .boundary_cells
        .iter()
        .flat_map(|&cell| {
            grid.face_neighbours(cell)
                .into_iter()
                .flatten()
                .filter(|&nb| !component.mask[nb])
                .map(move |nb| (cell, nb))
        })
        .collect();
    let diag = grid.cell_diagonal();
    let crossings: Vec<Option<BoundaryCrossing>> = faces
        .par_iter()
        .map(|&(inside, outside)| {
            let a = grid.center(inside);
            let b = grid.center(outside);
            if !component.predicate(field, &a) {
                // anchor cell whose centre sits at or above M
                return None;
            }
            let point = bisect(field, component, a.clone(), b.clone());
            let value = field.value(&point).unwrap_or(f64::NAN);
            let lipschitz = [&a, &b]
                .iter()
                .filter_map(|x| field.gradient(x).ok())
                .map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            let tolerance = tol_boundary.unwrap_or(2.0 * lipschitz * diag);
            let kind = if (value - component.c).abs() <= tolerance {
                CrossingKind::LevelC
            } else if (value - component.peak).abs() <= tolerance {
                CrossingKind::LevelM
            } else {
                CrossingKind::Other
            };
            Some(BoundaryCrossing {
                point,
                value,
                tolerance,
                kind,
            })
        })
        .collect();
    let crossings: Vec<BoundaryCrossing> = crossings.into_iter().flatten().collect();
    let max_deviation = crossings
        .iter()
        .map(|x| (x.value - component.c).abs())
        .fold(0.0, |m, d| if d.is_nan() { f64::INFINITY } else { m.max(d) });
    let h5_witnesses: Vec<BoundaryCrossing> = crossings
        .iter()
        .filter(|x| x.kind != CrossingKind::LevelC)
        .cloned()
        .collect();

    let anchor_tol = 1e-8 * (1.0 + component.anchor.iter().map(|v| v.abs()).fold(0.0, f64::max));
    let h6_witnesses: Vec<Vec<f64>> = critical_points
        .iter()
        .filter(|p| dist(&p.location, &component.anchor) > anchor_tol)
        .filter(|p| component.contains_point(&p.location))
        .map(|p| p.location.clone())
        .collect();

    HypothesisReport {
        h4: H4Verdict {
            passed: h4_witnesses.is_empty(),
            witnesses: h4_witnesses,
        },
        h5: H5Verdict {
            passed: h5_witnesses.is_empty(),
            checked: crossings.len(),
            max_deviation,
            witnesses: h5_witnesses,
            crossings: crossings.into_iter().map(|x| x.point).collect(),
        },
        h6: H6Verdict {
            passed: h6_witnesses.is_empty(),
            witnesses: h6_witnesses,
        },
    }
}

/// Locates the predicate change on the segment from `inside` to `outside`.
fn bisect(field: &ScalarField, component: &GridComponent, mut inside: Vec<f64>, mut outside: Vec<f64>) -> Vec<f64> {
    for _ in 0..BISECTION_STEPS {
        let mid: Vec<f64> = inside.iter().zip(&outside).map(|(a, b)| 0.5 * (a + b)).collect();
        if component.predicate(field, &mid) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside.iter().zip(&outside).map(|(a, b)| 0.5 * (a + b)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasinFailure {
    pub start: Vec<f64>,
    pub status: Status,
    pub final_state: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasinVerification {
    pub sample_count: usize,
    pub converged_count: usize,
    pub starts: Vec<Vec<f64>>,
    pub failures: Vec<BasinFailure>,
    pub note: String,
}

impl BasinVerification {
    pub fn all_converged(&self) -> bool {
        self.converged_count == self.sample_count
    }
}

fn sample_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

/// Draws a start uniformly from a masked cell, retrying until it satisfies
/// `c < f < M`; falls back to the cell centre.
fn sample_start(component: &GridComponent, field: &ScalarField, cells: &[usize], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let grid = &component.grid;
    let cell = cells[rng.gen_range(0..cells.len())];
    let corner = grid.corner(cell);
    for _ in 0..64 {
        let x: Vec<f64> = corner
            .iter()
            .enumerate()
            .map(|(a, lo)| lo + rng.gen::<f64>() * grid.cell_width(a))
            .collect();
        if component.predicate(field, &x) {
            return x;
        }
    }
    grid.center(cell)
}

/// Simulates `sample_count` starts drawn from the masked cells and counts
/// those that converge to the anchor.
///
/// Sample `k` uses its own ChaCha stream of `seed`, so the result does not
/// depend on scheduling.
pub fn verify_basin(
    system: &System,
    component: &GridComponent,
    sample_count: usize,
    t_end: f64,
    converge_radius: f64,
    seed: u64,
) -> Result<BasinVerification, BasinError> {
    if sample_count == 0 {
        return Err(BasinError::NoSamples);
    }
    let field = system.field();
    let cells: Vec<usize> = component.masked_cells().collect();
    let starts: Vec<Vec<f64>> = (0..sample_count)
        .map(|k| sample_start(component, field, &cells, &mut sample_rng(seed, k)))
        .collect();
    run_verification(
        system,
        &component.anchor,
        starts,
        t_end,
        converge_radius,
        format!(
            "{sample_count} starts drawn uniformly from {} masked cells; evidence for basin membership, not a proof",
            cells.len()
        ),
    )
}

/// Verification without a grid, for dimensions above the grid limit: starts
/// are rejection-sampled from the ball of radius `radius` around the anchor
/// subject to `c < f < M`. Connectivity to the anchor is not checked.
#[allow(clippy::too_many_arguments)]
pub fn verify_basin_sampled(
    system: &System,
    anchor: &[f64],
    c: f64,
    radius: f64,
    sample_count: usize,
    t_end: f64,
    converge_radius: f64,
    seed: u64,
) -> Result<BasinVerification, BasinError> {
    if sample_count == 0 {
        return Err(BasinError::NoSamples);
    }
    let field = system.field();
    if !field.domain().contains(anchor) {
        return Err(BasinError::AnchorOutsideBox(anchor.to_vec()));
    }
    let peak = field.value(anchor)?;
    if !(c < peak) {
        return Err(BasinError::LevelNotBelowPeak { c, peak });
    }
    let n = anchor.len();
    let mut starts = Vec::with_capacity(sample_count);
    let mut rejected = 0usize;
    for k in 0..sample_count {
        let mut rng = sample_rng(seed, k);
        let mut found = None;
        for _ in 0..10_000 {
            let x: Vec<f64> = anchor
                .iter()
                .map(|a| a + radius * (2.0 * rng.gen::<f64>() - 1.0))
                .collect();
            if dist(&x, anchor) <= radius && in_level_band(field, &x, c, peak) {
                found = Some(x);
                break;
            }
            rejected += 1;
        }
        starts.push(found.unwrap_or_else(|| anchor.to_vec()));
    }
    run_verification(
        system,
        anchor,
        starts,
        t_end,
        converge_radius,
        format!(
            "n = {n} exceeds the grid limit; {sample_count} starts rejection-sampled from c < f < M within radius {radius} ({rejected} rejections); connectivity to the anchor not checked"
        ),
    )
}

fn run_verification(
    system: &System,
    anchor: &[f64],
    starts: Vec<Vec<f64>>,
    t_end: f64,
    converge_radius: f64,
    note: String,
) -> Result<BasinVerification, BasinError> {
    let opts = SimulateOptions::default().with_target(anchor.to_vec(), converge_radius);
    let outcomes: Result<Vec<(Status, Vec<f64>)>, OdeError> = starts
        .par_iter()
        .map(|x0| {
            let traj = simulate(system, x0, 0.0, t_end, &opts)?;
            Ok((traj.status.clone(), traj.last().x.clone()))
        })
        .collect();
    let mut converged_count = 0;
    let mut failures = Vec::new();
    for (start, (status, final_state)) in starts.iter().zip(outcomes?) {
        if matches!(status, Status::Converged { .. }) {
            converged_count += 1;
        } else {
            failures.push(BasinFailure {
                start: start.clone(),
                status,
                final_state,
            });
        }
    }
    Ok(BasinVerification {
        sample_count: starts.len(),
        converged_count,
        starts,
        failures,
        note,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSuggestion {
    pub c: f64,
    /// The saddle whose value sets the level.
    pub saddle: Vec<f64>,
    pub saddle_value: f64,
}

/// Heuristic level: 1% of the gap above the highest saddle value below `M`.
///
/// Returns `None` when no saddle lies below `M`.
pub fn suggest_level(critical_points: &[CriticalPoint], peak: f64) -> Option<LevelSuggestion> {
    critical_points
        .iter()
        .filter(|p| p.classification == Classification::Saddle && p.value < peak)
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .map(|s| LevelSuggestion {
            c: s.value + 0.01 * (peak - s.value),
            saddle: s.location.clone(),
            saddle_value: s.value,
        })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
