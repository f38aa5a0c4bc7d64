//! Error metrics against a fine reference and the batch studies built on them.
//!
//! Grids with different `N` are never nested, so profiles are compared on a
//! common fine set of `ξ` midpoints with piecewise-constant lookup.

use rayon::prelude::*;
use thiserror::Error;

use crate::biokinetics::{N_PARTICULATE, N_SOLUBLE};
use crate::discretization::{Grid, NumericalFlux, Scheme};
use crate::error::RunError;
use crate::scenario::Problem;
use crate::simulator::{run, RunConfig, SimulationOutput, Snapshot};
use crate::state::GridState;

/// Reference resolution used at desk scale.
pub const DEFAULT_REFERENCE_CELLS: usize = 1200;
/// Fine sampling points per reference cell.
pub const SAMPLES_PER_REFERENCE_CELL: usize = 10;
/// Components whose reference norm falls below this are left out of the error sum.
pub const NEGLIGIBLE_NORM: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("no snapshot at t = {t} s")]
    MissingSnapshot { t: f64 },
    #[error(transparent)]
    Run(#[from] RunError),
}

fn snapshot(out: &SimulationOutput, t: f64) -> Result<&Snapshot, ValidationError> {
    out.snapshot_at(t).ok_or(ValidationError::MissingSnapshot { t })
}

/// Tank cell holding `xi ∈ [0, 1]`.
fn cell_at(grid: &Grid, xi: f64) -> usize {
    let j = (xi / grid.dxi + 0.5).floor() as usize;
    j.min(grid.n) + 1
}

/// The twelve component values of one cell: particulates then solubles.
fn components(state: &GridState, i: usize, c_conv: f64) -> [f64; N_PARTICULATE + N_SOLUBLE] {
    let c = state.particulates(i, c_conv);
    std::array::from_fn(|k| if k < N_PARTICULATE { c[k] } else { state.s[i][k - N_PARTICULATE] })
}

/// Sum over components of `‖u − u_ref‖₁ / ‖u_ref‖₁` on `samples` uniform `ξ`-midpoints.
pub fn relative_error_states(
    coarse: &GridState,
    coarse_grid: &Grid,
    reference: &GridState,
    reference_grid: &Grid,
    c_conv: f64,
    samples: usize,
) -> f64 {
    let mut diff = [0.0; N_PARTICULATE + N_SOLUBLE];
    let mut norm = [0.0; N_PARTICULATE + N_SOLUBLE];
    let h = 1.0 / samples as f64;
    for m in 0..samples {
        let xi = (m as f64 + 0.5) * h;
        let a = components(coarse, cell_at(coarse_grid, xi), c_conv);
        let r = components(reference, cell_at(reference_grid, xi), c_conv);
        for k in 0..a.len() {
            diff[k] += h * (a[k] - r[k]).abs();
            norm[k] += h * r[k].abs();
        }
    }
    diff.iter().zip(&norm).filter(|(_, n)| **n >= NEGLIGIBLE_NORM).map(|(d, n)| d / n).sum()
}

/// Relative error of `coarse` against `reference` at time `t`.
pub fn relative_error(
    coarse: &SimulationOutput,
    reference: &SimulationOutput,
    t: f64,
    c_conv: f64,
) -> Result<f64, ValidationError> {
    let a = snapshot(coarse, t)?;
    let r = snapshot(reference, t)?;
    let samples = SAMPLES_PER_REFERENCE_CELL * reference.grid.n;
    Ok(relative_error_states(&a.state, &coarse.grid, &r.state, &reference.grid, c_conv, samples))
}

/// Settings of a run that only records snapshots at `times`.
pub fn study_config(base: &RunConfig, cells: usize, scheme: Scheme, times: &[f64]) -> RunConfig {
    RunConfig {
        cells,
        scheme,
        snapshot_interval: None,
        snapshot_times: times.to_vec(),
        outlet_interval: f64::INFINITY,
        ..base.clone()
    }
}

/// Explicit scheme with the Godunov flux at `cells`.
pub fn reference_run(
    problem: &Problem,
    base: &RunConfig,
    cells: usize,
    times: &[f64],
) -> Result<SimulationOutput, RunError> {
    let cfg = RunConfig { flux: NumericalFlux::Godunov, ..study_config(base, cells, Scheme::Explicit, times) };
    run(problem, &cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub cells: usize,
    pub scheme: Scheme,
    /// Newton tolerance, for tolerance sweeps.
    pub tolerance: Option<f64>,
    pub t: f64,
    pub e_rel: f64,
    pub cpu_seconds: f64,
    pub mean_newton_iterations: f64,
    /// `log₂(e_{N/2} / e_N)` when the row at `N/2` exists.
    pub eoc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
}

impl ErrorReport {
    pub fn series(&self, scheme: Scheme, t: f64) -> impl Iterator<Item = &ErrorRow> {
        self.rows.iter().filter(move |r| r.scheme == scheme && r.t == t)
    }

    /// Sets each row's order from the row of the same series at half the cells.
    pub fn fill_eoc(&mut self) {
        let rows = self.rows.clone();
        for row in &mut self.rows {
            row.eoc = rows
                .iter()
                .find(|c| c.scheme == row.scheme && c.t == row.t && c.tolerance == row.tolerance && 2 * c.cells == row.cells)
                .filter(|c| c.e_rel > 0.0 && row.e_rel > 0.0)
                .map(|c| (c.e_rel / row.e_rel).log2());
        }
    }
}

fn rows_for(
    problem: &Problem,
    cfg: &RunConfig,
    reference: &SimulationOutput,
    times: &[f64],
    tolerance: Option<f64>,
) -> Result<Vec<ErrorRow>, ValidationError> {
    let out = run(problem, cfg)?;
    let d = &out.diagnostics;
    times
        .iter()
        .map(|&t| {
            Ok(ErrorRow {
                cells: cfg.cells,
                scheme: cfg.scheme,
                tolerance,
                t,
                e_rel: relative_error(&out, reference, t, problem.c_conv())?,
                cpu_seconds: d.wall_clock.as_secs_f64(),
                mean_newton_iterations: d.mean_newton_iterations(),
                eoc: None,
            })
        })
        .collect()
}

/// Errors of every `(cells, scheme)` pair at `times`, with EOC between resolutions a factor two apart.
pub fn convergence_study(
    problem: &Problem,
    base: &RunConfig,
    cells: &[usize],
    schemes: &[Scheme],
    times: &[f64],
    reference: &SimulationOutput,
) -> Result<ErrorReport, ValidationError> {
    let jobs: Vec<(Scheme, usize)> = schemes.iter().flat_map(|s| cells.iter().map(move |n| (*s, *n))).collect();
    let chunks = jobs
        .par_iter()
        .map(|&(scheme, n)| rows_for(problem, &study_config(base, n, scheme, times), reference, times, None))
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = ErrorReport { rows: chunks.into_iter().flatten().collect() };
    report.fill_eoc();
    Ok(report)
}

/// Semi-implicit runs at one resolution across Newton tolerances.
pub fn tolerance_sweep(
    problem: &Problem,
    base: &RunConfig,
    cells: usize,
    tolerances: &[f64],
    times: &[f64],
    reference: &SimulationOutput,
) -> Result<ErrorReport, ValidationError> {
    let chunks = tolerances
        .par_iter()
        .map(|&eps| {
            let mut cfg = study_config(base, cells, Scheme::SemiImplicit, times);
            cfg.newton.epsilon = eps;
            rows_for(problem, &cfg, reference, times, Some(eps))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ErrorReport { rows: chunks.into_iter().flatten().collect() })
}

/// Piecewise-constant total solids over depth: `(z_top, z_bottom, X)` per tank cell.
pub fn depth_cells(snap: &Snapshot, grid: &Grid, depth: f64) -> Vec<(f64, f64, f64)> {
    let h = depth - snap.z_bar;
    (0..=grid.n)
        .map(|j| {
            let lo = ((j as f64 - 0.5) * grid.dxi).max(0.0);
            let hi = ((j as f64 + 0.5) * grid.dxi).min(1.0);
            (snap.z_bar + h * lo, snap.z_bar + h * hi, snap.state.x[j + 1])
        })
        .collect()
}

/// `∫ |X_late − X_early| dz` over the early cells denser than `threshold`,
/// and the number of such cells.
pub fn sediment_deviation(early: &Snapshot, late: &Snapshot, grid: &Grid, depth: f64, threshold: f64) -> (f64, usize) {
    let a = depth_cells(early, grid, depth);
    let b = depth_cells(late, grid, depth);
    let mut total = 0.0;
    let mut count = 0;
    for &(lo, hi, x) in a.iter().filter(|c| c.2 > threshold) {
        count += 1;
        // cells above the late surface hold no mixture
        let above = (b[0].0.min(hi) - lo).max(0.0);
        total += above * x;
        total += b
            .iter()
            .map(|&(blo, bhi, y)| (hi.min(bhi) - lo.max(blo)).max(0.0) * (y - x).abs())
            .sum::<f64>();
    }
    (total, count)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationarityRow {
    pub cells: usize,
    pub deviation: f64,
    pub sediment_cells: usize,
}

/// Semi-implicit runs of `problem`, comparing the sediment at `early` and `late`.
pub fn moving_mesh_stationarity(
    problem: &Problem,
    base: &RunConfig,
    cells: &[usize],
    early: f64,
    late: f64,
) -> Result<Vec<StationarityRow>, ValidationError> {
    let depth = problem.geometry.depth;
    let threshold = problem.constitutive.params.x_crit;
    cells
        .par_iter()
        .map(|&n| {
            let out = run(problem, &study_config(base, n, Scheme::SemiImplicit, &[early, late]))?;
            let (deviation, sediment_cells) =
                sediment_deviation(snapshot(&out, early)?, snapshot(&out, late)?, &out.grid, depth, threshold);
            Ok(StationarityRow { cells: n, deviation, sediment_cells })
        })
        .collect()
}
