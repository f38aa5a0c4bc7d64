//! Time loop over the schedule.

use std::time::{Duration, Instant};

use crate::biokinetics::{Particulates, Solubles, N_SOLUBLE};
use crate::discretization::{CflConstants, Grid, NumericalFlux, Scheme, StepFlows, DEFAULT_CFL_SAFETY};
use crate::error::{ConfigError, RunError, SimulationError, StepError};
use crate::explicit_scheme::{explicit_step, StepContext, StepReport, Workspace};
use crate::mixing_ode::{average_profile, euler_mix_step, ode_step_bound, reallocate, MixedState};
use crate::scenario::{xi_of_z, z_of_xi, ModelKind, Problem};
use crate::semi_implicit::{semi_implicit_step, ImplicitWorkspace, NewtonConfig};
use crate::state::{GridState, OmegaMonitor, OmegaStats};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub cells: usize,
    pub scheme: Scheme,
    pub flux: NumericalFlux,
    pub newton: NewtonConfig,
    pub cfl_safety: f64,
    /// Snapshot cadence in simulated seconds; `None` keeps only `snapshot_times` and the end state.
    pub snapshot_interval: Option<f64>,
    pub snapshot_times: Vec<f64>,
    /// Outlet sampling cadence in seconds; zero samples every step.
    pub outlet_interval: f64,
    /// Abort on invariant-region departures beyond round-off.
    pub strict: bool,
    /// Multiplies the admissible step; values above one break the bound on purpose.
    pub tau_scale: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            cells: 100,
            scheme: Scheme::SemiImplicit,
            flux: NumericalFlux::EngquistOsher,
            newton: NewtonConfig::default(),
            cfl_safety: DEFAULT_CFL_SAFETY,
            snapshot_interval: Some(60.0),
            snapshot_times: Vec::new(),
            outlet_interval: 60.0,
            strict: true,
            tau_scale: 1.0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::invalid("numerics", m));
        if self.cells < 4 {
            return bad("at least 4 cells are required");
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad("CFL safety factor must lie in (0, 1]");
        }
        if self.snapshot_interval.is_some_and(|s| !(s > 0.0)) {
            return bad("snapshot interval must be positive");
        }
        if !(self.tau_scale > 0.0) || !(self.outlet_interval >= 0.0) {
            return bad("step scale and outlet cadence must be positive");
        }
        self.newton.validate()
    }
}

/// Outlet concentrations; zero while the outlet is closed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OutletRecord {
    pub t: f64,
    pub x_e: f64,
    pub x_u: f64,
    pub c_e: Particulates,
    pub s_e: Solubles,
    pub c_u: Particulates,
    pub s_u: Solubles,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub z_bar: f64,
    pub state: GridState,
}

impl Snapshot {
    pub fn t(&self) -> f64 {
        self.state.t
    }
}

/// One row of a profile in physical coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub z: f64,
    pub x: f64,
    pub c: Particulates,
    pub s: Solubles,
}

/// Profile at depths `z`; the extraction cell appears above the surface while it is open.
pub fn snapshot_to_z(snap: &Snapshot, grid: &Grid, depth: f64, c_conv: f64) -> Vec<ProfilePoint> {
    let st = &snap.state;
    let first = if st.x[0] > 0.0 { 0 } else { Grid::SURFACE };
    (first..=grid.n + 1)
        .map(|i| ProfilePoint {
            z: z_of_xi(grid.xi_cell(i), snap.z_bar, depth),
            x: st.x[i],
            c: st.particulates(i, c_conv),
            s: st.s[i],
        })
        .collect()
}

/// Running inventory of one substance, kg.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Ledger {
    pub initial: f64,
    pub inflow: f64,
    pub outflow: f64,
    pub reaction: f64,
    /// Inventory jumps where the profile is averaged or spread out again.
    pub handover: f64,
    pub last: f64,
}

impl Ledger {
    /// `final + out - in - reaction - initial - handover`.
    pub fn imbalance(&self) -> f64 {
        self.last + self.outflow - self.inflow - self.reaction - self.initial - self.handover
    }

    pub fn relative_imbalance(&self) -> f64 {
        let scale = self.initial.abs().max(self.last.abs()).max(self.inflow.abs()).max(self.outflow.abs());
        if scale > 0.0 {
            self.imbalance().abs() / scale
        } else {
            0.0
        }
    }
}

/// Global mass audit of solids and each substrate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MassAudit {
    /// Tank inventory with the surface cell at half weight.
    pub solids: Ledger,
    /// Same fluxes against the inventory with the surface cell at full weight.
    pub solids_full_weight: Ledger,
    pub soluble: [Ledger; N_SOLUBLE],
}

impl MassAudit {
    pub fn worst_relative(&self) -> f64 {
        self.soluble.iter().map(Ledger::relative_imbalance).fold(self.solids.relative_imbalance(), f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub pde_steps: u64,
    pub ode_steps: u64,
    pub newton_iterations: u64,
    pub max_newton_residual: f64,
    pub min_column_margin: f64,
    pub omega: OmegaStats,
    /// Step used in each stage.
    pub stage_tau: Vec<f64>,
    pub wall_clock: Duration,
    pub audit: MassAudit,
}

impl Diagnostics {
    pub fn mean_newton_iterations(&self) -> f64 {
        if self.pde_steps == 0 {
            0.0
        } else {
            self.newton_iterations as f64 / self.pde_steps as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub grid: Grid,
    pub outlets: Vec<OutletRecord>,
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: Diagnostics,
}

impl SimulationOutput {
    pub fn snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| (s.t() - t).abs() <= 1e-6 * t.abs().max(1.0))
    }

    pub fn final_state(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }
}

/// Cell averages of the initial condition, sampled at cell centres.
pub fn initial_state(problem: &Problem, grid: &Grid) -> GridState {
    let c = problem.c_conv();
    let z0 = problem.trajectory.z_bar(0.0);
    let depth = problem.geometry.depth;
    let mut st = GridState::zeros(grid, problem.feed.fractions);
    for i in grid.tank_range() {
        let z = z_of_xi(grid.xi_cell(i), z0, depth);
        let (cv, sv) = problem.initial.at(z);
        let x = c * cv.iter().sum::<f64>();
        st.x[i] = x;
        if x > 0.0 {
            st.p[i] = cv.map(|v| c * v / x);
        }
        st.s[i] = sv;
    }
    st
}

/// Time-step constants of stage `stage`.
pub fn cfl_constants(problem: &Problem, stage: usize) -> Result<CflConstants, ConfigError> {
    let v = problem.velocities(stage);
    Ok(CflConstants {
        zeta: problem.trajectory.zeta_effective,
        m_q1: (v.under + v.extract).max(v.feed),
        m_q2: v.feed.max(v.extract) + 2.0 * v.under,
        f_prime_sup: problem.constitutive.f_prime_sup,
        a_sup: problem.constitutive.a_sup,
        reaction: problem.reaction_bounds()?,
        rho_x: problem.constitutive.params.rho_solid,
        x_hat: problem.constitutive.x_hat,
    })
}

/// Step of stage `stage`, shortened so that a whole number of steps fills it.
pub fn stage_step(problem: &Problem, stage: usize, cfg: &RunConfig, grid: &Grid) -> Result<(f64, u64), ConfigError> {
    let duration = problem.schedule[stage].duration();
    let tau_max = match problem.schedule[stage].model {
        ModelKind::Pde => {
            cfl_constants(problem, stage)?.tau(cfg.scheme, grid.dxi, cfg.cfl_safety)? * cfg.tau_scale
        }
        ModelKind::Mixing => ode_step_bound(problem, stage, &problem.reaction_bounds()?, cfg.cfl_safety),
    };
    let steps = (duration / tau_max).ceil().max(1.0);
    Ok((duration / steps, steps as u64))
}

/// Step flows at time `t` inside `stage`.
pub fn step_flows(problem: &Problem, stage: usize, t: f64) -> StepFlows {
    StepFlows {
        v: problem.velocities(stage),
        beta: problem.trajectory.beta_in(stage, t),
        surface_rate: problem.trajectory.surface_rate(stage),
        x_feed: problem.schedule[stage].x_feed,
    }
}

fn outlet_record(problem: &Problem, stage: usize, state: &GridState, grid: &Grid) -> OutletRecord {
    let v = problem.velocities(stage);
    let c = problem.c_conv();
    let mut rec = OutletRecord { t: state.t, ..Default::default() };
    if problem.schedule[stage].model == ModelKind::Mixing {
        return rec;
    }
    if v.extract > 0.0 {
        rec.x_e = state.x[0];
        rec.c_e = state.particulates(0, c);
        rec.s_e = state.s[0];
    }
    if v.under > 0.0 {
        let o = grid.outlet();
        rec.x_u = state.x[o];
        rec.c_u = state.particulates(o, c);
        rec.s_u = state.s[o];
    }
    rec
}

/// Tank inventories `(A/β) Δξ Σ w_j X_j` with half and full surface weight, and per substrate.
fn inventories(problem: &Problem, stage: usize, state: &GridState, grid: &Grid) -> (f64, f64, Solubles) {
    let scale = problem.geometry.area / problem.trajectory.beta_in(stage, state.t);
    let half = scale * state.tank_integral(grid);
    let full = scale * state.scheme_integral(grid);
    let s = std::array::from_fn(|k| {
        let sum: f64 = grid.tank_range().map(|i| grid.tank_weight(i) * state.s[i][k]).sum();
        scale * sum * grid.dxi
    });
    (half, full, s)
}

struct Recorder<'a> {
    cfg: &'a RunConfig,
    targets: Vec<f64>,
    next_target: usize,
    next_outlet: f64,
    snapshots: Vec<Snapshot>,
    outlets: Vec<OutletRecord>,
}

impl Recorder<'_> {
    fn observe(&mut self, problem: &Problem, stage: usize, grid: &Grid, state: &GridState, force: bool) {
        let t = state.t;
        let tol = 1e-9 * t.abs().max(1.0);
        let mut due = force;
        while self.next_target < self.targets.len() && self.targets[self.next_target] <= t + tol {
            self.next_target += 1;
            due = true;
        }
        if due && self.snapshots.last().map_or(true, |s| s.t() < t - tol) {
            self.snapshots.push(Snapshot { z_bar: problem.trajectory.z_bar_in(stage, t), state: state.clone() });
        }
        if self.cfg.outlet_interval == 0.0 || t + tol >= self.next_outlet || force {
            self.outlets.push(outlet_record(problem, stage, state, grid));
            while self.next_outlet <= t + tol {
                self.next_outlet += self.cfg.outlet_interval.max(f64::MIN_POSITIVE);
            }
        }
    }
}

/// Run the whole schedule.
pub fn run(problem: &Problem, cfg: &RunConfig) -> Result<SimulationOutput, RunError> {
    cfg.validate()?;
    problem.reaction_bounds()?;
    let grid = Grid::new(cfg.cells);
    let t_end = problem.end_time();
    let mut targets: Vec<f64> = cfg.snapshot_times.iter().copied().filter(|t| *t >= 0.0 && *t <= t_end).collect();
    if let Some(dt) = cfg.snapshot_interval {
        let count = (t_end / dt).floor() as usize;
        targets.extend((0..=count).map(|k| k as f64 * dt));
    }
    targets.push(t_end);
    targets.sort_by(f64::total_cmp);
    targets.dedup();

    let mut state = initial_state(problem, &grid);
    let mut monitor = OmegaMonitor::new(problem.constitutive.x_hat, cfg.strict);
    let mut diag = Diagnostics { min_column_margin: f64::INFINITY, ..Default::default() };
    let mut rec = Recorder { cfg, targets, next_target: 0, next_outlet: 0.0, snapshots: Vec::new(), outlets: Vec::new() };
    let mut explicit_ws = Workspace::new(&grid);
    let mut implicit_ws = ImplicitWorkspace::new(&grid);

    let (half, full, sol) = inventories(problem, 0, &state, &grid);
    let audit = &mut diag.audit;
    audit.solids.initial = half;
    audit.solids_full_weight.initial = full;
    for k in 0..N_SOLUBLE {
        audit.soluble[k].initial = sol[k];
    }
    rec.observe(problem, 0, &grid, &state, true);

    let started = Instant::now();
    for (si, stage) in problem.schedule.iter().enumerate() {
        let (tau, steps) = stage_step(problem, si, cfg, &grid)?;
        diag.stage_tau.push(tau);
        let annotate = |t: f64| move |source: StepError| SimulationError { t, stage: si + 1, source };
        match stage.model {
            ModelKind::Mixing => {
                let (half, full, _) = inventories(problem, si, &state, &grid);
                diag.audit.solids_full_weight.handover += half - full;
                let mut mixed: MixedState = average_profile(&state, &grid, &problem.feed.fractions);
                for k in 0..steps {
                    let t = stage.t_start + k as f64 * tau;
                    mixed.t = t;
                    let b = euler_mix_step(&mut mixed, problem, si, tau, &mut monitor).map_err(annotate(t))?;
                    let a = &mut diag.audit;
                    a.solids.inflow += b.solids_in;
                    a.solids.reaction += b.solids_reaction;
                    a.solids_full_weight.inflow += b.solids_in;
                    a.solids_full_weight.reaction += b.solids_reaction;
                    for c in 0..N_SOLUBLE {
                        a.soluble[c].inflow += b.soluble_in[c];
                        a.soluble[c].reaction += b.soluble_reaction[c];
                    }
                    diag.ode_steps += 1;
                    if rec.next_target < rec.targets.len() && rec.targets[rec.next_target] <= mixed.t + 1e-9 {
                        let mut view = reallocate(&mixed, &grid);
                        view.t = mixed.t;
                        rec.observe(problem, si, &grid, &view, false);
                    }
                }
                mixed.t = stage.t_end;
                state = reallocate(&mixed, &grid);
                let (half, full, _) = inventories(problem, si, &state, &grid);
                diag.audit.solids_full_weight.handover += full - half;
            }
            ModelKind::Pde => {
                for k in 0..steps {
                    let t = stage.t_start + k as f64 * tau;
                    let flows = step_flows(problem, si, t);
                    let ctx = StepContext { problem, grid, flux: cfg.flux, flows, tau };
                    let report: StepReport = match cfg.scheme {
                        Scheme::Explicit => explicit_step(&ctx, &mut state, &mut explicit_ws, &mut monitor),
                        Scheme::SemiImplicit => {
                            semi_implicit_step(&ctx, &cfg.newton, &mut state, &mut implicit_ws, &mut monitor)
                        }
                    }
                    .map_err(annotate(t))?;
                    // pin the clock to the grid of step ends
                    state.t = if k + 1 == steps { stage.t_end } else { stage.t_start + (k + 1) as f64 * tau };
                    diag.pde_steps += 1;
                    diag.newton_iterations += report.newton_iterations as u64;
                    diag.max_newton_residual = diag.max_newton_residual.max(report.newton_residual);
                    diag.min_column_margin = diag.min_column_margin.min(report.min_column_margin);
                    let scale = problem.geometry.area / flows.beta * tau;
                    let b = &report.budget;
                    let a = &mut diag.audit;
                    let out = scale * (b.solids_flux[1] - b.solids_flux[0]);
                    let fed = tau * stage.q_feed * stage.x_feed;
                    for l in [&mut a.solids, &mut a.solids_full_weight] {
                        l.outflow += out;
                        l.inflow += fed;
                        l.reaction += scale * b.solids_source;
                    }
                    for c in 0..N_SOLUBLE {
                        a.soluble[c].outflow += scale * (b.soluble_flux[1][c] - b.soluble_flux[0][c]);
                        a.soluble[c].inflow += tau * stage.q_feed * problem.feed.soluble[c];
                        a.soluble[c].reaction += scale * b.soluble_source[c];
                    }
                    rec.observe(problem, si, &grid, &state, false);
                }
            }
        }
        state.t = stage.t_end;
        rec.observe(problem, si, &grid, &state, false);
    }
    diag.wall_clock = started.elapsed();
    let last_stage = problem.schedule.len() - 1;
    let (half, full, sol) = inventories(problem, last_stage, &state, &grid);
    diag.audit.solids.last = half;
    diag.audit.solids_full_weight.last = full;
    for k in 0..N_SOLUBLE {
        diag.audit.soluble[k].last = sol[k];
    }
    diag.omega = monitor.stats;
    Ok(SimulationOutput { grid, outlets: rec.outlets, snapshots: rec.snapshots, diagnostics: diag })
}

/// Check that a snapshot's cell positions survive the map to depth and back.
pub fn round_trip_error(snap: &Snapshot, grid: &Grid, depth: f64) -> f64 {
    grid.tank_range()
        .map(|i| {
            let xi = grid.xi_cell(i);
            (xi_of_z(z_of_xi(xi, snap.z_bar, depth), snap.z_bar, depth) - xi).abs()
        })
        .fold(0.0, f64::max)
}
