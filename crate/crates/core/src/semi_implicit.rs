//! Semi-implicit step: compression treated implicitly.
//!
//! An explicit predictor without the compression flux is followed by a Newton
//! solve of `X + β²μ T 𝒟(X) = X̃` on the tank cells, where `T` is the discrete
//! Neumann Laplacian. Fractions and substrates are then advanced by one
//! linearly implicit tridiagonal solve each, using the mixed face flux
//! `ℱⁿ - 𝒥ⁿ⁺¹`.

use crate::biokinetics::{Particulates, Solubles, N_PARTICULATE, N_SOLUBLE};
use crate::constitutive::Constitutive;
use crate::discretization::{FluxSet, Grid};
use crate::error::{ConfigError, StepError};
use crate::explicit_scheme::{StepContext, StepReport, Workspace};
use crate::state::{GridState, OmegaMonitor};
use crate::tridiag::Tridiagonal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Relative ℓ₁ step-size tolerance.
    pub epsilon: f64,
    pub max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { epsilon: 1e-8, max_iter: 50 }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(ConfigError::invalid("numerics", "Newton tolerance must be positive"));
        }
        if self.max_iter == 0 {
            return Err(ConfigError::invalid("numerics", "Newton iteration cap must be at least 1"));
        }
        Ok(())
    }
}

/// Below this total solids a fraction row is dropped from the linear system.
pub const EMPTY_ROW: f64 = 1e-14;

/// Outcome of [`newton_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub min_column_margin: f64,
}

/// Buffers of the semi-implicit step.
#[derive(Debug, Clone, Default)]
pub struct ImplicitWorkspace {
    pub base: Workspace,
    pub x_tilde: Vec<f64>,
    d_new: Vec<f64>,
    tri: Tridiagonal,
    rhs_p: Vec<Particulates>,
    rhs_s: Vec<Solubles>,
}

impl ImplicitWorkspace {
    pub fn new(grid: &Grid) -> Self {
        let rows = grid.n + 1;
        Self {
            base: Workspace::new(grid),
            x_tilde: vec![0.0; grid.cells()],
            d_new: vec![0.0; grid.cells()],
            tri: Tridiagonal::with_size(rows),
            rhs_p: vec![[0.0; N_PARTICULATE]; rows],
            rhs_s: vec![[0.0; N_SOLUBLE]; rows],
        }
    }
}

/// `(T v)_j` for the Neumann Laplacian on `v[0..=N]`.
fn apply_laplacian(v: &[f64], j: usize) -> f64 {
    let n = v.len() - 1;
    let mut r = 0.0;
    if j > 0 {
        r += v[j] - v[j - 1];
    }
    if j < n {
        r += v[j] - v[j + 1];
    }
    r
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Solve `u + coeff T 𝒟(u) = x_tilde` by Newton's method started at `u0`.
///
/// Terminates when `‖u^{k+1} - u^k‖₁ < ε ‖u^k‖₁`.
pub fn newton_solve(
    con: &Constitutive,
    x_tilde: &[f64],
    u0: &[f64],
    coeff: f64,
    config: &NewtonConfig,
    tri: &mut Tridiagonal,
) -> Result<NewtonOutcome, StepError> {
    let rows = x_tilde.len();
    debug_assert_eq!(tri.len(), rows);
    let mut u = u0.to_vec();
    let mut min_margin = f64::INFINITY;
    if l1(&u) == 0.0 {
        return Ok(NewtonOutcome { u: x_tilde.to_vec(), iterations: 1, min_column_margin: 1.0 });
    }
    let mut d = vec![0.0; rows];
    let mut slope = vec![0.0; rows];
    let mut delta = vec![[0.0]; rows];
    for it in 1..=config.max_iter {
        for j in 0..rows {
            (d[j], slope[j]) = con.integrated_diffusion_with_slope(u[j].max(0.0));
        }
        for j in 0..rows {
            let has_up = j > 0;
            let has_down = j + 1 < rows;
            let t_jj = has_up as u8 as f64 + has_down as u8 as f64;
            tri.diag[j] = 1.0 + coeff * t_jj * slope[j];
            tri.sub[j] = if has_up { -coeff * slope[j - 1] } else { 0.0 };
            tri.sup[j] = if has_down { -coeff * slope[j + 1] } else { 0.0 };
            delta[j][0] = -(u[j] + coeff * apply_laplacian(&d, j) - x_tilde[j]);
        }
        min_margin = min_margin.min(tri.min_column_margin());
        tri.solve(&mut delta)?;
        let step: f64 = delta.iter().map(|v| v[0].abs()).sum();
        let base = l1(&u);
        u.iter_mut().zip(&delta).for_each(|(x, dx)| *x += dx[0]);
        if step < config.epsilon * base {
            return Ok(NewtonOutcome { u, iterations: it, min_column_margin: min_margin });
        }
    }
    for j in 0..rows {
        d[j] = con.integrated_diffusion(u[j].max(0.0));
    }
    let residual: f64 = (0..rows).map(|j| (u[j] + coeff * apply_laplacian(&d, j) - x_tilde[j]).abs()).sum();
    Err(StepError::NewtonDiverged { iterations: config.max_iter, residual: residual / l1(x_tilde).max(f64::MIN_POSITIVE) })
}

/// Tridiagonal matrix `M(u)` with `M(u) u = u + coeff T 𝒟(u)`, built from secant slopes.
pub fn secant_matrix(con: &Constitutive, u: &[f64], coeff: f64) -> Tridiagonal {
    let rows = u.len();
    let d: Vec<f64> = u.iter().map(|&x| con.integrated_diffusion(x.max(0.0))).collect();
    let secant = |j: usize| {
        let dx = u[j + 1] - u[j];
        if dx != 0.0 {
            (d[j + 1] - d[j]) / dx
        } else {
            0.0
        }
    };
    let mut m = Tridiagonal::with_size(rows);
    for j in 0..rows {
        let up = if j > 0 { secant(j - 1) } else { 0.0 };
        let down = if j + 1 < rows { secant(j) } else { 0.0 };
        m.diag[j] = 1.0 + coeff * (up + down);
        m.sub[j] = -coeff * up;
        m.sup[j] = -coeff * down;
    }
    m
}

/// One semi-implicit step.
pub fn semi_implicit_step(
    ctx: &StepContext,
    newton: &NewtonConfig,
    state: &mut GridState,
    ws: &mut ImplicitWorkspace,
    monitor: &mut OmegaMonitor,
) -> Result<StepReport, StepError> {
    let grid = ctx.grid;
    let rows = grid.n + 1;
    let lam = ctx.lambda();
    let beta = ctx.flows.beta;
    let con = &ctx.problem.constitutive;
    let b = &mut ws.base;
    b.prepare(ctx, state, false)?;
    b.convective_update(ctx, state);
    ws.x_tilde.copy_from_slice(&b.x_new);

    // total solids on the tank cells
    let tank = grid.tank_range();
    let coeff = beta * beta * ctx.mu();
    let out = newton_solve(con, &ws.x_tilde[tank.clone()], &state.x[tank.clone()], coeff, newton, &mut ws.tri)?;
    ws.d_new.iter_mut().for_each(|v| *v = 0.0);
    for (j, i) in tank.clone().enumerate() {
        ws.d_new[i] = con.integrated_diffusion(out.u[j].max(0.0));
    }
    b.fluxes.assemble_diffusive(&grid, beta, &ws.d_new);
    // flux-consistent value: keeps the fraction system's row sums exact
    let mut residual = 0.0;
    for (j, i) in tank.clone().enumerate() {
        b.x_new[i] = ws.x_tilde[i] + lam * (b.fluxes.diff[i + 1] - b.fluxes.diff[i]);
        residual += (b.x_new[i] - out.u[j]).abs();
    }
    let newton_residual = residual / l1(&ws.x_tilde[tank.clone()]).max(f64::MIN_POSITIVE);

    // substrate weights at the new level; boundary cells keep theirs for the explicit update
    let rho = ctx.rho_x();
    for i in tank.clone() {
        if b.x_new[i] >= rho * (1.0 - 1e-6) {
            return Err(StepError::NearSolidDensity { x: b.x_new[i] });
        }
    }

    // boundary cells: explicit with old values and the old-level weights
    b.face_transport(ctx, FluxSet::total, &state.p, &state.s);
    for i in [0, grid.outlet()] {
        if !ctx.closed_outlet(i) {
            b.explicit_fraction_update(ctx, state, i);
        }
    }

    let mut min_margin = out.min_column_margin;
    let kappa = |i: usize| ctx.flows.kappa(&grid, i, ctx.tau);
    let c = ctx.problem.c_conv();
    let feed = ctx.feed_coefficient();
    let phi = |f: usize| b.fluxes.total(f);

    // fractions
    let tri = &mut ws.tri;
    for (r, i) in tank.clone().enumerate() {
        let (up, down) = (phi(i), phi(i + 1));
        tri.diag[r] = b.x_new[i] + lam * (down.max(0.0) - up.min(0.0));
        tri.sup[r] = if r + 1 < rows { lam * down.min(0.0) } else { 0.0 };
        tri.sub[r] = if r > 0 { -lam * up.max(0.0) } else { 0.0 };
        let gamma = grid.tank_weight(i);
        let rc = &b.reactions[i].particulate;
        ws.rhs_p[r] = std::array::from_fn(|k| {
            let mut v = kappa(i) * state.x[i] * state.p[i][k] + ctx.tau * gamma * c * rc[k];
            if i == Grid::SURFACE {
                v += feed * ctx.problem.feed.fractions[k] * ctx.flows.x_feed;
            }
            v
        });
    }
    eliminate_empty_rows(tri, &mut ws.rhs_p, &b.x_new[tank.clone()], &state.p[tank.clone()]);
    min_margin = min_margin.min(tri.min_column_margin());
    tri.solve(&mut ws.rhs_p)?;
    for (r, i) in tank.clone().enumerate() {
        b.px_new[i] = ws.rhs_p[r].map(|v| v * b.x_new[i]);
    }

    // substrates
    for i in tank.clone() {
        b.y[i] = 1.0 / (rho - b.x_new[i]);
    }
    let theta = |f: usize| rho * b.fluxes.q_tilde[f] - phi(f);
    for (r, i) in tank.clone().enumerate() {
        let (up, down) = (theta(i), theta(i + 1));
        tri.diag[r] = 1.0 + lam * (down.max(0.0) - up.min(0.0)) * b.y[i];
        tri.sup[r] = if r + 1 < rows { lam * down.min(0.0) * b.y[i + 1] } else { 0.0 };
        tri.sub[r] = if r > 0 { -lam * up.max(0.0) * b.y[i - 1] } else { 0.0 };
        let gamma = grid.tank_weight(i);
        let rs = &b.reactions[i].soluble;
        ws.rhs_s[r] = std::array::from_fn(|k| {
            let mut v = kappa(i) * state.s[i][k] + ctx.tau * gamma * rs[k];
            if i == Grid::SURFACE {
                v += feed * ctx.problem.feed.soluble[k];
            }
            v
        });
    }
    min_margin = min_margin.min(tri.min_column_margin());
    tri.solve(&mut ws.rhs_s)?;
    for (r, i) in tank.clone().enumerate() {
        b.s_new[i] = ws.rhs_s[r];
    }

    // the surface and bottom faces carry S from the tank side at the new level
    let mut budget = b.budget(ctx, FluxSet::total);
    budget.soluble_flux = [
        std::array::from_fn(|k| {
            let t = theta(Grid::SURFACE);
            t.min(0.0) * b.y[Grid::SURFACE] * b.s_new[Grid::SURFACE][k]
        }),
        std::array::from_fn(|k| {
            let t = theta(grid.n + 2);
            t.max(0.0) * b.y[grid.n + 1] * b.s_new[grid.n + 1][k]
        }),
    ];
    b.commit(ctx, state, monitor)?;
    Ok(StepReport { newton_iterations: out.iterations, newton_residual, min_column_margin: min_margin, budget })
}

/// Drop rows whose cell is empty: their fractions keep the old value, which moves
/// their column to the right-hand side.
fn eliminate_empty_rows(tri: &mut Tridiagonal, rhs: &mut [Particulates], x_new: &[f64], p_old: &[Particulates]) {
    let rows = x_new.len();
    for r in 0..rows {
        if x_new[r] >= EMPTY_ROW {
            continue;
        }
        if r > 0 {
            let coef = tri.sup[r - 1];
            for k in 0..N_PARTICULATE {
                rhs[r - 1][k] -= coef * p_old[r][k];
            }
            tri.sup[r - 1] = 0.0;
        }
        if r + 1 < rows {
            let coef = tri.sub[r + 1];
            for k in 0..N_PARTICULATE {
                rhs[r + 1][k] -= coef * p_old[r][k];
            }
            tri.sub[r + 1] = 0.0;
        }
        tri.pin_row(r);
        rhs[r] = p_old[r];
    }
}
