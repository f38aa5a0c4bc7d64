//! Explicit Euler step for total solids, solids fractions and substrates.
//!
//! Total solids are advanced first; the fractions are then transported as
//! `p X` with the same face fluxes upwinded on `p`, and the substrates with the
//! liquid-phase velocity `ρ_X q̃ - Φ` upwinded on `S / (ρ_X - X)`.

use crate::biokinetics::{Particulates, Reactions, Solubles, N_PARTICULATE, N_SOLUBLE};
use crate::discretization::{upwind, FluxSet, Grid, NumericalFlux, StepFlows};
use crate::error::StepError;
use crate::scenario::Problem;
use crate::state::{normalise_fractions, GridState, OmegaMonitor, FRACTION_CHECK_FLOOR};

/// Everything frozen over one step.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub problem: &'a Problem,
    pub grid: Grid,
    pub flux: NumericalFlux,
    pub flows: StepFlows,
    pub tau: f64,
}

impl StepContext<'_> {
    pub fn lambda(&self) -> f64 {
        self.tau / self.grid.dxi
    }

    pub fn mu(&self) -> f64 {
        self.tau / (self.grid.dxi * self.grid.dxi)
    }

    pub fn rho_x(&self) -> f64 {
        self.problem.constitutive.params.rho_solid
    }

    fn extracting(&self) -> bool {
        self.flows.v.extract > 0.0
    }

    fn underflowing(&self) -> bool {
        self.flows.v.under > 0.0
    }

    /// Cells set to zero because their outlet is closed.
    pub fn closed_outlet(&self, i: usize) -> bool {
        (i == 0 && !self.extracting()) || (i == self.grid.outlet() && !self.underflowing())
    }

    /// `λ β q_f`, the feed coefficient of the surface cell.
    pub fn feed_coefficient(&self) -> f64 {
        self.lambda() * self.flows.beta * self.flows.v.feed
    }
}

/// Mass exchanged across the tank walls and produced inside it during one step,
/// per unit cross-section in `ξ` units: multiply by `A / β` for kilograms per second.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepBudget {
    /// Solids flux through the surface face (negative leaves upwards) and the bottom face.
    pub solids_flux: [f64; 2],
    pub soluble_flux: [Solubles; 2],
    /// `Δξ Σ γ_j R_j`.
    pub solids_source: f64,
    pub soluble_source: Solubles,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub newton_iterations: usize,
    /// `‖φ(u)‖₁ / ‖X̃‖₁` of the accepted Newton iterate.
    pub newton_residual: f64,
    /// Smallest column-dominance margin over all assembled matrices.
    pub min_column_margin: f64,
    pub budget: StepBudget,
}

/// Scratch buffers reused across steps.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    pub fx: Vec<f64>,
    pub d: Vec<f64>,
    pub fluxes: FluxSet,
    pub reactions: Vec<Reactions>,
    pub x_new: Vec<f64>,
    pub px_new: Vec<Particulates>,
    pub s_new: Vec<Solubles>,
    pub face_p: Vec<Particulates>,
    pub face_s: Vec<Solubles>,
    pub y: Vec<f64>,
}

impl Workspace {
    pub fn new(grid: &Grid) -> Self {
        let m = grid.cells();
        let nf = grid.faces();
        Self {
            fx: vec![0.0; m],
            d: vec![0.0; m],
            fluxes: FluxSet::new(grid),
            reactions: vec![Reactions::default(); m],
            x_new: vec![0.0; m],
            px_new: vec![[0.0; N_PARTICULATE]; m],
            s_new: vec![[0.0; N_SOLUBLE]; m],
            face_p: vec![[0.0; N_PARTICULATE]; nf],
            face_s: vec![[0.0; N_SOLUBLE]; nf],
            y: vec![0.0; m],
        }
    }

    /// Batch fluxes, convective face fluxes and reaction terms at the old time level.
    pub fn prepare(&mut self, ctx: &StepContext, state: &GridState, with_diffusion: bool) -> Result<(), StepError> {
        let con = &ctx.problem.constitutive;
        let kin = &ctx.problem.kinetics;
        let rho = ctx.rho_x();
        for (i, &x) in state.x.iter().enumerate() {
            if !x.is_finite() {
                return Err(StepError::NonFinite { cell: i as isize - 1 });
            }
            if x >= rho * (1.0 - 1e-6) {
                return Err(StepError::NearSolidDensity { x });
            }
            let xc = x.max(0.0);
            self.fx[i] = con.batch_flux(xc);
            self.y[i] = 1.0 / (rho - x);
            self.reactions[i] = if ctx.grid.tank_weight(i) > 0.0 {
                kin.evaluate_fractions(xc, &state.p[i], &state.s[i])
            } else {
                Reactions::default()
            };
        }
        self.fluxes.assemble_convective(&ctx.grid, con, &ctx.flows, ctx.flux, &state.x, &self.fx)?;
        if with_diffusion {
            for (d, &x) in self.d.iter_mut().zip(&state.x) {
                *d = con.integrated_diffusion(x.max(0.0));
            }
            self.fluxes.assemble_diffusive(&ctx.grid, ctx.flows.beta, &self.d);
        } else {
            self.fluxes.diff.iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(())
    }

    /// `κ X - λ Δℱ + feed + τ γ R`, without compression, for every cell.
    pub fn convective_update(&mut self, ctx: &StepContext, state: &GridState) {
        let lam = ctx.lambda();
        for i in 0..ctx.grid.cells() {
            if ctx.closed_outlet(i) {
                self.x_new[i] = 0.0;
                continue;
            }
            let conv = &self.fluxes.conv;
            let mut v = ctx.flows.kappa(&ctx.grid, i, ctx.tau) * state.x[i] - lam * (conv[i + 1] - conv[i]);
            if i == Grid::SURFACE {
                v += ctx.feed_coefficient() * ctx.flows.x_feed;
            }
            v += ctx.tau * ctx.grid.tank_weight(i) * self.reactions[i].total;
            self.x_new[i] = v;
        }
    }

    /// Explicit `pX` and `S` updates of cell `i` from face quantities already in
    /// `face_p` and `face_s`.
    pub fn explicit_fraction_update(&mut self, ctx: &StepContext, state: &GridState, i: usize) {
        let lam = ctx.lambda();
        let kappa = ctx.flows.kappa(&ctx.grid, i, ctx.tau);
        let gamma = ctx.grid.tank_weight(i);
        let c = ctx.problem.c_conv();
        let feed = ctx.feed_coefficient();
        let r = &self.reactions[i];
        let fp = &ctx.problem.feed;
        for k in 0..N_PARTICULATE {
            let mut v = kappa * state.x[i] * state.p[i][k] - lam * (self.face_p[i + 1][k] - self.face_p[i][k]);
            if i == Grid::SURFACE {
                v += feed * fp.fractions[k] * ctx.flows.x_feed;
            }
            self.px_new[i][k] = v + ctx.tau * gamma * c * r.particulate[k];
        }
        for k in 0..N_SOLUBLE {
            let mut v = kappa * state.s[i][k] - lam * (self.face_s[i + 1][k] - self.face_s[i][k]);
            if i == Grid::SURFACE {
                v += feed * fp.soluble[k];
            }
            self.s_new[i][k] = v + ctx.tau * gamma * r.soluble[k];
        }
    }

    /// Upwinded fraction and substrate fluxes from total face fluxes `phi(f)`,
    /// with substrate weights `y` at the time level used for `s`.
    pub fn face_transport(&mut self, ctx: &StepContext, phi: impl Fn(&FluxSet, usize) -> f64, p: &[Particulates], s: &[Solubles]) {
        let m = ctx.grid.cells();
        let rho = ctx.rho_x();
        for f in 0..ctx.grid.faces() {
            let (l, r) = (f.saturating_sub(1), f.min(m - 1));
            let ph = phi(&self.fluxes, f);
            let liquid = rho * self.fluxes.q_tilde[f] - ph;
            let (yl, yr) = (self.y[l], self.y[r]);
            self.face_p[f] = std::array::from_fn(|k| upwind(ph, p[l][k], p[r][k]));
            self.face_s[f] = std::array::from_fn(|k| upwind(liquid, s[l][k] * yl, s[r][k] * yr));
        }
    }

    /// Budget of the step from the face quantities currently stored.
    pub fn budget(&self, ctx: &StepContext, phi: impl Fn(&FluxSet, usize) -> f64) -> StepBudget {
        let g = &ctx.grid;
        let (top, bottom) = (Grid::SURFACE, g.n + 2);
        let mut b = StepBudget {
            solids_flux: [phi(&self.fluxes, top), phi(&self.fluxes, bottom)],
            soluble_flux: [self.face_s[top], self.face_s[bottom]],
            ..Default::default()
        };
        for i in Grid::SURFACE..=g.n + 1 {
            let w = g.tank_weight(i) * g.dxi;
            b.solids_source += w * self.reactions[i].total;
            for k in 0..N_SOLUBLE {
                b.soluble_source[k] += w * self.reactions[i].soluble[k];
            }
        }
        b
    }

    /// Move the new values into `state`, recovering fractions and running the monitor.
    pub fn commit(&mut self, ctx: &StepContext, state: &mut GridState, monitor: &mut OmegaMonitor) -> Result<(), StepError> {
        for i in 0..ctx.grid.cells() {
            let mut x = self.x_new[i];
            let mut s = self.s_new[i];
            monitor.check_cell(i, &mut x, &mut s)?;
            if ctx.closed_outlet(i) {
                state.x[i] = 0.0;
                state.s[i] = [0.0; N_SOLUBLE];
                continue;
            }
            if self.x_new[i] > 0.0 {
                let mut p = self.px_new[i].map(|v| v / self.x_new[i]);
                let dev = normalise_fractions(&mut p);
                if self.x_new[i] >= FRACTION_CHECK_FLOOR {
                    monitor.record_fractions(i, dev)?;
                }
                state.p[i] = p;
            }
            state.x[i] = x;
            state.s[i] = s;
        }
        state.t += ctx.tau;
        Ok(())
    }
}

/// One explicit step.
pub fn explicit_step(
    ctx: &StepContext,
    state: &mut GridState,
    ws: &mut Workspace,
    monitor: &mut OmegaMonitor,
) -> Result<StepReport, StepError> {
    ws.prepare(ctx, state, true)?;
    ws.convective_update(ctx, state);
    let lam = ctx.lambda();
    for i in ctx.grid.cells_range() {
        if !ctx.closed_outlet(i) {
            ws.x_new[i] += lam * (ws.fluxes.diff[i + 1] - ws.fluxes.diff[i]);
        }
    }
    ws.face_transport(ctx, FluxSet::total, &state.p, &state.s);
    for i in ctx.grid.cells_range() {
        if !ctx.closed_outlet(i) {
            ws.explicit_fraction_update(ctx, state, i);
        }
    }
    let budget = ws.budget(ctx, FluxSet::total);
    ws.commit(ctx, state, monitor)?;
    Ok(StepReport { newton_iterations: 0, newton_residual: 0.0, min_column_margin: f64::INFINITY, budget })
}
