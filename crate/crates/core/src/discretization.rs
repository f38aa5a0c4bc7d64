//! Grid, numerical fluxes and time-step bounds.
//!
//! Cells `j = -1..=N+1` are stored at index `j + 1`; faces `ξ_{j+1/2}` for
//! `j = -2..=N+1` at index `j + 2`, so face `f` separates cells `f - 1` and `f`.
//! Cell `-1` is the extraction pipe, cell `N + 1` the underflow outlet and cell 0
//! straddles the surface, with the feed inlet at its centre.

use crate::biokinetics::ReactionBounds;
use crate::constitutive::Constitutive;
use crate::error::{ConfigError, StepError};
use crate::scenario::Velocities;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub dxi: f64,
}

impl Grid {
    pub fn new(n: usize) -> Self {
        Self { n, dxi: 1.0 / (n as f64 + 0.5) }
    }

    pub fn cells(&self) -> usize {
        self.n + 3
    }

    pub fn cells_range(&self) -> std::ops::Range<usize> {
        0..self.cells()
    }

    /// Storage indices of the tank cells `j = 0..=N`.
    pub fn tank_range(&self) -> std::ops::RangeInclusive<usize> {
        Self::SURFACE..=self.n + 1
    }

    pub fn faces(&self) -> usize {
        self.n + 4
    }

    /// Storage index of the surface cell `j = 0`.
    pub const SURFACE: usize = 1;

    /// Storage index of the underflow cell `j = N + 1`.
    pub fn outlet(&self) -> usize {
        self.n + 2
    }

    /// Signed cell number `j` of storage index `i`.
    pub fn j(&self, i: usize) -> isize {
        i as isize - 1
    }

    pub fn xi_cell(&self, i: usize) -> f64 {
        (i as f64 - 1.0) * self.dxi
    }

    pub fn xi_face(&self, f: usize) -> f64 {
        (f as f64 - 1.5) * self.dxi
    }

    /// Quadrature weight of cell `i` inside the tank: half for the surface cell.
    pub fn tank_weight(&self, i: usize) -> f64 {
        match i {
            Self::SURFACE => 0.5,
            i if i > Self::SURFACE && i <= self.n + 1 => 1.0,
            _ => 0.0,
        }
    }

    /// Whether face `f` lies strictly inside the tank.
    pub fn interior_face(&self, f: usize) -> bool {
        (2..=self.n + 1).contains(&f)
    }
}

#[inline]
pub fn upwind(a: f64, b: f64, c: f64) -> f64 {
    a.max(0.0) * b + a.min(0.0) * c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NumericalFlux {
    #[default]
    EngquistOsher,
    Godunov,
}

/// Engquist–Osher flux for a unimodal batch flux, given `f` at both states.
#[inline]
pub fn engquist_osher(u: f64, v: f64, fu: f64, fv: f64, x_star: f64, f_star: f64) -> f64 {
    match (u <= x_star, v <= x_star) {
        (true, true) => fu,
        (false, true) => f_star,
        (true, false) => fu + fv - f_star,
        (false, false) => fv,
    }
}

/// Godunov flux for a unimodal batch flux.
#[inline]
pub fn godunov(u: f64, v: f64, fu: f64, fv: f64, x_star: f64, f_star: f64) -> f64 {
    if u <= v {
        fu.min(fv)
    } else if v <= x_star && x_star <= u {
        f_star
    } else {
        fu.max(fv)
    }
}

impl NumericalFlux {
    #[inline]
    pub fn eval(self, u: f64, v: f64, fu: f64, fv: f64, x_star: f64, f_star: f64) -> f64 {
        match self {
            Self::EngquistOsher => engquist_osher(u, v, fu, fv, x_star, f_star),
            Self::Godunov => godunov(u, v, fu, fv, x_star, f_star),
        }
    }
}

/// Flow state frozen over one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepFlows {
    pub v: Velocities,
    pub beta: f64,
    /// `z̄'` of the current stage.
    pub surface_rate: f64,
    pub x_feed: f64,
}

impl StepFlows {
    pub fn q_tilde(&self, grid: &Grid, f: usize) -> f64 {
        let xi = grid.xi_face(f);
        if f <= 1 {
            if self.v.extract > 0.0 {
                -self.beta * (xi * (self.v.under + self.v.extract) + self.v.extract)
            } else {
                0.0
            }
        } else {
            crate::scenario::alpha(xi, self.surface_rate, self.beta) + self.beta * self.v.under
        }
    }

    /// Coefficient of the old value in the update of cell `i`.
    pub fn kappa(&self, grid: &Grid, i: usize, tau: f64) -> f64 {
        let j = grid.j(i);
        let extracting = self.v.extract > 0.0;
        match j {
            j if j < 0 && extracting => 1.0 - tau * self.beta * (self.v.under + self.v.extract),
            j if j < 0 => 1.0,
            0 if extracting => 1.0,
            // half of the surface cell lies in the mixture
            0 => 1.0 + 0.5 * tau * self.beta * (self.v.under - self.v.feed),
            _ => 1.0 + tau * self.beta * self.surface_rate,
        }
    }
}

/// Per-face fluxes of total solids.
#[derive(Debug, Clone, Default)]
pub struct FluxSet {
    pub q_tilde: Vec<f64>,
    /// Convective flux `ℱ`.
    pub conv: Vec<f64>,
    /// Compression flux `𝒥`.
    pub diff: Vec<f64>,
}

impl FluxSet {
    pub fn new(grid: &Grid) -> Self {
        let nf = grid.faces();
        Self { q_tilde: vec![0.0; nf], conv: vec![0.0; nf], diff: vec![0.0; nf] }
    }

    #[inline]
    pub fn total(&self, f: usize) -> f64 {
        self.conv[f] - self.diff[f]
    }

    /// Fill `q_tilde` and `conv` from the cell values `x` and batch fluxes `fx`.
    pub fn assemble_convective(
        &mut self,
        grid: &Grid,
        con: &Constitutive,
        flows: &StepFlows,
        flux: NumericalFlux,
        x: &[f64],
        fx: &[f64],
    ) -> Result<(), StepError> {
        let n = grid.n;
        let beta = flows.beta;
        let (xs, fs) = (con.x_star, con.f_star);
        for f in 0..grid.faces() {
            self.q_tilde[f] = flows.q_tilde(grid, f);
        }
        // extraction pipe
        for f in 0..=1 {
            self.conv[f] = if flows.v.extract > 0.0 {
                if self.q_tilde[f] > 0.0 {
                    return Err(StepError::InwardBoundaryFlux { face: f as isize - 2, value: self.q_tilde[f] });
                }
                self.q_tilde[f] * x[f]
            } else {
                0.0
            };
        }
        for f in 2..=n + 1 {
            let (l, r) = (f - 1, f);
            self.conv[f] =
                upwind(self.q_tilde[f], x[l], x[r]) + beta * flux.eval(x[l], x[r], fx[l], fx[r], xs, fs);
        }
        for f in n + 2..=n + 3 {
            if flows.v.under > 0.0 && self.q_tilde[f] < 0.0 {
                return Err(StepError::InwardBoundaryFlux { face: f as isize - 2, value: self.q_tilde[f] });
            }
            self.conv[f] = self.q_tilde[f] * x[f - 1];
        }
        Ok(())
    }

    /// Fill `diff` from tabulated `𝒟` values at the cells.
    pub fn assemble_diffusive(&mut self, grid: &Grid, beta: f64, d: &[f64]) {
        let k = beta * beta / grid.dxi;
        for f in 0..grid.faces() {
            self.diff[f] = if grid.interior_face(f) { k * (d[f] - d[f - 1]) } else { 0.0 };
        }
    }
}

/// Constants of the two time-step restrictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflConstants {
    pub zeta: f64,
    pub m_q1: f64,
    pub m_q2: f64,
    pub f_prime_sup: f64,
    pub a_sup: f64,
    pub reaction: ReactionBounds,
    pub rho_x: f64,
    pub x_hat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    Explicit,
    SemiImplicit,
}

pub const DEFAULT_CFL_SAFETY: f64 = 0.95;

impl CflConstants {
    pub fn c1(&self) -> f64 {
        self.zeta * (self.m_q2 + self.f_prime_sup)
    }

    pub fn c2(&self) -> f64 {
        self.zeta * self.zeta * self.a_sup
    }

    /// Left-hand side of the time-step restriction divided by `τ`, in s⁻¹.
    pub fn rate_bound(&self, scheme: Scheme, dxi: f64) -> f64 {
        let c1 = self.c1();
        let c2 = match scheme {
            Scheme::Explicit => self.c2(),
            Scheme::SemiImplicit => 0.0,
        };
        let solids = c1 + c2 / dxi;
        // the liquid-phase velocity carries rho_X q̃, bounded by ζ M_q2 rho_X
        let liquid = (self.zeta * self.rho_x * self.m_q2 + c1 * self.x_hat + c2 * self.x_hat / dxi)
            / (self.rho_x - self.x_hat);
        self.zeta * self.m_q1 + self.reaction.max() + 2.0 / dxi * solids.max(liquid)
    }

    /// Largest admissible step scaled by `safety`.
    pub fn tau(&self, scheme: Scheme, dxi: f64, safety: f64) -> Result<f64, ConfigError> {
        let rate = self.rate_bound(scheme, dxi);
        let tau = safety / rate;
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(ConfigError::invalid("numerics", "time-step bound is not positive and finite"));
        }
        Ok(tau)
    }
}
