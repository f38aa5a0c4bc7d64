//! Cell-averaged solution and the invariant-region monitor.

use crate::biokinetics::{Particulates, Solubles, N_PARTICULATE};
use crate::discretization::Grid;
use crate::error::StepError;

#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub t: f64,
    /// Total solids per cell, kg/m³.
    pub x: Vec<f64>,
    /// Solids mass fractions per cell.
    pub p: Vec<Particulates>,
    pub s: Vec<Solubles>,
}

impl GridState {
    pub fn zeros(grid: &Grid, fill_p: Particulates) -> Self {
        let m = grid.cells();
        Self { t: 0.0, x: vec![0.0; m], p: vec![fill_p; m], s: vec![[0.0; 6]; m] }
    }

    /// Particulate concentrations of cell `i` in COD units.
    pub fn particulates(&self, i: usize, c_conv: f64) -> Particulates {
        self.p[i].map(|pk| pk * self.x[i] / c_conv)
    }

    /// `Δξ Σ w_j X_j` over the tank with the surface cell at half weight.
    pub fn tank_integral(&self, grid: &Grid) -> f64 {
        (0..grid.cells()).map(|i| grid.tank_weight(i) * self.x[i]).sum::<f64>() * grid.dxi
    }

    /// `Δξ Σ X_j` over cells `0..=N`, the quantity the update keeps in conservation form.
    pub fn scheme_integral(&self, grid: &Grid) -> f64 {
        self.x[Grid::SURFACE..=grid.n + 1].iter().sum::<f64>() * grid.dxi
    }

    pub fn scheme_soluble_integral(&self, grid: &Grid, k: usize) -> f64 {
        self.s[Grid::SURFACE..=grid.n + 1].iter().map(|s| s[k]).sum::<f64>() * grid.dxi
    }
}

/// Absolute slack tolerated as round-off before a state counts as outside the region.
pub const OMEGA_SLACK: f64 = 1e-10;

/// Concentration below which fractions are not checked: they carry no mass.
pub const FRACTION_CHECK_FLOOR: f64 = 1e-9;

/// Largest raw departures from the invariant region seen so far.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OmegaStats {
    /// `max(-X, X - X̂)`.
    pub x_excess: f64,
    pub fraction_sum_dev: f64,
    /// Most negative fraction, as a positive number.
    pub fraction_neg: f64,
    pub soluble_neg: f64,
    pub checks: u64,
}

impl OmegaStats {
    pub fn worst(&self) -> f64 {
        self.x_excess.max(self.fraction_sum_dev).max(self.fraction_neg).max(self.soluble_neg)
    }

    pub fn merge(&mut self, other: &OmegaStats) {
        self.x_excess = self.x_excess.max(other.x_excess);
        self.fraction_sum_dev = self.fraction_sum_dev.max(other.fraction_sum_dev);
        self.fraction_neg = self.fraction_neg.max(other.fraction_neg);
        self.soluble_neg = self.soluble_neg.max(other.soluble_neg);
        self.checks += other.checks;
    }

    pub fn within(&self, slack: f64) -> bool {
        self.worst() <= slack
    }
}

/// Records departures from the region and clamps them away.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaMonitor {
    pub x_hat: f64,
    /// Abort on departures beyond the slack instead of only recording them.
    pub strict: bool,
    /// Project departures back into the region; off only when raw updates are inspected.
    pub clamp: bool,
    pub stats: OmegaStats,
}

impl OmegaMonitor {
    pub fn new(x_hat: f64, strict: bool) -> Self {
        Self { x_hat, strict, clamp: true, stats: OmegaStats::default() }
    }

    /// Records departures but leaves values untouched.
    pub fn observer(x_hat: f64) -> Self {
        Self { clamp: false, ..Self::new(x_hat, false) }
    }

    /// Check and clamp `x` and `s`; `p` must already be normalised by the caller
    /// via [`normalise_fractions`], which reports its own deviation.
    pub fn check_cell(&mut self, i: usize, x: &mut f64, s: &mut Solubles) -> Result<(), StepError> {
        let cell = i as isize - 1;
        if !x.is_finite() || s.iter().any(|v| !v.is_finite()) {
            return Err(StepError::NonFinite { cell });
        }
        let excess = (-*x).max(*x - self.x_hat).max(0.0);
        self.stats.x_excess = self.stats.x_excess.max(excess);
        if self.strict && excess > OMEGA_SLACK {
            return Err(StepError::InvariantViolation { what: "total solids", cell, excess });
        }
        if self.clamp {
            *x = x.clamp(0.0, self.x_hat);
        }
        for v in s.iter_mut() {
            if *v < 0.0 {
                self.stats.soluble_neg = self.stats.soluble_neg.max(-*v);
                if self.strict && -*v > OMEGA_SLACK {
                    return Err(StepError::InvariantViolation { what: "soluble", cell, excess: -*v });
                }
                if self.clamp {
                    *v = 0.0;
                }
            }
        }
        self.stats.checks += 1;
        Ok(())
    }

    pub fn record_fractions(&mut self, i: usize, dev: FractionDeviation) -> Result<(), StepError> {
        let cell = i as isize - 1;
        self.stats.fraction_sum_dev = self.stats.fraction_sum_dev.max(dev.sum_dev);
        self.stats.fraction_neg = self.stats.fraction_neg.max(dev.neg);
        if self.strict && dev.sum_dev > OMEGA_SLACK {
            return Err(StepError::InvariantViolation { what: "fraction sum", cell, excess: dev.sum_dev });
        }
        if self.strict && dev.neg > OMEGA_SLACK {
            return Err(StepError::InvariantViolation { what: "fraction sign", cell, excess: dev.neg });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FractionDeviation {
    pub sum_dev: f64,
    pub neg: f64,
}

/// Clamp negative fractions and rescale to unit sum, returning the raw deviation.
pub fn normalise_fractions(p: &mut Particulates) -> FractionDeviation {
    let sum: f64 = p.iter().sum();
    let neg = p.iter().fold(0.0_f64, |m, &v| m.max(-v));
    let dev = FractionDeviation { sum_dev: (sum - 1.0).abs(), neg };
    if neg > 0.0 {
        p.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    let clamped: f64 = p.iter().sum();
    if clamped > 0.0 {
        p.iter_mut().for_each(|v| *v /= clamped);
    } else {
        *p = [1.0 / N_PARTICULATE as f64; N_PARTICULATE];
    }
    dev
}
