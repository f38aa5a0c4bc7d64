//! Operating schedule, tank geometry and the moving surface.
//!
//! The mixture occupies `[z̄(t), B]` with depth measured downwards. The map
//! `ξ = (z - z̄)/(B - z̄)` pins the surface at `ξ = 0` and the bottom at `ξ = 1`;
//! the extraction pipe above the surface maps to `ξ < 0`.

use std::sync::OnceLock;

use crate::biokinetics::{
    Asm1Params, Kinetics, Particulates, ReactionBounds, SamplingBox, Solubles, BOUND_SAMPLES, BOUND_SEED, N_PARTICULATE,
};
use crate::constitutive::{Constitutive, ConstitutiveParams};
use crate::error::ConfigError;

pub const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Pde,
    Mixing,
}

/// One stage with constant flows. Flows in m³/s, times in s.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub t_start: f64,
    pub t_end: f64,
    pub model: ModelKind,
    pub q_feed: f64,
    pub q_under: f64,
    pub q_extract: f64,
    /// Feed solids concentration, kg/m³.
    pub x_feed: f64,
}

impl Stage {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Bulk velocities of one stage: flows divided by the cross-section, m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Velocities {
    pub feed: f64,
    pub under: f64,
    pub extract: f64,
}

impl Velocities {
    /// Surface velocity `z̄'`; positive when the level drops.
    pub fn surface(&self) -> f64 {
        if self.extract > 0.0 {
            self.under + self.extract
        } else {
            self.under - self.feed
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TankGeometry {
    pub depth: f64,
    pub area: f64,
    /// Smallest admissible mixture depth `B - z̄`.
    pub min_depth: f64,
    pub z_bar0: f64,
}

impl TankGeometry {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| Err(ConfigError::invalid("geometry", msg));
        if !(self.area > 0.0) || !(self.depth > 0.0) {
            return bad("depth and area must be positive");
        }
        if !(0.0 < self.min_depth && self.min_depth <= self.depth) {
            return bad("minimum depth must lie in (0, depth]");
        }
        if !(0.0 <= self.z_bar0 && self.z_bar0 < self.depth) {
            return bad("initial surface must lie in [0, depth)");
        }
        Ok(())
    }
}

/// Piecewise-affine surface position induced by the schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrajectory {
    depth: f64,
    area: f64,
    starts: Vec<f64>,
    ends: Vec<f64>,
    z_start: Vec<f64>,
    rates: Vec<f64>,
    /// Largest `1/(B - z̄)` over the schedule.
    pub zeta_effective: f64,
}

impl BoundaryTrajectory {
    pub fn build(schedule: &[Stage], geometry: &TankGeometry) -> Result<Self, ConfigError> {
        geometry.validate()?;
        let mut z = geometry.z_bar0;
        let mut out = Self {
            depth: geometry.depth,
            area: geometry.area,
            starts: Vec::with_capacity(schedule.len()),
            ends: Vec::with_capacity(schedule.len()),
            z_start: Vec::with_capacity(schedule.len()),
            rates: Vec::with_capacity(schedule.len()),
            zeta_effective: 1.0 / (geometry.depth - geometry.z_bar0),
        };
        let max_surface = geometry.depth - geometry.min_depth;
        if z > max_surface {
            return Err(ConfigError::invalid("geometry", "initial mixture shallower than the minimum depth"));
        }
        for (i, stage) in schedule.iter().enumerate() {
            let v = velocities(stage, geometry.area);
            let rate = v.surface();
            let z_end = z + rate * stage.duration();
            if z_end < -1e-12 {
                return Err(ConfigError::invalid(
                    "stages",
                    format!("stage {} overfills the tank (surface at {z_end:.4} m)", i + 1),
                ));
            }
            if z_end > max_surface + 1e-12 {
                return Err(ConfigError::invalid(
                    "stages",
                    format!(
                        "stage {} leaves {:.4} m of mixture, below the minimum depth {:.4} m",
                        i + 1,
                        geometry.depth - z_end,
                        geometry.min_depth
                    ),
                ));
            }
            out.starts.push(stage.t_start);
            out.ends.push(stage.t_end);
            out.z_start.push(z);
            out.rates.push(rate);
            out.zeta_effective = out.zeta_effective.max(1.0 / (geometry.depth - z_end.max(0.0)));
            z = z_end.max(0.0);
        }
        Ok(out)
    }

    fn stage_index(&self, t: f64) -> usize {
        match self.ends.iter().position(|&e| t < e) {
            Some(i) => i,
            None => self.ends.len().saturating_sub(1),
        }
    }

    pub fn z_bar(&self, t: f64) -> f64 {
        if self.starts.is_empty() {
            return self.depth - 1.0 / self.zeta_effective;
        }
        let i = self.stage_index(t);
        self.z_start[i] + self.rates[i] * (t - self.starts[i])
    }

    /// Surface position evaluated inside stage `i`, exact at its endpoints.
    pub fn z_bar_in(&self, stage: usize, t: f64) -> f64 {
        self.z_start[stage] + self.rates[stage] * (t - self.starts[stage])
    }

    pub fn surface_rate(&self, stage: usize) -> f64 {
        self.rates[stage]
    }

    pub fn beta_in(&self, stage: usize, t: f64) -> f64 {
        1.0 / (self.depth - self.z_bar_in(stage, t))
    }

    pub fn beta(&self, t: f64) -> f64 {
        1.0 / (self.depth - self.z_bar(t))
    }

    pub fn volume(&self, t: f64) -> f64 {
        self.area * (self.depth - self.z_bar(t))
    }

    pub fn volume_in(&self, stage: usize, t: f64) -> f64 {
        self.area * (self.depth - self.z_bar_in(stage, t))
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }
}

pub fn velocities(stage: &Stage, area: f64) -> Velocities {
    Velocities { feed: stage.q_feed / area, under: stage.q_under / area, extract: stage.q_extract / area }
}

/// `ξ` of a tank depth `z` at surface position `z_bar`.
pub fn xi_of_z(z: f64, z_bar: f64, depth: f64) -> f64 {
    (z - z_bar) / (depth - z_bar)
}

pub fn z_of_xi(xi: f64, z_bar: f64, depth: f64) -> f64 {
    (depth - z_bar) * xi + z_bar
}

/// `ξ` of a height `x` up the extraction pipe.
pub fn xi_of_pipe(x: f64, z_bar: f64, depth: f64) -> f64 {
    -x / (depth - z_bar)
}

pub fn pipe_of_xi(xi: f64, z_bar: f64, depth: f64) -> f64 {
    -xi * (depth - z_bar)
}

/// Moving-frame velocity `α = -z̄'(1 - ξ)β`.
pub fn alpha(xi: f64, surface_rate: f64, beta: f64) -> f64 {
    -surface_rate * (1.0 - xi) * beta
}

/// Transformed bulk velocity at `ξ` (not on the surface itself).
pub fn q_tilde(xi: f64, v: &Velocities, beta: f64) -> f64 {
    if xi < 0.0 {
        if v.extract > 0.0 {
            -beta * (xi * (v.under + v.extract) + v.extract)
        } else {
            0.0
        }
    } else {
        alpha(xi, v.surface(), beta) + beta * v.under
    }
}

/// Feed composition shared by all stages.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedSpec {
    /// Mass fractions of the feed solids.
    pub fractions: Particulates,
    pub soluble: Solubles,
}

impl FeedSpec {
    /// Fractions from unnormalised COD weights.
    pub fn from_weights(weights: &Particulates, soluble: Solubles) -> Result<Self, ConfigError> {
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || !(sum > 0.0) {
            return Err(ConfigError::invalid("feed", "particulate weights must be nonnegative with positive sum"));
        }
        if soluble.iter().any(|s| !(*s >= 0.0)) {
            return Err(ConfigError::invalid("feed", "soluble feed must be nonnegative"));
        }
        Ok(Self { fractions: weights.map(|w| w / sum), soluble })
    }

    /// Particulate feed concentrations in COD units for a solids load `x_feed`.
    pub fn particulate_cod(&self, x_feed: f64, c_conv: f64) -> Particulates {
        self.fractions.map(|p| p * x_feed / c_conv)
    }
}

/// Step profile: clear liquid above `top`, uniform composition below.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition {
    pub top: f64,
    pub particulate: Particulates,
    pub soluble: Solubles,
}

impl InitialCondition {
    pub fn total_solids(&self, c_conv: f64) -> f64 {
        c_conv * self.particulate.iter().sum::<f64>()
    }

    pub fn fractions(&self, c_conv: f64) -> Option<Particulates> {
        let x = self.total_solids(c_conv);
        (x > 0.0).then(|| self.particulate.map(|v| c_conv * v / x))
    }

    /// Concentrations at depth `z`.
    pub fn at(&self, z: f64) -> (Particulates, Solubles) {
        if z < self.top {
            ([0.0; N_PARTICULATE], [0.0; 6])
        } else {
            (self.particulate, self.soluble)
        }
    }
}

/// Fully specified problem: everything a run needs except discretisation choices.
#[derive(Debug, Clone)]
pub struct Problem {
    pub geometry: TankGeometry,
    pub constitutive: Constitutive,
    pub kinetics: Kinetics,
    pub feed: FeedSpec,
    pub initial: InitialCondition,
    pub schedule: Vec<Stage>,
    pub trajectory: BoundaryTrajectory,
    bounds: OnceLock<ReactionBounds>,
}

impl Problem {
    pub fn new(
        geometry: TankGeometry,
        constitutive_params: ConstitutiveParams,
        kinetics_params: Asm1Params,
        c_conv: f64,
        feed: FeedSpec,
        initial: InitialCondition,
        schedule: Vec<Stage>,
    ) -> Result<Self, ConfigError> {
        validate_schedule(&schedule)?;
        let constitutive = Constitutive::new(constitutive_params)?;
        let kinetics = Kinetics::new(kinetics_params, c_conv, constitutive.x_hat)?;
        let trajectory = BoundaryTrajectory::build(&schedule, &geometry)?;
        if initial.particulate.iter().chain(&initial.soluble).any(|v| !(*v >= 0.0)) {
            return Err(ConfigError::invalid("initial", "concentrations must be nonnegative"));
        }
        if initial.total_solids(c_conv) > constitutive.x_hat {
            return Err(ConfigError::invalid("initial", "initial solids exceed the packing concentration"));
        }
        for s in &schedule {
            if s.x_feed > constitutive.x_hat {
                return Err(ConfigError::invalid("stages", "feed solids exceed the packing concentration"));
            }
        }
        Ok(Self { geometry, constitutive, kinetics, feed, initial, schedule, trajectory, bounds: OnceLock::new() })
    }

    /// Sampled reaction constants of the time-step bounds, computed on first use.
    pub fn reaction_bounds(&self) -> Result<ReactionBounds, ConfigError> {
        if let Some(b) = self.bounds.get() {
            return Ok(*b);
        }
        let bx = SamplingBox { x_max: self.constitutive.x_hat, s_max: self.soluble_ceiling() };
        let b = self.kinetics.derivative_bounds(&bx, BOUND_SAMPLES, BOUND_SEED)?;
        Ok(*self.bounds.get_or_init(|| b))
    }

    pub fn c_conv(&self) -> f64 {
        self.kinetics.c_conv
    }

    pub fn end_time(&self) -> f64 {
        self.schedule.last().map_or(0.0, |s| s.t_end)
    }

    pub fn velocities(&self, stage: usize) -> Velocities {
        velocities(&self.schedule[stage], self.geometry.area)
    }

    /// Largest `q_u + q_e` or `q_f` over the schedule.
    pub fn m_q1(&self) -> f64 {
        (0..self.schedule.len())
            .map(|i| {
                let v = self.velocities(i);
                (v.under + v.extract).max(v.feed)
            })
            .fold(0.0, f64::max)
    }

    /// Largest `max(q_f, q_e) + 2 q_u` over the schedule.
    pub fn m_q2(&self) -> f64 {
        (0..self.schedule.len())
            .map(|i| {
                let v = self.velocities(i);
                v.feed.max(v.extract) + 2.0 * v.under
            })
            .fold(0.0, f64::max)
    }

    /// Upper corner of the substrate sampling box: twice the largest initial or feed value.
    pub fn soluble_ceiling(&self) -> Solubles {
        std::array::from_fn(|k| 2.0 * self.initial.soluble[k].max(self.feed.soluble[k]))
    }
}

pub fn validate_schedule(schedule: &[Stage]) -> Result<(), ConfigError> {
    if schedule.is_empty() {
        return Err(ConfigError::invalid("stages", "schedule is empty"));
    }
    let mut t = 0.0;
    for (i, s) in schedule.iter().enumerate() {
        let n = i + 1;
        if (s.t_start - t).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(ConfigError::invalid("stages", format!("stage {n} does not start where the previous one ends")));
        }
        if !(s.t_end > s.t_start) {
            return Err(ConfigError::invalid("stages", format!("stage {n} has nonpositive duration")));
        }
        let flows = [s.q_feed, s.q_under, s.q_extract, s.x_feed];
        if flows.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(ConfigError::invalid("stages", format!("stage {n} has negative or non-finite flows")));
        }
        if s.q_feed > 0.0 && s.q_extract > 0.0 {
            return Err(ConfigError::invalid("stages", format!("stage {n} feeds and extracts at once")));
        }
        if s.x_feed > 0.0 && s.q_feed == 0.0 {
            return Err(ConfigError::invalid("stages", format!("stage {n} has feed solids but no feed flow")));
        }
        t = s.t_end;
    }
    Ok(())
}
