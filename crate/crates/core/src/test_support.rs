//! Small hand-built problems for unit tests.

use crate::biokinetics::Asm1Params;
use crate::constitutive::ConstitutiveParams;
use crate::discretization::StepFlows;
use crate::scenario::{FeedSpec, InitialCondition, ModelKind, Problem, Stage, TankGeometry};

pub const C_CONV: f64 = 0.75;
pub const INITIAL_C: [f64; 6] = [0.8889, 0.0295, 1.4503, 0.0904, 0.7371, 0.0025];
pub const INITIAL_S: [f64; 6] = [0.04, 0.0026, 0.0, 0.0333, 0.0004, 0.0009];
pub const FEED_WEIGHTS: [f64; 6] = [0.04, 0.16 - 0.01828, 0.096, 1e-6, 0.0, 0.01828];
pub const FEED_S: [f64; 6] = [0.04, 0.064, 0.0, 0.001, 0.0125, 0.0101];

/// One hour of settling in a 3 m tank filled below 1 m, optionally with reactions.
pub fn closed_stage_problem(reactions: bool) -> Problem {
    let stage = Stage {
        t_start: 0.0,
        t_end: 3600.0,
        model: ModelKind::Pde,
        q_feed: 0.0,
        q_under: 0.0,
        q_extract: 0.0,
        x_feed: 0.0,
    };
    let kin = if reactions { Asm1Params::default() } else { Asm1Params::inert() };
    Problem::new(
        TankGeometry { depth: 3.0, area: 400.0, min_depth: 0.5, z_bar0: 1.0 },
        ConstitutiveParams::default(),
        kin,
        C_CONV,
        FeedSpec::from_weights(&FEED_WEIGHTS, FEED_S).unwrap(),
        InitialCondition { top: 2.0, particulate: INITIAL_C, soluble: INITIAL_S },
        vec![stage],
    )
    .unwrap()
}

pub fn settle_flows(problem: &Problem) -> StepFlows {
    StepFlows { v: Default::default(), beta: problem.trajectory.beta(0.0), surface_rate: 0.0, x_feed: 0.0 }
}

/// Fill at 790 m³/h carrying `x_feed` kg/m³.
pub fn fill_flows(problem: &Problem, x_feed: f64) -> StepFlows {
    let v = crate::scenario::Velocities { feed: 790.0 / 3600.0 / problem.geometry.area, ..Default::default() };
    StepFlows { v, beta: problem.trajectory.beta(0.0), surface_rate: v.surface(), x_feed }
}
