//! Completely mixed react stage.
//!
//! The profile is averaged into one state, advanced by Euler steps and spread
//! back uniformly over the tank at the end of the stage. Steps are taken on the
//! tank inventories `X V`, `p X V` and `S V`, so feed and reaction step sums
//! balance the inventory change exactly.

use crate::biokinetics::{Particulates, ReactionBounds, Solubles, N_SOLUBLE};
use crate::discretization::Grid;
use crate::error::StepError;
use crate::scenario::Problem;
use crate::state::{normalise_fractions, GridState, OmegaMonitor, FRACTION_CHECK_FLOOR};

#[derive(Debug, Clone, PartialEq)]
pub struct MixedState {
    pub t: f64,
    pub x: f64,
    pub p: Particulates,
    pub s: Solubles,
}

/// Half-weight averages over the tank; fractions are averaged by mass.
pub fn average_profile(state: &GridState, grid: &Grid, fallback_p: &Particulates) -> MixedState {
    let mut x = 0.0;
    let mut px = [0.0; 6];
    let mut s = [0.0; N_SOLUBLE];
    for i in grid.tank_range() {
        let w = grid.tank_weight(i) * grid.dxi;
        x += w * state.x[i];
        for k in 0..6 {
            px[k] += w * state.p[i][k] * state.x[i];
            s[k] += w * state.s[i][k];
        }
    }
    let p = if x > 0.0 {
        let mut p = px.map(|v| v / x);
        normalise_fractions(&mut p);
        p
    } else {
        *fallback_p
    };
    MixedState { t: state.t, x, p, s }
}

/// Uniform profile over the tank cells, outlet cells empty.
pub fn reallocate(mixed: &MixedState, grid: &Grid) -> GridState {
    let mut st = GridState::zeros(grid, mixed.p);
    st.t = mixed.t;
    for i in grid.tank_range() {
        st.x[i] = mixed.x;
        st.s[i] = mixed.s;
    }
    st
}

/// Inventories fed and produced during one mixing step, kg.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MixBudget {
    pub solids_in: f64,
    pub solids_reaction: f64,
    pub soluble_in: Solubles,
    pub soluble_reaction: Solubles,
}

/// One Euler step of the mixing equations inside `stage`.
pub fn euler_mix_step(
    m: &mut MixedState,
    problem: &Problem,
    stage: usize,
    tau: f64,
    monitor: &mut OmegaMonitor,
) -> Result<MixBudget, StepError> {
    let st = &problem.schedule[stage];
    let tr = &problem.trajectory;
    let v0 = tr.volume_in(stage, m.t);
    let v1 = tr.volume_in(stage, m.t + tau);
    let c = problem.c_conv();
    let r = problem.kinetics.evaluate_fractions(m.x, &m.p, &m.s);
    let feed = tau * st.q_feed;
    let fp = &problem.feed;
    let budget = MixBudget {
        solids_in: feed * st.x_feed,
        solids_reaction: tau * v0 * r.total,
        soluble_in: fp.soluble.map(|s| feed * s),
        soluble_reaction: r.soluble.map(|rs| tau * v0 * rs),
    };
    let mut x = (m.x * v0 + budget.solids_in + budget.solids_reaction) / v1;
    let px: Particulates =
        std::array::from_fn(|k| (m.p[k] * m.x * v0 + feed * fp.fractions[k] * st.x_feed + tau * v0 * c * r.particulate[k]) / v1);
    let mut s: Solubles = std::array::from_fn(|k| (m.s[k] * v0 + budget.soluble_in[k] + budget.soluble_reaction[k]) / v1);
    let raw_x = x;
    monitor.check_cell(Grid::SURFACE, &mut x, &mut s)?;
    if raw_x > 0.0 {
        let mut p = px.map(|v| v / raw_x);
        let dev = normalise_fractions(&mut p);
        if raw_x >= FRACTION_CHECK_FLOOR {
            monitor.record_fractions(Grid::SURFACE, dev)?;
        }
        m.p = p;
    }
    m.x = x;
    m.s = s;
    m.t += tau;
    Ok(budget)
}

/// Largest mixing step: the zero-gradient time-step bound capped at a hundredth of the stage.
pub fn ode_step_bound(problem: &Problem, stage: usize, bounds: &ReactionBounds, safety: f64) -> f64 {
    let v = problem.velocities(stage);
    let m_q1 = (v.under + v.extract).max(v.feed);
    let rate = problem.trajectory.zeta_effective * m_q1 + bounds.max();
    let duration = problem.schedule[stage].duration();
    let cap = duration / 100.0;
    if rate > 0.0 {
        (safety / rate).min(cap)
    } else {
        cap
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::closed_stage_problem;

    #[test]
    fn uniform_profile_round_trip() {
        let g = Grid::new(10);
        let m = MixedState { t: 5.0, x: 2.4, p: [0.1, 0.2, 0.3, 0.1, 0.2, 0.1], s: [0.01; 6] };
        let st = reallocate(&m, &g);
        let back = average_profile(&st, &g, &[1.0 / 6.0; 6]);
        assert!((back.x - m.x).abs() < 1e-14);
        for k in 0..6 {
            assert!((back.p[k] - m.p[k]).abs() < 1e-14);
            assert!((back.s[k] - m.s[k]).abs() < 1e-15);
        }
        assert_eq!(st.x[0], 0.0);
        assert_eq!(st.x[g.outlet()], 0.0);
    }

    #[test]
    fn two_cell_average_by_hand() {
        // N = 1: cells j = 0, 1 with weights 1/2 and 1, Δξ = 2/3
        let g = Grid::new(1);
        let mut st = GridState::zeros(&g, [1.0 / 6.0; 6]);
        st.x[1] = 3.0;
        st.x[2] = 6.0;
        let m = average_profile(&st, &g, &[1.0 / 6.0; 6]);
        assert!((m.x - (2.0 / 3.0) * (1.5 + 6.0)).abs() < 1e-14);
    }

    #[test]
    fn empty_profile_uses_fallback() {
        let g = Grid::new(4);
        let st = GridState::zeros(&g, [1.0 / 6.0; 6]);
        let fb = [0.5, 0.5, 0.0, 0.0, 0.0, 0.0];
        let m = average_profile(&st, &g, &fb);
        assert_eq!(m.x, 0.0);
        assert_eq!(m.p, fb);
    }

    #[test]
    fn idle_inert_mixture_is_fixed() {
        let problem = closed_stage_problem(false);
        let mut m = MixedState { t: 0.0, x: 2.4, p: [0.2, 0.2, 0.2, 0.2, 0.1, 0.1], s: [0.01; 6] };
        let before = m.clone();
        let mut mon = OmegaMonitor::new(problem.constitutive.x_hat, true);
        for _ in 0..10 {
            euler_mix_step(&mut m, &problem, 0, 30.0, &mut mon).unwrap();
        }
        assert!((m.x - before.x).abs() < 1e-15);
        assert_eq!(m.s, before.s);
    }
}
