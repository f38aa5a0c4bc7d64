//! The completely mixed react stage: inventory balance, step-size convergence and handover.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sbr_core::biokinetics::Asm1Params;
use sbr_core::config::{bundled, ScenarioConfig, StageSpec};
use sbr_core::discretization::Grid;
use sbr_core::mixing_ode::{average_profile, euler_mix_step, ode_step_bound, reallocate, MixedState};
use sbr_core::scenario::{ModelKind, Problem};
use sbr_core::state::{GridState, OmegaMonitor};

fn example1() -> ScenarioConfig {
    ScenarioConfig::parse(bundled::EXAMPLE1).unwrap()
}

fn mix_stage(hours: f64, q_feed: f64, x_feed: f64) -> StageSpec {
    StageSpec {
        t_start_h: 0.0,
        t_end_h: hours,
        model: ModelKind::Mixing,
        q_feed_m3ph: q_feed,
        q_under_m3ph: 0.0,
        q_extract_m3ph: 0.0,
        x_feed,
    }
}

fn initial_mixture(problem: &Problem, t: f64) -> MixedState {
    let c = problem.c_conv();
    let x = problem.initial.total_solids(c);
    MixedState { t, x, p: problem.initial.fractions(c).unwrap(), s: problem.initial.soluble }
}

/// Integrates `stage` with `substeps` Euler steps per bound-limited step.
fn integrate(problem: &Problem, stage: usize, m: &mut MixedState, refine: usize) -> (f64, f64, [f64; 6], [f64; 6]) {
    let st = &problem.schedule[stage];
    let bounds = problem.reaction_bounds().unwrap();
    let tau_max = ode_step_bound(problem, stage, &bounds, 0.95) / refine as f64;
    let steps = (st.duration() / tau_max).ceil() as usize;
    let tau = st.duration() / steps as f64;
    let mut monitor = OmegaMonitor::new(problem.constitutive.x_hat, true);
    let (mut x_in, mut x_r) = (0.0, 0.0);
    let (mut s_in, mut s_r) = ([0.0; 6], [0.0; 6]);
    for k in 0..steps {
        m.t = st.t_start + k as f64 * tau;
        let b = euler_mix_step(m, problem, stage, tau, &mut monitor).unwrap();
        x_in += b.solids_in;
        x_r += b.solids_reaction;
        for c in 0..6 {
            s_in[c] += b.soluble_in[c];
            s_r[c] += b.soluble_reaction[c];
        }
    }
    (x_in, x_r, s_in, s_r)
}

#[test]
fn fed_stage_balances_its_inventory() {
    let mut cfg = example1();
    cfg.stages = vec![mix_stage(1.0, 790.0, 5.0)];
    let p = cfg.to_problem().unwrap();
    let mut m = initial_mixture(&p, 0.0);
    let (x0, s0) = (m.x * p.trajectory.volume_in(0, 0.0), m.s.map(|v| v * p.trajectory.volume_in(0, 0.0)));
    let (x_in, x_r, s_in, s_r) = integrate(&p, 0, &mut m, 1);
    let v1 = p.trajectory.volume_in(0, 3600.0);
    let x1 = m.x * v1;
    assert!((x1 - x0 - x_in - x_r).abs() <= 1e-6 * x1, "{x1} vs {}", x0 + x_in + x_r);
    assert!((x_in - 790.0 * 5.0).abs() <= 1e-9 * x_in);
    for k in 0..6 {
        let s1 = m.s[k] * v1;
        let expect = s0[k] + s_in[k] + s_r[k];
        assert!((s1 - expect).abs() <= 1e-6 * s1.abs().max(expect.abs()).max(1e-12), "S{k}: {s1} vs {expect}");
    }
}

#[test]
fn react_stage_converges_under_step_refinement() {
    let p = example1().to_problem().unwrap();
    let stage = p.schedule.iter().position(|s| s.model == ModelKind::Mixing).unwrap();
    let start = initial_mixture(&p, p.schedule[stage].t_start);
    let (mut coarse, mut fine) = (start.clone(), start);
    integrate(&p, stage, &mut coarse, 1);
    integrate(&p, stage, &mut fine, 10);
    assert!((coarse.x - fine.x).abs() <= 1e-3 * fine.x);
    for k in 0..6 {
        let (a, b) = (coarse.p[k] * coarse.x, fine.p[k] * fine.x);
        assert!((a - b).abs() <= 1e-3 * fine.x, "pX{k}: {a} vs {b}");
        let (a, b) = (coarse.s[k], fine.s[k]);
        assert!((a - b).abs() <= 1e-3 * b.abs().max(1e-6), "S{k}: {a} vs {b}");
    }
}

#[test]
fn matched_inert_feed_leaves_the_mixture_unchanged() {
    let mut cfg = example1();
    cfg.kinetics = Asm1Params::inert();
    let p0 = cfg.to_problem().unwrap();
    let m0 = initial_mixture(&p0, 0.0);
    cfg.feed_weights = m0.p;
    cfg.feed_soluble = m0.s;
    cfg.stages = vec![mix_stage(1.0, 790.0, m0.x)];
    let p = cfg.to_problem().unwrap();
    let mut m = m0.clone();
    integrate(&p, 0, &mut m, 1);
    assert!((m.x - m0.x).abs() <= 1e-12 * m0.x);
    for k in 0..6 {
        assert!((m.p[k] - m0.p[k]).abs() <= 1e-12);
        assert!((m.s[k] - m0.s[k]).abs() <= 1e-12 * m0.s[k].max(1e-12));
    }
}

#[test]
fn averaging_and_reallocation_preserve_the_inventory() {
    let p = example1().to_problem().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let grid = Grid::new(rng.gen_range(4..200));
        let mut st = GridState::zeros(&grid, p.feed.fractions);
        for i in grid.tank_range() {
            st.x[i] = rng.gen::<f64>() * p.constitutive.x_hat;
            let w: [f64; 6] = std::array::from_fn(|_| rng.gen::<f64>());
            let sum: f64 = w.iter().sum();
            st.p[i] = w.map(|v| v / sum);
            st.s[i] = std::array::from_fn(|_| rng.gen::<f64>() * 0.05);
        }
        let m = average_profile(&st, &grid, &p.feed.fractions);
        let back = reallocate(&m, &grid);
        let before = st.tank_integral(&grid);
        assert!((back.tank_integral(&grid) - before).abs() <= 1e-13 * before);
        assert!((m.p.iter().sum::<f64>() - 1.0).abs() <= 1e-14);
        for k in 0..6 {
            let mass = |s: &GridState| grid.tank_range().map(|i| grid.tank_weight(i) * s.p[i][k] * s.x[i]).sum::<f64>();
            assert!((mass(&back) - mass(&st)).abs() <= 1e-12 * before);
        }
        assert_eq!(back.x[0], 0.0);
        assert_eq!(back.x[grid.outlet()], 0.0);
    }
}
