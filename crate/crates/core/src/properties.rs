//! Randomised checks of the scheme properties on a concrete problem:
//! invariance of the admissible set at the computed step, monotonicity of the
//! solids update and column dominance of the implicit matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::biokinetics::{Particulates, Solubles};
use crate::discretization::{Grid, Scheme};
use crate::error::{ConfigError, StepError};
use crate::explicit_scheme::{explicit_step, StepContext, StepReport, Workspace};
use crate::mixing_ode::{euler_mix_step, MixedState};
use crate::scenario::{ModelKind, Problem};
use crate::semi_implicit::{semi_implicit_step, secant_matrix, ImplicitWorkspace};
use crate::simulator::{stage_step, step_flows, RunConfig};
use crate::state::{GridState, OmegaMonitor, OmegaStats};

#[derive(Debug, thiserror::Error)]
pub enum PropertyError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Step(#[from] StepError),
}

/// Draws admissible states: `0 ≤ X ≤ x_max`, fractions on the simplex,
/// substrates inside the box the reaction bounds were sampled on.
#[derive(Debug, Clone)]
pub struct StateSampler {
    pub x_max: f64,
    pub s_max: Solubles,
}

impl StateSampler {
    pub fn for_problem(problem: &Problem) -> Self {
        Self { x_max: problem.constitutive.x_hat, s_max: problem.soluble_ceiling() }
    }

    pub fn fractions(&self, rng: &mut impl Rng) -> Particulates {
        let w: Particulates = std::array::from_fn(|_| -rng.gen::<f64>().max(1e-300).ln());
        let sum: f64 = w.iter().sum();
        w.map(|v| v / sum)
    }

    pub fn solubles(&self, rng: &mut impl Rng) -> Solubles {
        std::array::from_fn(|k| rng.gen::<f64>() * self.s_max[k])
    }

    /// Random profile; a third of the trials use a sharp two-level profile to exercise fronts.
    pub fn profile(&self, grid: &Grid, rng: &mut impl Rng) -> GridState {
        let mut st = GridState::zeros(grid, [1.0 / 6.0; 6]);
        let front = rng.gen_range(0..grid.cells());
        let (lo, hi) = (rng.gen::<f64>() * self.x_max, rng.gen::<f64>() * self.x_max);
        let sharp = rng.gen_bool(1.0 / 3.0);
        for i in grid.cells_range() {
            st.x[i] = if sharp { if i < front { lo } else { hi } } else { rng.gen::<f64>() * self.x_max };
            st.p[i] = self.fractions(rng);
            st.s[i] = self.solubles(rng);
        }
        st
    }
}

fn pde_stages(problem: &Problem) -> Vec<usize> {
    (0..problem.schedule.len()).filter(|&s| problem.schedule[s].model == ModelKind::Pde).collect()
}

/// One step of `scheme` from `state` at the start of `stage`, with a lenient monitor.
pub fn single_step(
    problem: &Problem,
    cfg: &RunConfig,
    stage: usize,
    state: &mut GridState,
    monitor: &mut OmegaMonitor,
) -> Result<StepReport, PropertyError> {
    let grid = Grid::new(cfg.cells);
    let (tau, _) = stage_step(problem, stage, cfg, &grid)?;
    let t = problem.schedule[stage].t_start;
    state.t = t;
    let ctx = StepContext { problem, grid, flux: cfg.flux, flows: step_flows(problem, stage, t), tau };
    let report = match cfg.scheme {
        Scheme::Explicit => explicit_step(&ctx, state, &mut Workspace::new(&grid), monitor)?,
        Scheme::SemiImplicit => semi_implicit_step(&ctx, &cfg.newton, state, &mut ImplicitWorkspace::new(&grid), monitor)?,
    };
    Ok(report)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StressReport {
    pub trials: usize,
    pub omega: OmegaStats,
    /// Smallest column-dominance margin over every implicit matrix assembled.
    pub min_column_margin: f64,
}

/// `trials` random admissible states per stage, each advanced one step at the computed step size.
pub fn omega_stress(problem: &Problem, cfg: &RunConfig, trials: usize, seed: u64) -> Result<StressReport, PropertyError> {
    let sampler = StateSampler::for_problem(problem);
    let grid = Grid::new(cfg.cells);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut monitor = OmegaMonitor::new(problem.constitutive.x_hat, false);
    let mut report = StressReport { min_column_margin: f64::INFINITY, ..Default::default() };
    let bounds = problem.reaction_bounds()?;
    for (stage, st) in problem.schedule.iter().enumerate() {
        for _ in 0..trials {
            match st.model {
                ModelKind::Pde => {
                    let mut state = sampler.profile(&grid, &mut rng);
                    let r = single_step(problem, cfg, stage, &mut state, &mut monitor)?;
                    report.min_column_margin = report.min_column_margin.min(r.min_column_margin);
                }
                ModelKind::Mixing => {
                    let tau = crate::mixing_ode::ode_step_bound(problem, stage, &bounds, cfg.cfl_safety);
                    let mut m = MixedState {
                        t: st.t_start,
                        x: rng.gen::<f64>() * sampler.x_max,
                        p: sampler.fractions(&mut rng),
                        s: sampler.solubles(&mut rng),
                    };
                    euler_mix_step(&mut m, problem, stage, tau, &mut monitor)?;
                }
            }
            report.trials += 1;
        }
    }
    report.omega = monitor.stats;
    Ok(report)
}

/// Largest drop of any updated solids value when one input cell is raised,
/// over `trials` random pairs of ordered states.
pub fn monotonicity_defect(problem: &Problem, cfg: &RunConfig, trials: usize, seed: u64) -> Result<f64, PropertyError> {
    let sampler = StateSampler::for_problem(problem);
    let grid = Grid::new(cfg.cells);
    let stages = pde_stages(problem);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut monitor = OmegaMonitor::observer(problem.constitutive.x_hat);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let stage = stages[rng.gen_range(0..stages.len())];
        let mut low = sampler.profile(&grid, &mut rng);
        let mut high = low.clone();
        let i = rng.gen_range(grid.cells_range());
        high.x[i] += rng.gen::<f64>() * (sampler.x_max - low.x[i]);
        single_step(problem, cfg, stage, &mut low, &mut monitor)?;
        single_step(problem, cfg, stage, &mut high, &mut monitor)?;
        let drop = low.x.iter().zip(&high.x).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(drop);
    }
    Ok(worst)
}

/// Largest `|M·1 − 1|` of the secant matrix over random solids profiles.
pub fn secant_row_sum_defect(problem: &Problem, cells: usize, trials: usize, seed: u64) -> f64 {
    let sampler = StateSampler::for_problem(problem);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let u: Vec<f64> = (0..=cells).map(|_| rng.gen::<f64>() * sampler.x_max).collect();
        let coeff = rng.gen::<f64>() * 10.0;
        let m = secant_matrix(&problem.constitutive, &u, coeff);
        let ones = vec![[1.0]; u.len()];
        let mut out = vec![[0.0]; u.len()];
        m.apply(&ones, &mut out);
        worst = out.iter().map(|v| (v[0] - 1.0).abs()).fold(worst, f64::max);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{bundled, ScenarioConfig};

    fn example1() -> Problem {
        ScenarioConfig::parse(bundled::EXAMPLE1).unwrap().to_problem().unwrap()
    }

    #[test]
    fn sampled_fractions_lie_on_the_simplex() {
        let s = StateSampler::for_problem(&example1());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let p = s.fractions(&mut rng);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(p.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn small_stress_run_is_clean() {
        let problem = example1();
        for scheme in [Scheme::Explicit, Scheme::SemiImplicit] {
            let cfg = RunConfig { cells: 8, scheme, ..RunConfig::default() };
            let r = omega_stress(&problem, &cfg, 20, 1).unwrap();
            assert!(r.omega.within(1e-10), "{scheme:?} {:?}", r.omega);
            assert!(r.min_column_margin > 0.0);
        }
    }

    #[test]
    fn oversized_steps_break_monotonicity() {
        let problem = example1();
        let cfg = RunConfig { cells: 8, scheme: Scheme::Explicit, tau_scale: 3000.0, ..RunConfig::default() };
        assert!(monotonicity_defect(&problem, &cfg, 50, 2).unwrap() > 1e-6);
        let cfg = RunConfig { tau_scale: 1.0, ..cfg };
        assert!(monotonicity_defect(&problem, &cfg, 50, 2).unwrap() <= 1e-12);
    }
}
