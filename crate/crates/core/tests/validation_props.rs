//! The relative error measure and the report bookkeeping of the validation studies.

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sbr_core::discretization::{Grid, Scheme};
use sbr_core::state::GridState;
use sbr_core::validation::{relative_error_states, ErrorReport, ErrorRow};

const C_CONV: f64 = 0.75;

fn random_state(grid: &Grid, rng: &mut impl Rng) -> GridState {
    let mut st = GridState::zeros(grid, [1.0 / 6.0; 6]);
    for i in grid.tank_range() {
        st.x[i] = 0.1 + rng.gen::<f64>() * 10.0;
        let w: [f64; 6] = std::array::from_fn(|_| 0.01 + rng.gen::<f64>());
        let sum: f64 = w.iter().sum();
        st.p[i] = w.map(|v| v / sum);
        st.s[i] = std::array::from_fn(|_| 1e-4 + rng.gen::<f64>() * 0.05);
    }
    st
}

/// Sample count that puts every cell boundary between two sample points.
fn aligned_samples(grid: &Grid, per_half_cell: usize) -> usize {
    (2 * grid.n + 1) * per_half_cell
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn error_of_a_state_with_itself_is_zero(seed in any::<u64>(), cells in 4usize..200) {
        let grid = Grid::new(cells);
        let st = random_state(&grid, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(relative_error_states(&st, &grid, &st, &grid, C_CONV, 10 * cells), 0.0);
    }

    #[test]
    fn error_is_nonnegative_across_grids(seed in any::<u64>(), coarse in 4usize..60, fine in 60usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (gc, gf) = (Grid::new(coarse), Grid::new(fine));
        let a = random_state(&gc, &mut rng);
        let r = random_state(&gf, &mut rng);
        let e = relative_error_states(&a, &gc, &r, &gf, C_CONV, 10 * fine);
        prop_assert!(e.is_finite() && e > 0.0);
    }

    /// Reordering the interior cells keeps every component norm, so the error
    /// against the reordered state and the original share a denominator and the
    /// triangle inequality holds for the summed measure.
    #[test]
    fn triangle_inequality_with_equal_norms(seed in any::<u64>(), cells in 4usize..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = Grid::new(cells);
        let samples = aligned_samples(&grid, 4);
        let r = random_state(&grid, &mut rng);
        let mut b = r.clone();
        let mut order: Vec<usize> = (Grid::SURFACE + 1..=grid.n + 1).collect();
        order.shuffle(&mut rng);
        for (dst, src) in (Grid::SURFACE + 1..=grid.n + 1).zip(order) {
            b.x[dst] = r.x[src];
            b.p[dst] = r.p[src];
            b.s[dst] = r.s[src];
        }
        let a = random_state(&grid, &mut rng);
        let e = |u: &GridState, v: &GridState| relative_error_states(u, &grid, v, &grid, C_CONV, samples);
        prop_assert!(e(&a, &r) <= (e(&a, &b) + e(&b, &r)) * (1.0 + 1e-12));
    }
}

#[test]
fn identical_profiles_on_nested_resolutions_match() {
    // a uniform profile is represented exactly on any grid
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (gc, gf) = (Grid::new(50), Grid::new(400));
    let mut a = random_state(&gc, &mut rng);
    let template = (a.x[3], a.p[3], a.s[3]);
    for i in gc.tank_range() {
        (a.x[i], a.p[i], a.s[i]) = template;
    }
    let mut r = GridState::zeros(&gf, [1.0 / 6.0; 6]);
    for i in gf.tank_range() {
        (r.x[i], r.p[i], r.s[i]) = template;
    }
    assert!(relative_error_states(&a, &gc, &r, &gf, C_CONV, 4000) < 1e-14);
}

#[test]
fn convergence_orders_follow_successive_halvings() {
    let row = |cells, e_rel| ErrorRow {
        cells,
        scheme: Scheme::SemiImplicit,
        tolerance: None,
        t: 3600.0,
        e_rel,
        cpu_seconds: 0.0,
        mean_newton_iterations: 2.0,
        eoc: None,
    };
    let mut report = ErrorReport { rows: vec![row(50, 0.8), row(100, 0.4), row(200, 0.1), row(400, 0.05)] };
    report.fill_eoc();
    let eoc: Vec<Option<f64>> = report.rows.iter().map(|r| r.eoc).collect();
    assert_eq!(eoc, vec![None, Some(1.0), Some(2.0), Some(1.0)]);
}
