//! Acceptance criteria A1 to A10, one line per criterion.
//!
//! Runs as its own target without the libtest harness so that the long
//! reference computation is shared and the verdicts print in order:
//! `cargo test --release -p sbr-core --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use sbr_core::biokinetics::Asm1Params;
use sbr_core::config::{bundled, ScenarioConfig, StageSpec};
use sbr_core::discretization::{Grid, Scheme};
use sbr_core::properties::{monotonicity_defect, omega_stress, secant_row_sum_defect, single_step};
use sbr_core::scenario::{ModelKind, Problem};
use sbr_core::semi_implicit::NewtonConfig;
use sbr_core::simulator::{initial_state, run, RunConfig, SimulationOutput};
use sbr_core::state::OmegaMonitor;
use sbr_core::validation::{
    convergence_study, moving_mesh_stationarity, reference_run, relative_error, study_config, tolerance_sweep,
};

const HOUR: f64 = 3600.0;
const SCHEMES: [Scheme; 2] = [Scheme::Explicit, Scheme::SemiImplicit];
const OMEGA_SLACK: f64 = 1e-10;
const REFERENCE_CELLS: usize = 1200;
const STUDY_CELLS: [usize; 4] = [50, 100, 200, 400];

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

struct Verdicts {
    failed: Vec<&'static str>,
}

impl Verdicts {
    fn record(&mut self, id: &'static str, title: &str, outcome: Outcome) {
        let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        println!("{id} {} {title}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(id);
        }
    }
}

fn load(text: &str) -> (Problem, RunConfig) {
    let cfg = ScenarioConfig::parse(text).expect("bundled scenario parses");
    (cfg.to_problem().expect("bundled scenario is valid"), cfg.run_config())
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn invariant_region(runs: &[(Scheme, SimulationOutput)]) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (scheme, out) in runs {
        let d = &out.diagnostics;
        let ok = d.omega.within(OMEGA_SLACK) && d.omega.x_excess <= 0.0 && d.wall_clock < Duration::from_secs(120);
        pass &= ok;
        detail.push(format!(
            "{scheme:?} worst {:.1e} over {} checks in {:.1} s",
            d.omega.worst(),
            d.omega.checks,
            secs(d.wall_clock)
        ));
    }
    Ok((pass, detail.join("; ")))
}

fn scheme_agreement() -> Outcome {
    let (p, base) = load(bundled::EXAMPLE2);
    let base = RunConfig { newton: NewtonConfig { epsilon: 1e-8, ..base.newton }, ..base };
    let ex = run(&p, &study_config(&base, 200, Scheme::Explicit, &[HOUR]))?;
    let si = run(&p, &study_config(&base, 200, Scheme::SemiImplicit, &[HOUR]))?;
    let d = relative_error(&si, &ex, HOUR, p.c_conv())?;
    Ok((d <= 0.05, format!("distance {d:.4} (bar 0.05)")))
}

fn newton_behaviour(p: &Problem, base: &RunConfig, reference: &SimulationOutput) -> Outcome {
    let sweep = tolerance_sweep(p, base, 100, &[1e-8, 1e-1], &[HOUR], reference)?;
    let mean = |eps: f64| sweep.rows.iter().find(|r| r.tolerance == Some(eps)).map(|r| r.mean_newton_iterations);
    let (Some(tight), Some(loose)) = (mean(1e-8), mean(1e-1)) else {
        return Err("tolerance sweep lost a row".into());
    };
    let pass = (1.5..=3.5).contains(&tight) && loose == 1.0;
    Ok((pass, format!("mean iterations {tight:.3} at 1e-8, {loose:.3} at 1e-1")))
}

fn tolerance_insensitivity(p: &Problem, base: &RunConfig, reference: &SimulationOutput) -> Outcome {
    let tolerances: Vec<f64> = (4..=12).map(|k| 10f64.powi(-k)).collect();
    let sweep = tolerance_sweep(p, base, 100, &tolerances, &[HOUR], reference)?;
    let errs: Vec<f64> = sweep.rows.iter().map(|r| r.e_rel).collect();
    let lo = errs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = errs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo) / lo;
    Ok((spread < 1e-3, format!("e_rel in [{lo:.8}, {hi:.8}], relative spread {spread:.2e}")))
}

fn stress() -> Outcome {
    let (p, base) = load(bundled::EXAMPLE1);
    let mut pass = true;
    let mut detail = Vec::new();
    for scheme in SCHEMES {
        let cfg = RunConfig { cells: 20, scheme, ..base.clone() };
        let r = omega_stress(&p, &cfg, 10_000, 7)?;
        pass &= r.omega.within(OMEGA_SLACK);
        detail.push(format!("{scheme:?} {} trials, worst {:.1e}", r.trials, r.omega.worst()));
    }
    Ok((pass, detail.join("; ")))
}

fn closed_settling() -> Problem {
    let mut cfg = ScenarioConfig::parse(bundled::EXAMPLE1).expect("bundled scenario parses");
    cfg.kinetics = Asm1Params::inert();
    cfg.stages = vec![StageSpec {
        t_start_h: 0.0,
        t_end_h: 1.0,
        model: ModelKind::Pde,
        q_feed_m3ph: 0.0,
        q_under_m3ph: 0.0,
        q_extract_m3ph: 0.0,
        x_feed: 0.0,
    }];
    cfg.to_problem().expect("closed settling problem is valid")
}

fn conservation(example1_si: &SimulationOutput) -> Outcome {
    let p = closed_settling();
    let grid = Grid::new(100);
    let mut pass = true;
    let mut detail = Vec::new();
    for scheme in SCHEMES {
        let cfg = RunConfig { cells: 100, scheme, ..RunConfig::default() };
        let mut st = initial_state(&p, &grid);
        let (half0, full0) = (st.tank_integral(&grid), st.scheme_integral(&grid));
        let mut monitor = OmegaMonitor::new(p.constitutive.x_hat, true);
        for _ in 0..1000 {
            single_step(&p, &cfg, 0, &mut st, &mut monitor)?;
        }
        let half = (st.tank_integral(&grid) - half0).abs() / half0;
        let full = (st.scheme_integral(&grid) - full0).abs() / full0;
        pass &= half <= 1e-12;
        detail.push(format!("{scheme:?} drift {half:.2e} (full surface weight {full:.2e})"));
    }
    let audit = &example1_si.diagnostics.audit;
    let worst = audit.worst_relative();
    pass &= worst <= 1e-6;
    detail.push(format!(
        "Example-1 audit {worst:.2e} (solids {:.2e}, full surface weight {:.2e})",
        audit.solids.relative_imbalance(),
        audit.solids_full_weight.relative_imbalance()
    ));
    Ok((pass, detail.join("; ")))
}

fn monotone_and_dominant(margins: &[f64]) -> Outcome {
    let (p, base) = load(bundled::EXAMPLE1);
    let mut pass = true;
    let mut detail = Vec::new();
    for scheme in SCHEMES {
        let cfg = RunConfig { cells: 8, scheme, ..base.clone() };
        let defect = monotonicity_defect(&p, &cfg, 1000, 11)?;
        pass &= defect <= 1e-12;
        detail.push(format!("{scheme:?} largest drop {defect:.1e}"));
    }
    let margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    pass &= margin > 0.0;
    detail.push(format!("smallest column margin {margin:.2e}"));
    let row_sum = secant_row_sum_defect(&p, 100, 1000, 13);
    pass &= row_sum <= 1e-13;
    detail.push(format!("|M·1 - 1| {row_sum:.1e}"));
    Ok((pass, detail.join("; ")))
}

fn stationarity() -> Outcome {
    let (p, base) = load(bundled::EXAMPLE3);
    let rows = moving_mesh_stationarity(&p, &base, &[100, 200, 400], 25.0 * HOUR, 70.0 * HOUR)?;
    let pass = rows.windows(2).all(|w| w[1].deviation < w[0].deviation);
    let detail = rows.iter().map(|r| format!("N={} {:.4}", r.cells, r.deviation)).collect::<Vec<_>>().join(", ");
    Ok((pass, format!("deviation {detail} kg/m^2")))
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut v = Verdicts { failed: Vec::new() };

    let (p1, base1) = load(bundled::EXAMPLE1);
    let example1: Vec<(Scheme, SimulationOutput)> = SCHEMES
        .iter()
        .filter_map(|&scheme| {
            let cfg = RunConfig { cells: 100, scheme, snapshot_interval: None, ..base1.clone() };
            run(&p1, &cfg).map(|out| (scheme, out)).map_err(|e| println!("Example-1 {scheme:?} run failed: {e}")).ok()
        })
        .collect();
    let outcome = if example1.len() == 2 { invariant_region(&example1) } else { Err("missing Example-1 run".into()) };
    v.record("A1", "invariant region", outcome);
    v.record("A2", "scheme agreement", scheme_agreement());
    v.record("A7", "CFL stress", stress());
    let outcome = match example1.iter().find(|(s, _)| *s == Scheme::SemiImplicit) {
        Some((_, out)) => conservation(out),
        None => Err("missing Example-1 run".into()),
    };
    v.record("A8", "conservation", outcome);
    let margins: Vec<f64> = example1.iter().map(|(_, o)| o.diagnostics.min_column_margin).collect();
    v.record("A9", "monotonicity and M-matrices", monotone_and_dominant(&margins));

    let (p2, base2) = load(bundled::EXAMPLE2);
    let ref_start = Instant::now();
    let reference = reference_run(&p2, &base2, REFERENCE_CELLS, &[HOUR]);
    let ref_seconds = secs(ref_start.elapsed());
    match reference {
        Ok(reference) => {
            println!("reference: explicit, Godunov flux, N = {REFERENCE_CELLS}, {ref_seconds:.1} s");
            let study = convergence_study(&p2, &base2, &STUDY_CELLS, &SCHEMES, &[HOUR], &reference);
            let (a3, a6) = match study {
                Ok(report) => {
                    let mut pass = ref_seconds + report.rows.iter().map(|r| r.cpu_seconds).sum::<f64>() < 1800.0;
                    let mut detail = Vec::new();
                    for scheme in SCHEMES {
                        let rows: Vec<_> = report.series(scheme, HOUR).collect();
                        pass &= rows.windows(2).all(|w| w[1].e_rel < w[0].e_rel);
                        pass &= rows.iter().filter_map(|r| r.eoc).all(|e| (0.4..=1.2).contains(&e));
                        pass &= rows.iter().skip(1).all(|r| r.eoc.is_some());
                        let cells = rows
                            .iter()
                            .map(|r| match r.eoc {
                                Some(e) => format!("{} {:.4} ({e:.2})", r.cells, r.e_rel),
                                None => format!("{} {:.4}", r.cells, r.e_rel),
                            })
                            .collect::<Vec<_>>()
                            .join(", ");
                        detail.push(format!("{scheme:?} {cells}"));
                    }
                    let wall = |s: Scheme| report.series(s, HOUR).find(|r| r.cells == 400).map(|r| r.cpu_seconds);
                    let a6 = match (wall(Scheme::Explicit), wall(Scheme::SemiImplicit)) {
                        (Some(e), Some(s)) => {
                            Ok((s <= 0.5 * e, format!("{s:.2} s vs {e:.2} s, ratio {:.3} (bar 0.5)", s / e)))
                        }
                        _ => Err("missing N = 400 rows".into()),
                    };
                    (Ok((pass, detail.join("; "))), a6)
                }
                Err(e) => (Err(e.to_string().into()), Err(e.to_string().into())),
            };
            v.record("A3", "convergence", a3);
            v.record("A4", "Newton iterations", newton_behaviour(&p2, &base2, &reference));
            v.record("A5", "tolerance insensitivity", tolerance_insensitivity(&p2, &base2, &reference));
            v.record("A6", "efficiency", a6);
        }
        Err(e) => {
            for id in ["A3", "A4", "A5", "A6"] {
                v.record(id, "needs the reference run", Err(e.to_string().into()));
            }
        }
    }
    v.record("A10", "moving-mesh stationarity", stationarity());

    println!("acceptance finished in {:.0} s", secs(started.elapsed()));
    if v.failed.is_empty() {
        println!("all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", v.failed.join(" "));
        ExitCode::FAILURE
    }
}
