use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sbr_core::config::{flux_name, parse_flux, parse_scheme, scheme_name, ScenarioConfig};
use sbr_core::discretization::{NumericalFlux, Scheme};
use sbr_core::properties::{monotonicity_defect, omega_stress, secant_row_sum_defect, PropertyError};
use sbr_core::scenario::{Problem, SECONDS_PER_HOUR};
use sbr_core::simulator::{run, RunConfig};
use sbr_core::state::OMEGA_SLACK;
use sbr_core::validation::{
    convergence_study, moving_mesh_stationarity, reference_run, tolerance_sweep, ValidationError,
    DEFAULT_REFERENCE_CELLS,
};
use sbr_core::{ConfigError, RunError};

mod output;

#[derive(Parser)]
#[command(name = "sbr-sim", version, about = "Reactive settling in a sequencing batch reactor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write profile and outlet CSV files.
    Run(RunArgs),
    /// Relative errors against a fine reference for several resolutions.
    Convergence(StudyArgs),
    /// Newton tolerance sweep at one resolution.
    Tolerance(StudyArgs),
    /// Wall-clock comparison of the two schemes.
    Benchmark(StudyArgs),
    /// Sediment drift between two times for several resolutions.
    Stationarity(StudyArgs),
    /// Randomised checks of the scheme properties on the scenario.
    Validate(ValidateArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file.
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_parser = scheme_arg)]
    scheme: Option<Scheme>,
    #[arg(long, value_parser = flux_arg)]
    flux: Option<NumericalFlux>,
    /// Newton stopping tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    cfl_safety: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    cells: Option<usize>,
    /// Seconds between stored profiles.
    #[arg(long)]
    snapshot_s: Option<f64>,
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated resolutions.
    #[arg(long, value_delimiter = ',')]
    cells: Vec<usize>,
    /// Comma-separated evaluation times in hours; the end of the schedule by default.
    #[arg(long, value_delimiter = ',')]
    times_h: Vec<f64>,
    /// Comma-separated Newton tolerances for the sweep.
    #[arg(long, value_delimiter = ',')]
    tolerances: Vec<f64>,
    /// Reference profiles: read if the file exists, otherwise computed and written there.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_REFERENCE_CELLS)]
    reference_cells: usize,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    cells: Option<usize>,
    /// Multiplies every computed step size.
    #[arg(long, default_value_t = 1.0)]
    tau_scale: f64,
    /// Random states per stage.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn scheme_arg(s: &str) -> Result<Scheme, String> {
    parse_scheme(s).ok_or_else(|| format!("expected 'explicit' or 'semi-implicit', got '{s}'"))
}

fn flux_arg(s: &str) -> Result<NumericalFlux, String> {
    parse_flux(s).ok_or_else(|| format!("expected 'eo' or 'godunov', got '{s}'"))
}

/// Failure with its exit status.
#[derive(Debug)]
enum Failure {
    Config(String),
    Numerical(String),
    Validation(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Validation(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numerical(m) | Failure::Validation(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(c) => c.into(),
            RunError::Simulation(s) => Failure::Numerical(s.to_string()),
        }
    }
}

impl From<ValidationError> for Failure {
    fn from(e: ValidationError) -> Self {
        match e {
            ValidationError::Run(r) => r.into(),
            other => Failure::Validation(other.to_string()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(format!("{e:#}"))
    }
}

struct Loaded {
    config: ScenarioConfig,
    problem: Problem,
    run: RunConfig,
}

fn load(common: &Common) -> Result<Loaded, Failure> {
    let text = std::fs::read_to_string(&common.scenario)
        .map_err(|e| Failure::Config(format!("{}: {e}", common.scenario.display())))?;
    let config = ScenarioConfig::parse(&text)
        .map_err(|e| Failure::Config(format!("{}: {e}", common.scenario.display())))?;
    let problem = config.to_problem()?;
    let mut run = config.run_config();
    if let Some(s) = common.scheme {
        run.scheme = s;
    }
    if let Some(f) = common.flux {
        run.flux = f;
    }
    if let Some(eps) = common.tolerance {
        run.newton.epsilon = eps;
    }
    if let Some(s) = common.cfl_safety {
        run.cfl_safety = s;
    }
    run.validate()?;
    Ok(Loaded { config, problem, run })
}

fn out_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let Loaded { config, problem, run: mut cfg } = load(&args.common)?;
    if let Some(n) = args.cells {
        cfg.cells = n;
    }
    if let Some(s) = args.snapshot_s {
        cfg.snapshot_interval = Some(s);
        cfg.outlet_interval = s;
    }
    cfg.validate()?;
    let out = run(&problem, &cfg)?;
    out_dir(&args.common.out)?;
    output::write_profiles(&args.common.out.join("profiles.csv"), &out, &problem)?;
    output::write_outlets(&args.common.out.join("outlets.csv"), &out)?;
    let d = &out.diagnostics;
    println!("scenario       {}", config.name);
    println!("scheme         {} / {} flux, N = {}", scheme_name(cfg.scheme), flux_name(cfg.flux), cfg.cells);
    println!("steps          {} transport, {} mixing", d.pde_steps, d.ode_steps);
    println!("newton         {:.3} iterations per step", d.mean_newton_iterations());
    println!("region slack   {:.3e}", d.omega.worst());
    println!("solids audit   {:.3e} relative", d.audit.solids.relative_imbalance());
    println!("wall clock     {:.3} s", d.wall_clock.as_secs_f64());
    Ok(())
}

fn eval_times(args: &StudyArgs, problem: &Problem) -> Vec<f64> {
    if args.times_h.is_empty() {
        vec![problem.end_time()]
    } else {
        args.times_h.iter().map(|h| h * SECONDS_PER_HOUR).collect()
    }
}

fn reference(args: &StudyArgs, l: &Loaded, times: &[f64]) -> Result<sbr_core::simulator::SimulationOutput, Failure> {
    if let Some(path) = &args.reference {
        if path.exists() {
            return Ok(output::read_reference(path, l.problem.c_conv())?);
        }
    }
    let r = reference_run(&l.problem, &l.run, args.reference_cells, times)?;
    if let Some(path) = &args.reference {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            out_dir(dir)?;
        }
        output::write_reference(path, &r, &l.problem)?;
    }
    Ok(r)
}

fn cmd_convergence(args: StudyArgs) -> Result<(), Failure> {
    let l = load(&args.common)?;
    let times = eval_times(&args, &l.problem);
    let cells = if args.cells.is_empty() { vec![50, 100, 200, 400] } else { args.cells.clone() };
    let schemes = match args.common.scheme {
        Some(s) => vec![s],
        None => vec![Scheme::Explicit, Scheme::SemiImplicit],
    };
    let r = reference(&args, &l, &times)?;
    let report = convergence_study(&l.problem, &l.run, &cells, &schemes, &times, &r)?;
    out_dir(&args.common.out)?;
    let path = args.common.out.join("convergence.csv");
    output::write_report(&path, &report)?;
    output::print_report(&report);
    Ok(())
}

fn cmd_tolerance(args: StudyArgs) -> Result<(), Failure> {
    let l = load(&args.common)?;
    let times = eval_times(&args, &l.problem);
    let cells = args.cells.first().copied().unwrap_or(l.run.cells);
    let tolerances = if args.tolerances.is_empty() {
        (1..=12).map(|k| 10f64.powi(-k)).collect()
    } else {
        args.tolerances.clone()
    };
    let r = reference(&args, &l, &times)?;
    let report = tolerance_sweep(&l.problem, &l.run, cells, &tolerances, &times, &r)?;
    out_dir(&args.common.out)?;
    output::write_report(&args.common.out.join("tolerance.csv"), &report)?;
    output::print_report(&report);
    Ok(())
}

fn cmd_benchmark(args: StudyArgs) -> Result<(), Failure> {
    let l = load(&args.common)?;
    let cells = if args.cells.is_empty() { vec![400] } else { args.cells.clone() };
    out_dir(&args.common.out)?;
    let mut rows = Vec::new();
    for &n in &cells {
        let mut secs = [0.0; 2];
        for (k, scheme) in [Scheme::Explicit, Scheme::SemiImplicit].into_iter().enumerate() {
            let cfg = RunConfig { cells: n, scheme, snapshot_interval: None, outlet_interval: f64::INFINITY, ..l.run.clone() };
            secs[k] = run(&l.problem, &cfg)?.diagnostics.wall_clock.as_secs_f64();
        }
        println!("N = {n:5}  explicit {:9.3} s  semi-implicit {:9.3} s  ratio {:.3}", secs[0], secs[1], secs[1] / secs[0]);
        rows.push((n, secs[0], secs[1]));
    }
    output::write_benchmark(&args.common.out.join("benchmark.csv"), &rows)?;
    Ok(())
}

fn cmd_stationarity(args: StudyArgs) -> Result<(), Failure> {
    let l = load(&args.common)?;
    let times = eval_times(&args, &l.problem);
    let [early, late] = times[..] else {
        return Err(Failure::Config("stationarity needs exactly two --times-h".into()));
    };
    let cells = if args.cells.is_empty() { vec![100, 200, 400] } else { args.cells.clone() };
    let rows = moving_mesh_stationarity(&l.problem, &l.run, &cells, early, late)?;
    out_dir(&args.common.out)?;
    output::write_stationarity(&args.common.out.join("stationarity.csv"), &rows)?;
    for r in &rows {
        println!("N = {:5}  deviation {:.6e} kg/m²  over {} cells", r.cells, r.deviation, r.sediment_cells);
    }
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), Failure> {
    let l = load(&args.common)?;
    let schemes = match args.common.scheme {
        Some(s) => vec![s],
        None => vec![Scheme::Explicit, Scheme::SemiImplicit],
    };
    let mut failures = Vec::new();
    let mut check = |name: String, ok: bool, detail: String| {
        println!("{} {name}: {detail}", if ok { "pass" } else { "FAIL" });
        if !ok {
            failures.push(name);
        }
    };
    let as_report = |e: PropertyError| e.to_string();
    for scheme in schemes {
        let name = scheme_name(scheme);
        let base = RunConfig { scheme, tau_scale: args.tau_scale, strict: false, ..l.run.clone() };
        let cfg = RunConfig { cells: args.cells.unwrap_or(base.cells), ..base.clone() };
        match run(&l.problem, &RunConfig { snapshot_interval: None, outlet_interval: f64::INFINITY, ..cfg.clone() }) {
            Ok(out) => {
                let w = out.diagnostics.omega.worst();
                check(format!("{name} full run"), w <= OMEGA_SLACK, format!("region slack {w:.3e}"));
            }
            Err(e) => check(format!("{name} full run"), false, Failure::from(e).message().to_string()),
        }
        match omega_stress(&l.problem, &cfg, args.trials, args.seed) {
            Ok(r) => {
                let w = r.omega.worst();
                check(format!("{name} random states"), w <= OMEGA_SLACK, format!("{} trials, region slack {w:.3e}", r.trials));
                if scheme == Scheme::SemiImplicit {
                    let m = r.min_column_margin;
                    check(format!("{name} column dominance"), m > 0.0, format!("smallest margin {m:.3e}"));
                }
            }
            Err(e) => check(format!("{name} random states"), false, as_report(e)),
        }
        let small = RunConfig { cells: 8, ..base };
        match monotonicity_defect(&l.problem, &small, args.trials, args.seed) {
            Ok(d) => check(format!("{name} monotonicity"), d <= 1e-12, format!("largest decrease {d:.3e}")),
            Err(e) => check(format!("{name} monotonicity"), false, as_report(e)),
        }
    }
    let s = secant_row_sum_defect(&l.problem, 8, args.trials, args.seed);
    check("secant row sums".into(), s <= 1e-13, format!("|M·1 − 1| ≤ {s:.3e}"));
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Validation(format!("{} check(s) failed: {}", failures.len(), failures.join(", "))))
    }
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("SBR_SIM_THREADS") {
        let n: usize = v.parse().map_err(|_| Failure::Config(format!("SBR_SIM_THREADS: '{v}' is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Convergence(a) => cmd_convergence(a),
        Command::Tolerance(a) => cmd_tolerance(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Stationarity(a) => cmd_stationarity(a),
        Command::Validate(a) => cmd_validate(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
