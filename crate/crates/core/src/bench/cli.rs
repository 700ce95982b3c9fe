//! Command-line interface: `solve`, `montecarlo` and `sample` subcommands.
//!
//! Exit codes: 0 success, 1 solve did not converge, 2 bad arguments or I/O,
//! 3 internal numeric failure. Machine-readable output goes to `--out` (or
//! stdout); timing and progress go to the error stream so that output files
//! stay byte-reproducible run to run.

use super::{
    full_matrix, load_benchmark, monte_carlo_csv, monte_carlo_table, run_monte_carlo, samples_csv,
    trial_guess, CellConfig, MonteCarloConfig, ProblemId, SolutionRecord,
};
use crate::numerics::{IntegratorConfig, RootSolveConfig};
use crate::shooting::{self, Backend, ContinuationSchedule};
use crate::smoothing::SmoothingKind;
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProblemArg {
    E2m,
    E2d,
}

impl From<ProblemArg> for ProblemId {
    fn from(p: ProblemArg) -> Self {
        match p {
            ProblemArg::E2m => ProblemId::EarthToMars,
            ProblemArg::E2d => ProblemId::EarthToDionysus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CoordsArg {
    Cartesian,
    Mee,
}

impl From<CoordsArg> for Backend {
    fn from(c: CoordsArg) -> Self {
        match c {
            CoordsArg::Cartesian => Backend::Cartesian,
            CoordsArg::Mee => Backend::Mee,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SmoothingArg {
    Tanh,
    L2,
}

impl From<SmoothingArg> for SmoothingKind {
    fn from(s: SmoothingArg) -> Self {
        match s {
            SmoothingArg::Tanh => SmoothingKind::HyperbolicTangent,
            SmoothingArg::L2 => SmoothingKind::L2Norm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "mintraj",
    about = "Minimum-fuel low-thrust trajectory optimization by indirect methods"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one benchmark from a seeded initial costate guess.
    Solve(SolveArgs),
    /// Seeded convergence-rate comparison over the smoothing/coordinates/STM matrix.
    Montecarlo(MonteCarloArgs),
    /// Densely sample a solved trajectory into a time-series CSV.
    Sample(SampleArgs),
}

#[derive(Debug, Args)]
struct CommonNumerics {
    /// First smoothing parameter of the continuation ladder.
    #[arg(long, default_value_t = 1.0)]
    rho_init: f64,
    /// Multiplicative decrement between continuation stages.
    #[arg(long, default_value_t = 0.1)]
    rho_factor: f64,
    /// Last smoothing parameter of the ladder.
    #[arg(long, default_value_t = 1e-5)]
    rho_final: f64,
    /// Integrator relative tolerance.
    #[arg(long, default_value_t = 1e-13)]
    rel_tol: f64,
    /// Integrator absolute tolerance.
    #[arg(long, default_value_t = 1e-13)]
    abs_tol: f64,
    /// Root-solver convergence threshold on the residual infinity norm.
    #[arg(long, default_value_t = 1e-8)]
    residual_tol: f64,
}

impl CommonNumerics {
    fn schedule(&self) -> ContinuationSchedule {
        ContinuationSchedule {
            rho_init: self.rho_init,
            rho_factor: self.rho_factor,
            rho_final: self.rho_final,
        }
    }

    fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            ..Default::default()
        }
    }

    fn root_cfg(&self) -> RootSolveConfig {
        RootSolveConfig {
            residual_tol: self.residual_tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    problem: ProblemArg,
    #[arg(long, value_enum, default_value = "cartesian")]
    coords: CoordsArg,
    #[arg(long, value_enum, default_value = "l2")]
    smoothing: SmoothingArg,
    /// Use the state-transition-matrix Jacobian (default).
    #[arg(long, action = ArgAction::SetTrue, conflicts_with = "no_stm")]
    stm: bool,
    /// Approximate the residual Jacobian by finite differences instead.
    #[arg(long = "no-stm", action = ArgAction::SetTrue)]
    no_stm: bool,
    /// Seed of the initial costate guess.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    numerics: CommonNumerics,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Debug, Args)]
struct MonteCarloArgs {
    #[arg(long, value_enum, default_value = "e2m")]
    problem: ProblemArg,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Restrict the matrix to one coordinate set.
    #[arg(long, value_enum)]
    coords: Option<CoordsArg>,
    /// Restrict the matrix to one smoothing law.
    #[arg(long, value_enum)]
    smoothing: Option<SmoothingArg>,
    /// Restrict the matrix to STM rows.
    #[arg(long, action = ArgAction::SetTrue, conflicts_with = "no_stm")]
    stm: bool,
    /// Restrict the matrix to finite-difference rows.
    #[arg(long = "no-stm", action = ArgAction::SetTrue)]
    no_stm: bool,
    #[command(flatten)]
    numerics: CommonNumerics,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// Solution record written by `solve`.
    #[arg(long)]
    solution: PathBuf,
    #[arg(long, default_value_t = 2000)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

/// Entry point shared by the binary and the integration tests.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are successful exits.
            let code = if e.exit_code() == 0 { 0 } else { 2 };
            let _ = e.print();
            return code;
        }
    };
    run_in_pool(|| match cli.command {
        Command::Solve(args) => run_solve(args),
        Command::Montecarlo(args) => run_montecarlo(args),
        Command::Sample(args) => run_sample(args),
    })
}

/// MINTRAJ_THREADS caps the rayon pool used for Monte Carlo trials.
fn run_in_pool<F: FnOnce() -> i32 + Send>(f: F) -> i32 {
    if let Ok(threads) = std::env::var("MINTRAJ_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            if n >= 1 {
                if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                    return pool.install(f);
                }
            }
        }
        eprintln!("warning: ignoring invalid MINTRAJ_THREADS value");
    }
    f()
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), i32> {
    match out {
        Some(path) => std::fs::write(path, content).map_err(|e| {
            eprintln!("error: cannot write {}: {e}", path.display());
            2
        }),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn run_solve(args: SolveArgs) -> i32 {
    if args.format != FormatArg::Json {
        eprintln!("error: solve emits a JSON solution record; use --format json");
        return 2;
    }
    let id: ProblemId = args.problem.into();
    let backend: Backend = args.coords.into();
    let smoothing: SmoothingKind = args.smoothing.into();
    let use_stm = !args.no_stm;

    let mut problem = match load_benchmark(id, backend, smoothing, use_stm) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    problem.integrator = args.numerics.integrator();
    let schedule = args.numerics.schedule();
    let root_cfg = args.numerics.root_cfg();
    let guess = trial_guess(args.seed, 0, backend);

    let report = match shooting::solve_with_continuation(&problem, &guess, &schedule, &root_cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: numeric failure: {e}");
            return 3;
        }
    };
    if !report.converged {
        eprintln!(
            "error: solve did not converge (stage {} of the rho ladder)",
            report.failed_stage.map(|i| i + 1).unwrap_or(0)
        );
        return 1;
    }

    let record = SolutionRecord::from_solve(id, backend, smoothing, &schedule, args.seed, &report);
    let json = match serde_json::to_string_pretty(&record) {
        Ok(mut s) => {
            s.push('\n');
            s
        }
        Err(e) => {
            eprintln!("error: serialization failed: {e}");
            return 3;
        }
    };
    if let Err(code) = write_output(&args.out, &json) {
        return code;
    }
    eprintln!(
        "converged: final mass {:.3} kg, residual {:.2e}, {:.2} s",
        record.final_mass_kg, record.residual_inf_norm, report.wall_time_s
    );
    0
}

fn run_montecarlo(args: MonteCarloArgs) -> i32 {
    if args.format != FormatArg::Csv {
        eprintln!("error: montecarlo emits CSV; use --format csv");
        return 2;
    }
    let id: ProblemId = args.problem.into();
    let stm_filter: Option<bool> = if args.stm {
        Some(true)
    } else if args.no_stm {
        Some(false)
    } else {
        None
    };
    let cells: Vec<CellConfig> = full_matrix()
        .into_iter()
        .filter(|c| args.coords.map_or(true, |v| Backend::from(v) == c.backend))
        .filter(|c| {
            args.smoothing
                .map_or(true, |v| SmoothingKind::from(v) == c.smoothing)
        })
        .filter(|c| stm_filter.map_or(true, |v| v == c.use_stm))
        .collect();

    let cfg = MonteCarloConfig {
        trials: args.trials,
        seed: args.seed,
        schedule: args.numerics.schedule(),
        root_cfg: args.numerics.root_cfg(),
        integrator: args.numerics.integrator(),
    };
    let report = match run_monte_carlo(id, &cells, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 3;
        }
    };
    if let Err(code) = write_output(&args.out, &monte_carlo_csv(&report)) {
        return code;
    }
    eprintln!("{}", monte_carlo_table(&report));
    0
}

fn run_sample(args: SampleArgs) -> i32 {
    if args.format != FormatArg::Csv {
        eprintln!("error: sample emits CSV; use --format csv");
        return 2;
    }
    let text = match std::fs::read_to_string(&args.solution) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.solution.display());
            return 2;
        }
    };
    let record: SolutionRecord = match serde_json::from_str(&text) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: malformed solution record: {e}");
            return 2;
        }
    };
    let (Some(id), Some(backend), Some(smoothing)) = (
        record.problem_id(),
        record.backend(),
        record.smoothing_kind(),
    ) else {
        eprintln!("error: unknown problem/coords/smoothing in solution record");
        return 2;
    };
    let problem = match load_benchmark(id, backend, smoothing, true) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let samples =
        match shooting::sample_solution(&problem, &record.eta0, record.rho_final, args.points) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: numeric failure while sampling: {e}");
                return 3;
            }
        };
    if let Err(code) = write_output(&args.out, &samples_csv(&samples)) {
        return code;
    }
    0
}
