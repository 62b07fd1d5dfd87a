//! `landr`: run Lan-DR, Minres-DR and the deflated follow-up solvers from the
//! command line.
//!
//! Exit codes: 0 when every solve converged, 2 when some did not, 1 on usage
//! or IO errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use landr::dcg::CgOptions;
use landr::harness::{self, experiments, ExperimentSpec, MatrixRecipe, ResultBundle, RhsSpec, Step};
use landr::{LanDrConfig, ReorthPolicy, Target};

fn recipes_help() -> String {
    format!(
        "Matrix recipe: one of {}; `file:PATH` reads a Matrix Market file",
        harness::recipes::NAMES
    )
}

fn policy_help() -> String {
    format!("Reorthogonalization policy: {}", ReorthPolicy::NAMES)
}

fn repro_help() -> String {
    format!("Built-in experiment: {}", experiments::NAMES.join(", "))
}

fn after_help() -> String {
    format!(
        "Recipes: {}\nPolicies: {}\nExperiments: {}\n\nExit codes: 0 converged, 2 not converged, 1 usage or IO error.",
        harness::recipes::NAMES,
        ReorthPolicy::NAMES,
        experiments::NAMES.join(", ")
    )
}

#[derive(Debug, Parser)]
#[command(name = "landr", version, about = "Deflated restarted Lanczos solvers", after_help = after_help())]
struct Cli {
    /// Worker threads for operator kernels.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Output directory for CSV and JSON results.
    #[arg(long, global = true, env = "LANDR_OUT_DIR", default_value = "landr-out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve with Lan-DR or Minres-DR, then the remaining right-hand sides with
    /// deflated CG or deflated Minres.
    Solve(SolveArgs),
    /// Compute eigenpairs only.
    Eig(EigArgs),
    /// Run an experiment spec from a JSON file.
    Bench {
        /// Path of the JSON experiment spec.
        spec: PathBuf,
    },
    /// Run a built-in experiment.
    Repro {
        #[arg(help = repro_help())]
        name: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    LanDr,
    MinresDr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RhsMode {
    Random,
    Related,
}

#[derive(Debug, Args)]
struct MatrixArgs {
    #[arg(long, default_value = "example3", help = recipes_help())]
    matrix: String,
    /// Matrix dimension [default: the recipe's own].
    #[arg(long)]
    n: Option<usize>,
    /// Seed for randomized recipes [default: the recipe's own].
    #[arg(long)]
    matrix_seed: Option<u64>,
    /// Run in complex arithmetic.
    #[arg(long, default_value_t = false)]
    complex: bool,
}

#[derive(Debug, Args)]
struct SubspaceArgs {
    /// Subspace dimension.
    #[arg(long, default_value_t = 100)]
    m: usize,
    /// Retained Ritz vectors.
    #[arg(long, default_value_t = 40)]
    k: usize,
    #[arg(long, default_value = "k-so", help = policy_help())]
    policy: ReorthPolicy,
    /// Eigenvalues to target: sm (smallest magnitude), sa, la.
    #[arg(long, default_value = "sm")]
    target: Target,
    /// Ritz pairs required to converge.
    #[arg(long, default_value_t = 0)]
    n_eig: usize,
    /// Absolute eigen-residual tolerance.
    #[arg(long, default_value_t = 1e-8)]
    eig_tol: f64,
    /// Cycle budget.
    #[arg(long, default_value_t = 100)]
    max_cycles: usize,
    /// Run exactly this many cycles [default: stop on convergence].
    #[arg(long)]
    cycles: Option<usize>,
}

impl SubspaceArgs {
    fn config(&self) -> LanDrConfig {
        let mut cfg = LanDrConfig {
            policy: self.policy,
            target: self.target,
            n_eig_wanted: self.n_eig,
            eig_tol: self.eig_tol,
            max_cycles: self.max_cycles,
            ..LanDrConfig::new(self.m, self.k)
        };
        if let Some(c) = self.cycles {
            cfg.max_cycles = c;
            cfg.run_all_cycles = true;
        }
        cfg
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    matrix: MatrixArgs,
    #[command(flatten)]
    subspace: SubspaceArgs,
    #[arg(long, value_enum, default_value_t = Method::LanDr)]
    method: Method,
    /// Relative residual tolerance.
    #[arg(long, default_value_t = 1e-8)]
    rtol: f64,
    /// Iteration limit of the deflated follow-up solves.
    #[arg(long, default_value_t = 10_000)]
    maxit: usize,
    /// Number of right-hand sides.
    #[arg(long, default_value_t = 1)]
    rhs: usize,
    #[arg(long, value_enum, default_value_t = RhsMode::Random)]
    rhs_mode: RhsMode,
    /// Seed of the right-hand sides.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Perturbation size for related right-hand sides.
    #[arg(long, default_value_t = 1e-3)]
    scale: f64,
    /// Project each new right-hand side onto earlier solutions first.
    #[arg(long, default_value_t = false)]
    project_solutions: bool,
}

#[derive(Debug, Args)]
struct EigArgs {
    #[command(flatten)]
    matrix: MatrixArgs,
    #[command(flatten)]
    subspace: SubspaceArgs,
    /// Seed of the starting vector.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn recipe(args: &MatrixArgs) -> anyhow::Result<MatrixRecipe> {
    Ok(MatrixRecipe::from_name(&args.matrix, args.n, args.matrix_seed)?)
}

fn rhs_spec(args: &SolveArgs) -> RhsSpec {
    match args.rhs_mode {
        RhsMode::Random => RhsSpec::RandomNormal {
            count: args.rhs,
            seed: args.seed,
        },
        RhsMode::Related => RhsSpec::Related {
            count: args.rhs,
            seed: args.seed,
            scale: args.scale,
        },
    }
}

fn solve_spec(args: &SolveArgs) -> anyhow::Result<ExperimentSpec> {
    if args.rhs == 0 {
        bail!("--rhs must be at least 1");
    }
    let mut cfg = args.subspace.config();
    cfg.lin_rtol = args.rtol;
    let rest: Vec<usize> = (1..args.rhs).collect();
    let mut steps = Vec::new();
    match args.method {
        Method::LanDr => {
            steps.push(Step::LanDr {
                rhs: 0,
                config: cfg,
                then_dcg: None,
                label: Some("solve".into()),
            });
            if !rest.is_empty() {
                steps.push(Step::DCg {
                    rhs: rest,
                    options: CgOptions::new(args.rtol, args.maxit),
                    project_solutions: args.project_solutions,
                    label: Some("solve".into()),
                });
            }
        }
        Method::MinresDr => {
            steps.push(Step::MinresDr {
                rhs: 0,
                config: cfg,
                label: Some("solve".into()),
            });
            if !rest.is_empty() {
                steps.push(Step::DMinres {
                    rhs: rest,
                    rtol: args.rtol,
                    maxit: args.maxit,
                    label: Some("solve".into()),
                });
            }
        }
    }
    Ok(ExperimentSpec {
        name: "solve".into(),
        matrix: recipe(&args.matrix)?,
        complex: args.matrix.complex,
        rhs: rhs_spec(args),
        steps,
    })
}

fn eig_spec(args: &EigArgs) -> anyhow::Result<ExperimentSpec> {
    let mut cfg = args.subspace.config();
    cfg.solve_linear = false;
    if cfg.n_eig_wanted == 0 && !cfg.run_all_cycles {
        cfg.n_eig_wanted = cfg.k.min(10);
    }
    Ok(ExperimentSpec {
        name: "eig".into(),
        matrix: recipe(&args.matrix)?,
        complex: args.matrix.complex,
        rhs: RhsSpec::RandomNormal {
            count: 1,
            seed: args.seed,
        },
        steps: vec![Step::LanDr {
            rhs: 0,
            config: cfg,
            then_dcg: None,
            label: Some("eig".into()),
        }],
    })
}

/// Checks that need no matrix: everything except bounds tied to a file's
/// dimension.
fn prevalidate(spec: &ExperimentSpec) -> anyhow::Result<()> {
    spec.validate(spec.matrix.dim().unwrap_or(usize::MAX))?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.3e}"))
}

fn print_summary(bundle: &ResultBundle) {
    println!(
        "{:<14} {:<10} {:>4} {:<18} {:>6} {:>7} {:>9} {:>10} {:>11} {:>11}",
        "label", "solver", "rhs", "status", "iters", "cycles", "matvecs", "vecops", "resid", "orthodefect"
    );
    for r in &bundle.records {
        println!(
            "{:<14} {:<10} {:>4} {:<18} {:>6} {:>7} {:>9} {:>10} {:>11} {:>11}",
            r.label,
            r.solver,
            r.rhs_index,
            format!("{:?}", r.status),
            r.iterations,
            r.cycles.map_or("-".into(), |c| c.to_string()),
            r.matvecs,
            r.vecops,
            fmt_opt(r.final_resid),
            fmt_opt(r.orthodefect),
        );
        if !r.eig_values.is_empty() {
            let shown: Vec<String> = r
                .eig_values
                .iter()
                .zip(&r.eig_residuals)
                .take(10)
                .map(|(v, res)| format!("{v:.6} ({res:.1e})"))
                .collect();
            println!("    eigenvalues: {}", shown.join(", "));
        }
    }
    println!("total matvecs {} vecops {}", bundle.totals.matvecs, bundle.totals.vecops);
    if let Some(e) = &bundle.error {
        println!("error: {e}");
    }
}

fn execute(spec: &ExperimentSpec, out: &Path) -> anyhow::Result<bool> {
    prevalidate(spec)?;
    info!("running {}", spec.name);
    let bundle = harness::run(spec)?;
    let written = harness::emit(&bundle, out).with_context(|| format!("writing results to {}", out.display()))?;
    print_summary(&bundle);
    println!("wrote {} files to {}", written.len(), out.display());
    if let Some(e) = &bundle.error {
        bail!("{e}");
    }
    Ok(bundle.all_converged())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.max(1))
        .build_global()
        .context("configuring the thread pool")?;
    let spec = match &cli.command {
        Command::Solve(args) => solve_spec(args)?,
        Command::Eig(args) => eig_spec(args)?,
        Command::Bench { spec } => {
            let text = fs::read_to_string(spec).with_context(|| format!("reading {}", spec.display()))?;
            ExperimentSpec::from_json(&text)?
        }
        Command::Repro { name } => match experiments::builtin(name) {
            Some(s) => s,
            None => bail!("unknown experiment `{name}`; expected one of {}", experiments::NAMES.join(", ")),
        },
    };
    execute(&spec, &cli.out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
