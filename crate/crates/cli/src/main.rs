//! `mstep`: compute, check and plot M-step hold invariant sets from problem files.

mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mstep_core::invariance::{compute_cinf, compute_rcinf};
use mstep_core::verify::{
    find_counterexample, grid_oracle_cinf, suggested_input_samples, CounterexampleOptions, CounterexampleProblem,
};
use mstep_core::{json, ContinuousLtiModel, Error, InvariantSetResult, ProblemSpec};
use serde::Deserialize;
use thiserror::Error as ThisError;

#[derive(Parser)]
#[command(name = "mstep", version, about = "M-step hold control invariant sets for sampled LTI systems")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Override the set-equality tolerance of the problem file.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Override the iteration cap of the problem file.
    #[arg(long = "max-iters", global = true)]
    max_iters: Option<usize>,
    /// Override the random seed of the problem file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Exit with status 4 when a fixed-point iteration does not converge.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Exact,
    Euler,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Svg,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a continuous model and print the discrete model as JSON.
    Discretize {
        /// A model file `{"Ac", "Bc"}` or a problem file with a continuous model.
        model: PathBuf,
        #[arg(long = "Ts")]
        ts: f64,
        #[arg(long, value_enum, default_value = "exact")]
        method: Method,
    },
    /// Maximal M-step hold control invariant set for every M of the problem.
    Cinf { problem: PathBuf },
    /// Robust version under the problem's disturbance schedule.
    Rcinf { problem: PathBuf },
    /// Run the property suite and print a PASS/FAIL table.
    Check { problem: PathBuf },
    /// Search for a state whose up-sampled coarse plan violates the constraints.
    Counterexample {
        problem: PathBuf,
        #[arg(long = "Ts")]
        ts: f64,
        #[arg(long = "M")]
        hold: usize,
        /// Steps of the coarse planning problem.
        #[arg(long, default_value_t = 10)]
        horizon: usize,
    },
    /// Overlay result files as SVG polygons or export their vertices as JSON.
    Plot {
        #[arg(required = true)]
        results: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "svg")]
        format: Format,
    },
    /// Grid-based backward reachability for one hold count, compared with the polytope result.
    Oracle {
        problem: PathBuf,
        #[arg(long = "M")]
        hold: usize,
        #[arg(long, default_value_t = 0.05)]
        resolution: f64,
        /// Input samples per axis; sized so one input step moves a prediction at most one cell when omitted.
        #[arg(long)]
        inputs: Option<usize>,
    },
}

#[derive(Debug, ThisError)]
enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    NotConverged(String),
    #[error("{0}")]
    Domain(String),
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e {
                Error::Parse(_)
                | Error::InvalidProblem(_)
                | Error::InvalidModel(_)
                | Error::InvalidSchedule(_)
                | Error::DimensionMismatch { .. } => 2,
                _ => 3,
            },
            CliError::Io { .. } | CliError::Usage(_) => 2,
            CliError::Domain(_) => 3,
            CliError::NotConverged(_) => 4,
            CliError::ChecksFailed(_) => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn out_dir(global: &Global) -> CliResult<&Path> {
    fs::create_dir_all(&global.out).map_err(|source| CliError::Io {
        path: global.out.clone(),
        source,
    })?;
    Ok(&global.out)
}

fn load_problem(path: &Path, global: &Global) -> CliResult<ProblemSpec> {
    let mut p = ProblemSpec::from_json(&read(path)?).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    if let Some(t) = global.tolerance {
        p.options.tolerance = t;
    }
    if let Some(n) = global.max_iters {
        p.options.max_iterations = n;
    }
    if let Some(s) = global.seed {
        p.options.seed = s;
    }
    p.validate()?;
    Ok(p)
}

fn load_model(path: &Path) -> CliResult<ContinuousLtiModel> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum ModelFile {
        Bare(ContinuousLtiModel),
        Problem { model: ContinuousLtiModel },
    }
    let text = read(path)?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: expected a continuous model {{\"Ac\", \"Bc\"}}: {e}", path.display())))?;
    let model = match file {
        ModelFile::Bare(m) | ModelFile::Problem { model: m } => m,
    };
    model.validate()?;
    Ok(model)
}

fn summarize(r: &InvariantSetResult) -> String {
    let kind = if r.robust { "RC" } else { "C" };
    let state = match (r.converged, r.is_empty()) {
        (true, true) => "converged, empty".to_string(),
        (true, false) => format!("converged, {} faces", r.final_set.num_rows()),
        (false, _) => "NOT converged".to_string(),
    };
    format!("{kind}^{}: {} iterations, {state}", r.hold, r.iterations)
}

fn write_results(results: &[InvariantSetResult], prefix: &str, global: &Global) -> CliResult<()> {
    let dir = out_dir(global)?;
    for r in results {
        let path = dir.join(format!("{prefix}_M{}.json", r.hold));
        write(&path, &json::to_string_pretty(r)?)?;
        println!("{}  -> {}", summarize(r), path.display());
    }
    if global.strict {
        let stuck: Vec<String> = results
            .iter()
            .filter(|r| !r.converged)
            .map(|r| format!("M={}", r.hold))
            .collect();
        if !stuck.is_empty() {
            return Err(CliError::NotConverged(format!(
                "not converged within the iteration cap: {}",
                stuck.join(", ")
            )));
        }
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let global = &cli.global;
    match cli.command {
        Command::Discretize { model, ts, method } => {
            let c = load_model(&model)?;
            let md = match method {
                Method::Exact => c.exact_discretize(ts)?,
                Method::Euler => c.euler_discretize(ts)?,
            };
            println!("{}", json::to_string_pretty(&md)?);
        }
        Command::Cinf { problem } => {
            let p = load_problem(&problem, global)?;
            let (md, x, u) = (p.discrete_model()?, p.x_set()?, p.u_set()?);
            let results = p
                .m_list
                .iter()
                .map(|&m| compute_cinf(&x, &u, &md, m, &p.invariant_options()))
                .collect::<mstep_core::Result<Vec<_>>>()?;
            write_results(&results, "cinf", global)?;
        }
        Command::Rcinf { problem } => {
            let p = load_problem(&problem, global)?;
            if p.disturbance.is_none() {
                return Err(CliError::Usage(format!("{}: no disturbance given", problem.display())));
            }
            let (md, x, u) = (p.discrete_model()?, p.x_set()?, p.u_set()?);
            let mut results = Vec::new();
            for &m in &p.m_list {
                let w = p.schedule(m)?.expect("disturbance checked above");
                results.push(compute_rcinf(&x, &u, &md, &w, &p.invariant_options())?);
            }
            write_results(&results, "rcinf", global)?;
        }
        Command::Check { problem } => {
            let p = load_problem(&problem, global)?;
            let report = mstep_core::run_checks(&p)?;
            print!("{report}");
            let failed = report
                .rows
                .iter()
                .filter(|r| r.status == mstep_core::Status::Fail)
                .count();
            if failed > 0 {
                return Err(CliError::ChecksFailed(failed));
            }
        }
        Command::Counterexample {
            problem,
            ts,
            hold,
            horizon,
        } => {
            let p = load_problem(&problem, global)?;
            let model = p
                .continuous_model()
                .cloned()
                .ok_or_else(|| CliError::Usage("counterexample needs a continuous model".into()))?;
            let cp = CounterexampleProblem {
                model,
                x_set: p.x_set()?,
                u_set: p.u_set()?,
                ts,
                hold,
                horizon,
            };
            let opts = CounterexampleOptions {
                seed: p.options.seed,
                invariant: p.invariant_options(),
                ..CounterexampleOptions::default()
            };
            let report = find_counterexample(&cp, &opts)?
                .ok_or_else(|| CliError::Domain("no constraint violation found".into()))?;
            let path = out_dir(global)?.join(format!("counterexample_Ts{ts}_M{hold}.json"));
            write(&path, &json::to_string_pretty(&report)?)?;
            let margin = |v: &Option<mstep_core::verify::Violation>| {
                v.as_ref().map_or("none".to_string(), |v| format!("{:.4} at t={:.3}", v.worst_margin, v.time))
            };
            println!(
                "x0 = {:?}, sampled violation {}, continuous violation {}  -> {}",
                report.x0.as_slice(),
                margin(&report.fine_violation),
                margin(&report.continuous_violation),
                path.display()
            );
        }
        Command::Plot { results, format } => {
            let parsed = results
                .iter()
                .map(|path| {
                    serde_json::from_str::<InvariantSetResult>(&read(path)?)
                        .map_err(|e| CliError::Core(Error::Parse(format!("{}: {e}", path.display()))))
                })
                .collect::<CliResult<Vec<_>>>()?;
            let data = plot::plot_data(&parsed)?;
            let (name, text) = match format {
                Format::Svg => ("plot.svg", plot::render_svg(&data)),
                Format::Json => ("plot.json", json::to_string_pretty(&data)?),
            };
            let path = out_dir(global)?.join(name);
            write(&path, &text)?;
            println!("{} sets -> {}", data.sets.len(), path.display());
        }
        Command::Oracle {
            problem,
            hold,
            resolution,
            inputs,
        } => {
            let p = load_problem(&problem, global)?;
            if hold == 0 {
                return Err(CliError::Usage("--M must be at least 1".into()));
            }
            let (md, x, u) = (p.discrete_model()?, p.x_set()?, p.u_set()?);
            let samples = match inputs {
                Some(n) => n,
                None => suggested_input_samples(&u, &md, hold, resolution)?,
            };
            let oracle = grid_oracle_cinf(&x, &u, &md, hold, resolution, samples)?;
            let set = compute_cinf(&x, &u, &md, hold, &p.invariant_options())?;
            let cmp = oracle.compare(&set.final_set)?;
            let path = out_dir(global)?.join(format!("oracle_M{hold}.json"));
            write(&path, &json::to_string(&oracle)?)?;
            println!(
                "{} of {} cells marked ({} input samples); interior cells outside: {}, deep points unmarked: {}  -> {}",
                oracle.num_marked(),
                oracle.num_cells(),
                samples,
                cmp.interior_outside,
                cmp.deep_unmarked,
                path.display()
            );
            if !cmp.agrees() {
                return Err(CliError::Domain("oracle and polytope disagree by more than one cell".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
