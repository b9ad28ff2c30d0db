use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dtwin_cli::config::{parse_candidate, Case, Scenario, ScenarioConfig, ValidationErrors};
use dtwin_cli::matrix::{run_matrix, write_summary, MatrixAxes};
use dtwin_cli::pipeline::{self, RunSummary, StageError, StageResult};
use dtwin_cli::report::write_report;
use dtwin_cli::{EXIT_FAILED, EXIT_INVALID};

#[derive(Parser)]
#[command(name = "dtwin", version, about = "Digital twin of a drifting single-degree-of-freedom oscillator")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Sample noisy measurements into OUT.
    Simulate(Common),
    /// Invert OUT/measurements.json into stiffness/mass estimates.
    Invert(Common),
    /// Fit one mean/kernel pair to OUT/estimates.json.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "constant")]
        mean: String,
        #[arg(long, default_value = "squared_exponential")]
        kernel: String,
    },
    /// BIC selection over the candidate pool on OUT/estimates.json.
    Select(Common),
    /// Full pipeline.
    Run(Common),
    /// Sweep point counts, noise levels and seeds.
    Matrix {
        #[command(flatten)]
        common: Common,
        /// Seeds per cell, counting up from --seed.
        #[arg(long, default_value_t = 1)]
        replicates: usize,
    },
    /// Write OUT/report.md for a finished (or failed) run.
    Report(Common),
    /// Check a config and print it with every default filled in.
    Validate(Common),
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    case: Option<Case>,
    /// Measurement count; a comma-separated list for `matrix`.
    #[arg(long, value_delimiter = ',')]
    points: Vec<usize>,
    /// Noise standard deviation; a comma-separated list for `matrix`.
    #[arg(long, value_delimiter = ',')]
    sigma: Vec<f64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

enum Failure {
    Invalid(ValidationErrors),
    Stage(StageError),
}

impl From<ValidationErrors> for Failure {
    fn from(e: ValidationErrors) -> Self {
        Self::Invalid(e)
    }
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        Self::Stage(e)
    }
}

impl Common {
    fn base_config(&self) -> Result<ScenarioConfig, ValidationErrors> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        if let Some(case) = self.case {
            cfg.case = case;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = Some(out.clone());
        }
        Ok(cfg)
    }

    fn scenario(&self) -> Result<Scenario, ValidationErrors> {
        let mut cfg = self.base_config()?;
        let mut problems = Vec::new();
        match self.points.as_slice() {
            [] => {}
            [n] => cfg.n_points = Some(*n),
            _ => problems.push("--points takes a single value outside `matrix`".to_string()),
        }
        match self.sigma.as_slice() {
            [] => {}
            [s] => cfg.noise_sigma = Some(*s),
            _ => problems.push("--sigma takes a single value outside `matrix`".to_string()),
        }
        match cfg.resolve() {
            Ok(s) if problems.is_empty() => Ok(s),
            Ok(_) => Err(ValidationErrors(problems)),
            Err(mut e) => {
                problems.append(&mut e.0);
                Err(ValidationErrors(problems))
            }
        }
    }
}

fn staged<T>(dir: &Path, result: StageResult<T>) -> StageResult<T> {
    if let Err(e) = &result {
        pipeline::mark_failed(dir, e);
    }
    result
}

fn print_summary(summary: &RunSummary) {
    println!("model: {} mean, {} covariance", summary.model.mean, summary.model.kernel);
    for c in &summary.channels {
        let coverage = c.heldout_coverage.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        println!("{}: rmse {:.3e}, held-out coverage {coverage}", c.channel.key(), c.rmse);
    }
}

fn finish_model(
    dir: &Path,
    scenario: &Scenario,
    est: &dtwin_core::DeltaEstimateSeries,
    model: dtwin_core::emulator::EmulatorSpec,
    bic: Option<f64>,
    emulators: &[dtwin_core::TrainedEmulator],
) -> StageResult<RunSummary> {
    let channels = pipeline::predict_and_write(dir, scenario, est, emulators)?;
    let summary = RunSummary {
        case: scenario.case,
        seed: scenario.seed,
        n_points: est.len(),
        noise_sigma: est.noise_sigma,
        model,
        bic,
        n_flagged: est.flagged.iter().filter(|&&f| f).count(),
        channels,
    };
    pipeline::write_summary(dir, &summary)?;
    Ok(summary)
}

fn execute(verb: Verb) -> Result<(), Failure> {
    match verb {
        Verb::Validate(c) => {
            let scenario = c.scenario()?;
            print!("{}", scenario.to_toml());
        }
        Verb::Simulate(c) => {
            let s = c.scenario()?;
            let dir = s.output_dir.clone();
            staged(&dir, (|| {
                pipeline::prepare_dir(&dir)?;
                std::fs::write(dir.join(pipeline::CONFIG_FILE), s.to_toml())
                    .map_err(|e| StageError { stage: dtwin_cli::Stage::Write, message: e.to_string() })?;
                let series = pipeline::simulate(&s)?;
                pipeline::write_measurements(&dir, &series)
            })())?;
            println!("wrote {} measurements to {}", s.n_points, dir.display());
        }
        Verb::Invert(c) => {
            let s = c.scenario()?;
            let dir = s.output_dir.clone();
            let est = staged(&dir, (|| {
                pipeline::prepare_dir(&dir)?;
                let series = pipeline::read_measurements(&dir)?;
                let est = pipeline::invert(&s, &series)?;
                pipeline::write_estimates(&dir, &est)?;
                Ok(est)
            })())?;
            let flagged = est.flagged.iter().filter(|&&f| f).count();
            println!("inverted {} readings ({flagged} flagged) in {}", est.len(), dir.display());
        }
        Verb::Select(c) => {
            let s = c.scenario()?;
            let dir = s.output_dir.clone();
            let summary = staged(&dir, (|| {
                pipeline::prepare_dir(&dir)?;
                let est = pipeline::read_estimates(&dir)?;
                let (report, emulators) = pipeline::select(&s, &est)?;
                pipeline::write_selection(&dir, &report)?;
                let w = report.winner_record();
                finish_model(&dir, &s, &est, w.spec(), Some(w.bic), &emulators)
            })())?;
            print_summary(&summary);
        }
        Verb::Fit { common, mean, kernel } => {
            let s = common.scenario()?;
            let spec = parse_candidate(&format!("{mean}:{kernel}")).ok_or_else(|| {
                ValidationErrors(vec![format!("unknown mean/kernel pair {mean:?}/{kernel:?}")])
            })?;
            let dir = s.output_dir.clone();
            let summary = staged(&dir, (|| {
                pipeline::prepare_dir(&dir)?;
                let est = pipeline::read_estimates(&dir)?;
                let emulators = pipeline::fit_one(&s, &est, spec)?;
                finish_model(&dir, &s, &est, spec, None, &emulators)
            })())?;
            print_summary(&summary);
        }
        Verb::Run(c) => {
            let s = c.scenario()?;
            let outcome = pipeline::run_scenario(&s);
            let summary = outcome.result?;
            print_summary(&summary);
            println!("artifacts in {}", outcome.dir.display());
        }
        Verb::Matrix { common, replicates } => {
            let base = common.base_config()?;
            let out = base.output_dir.clone().unwrap_or_else(|| PathBuf::from("runs/matrix"));
            let axes = MatrixAxes {
                points: if common.points.is_empty() {
                    vec![base.n_points.unwrap_or(base.case.default_points())]
                } else {
                    common.points.clone()
                },
                sigmas: if common.sigma.is_empty() {
                    vec![base.noise_sigma.unwrap_or(base.case.default_sigma())]
                } else {
                    common.sigma.clone()
                },
                replicates,
            };
            let cells = run_matrix(&base, &axes, &out)?;
            let path = write_summary(&cells, &out).map_err(|e| StageError {
                stage: dtwin_cli::Stage::Write,
                message: e.to_string(),
            })?;
            let failed = cells.iter().filter(|c| c.result.is_err()).count();
            println!("{} cells ({failed} failed); summary in {}", cells.len(), path.display());
        }
        Verb::Report(c) => {
            let cfg = c.base_config()?;
            let dir = cfg.output_dir.unwrap_or_else(|| PathBuf::from(format!("runs/{}", cfg.case.key())));
            let md = write_report(&dir).map_err(|e| StageError {
                stage: dtwin_cli::Stage::Write,
                message: e.to_string(),
            })?;
            print!("{md}");
        }
    }
    Ok(())
}

fn jobs(verb: &Verb) -> Option<usize> {
    match verb {
        Verb::Simulate(c) | Verb::Invert(c) | Verb::Select(c) | Verb::Run(c) | Verb::Report(c) | Verb::Validate(c) => c.jobs,
        Verb::Fit { common, .. } | Verb::Matrix { common, .. } => common.jobs,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = jobs(&cli.verb) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("warning: could not size the worker pool: {e}");
        }
    }
    match execute(cli.verb) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprint!("{e}");
            ExitCode::from(EXIT_INVALID as u8)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILED as u8)
        }
    }
}
