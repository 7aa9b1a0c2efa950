use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adacomp_cli::config::{load_scenario, Format, Policy, Scenario};
use adacomp_cli::error::CliError;
use adacomp_cli::report::RunReport;
use adacomp_cli::repro::{repro, ReproTarget};
use adacomp_cli::run::{self, apply_overrides, RunOptions};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

#[derive(Debug, Parser)]
#[command(name = "adacomp", version, about = "Adaptive linear compression for Gaussian signals")]
struct Cli {
    /// Output file; stdout when no file or directory applies.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Directory for outputs named `<scenario>-<policy>.<ext>`.
    #[arg(long, global = true, env = "ADACOMP_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Report information in bits instead of nats.
    #[arg(long, global = true)]
    bits: bool,

    /// Seed for randomized steps; overrides the scenario's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Angle count for the grid oracle; overrides the scenario's value.
    #[arg(long, global = true)]
    grid_resolution: Option<usize>,

    /// Worker threads for multi-scenario runs and comparisons.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run each scenario's policy.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// Regenerate a pinned target and verify its golden values.
    Repro {
        #[arg(value_enum)]
        name: ReproTarget,
    },
    /// Run several policies on one scenario.
    Compare {
        config: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', required = true)]
        policies: Vec<Policy>,
    },
    /// Report the greedy-optimality conditions for a scenario.
    CheckTheorems { config: PathBuf },
}

impl Cli {
    fn options(&self) -> RunOptions {
        RunOptions {
            bits: self.bits,
            seed: self.seed,
            grid_resolution: self.grid_resolution,
        }
    }

    /// `--output`, then the scenario's own path, then the output directory.
    fn destination(&self, configured: Option<&Path>, stem: &str, format: Format) -> Option<PathBuf> {
        self.output
            .clone()
            .or_else(|| configured.map(Path::to_path_buf))
            .or_else(|| {
                self.output_dir
                    .as_ref()
                    .map(|d| d.join(format!("{stem}.{}", format.extension())))
            })
    }
}

fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Output(e.to_string());
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(io)?;
            }
            std::fs::write(p, text).map_err(io)
        }
        None => std::io::stdout().lock().write_all(text.as_bytes()).map_err(io),
    }
}

fn render(report: &RunReport, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => Ok(report.to_json()),
        Format::Csv => report.to_csv(),
    }
}

fn load(path: &Path, opts: &RunOptions) -> Result<Scenario, CliError> {
    apply_overrides(load_scenario(path)?, opts)
}

fn golden(report: &RunReport) -> Result<(), CliError> {
    for c in &report.checks {
        eprintln!("{} {}", if c.passed { "ok  " } else { "FAIL" }, c.describe());
    }
    let failed = report.failed_checks();
    if failed.is_empty() {
        return Ok(());
    }
    let lines: Vec<String> = failed.iter().map(|c| c.describe()).collect();
    Err(CliError::Golden(lines.join("\n")))
}

fn run_one(cli: &Cli, path: &Path, opts: &RunOptions, allow_output: bool) -> Result<(), CliError> {
    let scenario = load(path, opts)?;
    let format = cli.format.unwrap_or(scenario.config.output.format);
    let report = run::run(&scenario, opts)?;
    let stem = format!("{}-{}", scenario.config.display_name(), scenario.config.policy);
    let dest = if allow_output {
        cli.destination(scenario.config.output.path.as_deref(), &stem, format)
    } else {
        scenario
            .config
            .output
            .path
            .clone()
            .or_else(|| cli.output_dir.as_ref().map(|d| d.join(format!("{stem}.{}", format.extension()))))
    };
    emit(&render(&report, format)?, dest.as_deref())
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let opts = cli.options();
    match &cli.command {
        Command::Run { configs } => {
            if configs.len() == 1 {
                return run_one(cli, &configs[0], &opts, true);
            }
            if cli.output.is_some() {
                return Err(CliError::Config(
                    "--output takes a single scenario; use --output-dir for several".into(),
                ));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cli.jobs.max(1))
                .build()
                .map_err(|e| CliError::Output(e.to_string()))?;
            let results: Vec<Result<(), CliError>> =
                pool.install(|| configs.par_iter().map(|p| run_one(cli, p, &opts, false)).collect());
            results.into_iter().collect()
        }
        Command::Repro { name } => {
            let report = repro(*name, &opts)?;
            let format = cli.format.unwrap_or(name.default_format());
            let dest = cli.destination(None, name.name(), format);
            emit(&render(&report, format)?, dest.as_deref())?;
            golden(&report)
        }
        Command::Compare { config, policies } => {
            let scenario = load(config, &opts)?;
            let format = cli.format.unwrap_or(scenario.config.output.format);
            let report = run::compare(&scenario, policies, &opts, cli.jobs)?;
            let text = match format {
                Format::Json => report.to_json(),
                Format::Csv => report.to_csv()?,
            };
            let stem = format!("{}-compare", scenario.config.display_name());
            emit(&text, cli.destination(None, &stem, format).as_deref())
        }
        Command::CheckTheorems { config } => {
            let scenario = load(config, &opts)?;
            let format = cli.format.unwrap_or(scenario.config.output.format);
            let report = run::check_theorems(&scenario, &opts)?;
            let stem = format!("{}-theorems", scenario.config.display_name());
            emit(&render(&report, format)?, cli.destination(None, &stem, format).as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
