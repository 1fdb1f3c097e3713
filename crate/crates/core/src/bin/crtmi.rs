//! Command-line front end: run scenarios, calibrate intercepts, summarise
//! runs, analyse performance measures and execute the acceptance suite.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crtmi::anova::{analyse_measure, write_anova_tables, write_scaled, Measure};
use crtmi::bench::{run_acceptance, Suite};
use crtmi::missingness::{calibrate_alpha0, expected_nonresponse};
use crtmi::scenario::{Mechanism, Method};
use crtmi::sim::io::{PERFORMANCE_FILE, RECORDS_FILE};
use crtmi::sim::{read_performance, run_scenario, summarize_run, write_performance, write_records, PerformanceRow, StudyConfig};

#[derive(Parser)]
#[command(name = "crtmi", version, about = "Multiple imputation for bivariate outcomes in cluster randomised trials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenarios of a study config and write replicate and performance CSVs.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Master seed; defaults to the config's.
        #[arg(long)]
        seed: Option<u64>,
        /// Replicates per scenario; defaults to the config's.
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
        /// Comma-separated canonical scenario indices.
        #[arg(long, value_delimiter = ',')]
        scenarios: Option<Vec<usize>>,
        /// Comma-separated methods (CCA, SMI, FMI, MMI).
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
    },
    /// Print the calibrated intercept for a mechanism, η and target rate as CSV.
    Calibrate {
        #[arg(long)]
        mechanism: String,
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        target: f64,
    },
    /// Build the bias and coverage tables from a run directory.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Factorial ANOVA of one performance measure over a run.
    Anova {
        #[arg(long = "in")]
        input: PathBuf,
        /// bias, coverage, rmse or aw.
        #[arg(long)]
        measure: String,
        #[arg(long)]
        out: PathBuf,
        /// Outcome to analyse: 1 or 2.
        #[arg(long, default_value_t = 1)]
        outcome: usize,
    },
    /// Run an acceptance suite and write the report.
    Acceptance {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> crtmi::Result<ExitCode> {
    match command {
        Command::Run {
            config,
            out,
            seed,
            replicates,
            parallelism,
            scenarios,
            methods,
        } => run(&config, &out, seed, replicates, parallelism, scenarios, methods),
        Command::Calibrate { mechanism, eta, target } => {
            let m: Mechanism = mechanism.parse()?;
            let a = calibrate_alpha0(m, eta, target)?;
            println!("mechanism,eta,target,alpha0,expected_rate");
            println!("{},{eta},{target},{a:.12},{:.12}", m.label(), expected_nonresponse(m, eta, a));
            Ok(ExitCode::SUCCESS)
        }
        Command::Summarize { input, out } => {
            let n = summarize_run(&input, &out)?;
            eprintln!("summarised {n} performance rows into {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Anova {
            input,
            measure,
            out,
            outcome,
        } => anova(&input, &measure, &out, outcome),
        Command::Acceptance { suite, out } => {
            let suite = Suite::load(&suite)?;
            let report = run_acceptance(&suite);
            for (criterion, status) in report.by_criterion() {
                println!("criterion {criterion}: {}", status.label());
            }
            for o in &report.outcomes {
                eprintln!("  [{}] {}: {} -> {}", o.status.label(), o.case, o.assertion, o.observed_summary());
            }
            report.write_csv(std::fs::File::create(&out)?)?;
            Ok(if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn run(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    replicates: Option<usize>,
    parallelism: usize,
    scenarios: Option<Vec<usize>>,
    methods: Option<Vec<String>>,
) -> crtmi::Result<ExitCode> {
    let mut study = StudyConfig::load(config)?;
    if let Some(s) = seed {
        study.run.seed = s;
    }
    if let Some(n) = replicates {
        study.run.n = n;
    }
    if let Some(ms) = methods {
        study.run.methods = ms.iter().map(|m| m.parse::<Method>()).collect::<crtmi::Result<_>>()?;
    }
    let mut grid = study.scenarios()?;
    if let Some(keep) = scenarios {
        grid.retain(|c| keep.contains(&c.scenario_index));
    }
    std::fs::create_dir_all(out)?;
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for config in &grid {
        let start = std::time::Instant::now();
        let run = run_scenario(config, parallelism)?;
        eprintln!("{} done in {:.1}s", config.label(), start.elapsed().as_secs_f64());
        rows.extend(run.performance.iter().cloned().map(|p| PerformanceRow::new(config, p)));
        records.extend(run.records);
    }
    write_records(std::fs::File::create(out.join(RECORDS_FILE))?, &records)?;
    write_performance(std::fs::File::create(out.join(PERFORMANCE_FILE))?, &rows)?;
    Ok(ExitCode::SUCCESS)
}

fn anova(input: &Path, measure: &str, out: &Path, outcome: usize) -> crtmi::Result<ExitCode> {
    if !(1..=2).contains(&outcome) {
        return Err(crtmi::Error::Config(format!("outcome must be 1 or 2, got {outcome}")));
    }
    let measure: Measure = measure.parse()?;
    let rows = read_performance(std::fs::File::open(input.join(PERFORMANCE_FILE))?)?;
    let analysis = analyse_measure(&rows, measure, outcome - 1)?;
    let mut tables = analysis.by_method.clone();
    tables.push(("all".to_string(), analysis.pooled.clone()));
    write_anova_tables(std::fs::File::create(out)?, &tables)?;
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("anova");
    let scaled = out.with_file_name(format!("{stem}_scaled.csv"));
    write_scaled(std::fs::File::create(&scaled)?, &analysis.scaled)?;
    Ok(ExitCode::SUCCESS)
}
