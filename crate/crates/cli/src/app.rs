//! Command-line handling: single runs and `--batch` directories.

use std::path::{Path, PathBuf};

use affobs_core::Exec;
use clap::{Parser, ValueEnum};

use crate::config::load_config;
use crate::run::{run_scenario, write_outputs, ReportFormat, RunError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Text,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Text => ReportFormat::Text,
        }
    }
}

/// Run the 2G+D observer on a scenario and write trace.csv plus a report.
#[derive(Debug, Parser)]
#[command(name = "affobs", version)]
pub struct Cli {
    /// Scenario config file (TOML).
    #[arg(required_unless_present = "batch", conflicts_with = "batch")]
    pub config: Option<PathBuf>,

    /// Directory for trace.csv and the report. Overrides `output_dir` in the
    /// config; in batch mode each config gets a subdirectory named after it.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,

    /// Skip the Kalman-Bucy comparison.
    #[arg(long)]
    pub no_baseline: bool,

    /// Print errors only.
    #[arg(long)]
    pub quiet: bool,

    #[arg(long, value_enum, default_value = "json")]
    pub report_format: FormatArg,

    /// Run every *.toml config in this directory.
    #[arg(long, value_name = "DIR")]
    pub batch: Option<PathBuf>,
}

/// Runs one config, writing into `out_dir`; returns a one-line summary and
/// the warnings.
fn run_one(
    path: &Path,
    out_dir: Option<&Path>,
    no_baseline: bool,
    format: ReportFormat,
) -> Result<(String, Vec<String>), RunError> {
    let mut cfg = load_config(path)?;
    if no_baseline {
        cfg.baseline = None;
    }
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let out = run_scenario(&cfg)?;
    write_outputs(&out, &dir, format)?;
    let r = &out.report;
    let rate = r.fitted_rate.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"));
    let summary = format!(
        "{}: state error {:.3e} -> {:.3e}, param error {:.3e}, tail rate {rate}, {} warning(s); wrote {}",
        r.scenario,
        r.initial_state_error,
        r.final_state_error,
        r.final_param_error,
        r.warnings.len(),
        dir.display()
    );
    Ok((summary, r.warnings.clone()))
}

fn report(name: &Path, result: &Result<(String, Vec<String>), RunError>, quiet: bool) -> i32 {
    match result {
        Ok((summary, warnings)) => {
            if !quiet {
                println!("{summary}");
                for w in warnings {
                    eprintln!("warning: {w}");
                }
            }
            0
        }
        Err(e) => {
            eprintln!("error: {}: {e}", name.display());
            e.exit_code()
        }
    }
}

/// Process exit status for the parsed command line.
pub fn run(cli: &Cli) -> i32 {
    let format = ReportFormat::from(cli.report_format);
    if let Some(dir) = &cli.batch {
        return run_batch(cli, dir, format);
    }
    let path = cli.config.as_deref().expect("clap enforces a config path");
    let result = run_one(path, cli.output_dir.as_deref(), cli.no_baseline, format);
    report(path, &result, cli.quiet)
}

fn run_batch(cli: &Cli, dir: &Path, format: ReportFormat) -> i32 {
    let mut configs: Vec<PathBuf> = match std::fs::read_dir(dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect(),
        Err(e) => {
            eprintln!("error: {}: {e}", dir.display());
            return 1;
        }
    };
    configs.sort();
    let root = cli.output_dir.clone().unwrap_or_else(|| dir.to_path_buf());
    let results = Exec::default().map(&configs, |path| {
        let stem = path.file_stem().unwrap_or_default();
        run_one(path, Some(&root.join(stem)), cli.no_baseline, format)
    });
    configs
        .iter()
        .zip(&results)
        .map(|(path, r)| report(path, r, cli.quiet))
        .max()
        .unwrap_or(0)
}
