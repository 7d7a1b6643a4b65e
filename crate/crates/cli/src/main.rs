use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use survkit_cli::plot::PlotKind;
use survkit_cli::{parse_config, rerender_plots, run_pipeline, CliError, ConfigArgs, RunReport, Stage};

#[derive(Parser)]
#[command(name = "survkit", version, about = "Survival analysis for high-dimensional right-censored data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, filter, impute, preselect and standardize the input.
    Preprocess(ConfigArgs),
    /// Preprocess and fit the configured model.
    Fit(ConfigArgs),
    /// Preprocess, fit and compute validation metrics.
    Validate(ConfigArgs),
    /// Re-render plots from an existing run directory.
    Report {
        #[arg(long, env = "SURVKIT_OUT")]
        out: PathBuf,
        /// Comma-separated plot kinds; all available ones when omitted.
        #[arg(long, value_enum, value_delimiter = ',')]
        plots: Vec<PlotKind>,
    },
    /// The full pipeline including plots.
    Run(ConfigArgs),
}

fn staged(args: &ConfigArgs, stage: Stage) -> Result<RunReport, CliError> {
    let cfg = parse_config(args)?;
    run_pipeline(&cfg, stage)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Preprocess(a) => staged(a, Stage::Preprocess),
        Command::Fit(a) => staged(a, Stage::Fit),
        Command::Validate(a) => staged(a, Stage::Validate),
        Command::Run(a) => staged(a, Stage::Plots),
        Command::Report { out, plots } => rerender_plots(out, plots),
    };
    match result {
        Ok(report) => {
            println!(
                "survkit: completed {} ({} files)",
                report.completed_stages.join(", "),
                report.manifest.len()
            );
            if let Some(m) = &report.model {
                println!("selected: {}", if m.selected.is_empty() { "(none)".to_string() } else { m.selected.join(", ") });
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("survkit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
