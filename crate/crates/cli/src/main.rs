use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use bikeshare_cli::{
    cmd_analyze, cmd_catalog, cmd_harvest, cmd_map, render_catalog, CliError, Overrides,
    PipelineConfig,
};
use bikeshare_equity::gbfs::{HttpTransport, SystemClock};
use clap::{Parser, Subcommand};

/// Bikeshare spatial-equity pipeline: harvest GBFS feeds, geocode bikes to
/// census tracts and fit a Poisson model of bikes per tract.
#[derive(Debug, Parser)]
#[command(name = "bikeshare", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// key=value settings file; flags override it
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// System catalog CSV (URL or path)
    #[arg(long, global = true, value_name = "SOURCE")]
    catalog: Option<String>,
    /// Keep only systems with this country code
    #[arg(long, global = true, value_name = "CODE")]
    country: Option<String>,
    /// Snapshot store directory
    #[arg(long, global = true, value_name = "DIR")]
    store: Option<PathBuf>,
    /// Census tract boundaries (GeoJSON FeatureCollection)
    #[arg(long, global = true, value_name = "FILE")]
    boundaries: Option<PathBuf>,
    /// Tract demographics CSV
    #[arg(long, global = true, value_name = "FILE")]
    demographics: Option<PathBuf>,
    /// `latest`, a snapshot id, or an epoch-second range FROM..TO
    #[arg(long, global = true, value_name = "SELECTOR")]
    snapshot: Option<String>,
    /// How docked supply is counted: `stations` or `available_bikes`
    #[arg(long, global = true, value_name = "MODE")]
    docked_mode: Option<String>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the systems in the catalog
    Catalog,
    /// Fetch every catalog system's feeds and append a snapshot
    Harvest,
    /// Geocode, aggregate and fit the model; write the report tables
    Analyze,
    /// Draw a snapshot as an SVG scatter plot
    Map,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let overrides = Overrides {
        catalog: cli.catalog,
        country: cli.country,
        store: cli.store,
        boundaries: cli.boundaries,
        demographics: cli.demographics,
        snapshot: cli.snapshot,
        docked_mode: cli.docked_mode,
        out: cli.out,
    };
    let config = PipelineConfig::resolve(cli.config.as_deref(), &overrides)?;
    let transport = HttpTransport::new(config.http_timeout);
    let mut stdout = std::io::stdout().lock();
    let warn = |lines: &[String]| {
        for line in lines {
            eprintln!("warning: {line}");
        }
    };
    // a closed stdout is not worth failing a finished run over
    match cli.command {
        Command::Catalog => {
            let entries = cmd_catalog(&config, &transport)?;
            let _ = stdout.write_all(render_catalog(&entries).as_bytes());
        }
        Command::Harvest => {
            let outcome = cmd_harvest(&config, &transport, &SystemClock)?;
            warn(&outcome.warnings);
            let _ = stdout.write_all(outcome.summary().as_bytes());
        }
        Command::Analyze => {
            let outcome = cmd_analyze(&config)?;
            warn(&outcome.warnings);
            let _ = stdout.write_all(outcome.report.to_text().as_bytes());
            let _ = writeln!(
                stdout,
                "{} tracts modeled; reports written to {}",
                outcome.manifest.diagnostics.modeled_tracts,
                outcome.output_dir.display()
            );
        }
        Command::Map => {
            let outcome = cmd_map(&config)?;
            warn(&outcome.warnings);
            let _ = writeln!(
                stdout,
                "{} markers from {} systems written to {}",
                outcome.markers,
                outcome.systems,
                outcome.path.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
