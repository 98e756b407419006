use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chiral_array_cli::config::RunConfig;
use chiral_array_cli::error::CliError;
use chiral_array_cli::OUT_ENV;

#[derive(Parser)]
#[command(name = "chiral-array", version, about = "Chiral Rydberg-array simulations from JSON run configs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a config and write its outputs and manifest.
    Run {
        config: PathBuf,
        /// Output directory; overrides CHIRAL_ARRAY_OUT and the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; overrides the config.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Parse and validate a config, then print it with all defaults filled in.
    Validate { config: PathBuf },
    /// Print the bundled Rydberg-state table.
    States,
}

fn load(path: &PathBuf) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
    RunConfig::from_json(&text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run { config, out, threads } => load(&config).and_then(|cfg| {
            let dir = out.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from)).unwrap_or_else(|| cfg.output.dir.clone());
            let m = chiral_array_cli::run(&cfg, &dir, threads)?;
            eprintln!("{}: {} files in {}", m.command, m.files.len(), dir.display());
            for f in &m.failures {
                eprintln!("point {} failed: {}", f.axis_value, f.error);
            }
            for w in &m.warnings {
                eprintln!("warning: {w}");
            }
            Ok(())
        }),
        Cmd::Validate { config } => load(&config).map(|cfg| {
            println!("{}", serde_json::to_string_pretty(&cfg).expect("json"));
        }),
        Cmd::States => chiral_array::atomdata::bundled().to_csv().map(|s| print!("{s}")).map_err(CliError::from),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.exit_code() == 4 {
                eprintln!("reduce the problem size (fewer atoms or the two-level model) and rerun");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
