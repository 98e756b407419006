//! Batch runner for chiral Rydberg-array simulations.
//!
//! A run is described by one JSON [`config::RunConfig`]; its outputs (CSV tables,
//! a JSON summary and binary grids) are written atomically next to a manifest
//! that records content hashes, the units convention and the library version.

pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod sweep;

use std::path::Path;

use config::{Command, RunConfig};
use error::CliError;
use output::{sha256_hex, Manifest, OutputDir, UNITS};

/// Output-directory override; the only setting read from the environment.
pub const OUT_ENV: &str = "CHIRAL_ARRAY_OUT";

/// Hash of the physics content of a config: thread count and output location are excluded.
pub fn config_hash(cfg: &RunConfig) -> String {
    let mut v = serde_json::to_value(cfg).expect("config serialises");
    if let Some(o) = v.as_object_mut() {
        o.remove("threads");
        o.remove("output");
    }
    sha256_hex(&serde_json::to_vec(&v).expect("json"))
}

/// Runs a validated config on `threads` workers (all cores when `None`) and writes into `out`.
pub fn run(cfg: &RunConfig, out: &Path, threads: Option<usize>) -> Result<Manifest, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads.or(cfg.threads) {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| CliError::Config(format!("threads: {e}")))?;
    pool.install(|| {
        let mut manifest = Manifest {
            tool: "chiral-array".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            library_version: chiral_array::VERSION.into(),
            units: UNITS.into(),
            command: cfg.command.name().into(),
            config_sha256: config_hash(cfg),
            files: Vec::new(),
            failures: Vec::new(),
            warnings: Vec::new(),
        };
        match cfg.command {
            Command::Sweep => {
                let res = sweep::run_sweep(cfg)?;
                let tables = res.tables();
                let mut dir = OutputDir::create(out)?;
                for (name, t) in &tables {
                    dir.write(name, &t.to_csv())?;
                }
                manifest.failures = res.failures();
                manifest.warnings = res.warnings();
                dir.finish(manifest)
            }
            _ => {
                let outcome = pipeline::run_command(cfg)?;
                let mut dir = OutputDir::create(out)?;
                dir.write_outcome(&outcome)?;
                manifest.warnings = outcome.warnings.clone();
                dir.finish(manifest)
            }
        }
    })
}
