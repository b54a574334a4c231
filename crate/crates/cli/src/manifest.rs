use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";

/// Record of one run. Everything except `seconds` is deterministic given the
/// inputs; rerunning `argv` with `--config <out>/config.toml` reproduces the
/// outputs.
#[derive(Debug, Serialize)]
struct Record<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    argv: &'a [String],
    config_source: Option<&'a Path>,
    config: &'a RunConfig,
    inputs: &'a [PathBuf],
    outputs: &'a [PathBuf],
    seconds: f64,
}

pub struct Manifest {
    command: &'static str,
    config_source: Option<PathBuf>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: Instant,
}

impl Manifest {
    pub fn start(command: &'static str, config_source: Option<PathBuf>) -> Self {
        Self {
            command,
            config_source,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Writes `config.toml` and `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path, config: &RunConfig) -> Result<(), CliError> {
        let config_path = dir.join(CONFIG_FILE);
        write_file(&config_path, config.to_toml().as_bytes())?;
        self.output(&config_path);
        let argv: Vec<String> = std::env::args().collect();
        let record = Record {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            argv: &argv,
            config_source: self.config_source.as_deref(),
            config,
            inputs: &self.inputs,
            outputs: &self.outputs,
            seconds: self.started.elapsed().as_secs_f64(),
        };
        let json = serde_json::to_string_pretty(&record)
            .map_err(|e| CliError::Data(format!("manifest: {e}")))?;
        write_file(&dir.join(MANIFEST_FILE), (json + "\n").as_bytes())?;
        log::info!("{} finished in {:.1}s", self.command, record.seconds);
        Ok(())
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}
