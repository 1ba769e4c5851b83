//! Artifact writing. JSON is pretty-printed with a fixed field order, so identical
//! inputs give identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use efimov_core::numerics::LogScalar;
use efimov_core::two_body::TwoBodySolution;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Every JSON artifact is wrapped with the hash of the config that produced it.
#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub config_hash: String,
    #[serde(flatten)]
    pub body: T,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SolutionBody {
    pub solution: TwoBodySolution,
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_json<T: Serialize>(path: &Path, hash: &str, body: T) -> CliResult<()> {
    let env = Envelope {
        config_hash: hash.to_string(),
        body,
    };
    let mut text = serde_json::to_string_pretty(&env)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_solution(path: &Path) -> CliResult<Envelope<SolutionBody>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::MissingArtifact {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::MissingArtifact {
        path: path.to_path_buf(),
        reason: format!("not a solution file: {e}"),
    })
}

pub fn csv_writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

/// `z` as text that survives values below the double range, e.g. `1.000000e-400`.
pub fn z_text(z: LogScalar) -> String {
    z.to_string()
}

pub fn log10(z: LogScalar) -> f64 {
    z.log_magnitude() / std::f64::consts::LN_10
}

pub fn artifact(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
