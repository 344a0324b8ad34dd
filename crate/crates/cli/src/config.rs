//! Resolution of `--config`: a file path, an embedded pipeline preset or an
//! environment preset. Every command sees the same pair of a pipeline
//! configuration and the environment it names; environment-only sources get
//! a pipeline configuration with default settings.

use std::path::{Path, PathBuf};

use asht_core::env::{load_env_config, presets};
use asht_core::pipeline::PipelineConfig;
use asht_core::EnvironmentPair;

use crate::error::CliError;

pub const PIPELINE_PRESETS: &[(&str, &str)] = &[
    ("two_sensor_T10", include_str!("../../../configs/pipeline/two_sensor_T10.toml")),
    ("two_sensor_T25", include_str!("../../../configs/pipeline/two_sensor_T25.toml")),
    ("two_sensor_seq", include_str!("../../../configs/pipeline/two_sensor_seq.toml")),
    ("four_sensor_T50", include_str!("../../../configs/pipeline/four_sensor_T50.toml")),
    ("four_sensor_seq", include_str!("../../../configs/pipeline/four_sensor_seq.toml")),
];

const ENV_PRESETS: &[&str] = &["two_sensor", "four_sensor"];

#[derive(Debug, Clone)]
pub struct Resolved {
    pub pipeline: PipelineConfig,
    pub env: EnvironmentPair,
    /// whether the source carried pipeline settings (as opposed to an
    /// environment alone)
    pub has_pipeline: bool,
}

pub fn resolve(config: Option<&str>) -> Result<Resolved, CliError> {
    let name = config.ok_or_else(|| CliError::Usage("--config is required for this command".into()))?;
    let path = Path::new(name);
    if path.is_file() {
        return resolve_file(path);
    }
    if let Some((_, text)) = PIPELINE_PRESETS.iter().find(|(n, _)| *n == name) {
        let pipeline = PipelineConfig::from_toml_str(text)?;
        let env = pipeline.environment(None)?;
        return Ok(Resolved {
            pipeline,
            env,
            has_pipeline: true,
        });
    }
    if let Some(env) = presets::by_name(name) {
        return Ok(Resolved {
            pipeline: default_pipeline(name)?,
            env,
            has_pipeline: false,
        });
    }
    let known: Vec<&str> = PIPELINE_PRESETS
        .iter()
        .map(|(n, _)| *n)
        .chain(ENV_PRESETS.iter().copied())
        .collect();
    Err(CliError::Config(format!(
        "'{name}' is neither a file nor a preset (presets: {})",
        known.join(", ")
    )))
}

fn resolve_file(path: &Path) -> Result<Resolved, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    // A pipeline file always has a [mode] table; an environment file never.
    let is_pipeline = text
        .parse::<toml::Table>()
        .map(|t| t.contains_key("mode"))
        .unwrap_or(false);
    if is_pipeline {
        let pipeline = PipelineConfig::load(path)?;
        let env = pipeline.environment(path.parent())?;
        Ok(Resolved {
            pipeline,
            env,
            has_pipeline: true,
        })
    } else {
        let env = load_env_config(path)?;
        let absolute: PathBuf = std::fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
        Ok(Resolved {
            pipeline: default_pipeline(&absolute.to_string_lossy())?,
            env,
            has_pipeline: false,
        })
    }
}

/// Defaults around an environment: fixed horizon 10.
fn default_pipeline(env: &str) -> Result<PipelineConfig, CliError> {
    let mut mode = toml::Table::new();
    mode.insert("kind".into(), "fixed".into());
    mode.insert("horizon".into(), 10.into());
    let mut doc = toml::Table::new();
    doc.insert("env".into(), env.into());
    doc.insert("mode".into(), mode.into());
    Ok(PipelineConfig::from_toml_str(&doc.to_string())?)
}
