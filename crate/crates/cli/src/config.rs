use std::path::{Path, PathBuf};

use levyinfo_core::{ClaimSpec, MarketModel, ModelSpec, TimeGrid, UtilitySpec};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{file}: {source}")]
    Io { file: PathBuf, source: std::io::Error },
    #[error("{file}:{line}:{column}: at `{field}`: {message}")]
    Parse {
        file: PathBuf,
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error("{file}: at `{field}`: {message}")]
    Invalid {
        file: PathBuf,
        field: String,
        message: String,
    },
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub model: ModelSpec,
    pub grid: Option<GridSpec>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub claim: Option<ClaimSpec>,
    pub utility: Option<UtilitySpec>,
}

/// Parsed and validated configuration. Optional sections are validated when present.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub file: PathBuf,
    pub model: MarketModel,
    pub grid: Option<GridSpec>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub claim: Option<ClaimSpec>,
    pub utility: Option<UtilitySpec>,
}

pub fn parse(file: &Path, text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        let (line, column) = (inner.line(), inner.column());
        let text = inner.to_string();
        let suffix = format!(" at line {line} column {column}");
        ConfigError::Parse {
            file: file.to_path_buf(),
            line,
            column,
            field,
            message: text.strip_suffix(&suffix).unwrap_or(&text).to_string(),
        }
    })?;
    let invalid = |field: &str, message: String| ConfigError::Invalid {
        file: file.to_path_buf(),
        field: field.to_string(),
        message,
    };
    let model = raw.model.build().map_err(|e| invalid("model", e.to_string()))?;
    if let Some(g) = raw.grid {
        TimeGrid::new(g.horizon, g.steps).map_err(|e| invalid("grid", e.to_string()))?;
    }
    if let Some(c) = &raw.claim {
        c.validate().map_err(|e| invalid("claim", e.to_string()))?;
    }
    if let Some(u) = &raw.utility {
        u.validate().map_err(|e| invalid("utility", e.to_string()))?;
    }
    if raw.paths == Some(0) {
        return Err(invalid("paths", "must be positive".into()));
    }
    Ok(RunConfig {
        file: file.to_path_buf(),
        model,
        grid: raw.grid,
        seed: raw.seed,
        paths: raw.paths,
        claim: raw.claim,
        utility: raw.utility,
    })
}

pub fn load(file: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(file).map_err(|source| ConfigError::Io {
        file: file.to_path_buf(),
        source,
    })?;
    parse(file, &text)
}

impl RunConfig {
    fn missing(&self, field: &str, flag: &str) -> ConfigError {
        ConfigError::Invalid {
            file: self.file.clone(),
            field: field.to_string(),
            message: format!("required; set it in the config or pass {flag}"),
        }
    }

    pub fn seed(&self, flag: Option<u64>) -> Result<u64, ConfigError> {
        flag.or(self.seed).ok_or_else(|| self.missing("seed", "--seed"))
    }

    pub fn paths(&self, flag: Option<usize>) -> Result<usize, ConfigError> {
        match flag.or(self.paths) {
            Some(0) => Err(ConfigError::Invalid {
                file: self.file.clone(),
                field: "paths".into(),
                message: "must be positive".into(),
            }),
            Some(n) => Ok(n),
            None => Err(self.missing("paths", "--paths")),
        }
    }

    pub fn grid(&self, horizon: Option<f64>, steps: Option<usize>) -> Result<TimeGrid, ConfigError> {
        let h = horizon.or(self.grid.map(|g| g.horizon));
        let n = steps.or(self.grid.map(|g| g.steps));
        match (h, n) {
            (Some(h), Some(n)) => TimeGrid::new(h, n).map_err(|e| ConfigError::Invalid {
                file: self.file.clone(),
                field: "grid".into(),
                message: e.to_string(),
            }),
            (None, _) => Err(self.missing("grid.horizon", "--horizon")),
            (_, None) => Err(self.missing("grid.steps", "--steps")),
        }
    }
}
