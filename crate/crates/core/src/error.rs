use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{}invalid value for `{key}`{}: {message}", path_prefix(.path), line_suffix(.line))]
    Invalid {
        key: String,
        message: String,
        line: Option<usize>,
        path: Option<PathBuf>,
    },
}

fn path_prefix(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| format!("{}: ", p.display())).unwrap_or_default()
}

fn line_suffix(l: &Option<usize>) -> String {
    l.map(|l| format!(" (line {l})")).unwrap_or_default()
}

impl ConfigError {
    pub fn invalid(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.into(),
            message: message.into(),
            line: None,
            path: None,
        }
    }

    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { key, .. } => Some(key),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("flow {flow}: no connected source/destination pair after {attempts} draws")]
    NoConnectedPair { flow: usize, attempts: u32 },
    #[error("topology: {0}")]
    Topology(String),
    #[error("trace: {0}")]
    Trace(String),
    #[error("run {scenario} failed: {source}")]
    Run {
        scenario: String,
        #[source]
        source: Box<SimError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
