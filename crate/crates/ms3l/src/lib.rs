//! Std companion of `ms3l-core`: experiment configs, dataset/checkpoint/run
//! files, report export, the experiment CLI and the WebSocket teleop bridge.

pub mod bridge;
pub mod cli;
pub mod config;
pub mod io;
pub mod report;

use std::path::{Path, PathBuf};

use ms3l_core::dataset::DatasetError;
use ms3l_core::nn::checkpoint::CheckpointError;
use ms3l_core::trainer::TrainError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("map: {0}")]
    Map(String),
    #[error("{}: {source}", path.display())]
    Dataset { path: PathBuf, source: DatasetError },
    #[error("{}: {source}", path.display())]
    Checkpoint { path: PathBuf, source: CheckpointError },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}
