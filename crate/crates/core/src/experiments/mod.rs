//! Dataset ingestion, experiment configuration and the runners behind the
//! command-line tool.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod init;
pub mod io;
pub mod run;

use std::path::PathBuf;

use thiserror::Error;

use crate::inference::InferenceError;
use crate::kernels::KernelError;
use crate::linalg::LinalgError;
use crate::optim::OptimError;
use crate::spectral::SpectralError;

pub use checkpoint::Checkpoint;
pub use config::{ClassifyConfig, DumpConfig, GradcheckConfig, RecoverExperiment, RegressConfig};
pub use data::{load_csv_dataset, Dataset, DatasetSpec, SplitSpec, Standardizer};
pub use run::{run_command, Command, Manifest};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] data::DataError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ExperimentError {
    /// Process exit status: 2 config, 3 data, 4 numerical, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Data(_) => 3,
            ExperimentError::Numerical(_) => 4,
            ExperimentError::Io { .. } => 1,
        }
    }
}

macro_rules! numerical_from {
    ($($t:ty),*) => {
        $(impl From<$t> for ExperimentError {
            fn from(e: $t) -> Self {
                ExperimentError::Numerical(e.to_string())
            }
        })*
    };
}

numerical_from!(InferenceError, KernelError, LinalgError, SpectralError);

impl From<OptimError> for ExperimentError {
    fn from(e: OptimError) -> Self {
        match e {
            OptimError::InvalidConfig(m) => ExperimentError::Config(m),
            other => ExperimentError::Numerical(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, ExperimentError>;
