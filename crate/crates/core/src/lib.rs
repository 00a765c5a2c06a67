//! Choosing the number of clusters by checking whether consecutive
//! partitions still carry new distributional information.

pub mod algorithms;
pub mod baselines;
pub mod data;
pub mod datagen;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod infoguide;
pub mod seed;
pub mod stats;

pub use algorithms::{Algorithm, AlgorithmConfig, FitDiagnostics};
pub use data::{Dataset, Partition, RetrievalSeries};
pub use error::{Error, Result};
pub use infoguide::{select_k_infoguide, InfoGuideResult};
pub use seed::RngSeed;
