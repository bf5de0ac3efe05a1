//! Quantum discord for multipartite states: density matrices, ordered
//! partitions and their coarsenings, projective measurements, and the
//! bipartite, multipartite (conditional) and global discord measures with
//! monogamy checks built on them.

pub mod discord;
pub mod error;
pub mod linalg;
pub mod measure;
pub mod monogamy;
pub mod optimizer;
pub mod partition;
pub mod qstate;

pub use error::{Error, Result};
pub use partition::Partition;
pub use qstate::DensityMatrix;
pub use discord::{DiscordResult, MeasureKind};
pub use optimizer::{OptResult, OptimizerConfig};
