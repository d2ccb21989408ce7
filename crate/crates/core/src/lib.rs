//! Scalable Optimal margin Distribution Machine (SODM).
//!
//! The crate is organised around the training pipeline:
//!
//! - [`data`]: LIBSVM parsing, min-max normalization and train/test splits.
//! - [`kernel`]: kernel evaluation, signed Gram entries and an LRU row cache.
//! - [`solver`]: the dual ODM problem, its coordinate-descent solver and
//!   the recovered decision function.
//! - [`partition`]: greedy landmark selection, RKHS strata and stratified
//!   K-way partitioning.
//! - [`hierarchy`]: level-by-level training that merges `p` partitions at a
//!   time and warm-starts each merged problem with the concatenated duals.
//! - [`svrg`]: distributed SVRG for the linear-kernel primal, simulated over
//!   in-process nodes.
//! - [`oracle`]: dense projected-gradient reference solver plus checkers for
//!   the approximation bounds.
//! - [`cli`]: the `sodm` command line.

pub mod cli;
pub mod data;
mod error;
pub mod hierarchy;
pub mod kernel;
pub mod oracle;
pub mod partition;
pub mod report;
pub mod solver;
pub mod svrg;
pub mod synth;
pub mod util;

pub use data::{Dataset, DataView, Instance, MinMaxTable, SparseVector};
pub use error::{Error, Result};
pub use hierarchy::{train, LevelReport, TrainConfig, TrainOutput};
pub use kernel::{CacheConfig, KernelSpec};
pub use partition::{PartitionDiagnostics, PartitionPlan};
pub use solver::{DualState, HyperParams, Model, SolveOptions, SolveReport};
pub use svrg::{dsvrg_train, SvrgConfig, SvrgOutput};
