//! Distributed algebraic multigrid built from matching-based pairwise
//! aggregation, used as a preconditioner inside a flexible conjugate
//! gradient solver.
//!
//! Ranks are in-process workers created by [`runtime::spawn_ranks`]; every
//! distributed routine takes the calling rank's [`runtime::RankCtx`] and must
//! be called collectively by all ranks in the same order.

pub mod amg;
pub mod cycle;
pub mod dist;
pub mod error;
pub mod krylov;
pub mod matching;
pub mod problem;
pub mod runtime;
pub mod sparse;

pub use error::{Error, Result, RuntimeError};

pub use amg::{setup_hierarchy, Hierarchy, SetupConfig};
pub use cycle::{vcycle_apply, AmgPreconditioner, CycleConfig};
pub use dist::{DistMatrix, DistVector};
pub use krylov::{pcg_solve, Preconditioner, SolveConfig, SolveStats};
pub use runtime::{spawn_ranks, Partition, RankCtx, RuntimeConfig};
pub use sparse::CsrMatrix;
