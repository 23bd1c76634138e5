//! Scenario files, strategy runs and result export for the stochastic
//! microgrid scheduler in `mgsched-core`.

pub mod error;
pub mod exec;
pub mod output;
pub mod run;
pub mod scenario;

pub use error::RunError;
pub use exec::RayonExecutor;
pub use mgsched_core as engine;
