//! Stochastic day-ahead scheduling for isolated microgrids with price-based
//! demand response.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! machinery:
//!
//! * [`models`]: continuous PV / wind / load models and device curves.
//! * [`seq`]: discrete probabilistic sequences and their convolutions.
//! * [`chance`]: deterministic equivalent of the spinning-reserve chance
//!   constraint.
//! * [`grid`]: microgrid physics, the operating-cost function, feasibility
//!   checking and the repair projection used by the heuristic.
//! * [`jaya`]: the population heuristic for the upper (microgrid) level.
//! * [`lp`]: a dense primal-dual interior point LP solver.
//! * [`dr`]: the lower (user) level demand-response problem.
//! * [`coord`]: the real-time pricing loop tying both levels together.
//!
//! File formats, the command line and parallel execution live in the
//! companion `mgsched` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod chance;
pub mod coord;
pub mod dr;
mod error;
pub mod grid;
pub mod jaya;
pub mod linalg;
pub mod lp;
pub mod models;
pub mod quad;
pub mod seq;

pub use error::{Error, Result};

/// Length of one scheduling period in hours.
pub const DT_HOURS: f64 = 1.0;
