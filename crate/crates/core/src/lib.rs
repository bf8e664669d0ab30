//! Random walk in random scenery: simulation, rare-event estimation and the
//! numerical checks that go with them.
//!
//! The crate is `no_std` (with `alloc`); IO and the command-line driver live in
//! the companion `rwrs-lab` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod bellshape;
pub mod estimate;
pub mod math;
pub mod partition;
pub mod quad;
pub mod rng;
pub mod rwrs;
pub mod scenery;
pub mod tail;
pub mod walk;

pub use error::{Error, Result};
pub use estimate::{EstimatorId, MeanEstimate, TailEstimate};
pub use rng::{Executor, Sequential};
