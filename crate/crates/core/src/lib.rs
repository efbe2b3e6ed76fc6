//! Exact-weight ReLU networks whose learnability is tied to local pseudorandom
//! generators, together with the oracle, distinguisher and Monte Carlo checks
//! needed to test the construction end to end.

pub mod config;
pub mod distinguisher;
pub mod dnf;
pub mod encoding;
pub mod error;
pub mod network;
pub mod oracle;
pub mod prg;
pub mod rng;
pub mod smoothing;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
