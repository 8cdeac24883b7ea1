//! Learning J1-J2 spin-chain couplings from sets of eigenstates.

pub mod diagnostics;
pub mod eigensolver;
pub mod encoder;
pub mod error;
pub mod experiments;
pub mod loss;
pub mod protocols;
pub mod seeds;
pub mod spin_chain;
pub mod stats;
pub mod training;

pub use error::{Error, Result};
