//! Symmetrized variational Monte Carlo on small periodic fermionic systems.
//!
//! The crate is `no_std` (with `alloc`): it holds the numerical core, and the
//! `symvmc` crate adds configuration files, persistence and the CLI.
#![no_std]
#![cfg_attr(test, allow(unused_imports))]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod ansatz;
pub mod basis;
pub mod error;
pub mod groups;
pub mod hamiltonian;
pub mod lattice;
pub mod metrics;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod scan;
pub mod smoothing;
pub mod stats;
pub mod symmetrize;
pub mod train;
pub mod update;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
