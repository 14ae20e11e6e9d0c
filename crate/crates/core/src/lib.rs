//! Numeric core for measuring, clustering, forecasting and exploring short-term
//! change in word usage (concept drift) and word meaning (representation shift)
//! over a week-bucketed corpus.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches files,
//! sockets or threads lives in the `driftscope` companion crate.
#![no_std]

#[macro_use]
extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod clustering;
pub mod corpus;
pub mod dynamics;
pub mod embeddings;
mod error;
pub mod explore;
pub mod forecast;
pub mod linalg;
pub mod math;
pub mod synth;
pub mod usage;

pub use error::{Error, Result};
