//! Corpus IO, the end-to-end analysis pipeline, bundle persistence and the
//! HTTP service, built on `driftscope-core`.

pub mod bundle;
pub mod io;
pub mod parallel;
pub mod pipeline;
pub mod service;
pub mod snapshot;
pub mod svg;

pub use driftscope_core as core;
