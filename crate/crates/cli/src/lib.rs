//! Batch driver around `collat-core`: file formats, market/run
//! configuration, and the experiment harness with thread-level parallelism.
//!
//! All pricing math lives in the core crate; this crate owns I/O and the
//! degree of parallelism. Experiments are deterministic for a fixed
//! `(config, seed)` regardless of thread count: path blocks carry their own
//! RNG substreams and partial results merge in block order.

pub mod config;
pub mod experiments;
pub mod io;
