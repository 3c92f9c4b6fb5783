//! Disk formats, batch pipeline, and command line interface for the
//! dexfit pose-fitting engine.
//!
//! The engine itself lives in `dexfit-core` and never touches the file
//! system; this crate adds everything a batch run needs around it:
//! loaders and writers for meshes, cameras, depth maps, annotations,
//! poses, grasps, and reports, a run manifest for provenance, a worker
//! pool capped by `DEXFIT_THREADS`, a finite-difference gradient audit,
//! and the `dexfit` binary tying it all together.

pub mod checkgrad;
pub mod cli;
pub mod formats;
pub mod manifest;
pub mod pipeline;
pub mod threads;

pub use dexfit_core as core;
