//! Library backing the `hashcomb` experiment binary.
//!
//! The binary is a thin argument-parsing shell; everything it does lives
//! here so integration tests can drive runs in-process:
//!
//! - [`config`] — the [`config::RunConfig`] experiment description, TOML
//!   loading, and flag-override resolution.
//! - [`ingest`] — CSV ingestion with min-max normalization.
//! - [`runner`] — experiment execution and metrics/manifest emission.
//! - [`synth`] — deterministic synthetic dataset generation.

pub mod config;
pub mod ingest;
pub mod runner;
pub mod synth;
