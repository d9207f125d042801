//! Batch front-end: experiment configs in, `summary.json` and CSV tables out.

pub mod config;
pub mod pipeline;
pub mod report;
