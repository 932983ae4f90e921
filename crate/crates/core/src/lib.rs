//! Countermovement-jump height from markerless keypoints, optical markers and
//! force-plate traces, with the agreement statistics used to compare them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod config;
pub mod error;
pub mod exec;
pub mod forceplate;
pub mod ingest;
pub mod kinemetrics;
mod kv;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
