//! Online straggler prediction from negative-unlabeled task data.
//!
//! A job's tasks reveal their latencies only as they finish, so a live job
//! offers negative examples (finished, fast tasks) and unlabeled ones (still
//! running). This crate trains a latency model on the finished tasks, then
//! reweights each running task's prediction by how dissimilar its features are
//! from the finished population, with a centroid-based calibration term that
//! adapts the weighting to the job's latency threshold. Flagged tasks can be
//! handed to relaunch schedulers to cut job completion time.
//!
//! Modules:
//! - [`trace`]: canonical checkpointed traces, Google/Alibaba adapters, and a
//!   synthetic generator.
//! - [`models`]: gradient-boosted regression trees and a logistic propensity
//!   model, both self-contained.
//! - [`nurd`]: the online prediction loop and its baseline modes.
//! - [`scheduler`]: relaunch scheduling with unlimited or limited machines.
//! - [`metrics`]: confusion counts, F1-over-time curves, and aggregation.
//! - [`batch`]: data-parallel sweep helpers (rayon behind the `parallel`
//!   feature, with a sequential fallback).

pub mod batch;
pub mod error;
pub mod metrics;
pub mod models;
pub mod nurd;
pub mod scheduler;
pub mod trace;

pub use error::{Error, Result};
