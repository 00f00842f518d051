//! Non-neural pipeline for stereo 3D sound event localization and
//! detection with a team of specialist models.
//!
//! - [`features`]: log-mel and inter-channel level difference planes
//! - [`accddoa`]: multi-ACCDDOA frame encoding and decoding
//! - [`ensemble`]: majority-vote and pairwise-union fusion of specialists
//! - [`metrics`]: thresholded F1, DOA error, relative distance error
//! - [`shapes`]: pooling schedules of the specialist networks
//! - [`sim`]: seeded scene and specialist simulation
//! - [`cli`]: the `tos` command line

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accddoa;
pub mod assignment;
pub mod cli;
pub mod container;
pub mod csv;
pub mod domain;
pub mod ensemble;
pub mod error;
pub mod features;
pub mod metrics;
pub mod shapes;
pub mod sim;

pub use domain::{angular_distance, mean_azimuth, ClipPredictions, ClipSet, SeldEvent, TaskConfig};
pub use error::{Error, Result};
