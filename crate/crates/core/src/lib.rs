//! Third-party library recommendation for cold-start projects.
//!
//! Collaborative embeddings from a graph-convolution encoder feed a
//! cold-start state built from library representatives; a dueling double
//! Q-network trained offline with a conservative objective then picks
//! libraries one at a time.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod artifacts;
pub mod coldstart;
pub mod config;
pub mod data;
pub mod embed;
pub mod error;
pub mod eval;
pub mod optim;
pub mod persist;
pub mod pipeline;
pub mod rank;
pub mod rng;
pub mod synthetic;

pub use error::{Error, ErrorClass, Result};
