//! Actor-critic solver for infinite-horizon mean field games (MFG), mean field
//! control (MFC), and mixed mean field control games (MFCG).
//!
//! The population distribution is carried by a learned score function and
//! sampled with Langevin dynamics; the learning-rate ordering between actor,
//! critic, and score selects which mean-field problem the iteration solves.

pub mod actor;
pub mod analytic;
pub mod checkpoint;
pub mod config;
pub mod critic;
pub mod diffnet;
pub mod env;
mod error;
pub mod histogram;
pub mod score;
pub mod trainer;

pub use error::{Error, Result};
