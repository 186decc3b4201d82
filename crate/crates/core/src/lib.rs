//! Potential-based reward shaping driven by ordered subgoal series.
//!
//! The crate is organised the way a learning run is assembled:
//!
//! - [`mdp`]: the environment and reward-transformer contracts shared by everything else.
//! - [`env`]: the four-rooms gridworld, the pinball domain, and their map documents.
//! - [`subgoal`]: subgoal predicates, ordered series and the per-episode achievement cursor.
//! - [`shaping`]: static potentials, naive subgoal potentials, and learned potentials over
//!   abstract states (static room aggregation and dynamic subgoal-based trajectory aggregation).
//! - [`agents`]: tabular SARSA with a softmax policy and a linear actor-critic over a Fourier basis.
//! - [`harness`]: seeded batteries, learning-efficiency metrics, statistics and result files.

pub mod agents;
pub mod env;
pub mod error;
pub mod harness;
pub mod mdp;
pub mod rng;
pub mod shaping;
pub mod subgoal;

pub use error::{Error, Result};
