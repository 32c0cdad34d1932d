//! Simulation suite for household battery control in microgrids.
//!
//! The crate is organised bottom-up:
//!
//! * [`datagen`] builds synthetic PV, load, price and carbon series.
//! * [`env`] is the episodic household battery environment.
//! * [`agent`] holds the actor-critic networks, the policy and the update rule.
//! * [`federation`] runs local training on each household and averages the
//!   parameters at fixed barriers.
//! * [`oracle`] solves the perfect-foresight dispatch exactly (simplex) and by
//!   dynamic programming for cross-validation.
//! * [`metrics`] scores episodes and computes the price/emission deltas against
//!   the no-battery base case at household, microgrid and distributor level.
//!
//! Data-parallel loops (clients within a round, fleets of independent
//! episodes or dispatch problems) go through [`par`], which uses rayon when
//! the `parallel` feature is enabled and falls back to plain iterators
//! otherwise. Results never depend on the execution order.

pub mod agent;
pub mod datagen;
pub mod env;
pub mod error;
pub mod federation;
pub mod metrics;
pub mod oracle;
pub mod par;
pub mod seed;

pub use error::{Error, Result};

/// Number of steps in one generated day (hourly resolution).
pub const STEPS_PER_DAY: usize = 24;
