//! Simulation and optimisation toolkit for max-min fair downlink power
//! allocation and user scheduling from a LEO satellite.
//!
//! - [`geometry`]: circular-orbit pass geometry, slant range, Doppler.
//! - [`channel`]: large-scale loss tables, sum-of-sinusoids fading and
//!   block-fading channel realizations.
//! - [`linkmodel`]: SINR, rates and Jain's fairness index.
//! - [`maxmin_gp`]: successive geometric programming for the max-min
//!   allocation (the genie-aided bound and the receding-horizon inner solve).
//! - [`schemes`]: the receding-horizon scheme and its baselines.
//! - [`harness`]: configuration, Monte Carlo campaigns and CSV output.

pub mod channel;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linkmodel;
pub mod maxmin_gp;
pub mod rng;
pub mod schemes;

pub use error::{Error, Result};
