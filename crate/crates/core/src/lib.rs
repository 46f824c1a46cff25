//! Sensor transmission scheduling for remote Kalman estimation over lossy
//! links.
//!
//! The crate is `no_std` (with `alloc`). It covers the plant and channel
//! models, local and remote estimators, the covariance state space, dynamic
//! programming and relative value iteration solvers, closed-form analysis of
//! threshold policies, and a seeded Monte Carlo engine.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analysis;
pub mod error;
pub mod instances;
pub mod linalg;
pub mod localfilter;
pub mod model;
pub mod remote;
pub mod scheduler;
pub mod sim;
pub mod statespace;

pub use error::{Error, Result};
pub use linalg::{Matrix, PsdOrder, Vector};
pub use localfilter::{dare_steady_state, SteadyStateFilter};
pub use model::{ChannelModel, SensorModel, SystemModel};
pub use scheduler::Action;
pub use statespace::{build_state_space, settled_depth, StateSpace, StateTag};
