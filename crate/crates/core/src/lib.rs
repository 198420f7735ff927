//! Simulator for a multi-task smartphone sensing market.
//!
//! Three mechanisms share one problem instance ([`scenario::Scenario`]):
//! a centralized upper bound, a leader/follower mechanism where the base
//! station allocates subcarriers and users pick tasks, and cooperative
//! overlapping coalition formation ([`ocf`]). The [`harness`] module runs
//! seeded Monte Carlo sweeps over them.

pub mod channel;
pub mod error;
pub mod grid;
pub mod harness;
pub mod ocf;
pub mod optimizers;
pub mod outcome;
pub mod scenario;
pub mod sensing;

pub use error::{Error, Result};
pub use outcome::{MechanismOutcome, Mode};
pub use scenario::{generate_scenario, GlobalParams, Scenario};
