//! Behaviour arbitration for a simulated maze-navigating robot.
//!
//! The controller at the heart of this crate is a reduced idiotypic
//! artificial-immune-network: robot behaviours are antibodies, environmental
//! situations are antigens, and suppression/stimulation between antibodies
//! decides which behaviour runs. Nine probabilistic selectors that mimic the
//! idiotypic selection rate are provided as baselines, together with a
//! deterministic 2D world simulator and an experiment harness that produces
//! time/stall/fitness statistics and significance tables.

pub mod behaviors;
pub mod geometry;
pub mod harness;
pub mod immune;
pub mod matrix;
pub mod selectors;
pub mod stats;
pub mod world;
