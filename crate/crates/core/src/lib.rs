//! Search-based online testing of vision-guided pick-and-place arms.
//!
//! Scenes of cardboard boxes are encoded as chromosomes, executed by a
//! kinematic controller that relies on an oriented-box detector, and scored
//! by how badly the detector mispredicted. Failures found this way drive a
//! repair of the detector and a replay of the failing scenes.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod geometry;
pub mod perception;
pub mod repair;
pub mod rng;
pub mod scene;
pub mod search;
pub mod simulator;

pub use config::{Config, Profile};
