//! Hybrid-norm deviation detection for indoor location trajectories.

pub mod classify;
pub mod cluster;
pub mod deviation;
pub mod error;
pub mod localize;
pub mod model;
pub mod norm;
pub mod preprocess;
pub mod synth;

pub use error::{Error, Result};
pub use model::{DayTrajectory, EncodedLocation, ResidentProfile, SpatioTemporalMatrix, TimeSlot, SLOTS_PER_DAY};
