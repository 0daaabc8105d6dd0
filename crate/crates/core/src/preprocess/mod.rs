//! Zero-phase smoothing of positions and differentiation to heading and
//! speed.

mod butterworth;
mod kinematics;

pub use butterworth::{design_lowpass, filtfilt, pad_len, FilterSpec, Lowpass, Section};
pub use kinematics::{
    derive_kinematics, differentiate, KinematicSeries, KinematicsConfig, DEFAULT_HEADING_CUTOFF_HZ,
    DEFAULT_SPEED_CUTOFF_HZ, FILTER_ORDER, MIN_HEADING_SPEED,
};
