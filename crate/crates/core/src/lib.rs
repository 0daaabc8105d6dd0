//! Leadership and influence analysis of small walking groups from their
//! position trajectories.
//!
//! The pipeline runs [`trajectory`] loading, [`preprocess`] smoothing and
//! differentiation, time-lagged [`lagcorr`] correlation, per-agent
//! [`leadership`] indices and windowed influence [`network`]s. The
//! [`simulate`] module generates synthetic groups with known coupling and
//! [`report`] ties everything to files on disk.

pub mod error;
pub mod lagcorr;
pub mod leadership;
pub mod network;
pub mod numfmt;
pub mod preprocess;
pub mod report;
pub mod simulate;
pub mod trajectory;

pub use error::{Error, Result};
pub use lagcorr::Mode;
pub use trajectory::{AgentId, Position, Trial};
