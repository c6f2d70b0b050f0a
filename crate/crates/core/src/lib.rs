//! Seedable simulator of a cellular Internet of UAVs: UAVs sense targets
//! and deliver data over U2N, U2U or U2D links on shared subchannels, while
//! the base station allocates spectrum and power and each UAV learns its
//! trajectory.

pub mod channel;
pub mod error;
pub mod harness;
pub mod model;
pub mod protocol;
pub mod rl;
pub mod rrm;
pub mod scenario;
pub mod sensing;

pub use error::{Error, Result};
