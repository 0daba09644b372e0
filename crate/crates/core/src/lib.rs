//! Simulation of deterministic photon-mediated state transfer and remote
//! entanglement between two cascaded circuit-QED nodes.
//!
//! Each node is a transmon (truncated to `g, e, f`) coupled to a transfer
//! resonator. Node A emits a shaped photon into a lossy directional channel,
//! node B absorbs it with the time-reversed drive. The crate covers pulse
//! shaping, master-equation integration, synthetic single-shot readout,
//! state and process tomography and entanglement metrics.

pub mod device;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod metrics;
pub mod protocols;
pub mod pulse;
pub mod qops;
pub mod readout;
pub mod tomography;
pub mod units;

pub use error::{Error, Result};
