//! Channel modeling for RIS-assisted wireless links.
//!
//! Two engines produce the system impedance matrix of a transmitter / RIS /
//! receiver deployment made of parallel thin-wire dipoles:
//!
//! * [`analytical`]: induced-EMF mutual impedances of sinusoidal current
//!   distributions;
//! * [`peec`]: a full-wave partial element equivalent circuit solved by
//!   modified nodal analysis.
//!
//! [`channel`] turns either matrix into the end-to-end channel, [`optimizer`]
//! tunes the RIS terminations by block coordinate descent and [`experiment`]
//! runs the cross-engine sweeps.

pub mod analytical;
pub mod channel;
pub mod em;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod optimizer;
pub mod peec;

pub use error::{Error, Result};
