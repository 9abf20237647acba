//! Design and verification toolkit for electrostatically driven MEMS beam
//! resonators closed in a loop with a Pierce amplifier.
//!
//! The pipeline runs [`process`] → [`mechanics`] → [`transduction`] →
//! [`pierce`], with [`simulate`] for time-domain startup and [`explore`] for
//! whole-design evaluation, sweeps and optimisation. All quantities are SI.

pub mod config;
pub mod error;
pub mod explore;
pub mod mechanics;
pub mod pierce;
pub mod process;
pub mod reference;
pub mod simulate;
pub mod transduction;

pub use error::{Error, Result, Stage};
