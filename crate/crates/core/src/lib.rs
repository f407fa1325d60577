//! Delay-Doppler channel modeling toolkit.
//!
//! The crate covers the full chain from synthetic tapped delay-Doppler line
//! channels to pilot-based DD estimation, stationarity analysis, amplitude
//! distribution fitting and an OTFS link simulator for BER experiments.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel_model;
pub mod dd_estimator;
pub mod dist_fit;
pub mod error;
pub mod grid;
pub mod io;
pub mod otfs_link;
pub mod special;
pub mod stationarity;

pub use error::{Error, Result};
pub use grid::{GridSpec, PilotSymbols, TfGrid};
