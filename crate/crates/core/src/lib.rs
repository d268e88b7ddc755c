//! Simulation and control library for a wireless-powered sensor node: an RF
//! power beacon charging a supercapacitor-backed sensor over a lossy channel.
//!
//! - [`device_models`]: amplifier, channel, harvester, supercapacitor, loads
//! - [`energy_evolution`]: stored-energy ODE and its per-frame/epoch maps
//! - [`energy_management`]: minimum-power strategy and the PI controller
//! - [`calibration`]: fits from bench traces, curve-table ingestion
//! - [`sim`]: scenario files, closed-loop runs, sweeps and CSV traces

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod device_models;
pub mod energy_evolution;
pub mod energy_management;
pub mod error;
pub mod reference;
pub mod sim;
pub mod units;

pub use error::{Error, Result};
