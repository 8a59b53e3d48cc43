//! Simulation and two-level control of a three-rotor wind turbine.
//!
//! Each rotor unit runs a gain-scheduled power-tracking controller built on a
//! Takagi-Sugeno decomposition of a one-mass rotor model, with a wind-speed
//! observer supplying the scheduling variable. A central controller damps
//! the torsion of the main tower by skewing the power-change split between the
//! two lateral rotors.

pub mod aero;
pub mod config;
pub mod control_central;
pub mod control_local;
pub mod dynamics;
pub mod error;
pub mod lqr;
pub mod reduced_model;
pub mod simkit;
pub mod tower;

pub use config::Config;
pub use error::{Error, Result};
