//! Magnetic-field localization of in-body nano-machines.
//!
//! Long straight DC wires act as anchors. A nano-machine carrying a
//! tri-axial magnetometer measures the flux density of each wire in turn,
//! the magnitude is inverted into a distance with the Biot-Savart law, and
//! the distances are combined either by closed-form trilateration (three
//! wires) or by per-family least-squares multilateration fused with
//! wire-count weights (six or more wires).
//!
//! The [`sim`] module drives the Monte Carlo accuracy study over a voxel
//! phantom from [`body`].

pub mod body;
pub mod config;
pub mod error;
pub mod fieldmodel;
pub mod geometry;
pub mod locate;
pub mod sensor;
pub mod sim;

pub use error::{Error, Result};

/// Vacuum permeability in H/m.
pub const MU_0: f64 = 4.0e-7 * std::f64::consts::PI;
