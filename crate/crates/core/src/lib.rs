//! Interface dynamics on monotone surfaces and on the 1D SOS model.
//!
//! The crate is `no_std` and needs only `alloc`. It contains the chains
//! themselves, the grand monotone coupling with coalescence and
//! coupling-from-the-past, exact analysis on enumerable state spaces
//! (generators, spectral gaps, total variation curves, block dynamics), and
//! the deterministic cap schedules with their domination monitor.
//!
//! Logarithms are natural throughout.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod coupling;
pub mod error;
pub mod events;
pub mod lattice;
pub mod math;
pub mod schedule;
pub mod sos;
pub mod spectral;
pub mod surface;

pub use error::{Error, Result};
pub use events::{Event, EventStream};
pub use lattice::{
    check_good_planar, partial_order_leq, planar_reference, sos_energy, wall_profile, HeightField, Point,
    Region, SlopeVector, SosParams, SosPath, WallProfile,
};
