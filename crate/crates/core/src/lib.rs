//! Phonons on a rotating ring of ions with an imposed, inhomogeneous
//! velocity profile: an acoustic black hole on a lattice.
//!
//! The crate is organised bottom-up:
//!
//! * [`profile`]: the label→angle map `g`, horizons and Hawking temperature;
//! * [`lattice`]: equilibrium frames, Coulomb pair terms and the force matrix;
//! * [`dynamics`]: symplectic evolution of phase vectors and covariances, Floquet stability;
//! * [`modes`]: Fourier analysis, dispersion, Klein-Gordon norms, pulses;
//! * [`experiments`]: backward thermality runs, quench correlations, negativity.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod modes;
pub mod profile;
mod spline;

pub use config::{Interaction, RampSchedule, RingConfig};
pub use error::{Error, Result};
