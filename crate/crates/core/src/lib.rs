//! Bootstrap bounds on ground-state energies of central potentials.
//!
//! The crate builds positive-semidefinite moment constraints from an exact
//! noncommutative operator algebra in the radial variable, eliminates the
//! affine relations among moments (including boundary anomalies at the
//! origin), and solves the resulting semidefinite programs with a dense
//! primal-dual interior-point method. A Laguerre-basis diagonalizer serves as
//! an independent reference for the ground state.
//!
//! Everything here is `no_std` with `alloc`; file formats, the command-line
//! front end and parallel sweeps live in the companion `cpboot` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod anomaly;
pub mod basis;
pub mod constraints;
pub mod drivers;
pub mod error;
pub mod linalg;
pub mod opalg;
pub mod poly;
pub mod potentials;
pub mod quadrature;
pub mod rational;
pub mod real;
pub mod refdiag;
pub mod sdp;

pub use error::{Error, Result};
pub use real::{Dd, Real};
