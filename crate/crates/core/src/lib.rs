//! Numerical core for one-dimensional conduction-band electron dynamics driven
//! by localized, time-dependent excitations.
//!
//! Everything here is `no_std` (with `alloc`): the unit system and lattice, the
//! excitation builders, the steady-state Green's function solver, the two time
//! propagation engines and the observables computed from their output. File
//! formats, configuration and the command line live in the `nanopulse` crate.
//!
//! Units throughout are nm, fs and eV; potentials are in V and the elementary
//! charge is 1, so that `charge * volts` is an energy in eV.
#![no_std]
// `!(x > 0.0)` is how NaN inputs get rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod fft;
pub mod fields;
pub mod observables;
pub mod physics;
pub mod static_negf;
pub mod tdse;
pub mod tridiag;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use physics::{dispersion, wavenumber_from_energy, Grid, PhysicalContext, PlaneWave};
