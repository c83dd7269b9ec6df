//! Numerical core for time-resolved diffraction from laser-driven graphene.
//!
//! The crate covers the full chain from relativistic scattering kernels to
//! channel-decomposed Bragg-spot intensities:
//!
//! * [`dirac`] — gamma-matrix algebra, on-shell spinors, and the polarization
//!   kernel that contracts beam four-momenta into density/current weights.
//! * [`fock`] — truncated bosonic and fermionic ladder operators used for the
//!   photon-counting matrix elements.
//! * [`xsec`] — stationary Thomson and Rutherford differential cross sections
//!   plus form factors of sampled charge densities.
//! * [`graphene`] — honeycomb tight-binding model, Bloch orbitals, and the
//!   Fourier tables of density/current matrix elements at Bragg vectors.
//! * [`sbe`] — two-band semiconductor Bloch equations in the moving frame of
//!   a sin^4 pump pulse.
//! * [`signal`] — time-resolved diffraction intensities split into
//!   density-density, density-current, and current-current channels.
//!
//! Everything works in Hartree atomic units unless a function says otherwise.
//! The crate is `no_std` (with `alloc`) so the kernels can be embedded; all
//! file IO, configuration, and parallel drivers live in the companion CLI
//! crate.

#![cfg_attr(not(test), no_std)]
// Lockstep index loops over small fixed arrays are the house style here.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod dirac;
pub mod fock;
pub mod graphene;
pub mod linalg;
pub mod sbe;
pub mod signal;
pub mod xsec;

pub use num_complex::Complex64;

/// Fine-structure constant (CODATA 2018).
pub const FINE_STRUCTURE: f64 = 1.0 / 137.035999084;
