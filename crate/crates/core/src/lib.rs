//! Quantum state transfer through disordered spin chains.
//!
//! The crate models an XX spin chain in its single-excitation sector, where the
//! Hamiltonian reduces to a real symmetric tridiagonal matrix. Two coupling
//! protocols are provided: the fully engineered *spin-analogue* chain, which
//! transfers perfectly, and the uniform *optimal-coupling* chain with weakened
//! boundary couplings. On top of that sit the transfer-quality measures
//! (state fidelity, average-state fidelity, worst-case fidelity, concurrence),
//! a seeded Monte Carlo engine for static diagonal and off-diagonal disorder,
//! and a least-squares fitter for the Gaussian decay law of the ensemble means.
//!
//! Everything here is pure computation: the crate is `no_std` and needs only
//! `alloc`. File formats, the command line and the multi-threaded executor
//! live in the `spinwire` companion crate.
//!
//! ```
//! use spinwire_core::chain::{build_spin_analogue, ideal_reference};
//!
//! let chain = build_spin_analogue(25, 1.0).unwrap();
//! let ideal = ideal_reference(&chain).unwrap();
//! assert!((ideal.p - 1.0).abs() < 1e-9);
//! ```
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod chain;
pub mod ensemble;
mod error;
pub mod fitting;
pub mod linalg;
mod math;
pub mod measures;
pub mod optimize;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Transfer amplitude `<j| exp(-iHt) |i>` in the single-excitation sector.
pub type ComplexAmplitude = Complex64;
