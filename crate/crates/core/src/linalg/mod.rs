//! Spectral tools for the single-excitation Hamiltonian.
//!
//! The workhorse is an implicit-shift QL eigensolver for real symmetric
//! tridiagonal matrices. Unitary propagation amplitudes follow from the
//! spectral decomposition as `<j|exp(-iHt)|i> = sum_k v_k[i] v_k[j] exp(-i E_k t)`.
//! A small dense Jacobi solver covers the 2x2 and 4x4 Hermitian density
//! matrices used by the entanglement measures.

mod dense;
mod tridiag;

pub use dense::{
    complex_singular_values, hermitian_eigenvalues, hermitian_sqrt_psd, symmetric_eigen_dense,
};
pub use tridiag::{
    eigh_tridiag, eigh_tridiag_endpoints, propagation_amplitude, EndpointSpectrum,
    SpectralDecomposition, TridiagonalSymmetric, MAX_SWEEPS,
};
