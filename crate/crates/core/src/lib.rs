//! Numerics for 2x2 canonical Hamiltonian systems: transfer matrices, Weyl
//! functions, spectral densities, the Krein inverse problem, the Krein-wave
//! transform, triangular factorization of Wiener-Hopf matrices and A2 weight
//! functionals.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod a2;
pub mod acceptance;
pub mod error;
pub mod factor;
pub mod hamiltonian;
pub mod inverse;
pub mod io;
pub mod quad;
pub mod solver;
pub mod spectral;
pub mod transform;
pub mod weight;

pub use a2::{
    a2_classical, a2_ell1, decompose_l1_l2, lemma2_harness, norm_l1_plus_l2, HalfLineFunction,
    WindowFamily,
};
pub use error::{Error, ErrorKind, Result};
pub use factor::{
    build_toeplitz, chain_preservation_check, cholesky_oracle, factor_via_transform,
    ChainProjection, DiscreteWienerHopf, FactorOptions, FactorReport, KernelSampling,
};
pub use hamiltonian::{Grid, Hamiltonian, SignatureMatrix, Sym2, ValidationReport};
pub use inverse::{accelerant_from_weight, inverse_spectral, Accelerant, SampledAccelerant};
pub use num_complex::Complex64 as C64;
pub use solver::{j_energy_residual, transfer_matrix, TransferMatrix};
pub use spectral::{
    herglotz_b_residual, spectral_density, szego_k, weyl_function, DensityOptions, Tail,
    WeylOptions,
};
pub use transform::{
    f_mu_apply, isometry_residual, krein_wave, reproducing_kernel, sqrt_psd_2x2, KreinWave,
    TimeFunction, WaveTable,
};
pub use weight::{truncate_weight, SampledWeight, SpectralMeasure, Weight};
