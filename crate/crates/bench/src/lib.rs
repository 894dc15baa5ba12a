//! Shared fixtures for the benchmarks.

use canon_core::{Hamiltonian, SpectralMeasure, Weight, C64};

pub fn step_weight() -> SpectralMeasure {
    SpectralMeasure::new(Weight::step(2.0, 1.0, 1.0))
}

pub fn bump_weight() -> SpectralMeasure {
    SpectralMeasure::new(Weight::SincSquared {
        amplitude: 0.5,
        scale: 1.0,
    })
}

/// Bump Hamiltonian on `[0, r]` with `n` cells.
pub fn bump_hamiltonian(r: f64, n: usize) -> Hamiltonian {
    canon_core::inverse_spectral(&bump_weight(), r, n).expect("bump inversion")
}

/// `count` points on a horizontal line `Im z = im` across `[-3, 3]`.
pub fn z_line(count: usize, im: f64) -> Vec<C64> {
    (0..count)
        .map(|i| C64::new(-3.0 + 6.0 * i as f64 / (count.max(2) - 1) as f64, im))
        .collect()
}
