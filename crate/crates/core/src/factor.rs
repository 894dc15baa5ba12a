//! Triangular factorization `W = A^T A` of discretized Wiener-Hopf operators
//! along the coordinate chain, built from the Krein-wave transform.
//!
//! With cell basis `e_n = delta^{-1/2} 1_{[n delta, (n+1) delta)}` on `[0, R]`,
//! the inverse factor is `B_{jn} = (1/2pi) int F_mu e_n(x) conj(F e_j(x)) dx`.
//! Since `F_mu e_n` lies in the Paley-Wiener space of `[0, (n+1) delta]`,
//! `B` is upper triangular, and so is `A = B^{-1}`. An upper triangular
//! matrix is exactly one that maps every span of the first `k` coordinates
//! into itself.

use crate::error::{Error, Result};
use crate::inverse::{inverse_spectral, Accelerant};
use crate::transform::{cell_roots, phi1, WaveTable};
use crate::weight::SpectralMeasure;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::sync::Arc;

/// How the accelerant enters the matrix entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelSampling {
    /// `k` averaged against the two cell indicators (exact Galerkin entries).
    #[default]
    CellAverage,
    /// `k((j - l) h)`.
    Point,
}

/// `c (I + h [k_{j-l}])` with `c` the tail value of the weight.
#[derive(Debug, Clone)]
pub struct DiscreteWienerHopf {
    pub n: usize,
    pub h: f64,
    pub matrix: DMatrix<f64>,
    pub symbol_bounds: (f64, f64),
    /// Smallest and largest eigenvalue.
    pub eigen_bounds: (f64, f64),
}

impl DiscreteWienerHopf {
    pub fn is_toeplitz(&self) -> bool {
        let m = &self.matrix;
        (0..self.n).all(|i| (0..self.n).all(|j| m[(i, j)] == m[(i.abs_diff(j), 0)]))
    }
}

fn eigen_bounds(m: &DMatrix<f64>) -> (f64, f64) {
    let ev = m.clone().symmetric_eigenvalues();
    (ev.min(), ev.max())
}

/// Toeplitz matrix, positivity unchecked (used by the negative control).
pub fn toeplitz_unchecked(
    mu: &SpectralMeasure,
    n: usize,
    h: f64,
    sampling: KernelSampling,
) -> Result<DiscreteWienerHopf> {
    if n < 1 || !(h > 0.0) {
        return Err(Error::domain("Wiener-Hopf matrix needs N >= 1 and h > 0"));
    }
    let acc = Accelerant::new(mu)?;
    let c = acc.tail();
    let k: Vec<f64> = match sampling {
        KernelSampling::CellAverage => acc.cell_averages(n, h),
        KernelSampling::Point => (0..n).map(|m| acc.eval(m as f64 * h)).collect(),
    };
    let matrix = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        c * (d + h * k[i.abs_diff(j)])
    });
    let eigen_bounds = eigen_bounds(&matrix);
    Ok(DiscreteWienerHopf {
        n,
        h,
        matrix,
        symbol_bounds: (mu.c1, mu.c2),
        eigen_bounds,
    })
}

pub fn build_toeplitz(mu: &SpectralMeasure, n: usize, h: f64) -> Result<DiscreteWienerHopf> {
    build_toeplitz_with(mu, n, h, KernelSampling::CellAverage)
}

pub fn build_toeplitz_with(
    mu: &SpectralMeasure,
    n: usize,
    h: f64,
    sampling: KernelSampling,
) -> Result<DiscreteWienerHopf> {
    let w = toeplitz_unchecked(mu, n, h, sampling)?;
    if !(w.eigen_bounds.0 > 0.0) {
        return Err(Error::Positivity(format!(
            "Wiener-Hopf matrix has eigenvalue {:e}; the symbol is not bounded below",
            w.eigen_bounds.0
        )));
    }
    Ok(w)
}

/// Projection onto the first `k` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainProjection {
    pub k: usize,
}

impl ChainProjection {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(i, &x)| if i < self.k { x } else { 0.0 })
            .collect()
    }

    pub fn contains(&self, other: &ChainProjection) -> bool {
        other.k <= self.k
    }
}

/// `max_k ||(I - P_k) A P_k||_F`, the largest block below the diagonal blocks.
pub fn chain_preservation_check(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows().min(a.ncols());
    // s[i][j] = sum of squares of a[i.., ..j]
    let mut best = 0.0f64;
    let mut col_tail = vec![0.0; n + 1];
    let mut block = vec![0.0; n + 1];
    for j in 0..n {
        // col_tail[i] = sum_{r >= i} a[r, j]^2
        col_tail[n] = 0.0;
        for i in (0..n).rev() {
            col_tail[i] = col_tail[i + 1] + a[(i, j)] * a[(i, j)];
        }
        // block[k] accumulates rows >= k, columns < k for fixed k as j grows
        for k in (j + 1)..=n {
            block[k] += col_tail[k.min(n)];
        }
    }
    for &b in &block {
        best = best.max(b);
    }
    best.sqrt()
}

/// Smallest absolute diagonal entry; nonzero means every leading block is invertible.
pub fn min_abs_diagonal(a: &DMatrix<f64>) -> f64 {
    a.diagonal()
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v.abs()))
}

/// Lower Cholesky factor of `W`.
pub fn cholesky_oracle(w: &DiscreteWienerHopf) -> Result<DMatrix<f64>> {
    nalgebra::Cholesky::new(w.matrix.clone())
        .map(|c| c.l())
        .ok_or_else(|| Error::Factorization("matrix is not positive definite".into()))
}

/// Rows scaled so the diagonal is positive.
pub fn sign_normalize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = a.clone();
    for i in 0..a.nrows().min(a.ncols()) {
        if a[(i, i)] < 0.0 {
            out.row_mut(i).neg_mut();
        }
    }
    out
}

pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    sv.max() / sv.min()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorOptions {
    pub sampling: KernelSampling,
    /// Frequency cutoff of the transform integrals.
    pub x_max: f64,
    /// Frequency oversampling: the trapezoid step is `2 pi / (oversample N h)`.
    pub oversample: usize,
}

impl Default for FactorOptions {
    fn default() -> Self {
        Self {
            sampling: KernelSampling::CellAverage,
            x_max: 1000.0,
            oversample: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorReport {
    /// `||W - A^T A||_F / ||W||_F`.
    pub residual: f64,
    pub leakage: f64,
    /// `||strict lower part of computed B||_F / ||B||_F`, dropped by construction.
    pub discarded_lower: f64,
    pub cond: f64,
    /// `||A - L^T||_F / ||L||_F` after sign normalization.
    pub cholesky_distance: f64,
    /// `max |B^T W B - I|`.
    pub orthogonality_defect: f64,
    pub min_diagonal: f64,
    pub eigen_bounds: (f64, f64),
    pub symbol_bounds: (f64, f64),
}

/// Conditioning beyond which the factorization is refused.
pub const FACTOR_COND_ALARM: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct Factorization {
    pub a: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub w: DiscreteWienerHopf,
    pub report: FactorReport,
}

pub fn factor_via_transform(
    mu: &SpectralMeasure,
    r: f64,
    n: usize,
) -> Result<(DMatrix<f64>, FactorReport)> {
    factor_via_transform_with(mu, r, n, FactorOptions::default()).map(|f| (f.a, f.report))
}

pub fn factor_via_transform_with(
    mu: &SpectralMeasure,
    r: f64,
    n: usize,
    opts: FactorOptions,
) -> Result<Factorization> {
    if !(r > 0.0) || n < 1 {
        return Err(Error::domain("factorization needs R > 0 and N >= 1"));
    }
    if !(opts.x_max > 0.0) || opts.oversample < 2 {
        return Err(Error::domain(
            "factorization needs X > 0 and oversampling >= 2",
        ));
    }
    mu.ensure_bounded()?;
    let delta = r / n as f64;
    let w = build_toeplitz_with(mu, n, delta, opts.sampling)?;
    let acc = Accelerant::new(mu)?;
    let c = acc.tail();
    let (b, discarded_lower) = if acc.is_zero() {
        (DMatrix::from_diagonal_element(n, n, 1.0 / c.sqrt()), 0.0)
    } else {
        inverse_factor(mu, r, n, c, opts)?
    };
    let a = invert_upper(&b)?;
    finish(a, b, w, discarded_lower)
}

fn finish(
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    w: DiscreteWienerHopf,
    discarded_lower: f64,
) -> Result<Factorization> {
    let n = w.n;
    let wm = &w.matrix;
    let residual = (wm - a.transpose() * &a).norm() / wm.norm();
    let l = cholesky_oracle(&w)?;
    let lt = l.transpose();
    let cholesky_distance = (sign_normalize(&a) - &lt).norm() / lt.norm();
    let gram = b.transpose() * wm * &b - DMatrix::identity(n, n);
    let orthogonality_defect = gram.amax();
    let cond = condition_number(&a);
    if !(cond < FACTOR_COND_ALARM) {
        return Err(Error::Factorization(format!(
            "triangular factor has condition number {cond:e}"
        )));
    }
    let report = FactorReport {
        residual,
        leakage: chain_preservation_check(&a),
        discarded_lower,
        cond,
        cholesky_distance,
        orthogonality_defect,
        min_diagonal: min_abs_diagonal(&a),
        eigen_bounds: w.eigen_bounds,
        symbol_bounds: w.symbol_bounds,
    };
    Ok(Factorization { a, l, w, report })
}

fn invert_upper(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = b.nrows();
    if (0..n).any(|i| !(b[(i, i)].abs() > 0.0)) {
        return Err(Error::Factorization(
            "triangular factor has a zero diagonal entry".into(),
        ));
    }
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        a[(j, j)] = 1.0 / b[(j, j)];
        for i in (0..j).rev() {
            let s: f64 = ((i + 1)..=j).map(|k| b[(i, k)] * a[(k, j)]).sum();
            a[(i, j)] = -s / b[(i, i)];
        }
    }
    Ok(a)
}

/// Upper triangle of `B` by trapezoid quadrature in `x` folded onto an FFT of
/// length `P = oversample N`; the free part `delta_{jn}/sqrt(c)` is exact.
fn inverse_factor(
    mu: &SpectralMeasure,
    r: f64,
    n: usize,
    c: f64,
    opts: FactorOptions,
) -> Result<(DMatrix<f64>, f64)> {
    let delta = r / n as f64;
    let h = inverse_spectral(mu, 0.5 * r, n)?;
    let roots = Arc::new(cell_roots(&h)?);
    let p = opts.oversample * n;
    let dx = 2.0 * PI / (p as f64 * delta);
    let m_max = (opts.x_max / dx).ceil() as i64;
    let sc = 1.0 / c.sqrt();
    let i = C64::new(0.0, 1.0);
    // folded[rho][n] = sum over m = rho mod P of q_n(x_m)
    let folded: Vec<Vec<C64>> = (0..p)
        .into_par_iter()
        .map(|rho| {
            let mut acc = vec![C64::new(0.0, 0.0); n];
            let mut m = -m_max + (rho as i64 - (-m_max)).rem_euclid(p as i64);
            while m <= m_max {
                let x = m as f64 * dx;
                let table = WaveTable::with_roots(&h, roots.clone(), C64::new(x, 0.0));
                let e = phi1(i * x, delta);
                let ec = e.conj();
                for (k, slot) in acc.iter_mut().enumerate() {
                    let t0 = k as f64 * delta;
                    let wave = table.integral(t0, t0 + delta);
                    let free = (i * x * t0).exp() * e * sc;
                    *slot += (wave - free) * ec;
                }
                m += p as i64;
            }
            acc
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(p);
    let scale = dx / (2.0 * PI * delta);
    let mut b = DMatrix::zeros(n, n);
    let mut lower_sq = 0.0;
    let mut total_sq = 0.0;
    let mut buf = vec![C64::new(0.0, 0.0); p];
    for col in 0..n {
        for (rho, v) in buf.iter_mut().enumerate() {
            *v = folded[rho][col];
        }
        fft.process(&mut buf);
        for row in 0..n {
            let mut v = buf[row].re * scale;
            if row == col {
                v += sc;
            }
            total_sq += v * v;
            if row > col {
                lower_sq += v * v;
            } else {
                b[(row, col)] = v;
            }
        }
    }
    Ok((b, (lower_sq / total_sq).sqrt()))
}
