//! Inverse spectral problem: from a bounded even weight to a unimodular
//! diagonal Hamiltonian whose spectral density reproduces it.
//!
//! The Krein system is discretized by a Galerkin method on cell indicators of
//! width `delta = R / N` on `[0, 2R]`. With `G = I + delta * [kbar_{|i-l|}]`,
//! `kbar` the cell-pair average of the accelerant, and `G = L L^T`, the
//! vector `L^{-1} 1` samples the continuous orthogonal system at `z = 0`;
//! averaging it over the two time cells covering `r in [n, n+1] * delta`
//! gives the diagonal entry `a` of `sqrt(H)`.

use crate::error::{Error, Result};
use crate::hamiltonian::{Grid, Hamiltonian, Sym2};
use crate::quad::GaussLegendre;
use crate::weight::{cosine_transform_segments, SpectralMeasure, Weight};
use rayon::prelude::*;

/// Regular part `k` of the Wiener-Hopf kernel, `k(t) = (1/2pi) int (w/c - 1) e^{-ixt} dx`
/// with `c` the tail value of `w`.
#[derive(Debug, Clone)]
pub struct Accelerant {
    kernel: Kernel,
    tail: f64,
    band_limit: Option<f64>,
}

#[derive(Debug, Clone)]
enum Kernel {
    Zero,
    Closed(Weight),
    Linear(Vec<(f64, f64, f64, f64)>),
}

/// Samples of the accelerant at `t_i = i * dt`, `i = 0..M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledAccelerant {
    pub dt: f64,
    pub values: Vec<f64>,
    pub band_limit: Option<f64>,
    pub tail: f64,
}

impl SampledAccelerant {
    /// Value at `t` by symmetric extension and linear interpolation.
    pub fn eval(&self, t: f64) -> f64 {
        let u = t.abs() / self.dt;
        let i = u.floor() as usize;
        if i + 1 >= self.values.len() {
            return *self.values.last().unwrap_or(&0.0);
        }
        let s = u - i as f64;
        self.values[i] * (1.0 - s) + self.values[i + 1] * s
    }
}

/// Linear-interpolation density for numeric kernels (points per unit length).
const SEGMENTS_PER_UNIT: f64 = 200.0;

impl Accelerant {
    pub fn new(mu: &SpectralMeasure) -> Result<Self> {
        mu.ensure_absolutely_continuous()?;
        let w = &mu.weight;
        let tail = w.tail_value()?;
        if !(tail > 0.0) {
            return Err(Error::domain(format!(
                "weight tail {tail} must be positive"
            )));
        }
        if !w.is_even() {
            return Err(Error::domain(
                "accelerant needs an even weight (real symmetric kernel)",
            ));
        }
        let band_limit = match w {
            Weight::SincSquared { scale, .. } => Some(2.0 * scale),
            Weight::Constant(_) => Some(0.0),
            _ => None,
        };
        let kernel = match w {
            Weight::Constant(_) => Kernel::Zero,
            Weight::Step { inner, outer, .. } if inner == outer => Kernel::Zero,
            Weight::Step { .. } | Weight::SincSquared { .. } | Weight::CosineBump { .. } => {
                Kernel::Closed(w.clone())
            }
            _ => {
                let x_max = w.compact_half_width().ok_or_else(|| {
                    Error::domain("w - 1 is not known to be integrable; truncate the weight first")
                })?;
                if x_max == 0.0 {
                    Kernel::Zero
                } else {
                    Kernel::Linear(w.linear_segments(x_max, SEGMENTS_PER_UNIT, tail))
                }
            }
        };
        Ok(Self {
            kernel,
            tail,
            band_limit,
        })
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn band_limit(&self) -> Option<f64> {
        self.band_limit
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kernel, Kernel::Zero)
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.kernel {
            Kernel::Zero => 0.0,
            Kernel::Closed(w) => w.closed_form_accelerant(t).expect("closed form available"),
            Kernel::Linear(segs) => cosine_transform_segments(segs, t.abs()),
        }
    }

    /// `kbar_m = int_{-d}^{d} k(m d + s) (d - |s|) / d^2 ds` for `m = 0..count`.
    pub fn cell_averages(&self, count: usize, delta: f64) -> Vec<f64> {
        if self.is_zero() {
            return vec![0.0; count];
        }
        let gl = GaussLegendre::cached(16);
        (0..count)
            .into_par_iter()
            .map(|m| {
                let c = m as f64 * delta;
                let tri = |s: f64| self.eval(c + s) * (delta - s.abs());
                (gl.integrate(-delta, 0.0, tri) + gl.integrate(0.0, delta, tri)) / (delta * delta)
            })
            .collect()
    }
}

pub fn accelerant_from_weight(mu: &SpectralMeasure, r: f64, m: usize) -> Result<SampledAccelerant> {
    if !(r > 0.0) || m < 2 {
        return Err(Error::domain("accelerant sampling needs R > 0 and M >= 2"));
    }
    let acc = Accelerant::new(mu)?;
    let dt = r / (m - 1) as f64;
    let values = (0..m)
        .into_par_iter()
        .map(|i| acc.eval(i as f64 * dt))
        .collect();
    Ok(SampledAccelerant {
        dt,
        values,
        band_limit: acc.band_limit,
        tail: acc.tail,
    })
}

/// Dense lower Cholesky factor (row-major, unpivoted).
#[derive(Debug, Clone)]
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub(crate) fn factor(a: &[f64], n: usize) -> Result<Self> {
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let (head, tail) = l.split_at_mut(j * n);
            let row_j = &mut tail[..n];
            for i in 0..j {
                let row_i = &head[i * n..i * n + i];
                let s: f64 = row_i.iter().zip(&row_j[..i]).map(|(x, y)| x * y).sum();
                row_j[i] = (a[j * n + i] - s) / head[i * n + i];
            }
            let d = a[j * n + j] - row_j[..j].iter().map(|x| x * x).sum::<f64>();
            if !(d > 0.0) {
                return Err(Error::Positivity(format!(
                    "Gram matrix not positive definite at pivot {j} (value {d:e})"
                )));
            }
            row_j[j] = d.sqrt();
        }
        Ok(Self { n, l })
    }

    pub(crate) fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
            y[i] = (b[i] - s) / self.l[i * n + i];
        }
        y
    }

    pub(crate) fn backward(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            x[i] /= self.l[i * n + i];
            let xi = x[i];
            for (xk, lk) in x[..i].iter_mut().zip(&self.l[i * n..i * n + i]) {
                *xk -= lk * xi;
            }
        }
        x
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(b))
    }
}

fn sym_toeplitz_apply(col: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| (0..n).map(|j| col[i.abs_diff(j)] * v[j]).sum())
        .collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    n
}

/// Power-iteration estimate of the condition number of a symmetric
/// positive definite Toeplitz matrix with first column `col`.
pub(crate) fn toeplitz_condition(col: &[f64], chol: &Cholesky) -> f64 {
    let n = col.len();
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64)
        .collect();
    let mut u = v.clone();
    normalize(&mut v);
    normalize(&mut u);
    let (mut hi, mut lo_inv) = (1.0, 1.0);
    for _ in 0..60 {
        let mut w = sym_toeplitz_apply(col, &v);
        hi = normalize(&mut w);
        v = w;
        let mut x = chol.solve(&u);
        lo_inv = normalize(&mut x);
        u = x;
    }
    hi * lo_inv
}

/// Conditioning information from an inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseReport {
    pub cond_estimate: f64,
    pub ill_conditioned: bool,
    pub min_a: f64,
    pub max_a: f64,
}

/// Condition number beyond which results are flagged.
pub const COND_ALARM: f64 = 1e12;

pub fn inverse_spectral(mu: &SpectralMeasure, r: f64, n: usize) -> Result<Hamiltonian> {
    inverse_spectral_report(mu, r, n).map(|(h, _)| h)
}

pub fn inverse_spectral_report(
    mu: &SpectralMeasure,
    r: f64,
    n: usize,
) -> Result<(Hamiltonian, InverseReport)> {
    if !(r > 0.0) || n == 0 {
        return Err(Error::domain("inverse problem needs R > 0 and N >= 1"));
    }
    mu.ensure_bounded()?;
    let acc = Accelerant::new(mu)?;
    let c = acc.tail();
    let grid = Grid::uniform(r, n)?;
    if acc.is_zero() {
        let h = Hamiltonian::new(grid, vec![Sym2::IDENTITY.gauge(c); n], true)?;
        let rep = InverseReport {
            cond_estimate: 1.0,
            ill_conditioned: false,
            min_a: 1.0,
            max_a: 1.0,
        };
        return Ok((h, rep));
    }
    let delta = r / n as f64;
    let size = 2 * n;
    let kbar = acc.cell_averages(size, delta);
    let mut col: Vec<f64> = kbar.iter().map(|k| delta * k).collect();
    col[0] += 1.0;
    let mut g = vec![0.0; size * size];
    g.par_chunks_mut(size).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = col[i.abs_diff(j)];
        }
    });
    let chol = Cholesky::factor(&g, size)?;
    drop(g);
    let y = chol.forward(&vec![1.0; size]);
    let mut cells = Vec::with_capacity(n);
    let (mut min_a, mut max_a) = (f64::INFINITY, 0.0f64);
    for k in 0..n {
        let a = 0.5 * (y[2 * k] + y[2 * k + 1]);
        if !(a > 0.0) {
            return Err(Error::Positivity(format!(
                "recovered wave vanishes on cell {k} (a = {a})"
            )));
        }
        min_a = min_a.min(a);
        max_a = max_a.max(a);
        let a2 = a * a;
        cells.push(Sym2::diag(a2, 1.0 / a2).gauge(c));
    }
    let h = Hamiltonian::new(grid, cells, false)?.normalize_det()?;
    let cond = toeplitz_condition(&col, &chol);
    Ok((
        h,
        InverseReport {
            cond_estimate: cond,
            ill_conditioned: cond > COND_ALARM,
            min_a,
            max_a,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_weights_are_analytic() {
        let h = inverse_spectral(&SpectralMeasure::constant(1.0), 5.0, 8).unwrap();
        assert!(h.cells().iter().all(|c| *c == Sym2::IDENTITY));
        assert!(h.is_unimodular());
        let h = inverse_spectral(&SpectralMeasure::constant(3.0), 5.0, 8).unwrap();
        for c in h.cells() {
            assert!((c.h1 - 1.0 / 3.0).abs() < 1e-15 && (c.h2 - 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sampled_accelerant_of_step_weight() {
        let mu = SpectralMeasure::new(Weight::step(2.0, 1.0, 1.0));
        let s = accelerant_from_weight(&mu, 10.0, 101).unwrap();
        for (i, v) in s.values.iter().enumerate() {
            let t = i as f64 * s.dt;
            let e = if t == 0.0 {
                1.0 / PI
            } else {
                t.sin() / (PI * t)
            };
            assert!((v - e).abs() < 1e-12);
        }
        assert_eq!(s.eval(-2.5), s.eval(2.5));
        let zero = accelerant_from_weight(&SpectralMeasure::constant(1.0), 3.0, 5).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn numeric_route_matches_closed_form() {
        let w = Weight::step(2.0, 1.0, 1.0);
        let sampled = crate::weight::SampledWeight::new(
            vec![-1.0 - 1e-9, -1.0, 1.0, 1.0 + 1e-9],
            vec![1.0, 2.0, 2.0, 1.0],
        )
        .unwrap();
        let a = Accelerant::new(&SpectralMeasure::new(Weight::Sampled(sampled))).unwrap();
        for &t in &[0.0, 0.4, 3.0, 12.0] {
            assert!(
                (a.eval(t) - w.closed_form_accelerant(t).unwrap()).abs() < 1e-7,
                "t={t}"
            );
        }
    }

    #[test]
    fn uneven_or_nonintegrable_weights_are_rejected() {
        let s =
            crate::weight::SampledWeight::new(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 1.0]).unwrap();
        assert!(Accelerant::new(&SpectralMeasure::new(Weight::Sampled(s))).is_err());
        let w = Weight::custom("slow", 1.0, true, |x| 1.0 + 1.0 / (1.0 + x.abs()));
        assert!(accelerant_from_weight(&SpectralMeasure::new(w), 1.0, 4).is_err());
    }

    #[test]
    fn nonpositive_weight_is_a_positivity_error() {
        let mu = SpectralMeasure::new(Weight::step(-0.5, 1.0, 1.0));
        assert!(matches!(
            inverse_spectral(&mu, 4.0, 16),
            Err(Error::Positivity(_))
        ));
    }

    #[test]
    fn cholesky_solves() {
        let a = [4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let ch = Cholesky::factor(&a, 3).unwrap();
        let x = ch.solve(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((r - [1.0, 2.0, 3.0][i]).abs() < 1e-14);
        }
        assert!(Cholesky::factor(&[1.0, 2.0, 2.0, 1.0], 2).is_err());
    }

    #[test]
    fn output_is_unimodular_with_positive_diagonal() {
        let mu = SpectralMeasure::new(Weight::SincSquared {
            amplitude: 0.5,
            scale: 1.0,
        });
        let (h, rep) = inverse_spectral_report(&mu, 5.0, 40).unwrap();
        assert!(!rep.ill_conditioned);
        assert!(
            rep.cond_estimate >= 1.0 && rep.cond_estimate < 2.0,
            "{}",
            rep.cond_estimate
        );
        for c in h.cells() {
            assert!((c.det() - 1.0).abs() <= 1e-10);
            assert!(c.h1 > 0.0 && c.h2 > 0.0);
        }
    }
}
