//! Weyl function, spectral density and the Szego functional.

use crate::error::{Error, Result};
use crate::hamiltonian::{Hamiltonian, Sym2};
use crate::quad;
use crate::solver::{cell_propagator, CMat2};
use crate::weight::{SpectralMeasure, Weight};
use num_complex::Complex64 as C64;
use std::f64::consts::{FRAC_PI_2, PI};

/// Continuation of the Hamiltonian beyond its grid when the Weyl disk has not
/// yet shrunk below tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    /// Stop at the grid end.
    None,
    /// Hold the last cell value, stepping with doubling widths.
    Hold,
}

#[derive(Debug, Clone, Copy)]
pub struct WeylOptions {
    /// Target Weyl-disk diameter.
    pub tol: f64,
    pub tail: Tail,
    /// Largest time reached under [`Tail::Hold`].
    pub horizon: f64,
}

impl Default for WeylOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            tail: Tail::None,
            horizon: 1e12,
        }
    }
}

impl WeylOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub fn held(self) -> Self {
        Self {
            tail: Tail::Hold,
            ..self
        }
    }
}

/// Result of the limit-point iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylValue {
    pub m: C64,
    /// Time at which the disk diameter dropped below tolerance.
    pub t_stop: f64,
    pub diameter: f64,
}

/// Running product `M(t, z)` kept with a separate logarithmic scale.
struct Marcher {
    z: C64,
    m: CMat2,
    log_scale: f64,
    t: f64,
}

impl Marcher {
    fn new(z: C64) -> Self {
        Self {
            z,
            m: CMat2::identity(),
            log_scale: 0.0,
            t: 0.0,
        }
    }

    fn step(&mut self, c: &Sym2, w: f64) {
        // a single propagator grows like exp(|Im z| w sqrt(det)); keep each factor below e^32
        let growth = self.z.im.abs() * w * c.det().max(0.0).sqrt();
        let parts = (growth / 32.0).ceil().max(1.0) as usize;
        let dw = w / parts as f64;
        let p = cell_propagator(c, dw, self.z);
        for _ in 0..parts {
            self.m = p * self.m;
            let n = self.m.iter().fold(0.0f64, |a, v| a.max(v.norm()));
            if n > 1e64 {
                self.m /= C64::new(n, 0.0);
                self.log_scale += n.ln();
            }
        }
        self.t += w;
    }

    /// Diameter `1 / Im(Theta+ conj Theta-)` of the Weyl disk.
    fn diameter(&self) -> f64 {
        let a = (self.m[(0, 0)] * self.m[(1, 0)].conj()).im;
        if a <= 0.0 {
            return f64::INFINITY;
        }
        (-2.0 * self.log_scale).exp() / a
    }

    fn value(&self) -> C64 {
        self.m[(1, 1)] / self.m[(1, 0)]
    }
}

pub fn weyl_function(h: &Hamiltonian, z: C64, tol: f64) -> Result<C64> {
    weyl_function_with(h, z, &WeylOptions::with_tol(tol)).map(|v| v.m)
}

pub fn weyl_function_with(h: &Hamiltonian, z: C64, opts: &WeylOptions) -> Result<WeylValue> {
    h.ensure_valid()?;
    weyl_unchecked(h, z, opts)
}

pub(crate) fn weyl_unchecked(h: &Hamiltonian, z: C64, opts: &WeylOptions) -> Result<WeylValue> {
    if !(z.im > 0.0) {
        return Err(Error::domain(format!(
            "Weyl function needs Im z > 0, got {z}"
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::domain("Weyl tolerance must be positive"));
    }
    let g = h.grid();
    let mut mr = Marcher::new(z);
    let mut diam = f64::INFINITY;
    let done = |mr: &Marcher, diam: f64| WeylValue {
        m: mr.value(),
        t_stop: mr.t,
        diameter: diam,
    };
    for k in 0..g.cells() {
        mr.step(&h.cell(k), g.width(k));
        diam = mr.diameter();
        if diam < opts.tol {
            return Ok(done(&mr, diam));
        }
    }
    if opts.tail == Tail::Hold {
        let last = h.cell(g.cells() - 1);
        let mut w = g.width(g.cells() - 1).max(g.end() / g.cells() as f64);
        while mr.t < opts.horizon {
            mr.step(&last, w);
            diam = mr.diameter();
            if diam < opts.tol {
                return Ok(done(&mr, diam));
            }
            w *= 2.0;
        }
    }
    Err(Error::Convergence {
        what: format!(
            "Weyl disk at z = {z} did not shrink below {:e} by t = {}",
            opts.tol, mr.t
        ),
        last: diam,
    })
}

/// Controls the `eps -> 0` extrapolation of `Im m(x + i eps)`.
#[derive(Debug, Clone, Copy)]
pub struct DensityOptions {
    /// Stop once successive extrapolated values differ by less than this (relative).
    pub rel_tol: f64,
    pub max_levels: usize,
    pub weyl: WeylOptions,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-3,
            max_levels: 16,
            weyl: WeylOptions {
                tol: 1e-10,
                tail: Tail::Hold,
                horizon: 1e12,
            },
        }
    }
}

/// Extrapolated boundary value of `Im m` at `x`, starting from `eps`.
pub fn spectral_density(h: &Hamiltonian, x: f64, eps: f64) -> Result<f64> {
    spectral_density_with(h, x, eps, &DensityOptions::default())
}

pub fn spectral_density_with(
    h: &Hamiltonian,
    x: f64,
    eps: f64,
    opts: &DensityOptions,
) -> Result<f64> {
    h.ensure_valid()?;
    density_unchecked(h, x, eps, opts)
}

pub(crate) fn density_unchecked(
    h: &Hamiltonian,
    x: f64,
    eps: f64,
    opts: &DensityOptions,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::domain(format!("eps must be positive, got {eps}")));
    }
    let im_m = |e: f64| weyl_unchecked(h, C64::new(x, e), &opts.weyl).map(|v| v.m.im);
    let mut e = eps;
    let mut prev_f = im_m(e)?;
    let mut prev_r: Option<f64> = None;
    for _ in 0..opts.max_levels {
        e *= 0.5;
        let f = im_m(e)?;
        let r = 2.0 * f - prev_f;
        if let Some(pr) = prev_r {
            if (r - pr).abs() <= opts.rel_tol * r.abs() {
                return Ok(r);
            }
        }
        prev_r = Some(r);
        prev_f = f;
    }
    Err(Error::Convergence {
        what: format!("density at x = {x} did not settle by eps = {e:e}"),
        last: e,
    })
}

/// `Im m(i y) / y`; tends to the Herglotz coefficient `b` as `y` grows.
pub fn herglotz_b_residual(h: &Hamiltonian, y_max: f64) -> Result<f64> {
    if !h.is_unimodular() {
        return Err(Error::domain(
            "Herglotz check expects a unimodular Hamiltonian",
        ));
    }
    if !(y_max > 0.0) {
        return Err(Error::domain("y_max must be positive"));
    }
    let opts = WeylOptions {
        tol: 1e-10,
        tail: Tail::Hold,
        horizon: 1e12,
    };
    let v = weyl_function_with(h, C64::new(0.0, y_max), &opts)?;
    Ok(v.m.im / y_max)
}

/// `(1/pi) int g(x) Im z / |x - z|^2 dx` via `x = Re z + Im z tan(theta)`.
fn poisson_average(z: C64, breakpoints: &[f64], tol: f64, g: impl Fn(f64) -> f64) -> f64 {
    let (x0, y) = (z.re, z.im);
    let mut pts: Vec<f64> = breakpoints.iter().map(|b| ((b - x0) / y).atan()).collect();
    pts.push(-FRAC_PI_2);
    pts.push(FRAC_PI_2);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    quad::adaptive_pieces(&pts, tol, 4000, |th| {
        if th.abs() >= FRAC_PI_2 {
            return 0.0;
        }
        g(x0 + y * th.tan())
    }) / PI
}

/// `K(mu, z) = log P[w](z) - P[log w](z)` with `P` the Poisson average.
pub fn szego_k(mu: &SpectralMeasure, z: C64) -> Result<f64> {
    mu.ensure_absolutely_continuous()?;
    if !(z.im > 0.0) {
        return Err(Error::domain(format!("K needs Im z > 0, got {z}")));
    }
    if let Weight::Constant(c) = mu.weight {
        if !(c > 0.0) {
            return Err(Error::domain("constant weight must be positive"));
        }
        return Ok(0.0);
    }
    let tail = mu.weight.tail_value()?;
    if !(tail > 0.0) {
        return Err(Error::domain("weight tail must be positive"));
    }
    let bp = mu.weight.breakpoints();
    let w = &mu.weight;
    let avg = tail + poisson_average(z, &bp, 1e-14, |x| w.eval(x) - tail);
    let log_tail = tail.ln();
    let avg_log = log_tail
        + poisson_average(z, &bp, 1e-14, |x| {
            let v = w.eval(x);
            if v > 0.0 {
                v.ln() - log_tail
            } else {
                f64::NEG_INFINITY
            }
        });
    if !avg_log.is_finite() {
        return Err(Error::domain("log w is not integrable (weight vanishes)"));
    }
    Ok(avg.ln() - avg_log)
}

/// `K` of the spectral measure of a unimodular Hamiltonian, using `Im m(z)`
/// for the Poisson average of the measure and boundary densities for `log w`.
pub fn szego_k_hamiltonian(h: &Hamiltonian, z: C64, opts: &DensityOptions) -> Result<f64> {
    h.ensure_valid()?;
    if !h.is_unimodular() {
        return Err(Error::domain("expects a unimodular Hamiltonian"));
    }
    let m = weyl_unchecked(h, z, &opts.weyl)?.m;
    // high-frequency density is governed by the first cell
    let log_tail = (1.0 / h.cell(0).h1).ln();
    let err = std::cell::Cell::new(None);
    let avg_log = log_tail
        + poisson_average(z, &[], 1e-9, |x| {
            match density_unchecked(h, x, 0.05, opts) {
                Ok(v) if v > 0.0 => v.ln() - log_tail,
                Ok(v) => {
                    err.set(Some(Error::domain(format!(
                        "nonpositive density {v} at x = {x}"
                    ))));
                    0.0
                }
                Err(e) => {
                    err.set(Some(e));
                    0.0
                }
            }
        });
    if let Some(e) = err.take() {
        return Err(e);
    }
    Ok(m.im.ln() - avg_log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Grid;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn free_weyl_function_is_i() {
        let h = Hamiltonian::identity(50.0, 50).unwrap();
        for &z in &[c(0.0, 1.0), c(2.0, 0.7), c(-1.0, 3.0)] {
            let m = weyl_function(&h, z, 1e-9).unwrap();
            assert!((m - c(0.0, 1.0)).norm() < 1e-8, "z={z} m={m}");
        }
    }

    #[test]
    fn large_spectral_parameters_do_not_overflow() {
        let h = Hamiltonian::constant(Sym2::diag(0.25, 4.0), 20.0, 16).unwrap();
        let m = weyl_function(&h, c(0.0, 1e4), 1e-10).unwrap();
        assert!((m - c(0.0, 4.0)).norm() < 1e-8, "{m}");
    }

    #[test]
    fn diagonal_weyl_function() {
        let cc = 3.0;
        let h = Hamiltonian::constant(Sym2::diag(1.0 / cc, cc), 40.0, 10).unwrap();
        let m = weyl_function(&h, c(0.5, 1.0), 1e-10).unwrap();
        assert!((m - c(0.0, cc)).norm() < 1e-8);
        let h = Hamiltonian::constant(Sym2::diag(cc, 1.0 / cc), 40.0, 10).unwrap();
        let m = weyl_function(&h, c(0.5, 1.0), 1e-10).unwrap();
        assert!((m - c(0.0, 1.0 / cc)).norm() < 1e-8);
    }

    #[test]
    fn short_grid_fails_to_converge_without_tail() {
        let h = Hamiltonian::identity(1.0, 2).unwrap();
        match weyl_function(&h, c(0.0, 0.1), 1e-9) {
            Err(Error::Convergence { last, .. }) => assert!(last > 1e-9),
            other => panic!("expected convergence error, got {other:?}"),
        }
        let v = weyl_function_with(&h, c(0.0, 0.1), &WeylOptions::with_tol(1e-9).held()).unwrap();
        assert!((v.m - c(0.0, 1.0)).norm() < 1e-8);
    }

    #[test]
    fn density_of_free_and_diagonal_systems() {
        let h = Hamiltonian::identity(1.0, 1).unwrap();
        assert!((spectral_density(&h, 0.3, 0.05).unwrap() - 1.0).abs() < 1e-6);
        let h = Hamiltonian::constant(Sym2::diag(0.5, 2.0), 1.0, 1).unwrap();
        assert!((spectral_density(&h, -1.2, 0.05).unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn herglotz_residual_examples() {
        let h = Hamiltonian::identity(1.0, 1).unwrap();
        assert!((herglotz_b_residual(&h, 100.0).unwrap() - 0.01).abs() < 1e-10);
        let h = Hamiltonian::constant(Sym2::diag(0.25, 4.0), 1.0, 1).unwrap();
        assert!((herglotz_b_residual(&h, 100.0).unwrap() - 0.04).abs() < 1e-10);
    }

    #[test]
    fn szego_constant_weights_vanish() {
        for &cc in &[1.0, 0.3, 7.0] {
            assert_eq!(
                szego_k(&SpectralMeasure::constant(cc), c(0.2, 1.0)).unwrap(),
                0.0
            );
        }
        let s = SpectralMeasure::new(Weight::step(1.0, 1.0, 2.0));
        assert!(szego_k(&s, c(0.0, 1.0)).unwrap().abs() < 1e-13);
    }

    #[test]
    fn szego_step_matches_closed_form_oracle() {
        // w = 2 on |x| < 1: both Poisson averages are elementary at z = i:
        // P[1_{|x|<1}](i) = (2/pi) atan(1) = 1/2.
        let mu = SpectralMeasure::new(Weight::step(2.0, 1.0, 1.0));
        let k = szego_k(&mu, c(0.0, 1.0)).unwrap();
        let p: f64 = 0.5;
        let expect = (1.0 + p).ln() - p * 2f64.ln();
        assert!((k - expect).abs() < 1e-12, "{k} vs {expect}");
    }

    #[test]
    fn szego_singular_part_is_rejected() {
        let mut mu = SpectralMeasure::constant(1.0);
        mu.singular_part.push((0.0, 1.0));
        assert!(matches!(
            szego_k(&mu, c(0.0, 1.0)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn szego_scale_invariance() {
        let w1 = Weight::CosineBump {
            amplitude: 1.5,
            half_width: 2.0,
        };
        let k1 = szego_k(&SpectralMeasure::new(w1.clone()), c(0.3, 0.8)).unwrap();
        let w2 = Weight::custom("scaled", 3.0, true, move |x| 3.0 * w1.eval(x));
        let mut w2c = w2;
        if let Weight::Custom(cw) = &mut w2c {
            cw.breakpoints = vec![-2.0, 2.0];
        }
        let k2 = szego_k(&SpectralMeasure::new(w2c), c(0.3, 0.8)).unwrap();
        assert!(k1 > 0.0);
        assert!((k1 - k2).abs() < 1e-10);
    }

    #[test]
    fn hamiltonian_szego_for_constant_system_is_zero() {
        let h = Hamiltonian::new(
            Grid::uniform(1.0, 1).unwrap(),
            vec![Sym2::diag(0.5, 2.0)],
            true,
        )
        .unwrap();
        let k = szego_k_hamiltonian(&h, c(0.0, 1.0), &DensityOptions::default()).unwrap();
        assert!(k.abs() < 1e-9, "{k}");
    }
}
