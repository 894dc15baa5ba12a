//! Krein waves `P_t(z)`, the reproducing kernel of the weighted Paley-Wiener
//! space and the transform `F_mu f(z) = (2 pi)^{-1/2} int f(t) P_t(z) dt`.

use crate::error::{Error, Result};
use crate::hamiltonian::{Grid, Hamiltonian, Sym2};
use crate::quad::{self, GaussLegendre};
use crate::solver::{cell_propagator, inner, j_apply, CVec2};
use crate::weight::SpectralMeasure;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Principal square root of a positive semi-definite 2x2 matrix.
pub fn sqrt_psd_2x2(a: &Sym2) -> Result<Sym2> {
    let scale = a.h1.abs().max(a.h2.abs()).max(a.h.abs());
    let det = a.det();
    let tol = 1e-14 * scale * scale;
    if !a.is_finite() || a.h1 < 0.0 || a.h2 < 0.0 || det < -tol {
        return Err(Error::domain(format!(
            "matrix [[{}, {}], [{}, {}]] is not PSD",
            a.h1, a.h, a.h, a.h2
        )));
    }
    let sd = det.max(0.0).sqrt();
    let denom = a.trace() + 2.0 * sd;
    if denom <= 0.0 {
        return Ok(Sym2::new(0.0, 0.0, 0.0));
    }
    let s = denom.sqrt();
    Ok(Sym2::new((a.h1 + sd) / s, a.h / s, (a.h2 + sd) / s))
}

fn apply(s: &Sym2, v: &CVec2) -> CVec2 {
    CVec2::new(v[0] * s.h1 + v[1] * s.h, v[0] * s.h + v[1] * s.h2)
}

/// `[[h, h2], [-h1, -h]] v`, i.e. `-J H v`.
fn generator(c: &Sym2, v: &CVec2) -> CVec2 {
    CVec2::new(v[0] * c.h + v[1] * c.h2, -(v[0] * c.h1) - v[1] * c.h)
}

/// `Psi+ - i Psi-`.
fn project(v: &CVec2) -> C64 {
    v[0] - I * v[1]
}

/// `(e^{a d} - 1) / a`.
pub(crate) fn phi1(a: C64, d: f64) -> C64 {
    let x = a * d;
    if x.norm() < 1e-3 {
        C64::new(d, 0.0) * (C64::new(1.0, 0.0) + x / 2.0 + x * x / 6.0 + x * x * x / 24.0)
    } else {
        (x.exp() - 1.0) / a
    }
}

/// Sample of `P_t(z)` together with `Psi = sqrt(H(t/2)) Theta(t/2, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KreinWave {
    pub t: f64,
    pub z: C64,
    pub psi_plus: C64,
    pub psi_minus: C64,
    pub value: C64,
}

/// `Theta` at the nodes of a unimodular Hamiltonian for one spectral
/// parameter, with cell square roots; evaluates waves and their integrals.
#[derive(Debug, Clone)]
pub struct WaveTable {
    z: C64,
    nodes: Vec<f64>,
    cells: Vec<Sym2>,
    roots: Vec<Sym2>,
    thetas: Vec<CVec2>,
}

fn ensure_unimodular(h: &Hamiltonian) -> Result<()> {
    h.ensure_valid()?;
    if !h.is_unimodular() {
        return Err(Error::domain("Krein waves need a unimodular Hamiltonian"));
    }
    Ok(())
}

/// Square roots of all cells; shared between wave tables of one Hamiltonian.
pub fn cell_roots(h: &Hamiltonian) -> Result<Vec<Sym2>> {
    h.cells().iter().map(sqrt_psd_2x2).collect()
}

impl WaveTable {
    pub fn new(h: &Hamiltonian, z: C64) -> Result<Self> {
        ensure_unimodular(h)?;
        Ok(Self::with_roots(h, Arc::new(cell_roots(h)?), z))
    }

    pub(crate) fn with_roots(h: &Hamiltonian, roots: Arc<Vec<Sym2>>, z: C64) -> Self {
        let g = h.grid();
        let mut thetas = Vec::with_capacity(g.cells() + 1);
        let mut th = CVec2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        thetas.push(th);
        for k in 0..g.cells() {
            th = cell_propagator(&h.cell(k), g.width(k), z) * th;
            thetas.push(th);
        }
        Self {
            z,
            nodes: g.nodes().to_vec(),
            cells: h.cells().to_vec(),
            roots: roots.to_vec(),
            thetas,
        }
    }

    pub fn z(&self) -> C64 {
        self.z
    }

    fn locate(&self, r: f64) -> usize {
        let n = self.cells.len();
        self.nodes
            .partition_point(|&x| x <= r)
            .saturating_sub(1)
            .min(n - 1)
    }

    /// `Theta(r, z)` for `r` in the cell `k` starting at `nodes[k]`.
    fn theta_in(&self, k: usize, r: f64) -> CVec2 {
        let s = r - self.nodes[k];
        let zs = self.z * s;
        let u = self.thetas[k];
        u * zs.cos() + generator(&self.cells[k], &u) * zs.sin()
    }

    pub fn theta(&self, r: f64) -> CVec2 {
        self.theta_in(self.locate(r), r)
    }

    pub fn wave(&self, t: f64) -> KreinWave {
        let r = 0.5 * t;
        let k = self.locate(r);
        let psi = apply(&self.roots[k], &self.theta_in(k, r));
        KreinWave {
            t,
            z: self.z,
            psi_plus: psi[0],
            psi_minus: psi[1],
            value: (I * self.z * r).exp() * project(&psi),
        }
    }

    /// `(p, a1, a0)` with `P_{2(r_k + s)}(z) = p (a1 e^{2izs} + a0)` on cell `k`.
    fn cell_form(&self, k: usize) -> (C64, C64, C64) {
        let th = self.thetas[k];
        let u = project(&apply(&self.roots[k], &th));
        let v = project(&apply(&self.roots[k], &generator(&self.cells[k], &th)));
        (
            (I * self.z * self.nodes[k]).exp(),
            (u - I * v) / 2.0,
            (u + I * v) / 2.0,
        )
    }

    /// `int_{ta}^{tb} P_t(z) dt` in closed form.
    pub fn integral(&self, ta: f64, tb: f64) -> C64 {
        let (ra, rb) = (0.5 * ta, 0.5 * tb);
        let mut acc = C64::new(0.0, 0.0);
        let mut k = self.locate(ra);
        let z = self.z;
        while k < self.cells.len() && self.nodes[k] < rb {
            let rc = self.nodes[k];
            let lo = ra.max(rc) - rc;
            let hi = rb.min(self.nodes[k + 1]) - rc;
            if hi > lo {
                let d = hi - lo;
                let th = self.thetas[k];
                let u = project(&apply(&self.roots[k], &th));
                let v = project(&apply(&self.roots[k], &generator(&self.cells[k], &th)));
                let e = (2.0 * I * z * lo).exp() * phi1(2.0 * I * z, d);
                let ic = (e + d) / 2.0;
                let is = (e - d) / (2.0 * I);
                acc += (I * z * rc).exp() * (u * ic + v * is);
            }
            k += 1;
        }
        2.0 * acc
    }
}

pub fn krein_wave(h: &Hamiltonian, t: f64, z: C64) -> Result<KreinWave> {
    ensure_unimodular(h)?;
    if !(t >= 0.0) || t > 2.0 * h.end() {
        return Err(Error::domain(format!(
            "t = {t} outside [0, {}]",
            2.0 * h.end()
        )));
    }
    Ok(WaveTable::new(h, z)?.wave(t))
}

fn kernel_closed_form(tz: &WaveTable, tl: &WaveTable, r: f64) -> C64 {
    let z = tz.z;
    let lc = tl.z.conj();
    let dz = z - lc;
    let phase = (I * r * dz / 2.0).exp();
    if dz.norm() < 1e-6 {
        // <J Theta(z), Theta(l)> = (z - conj l) int_0^{r/2} <H Theta(z), Theta(l)>
        let mut acc = C64::new(0.0, 0.0);
        let half = 0.5 * r;
        for k in 0..tz.cells.len() {
            let (a, b) = (tz.nodes[k], tz.nodes[k + 1].min(half));
            if a >= half {
                break;
            }
            let c = tz.cells[k];
            acc += quad::refine_c(a, b, 1e-13, |s| {
                let u = tz.theta_in(k, s);
                let v = tl.theta_in(k, s);
                inner(&apply(&c, &u), &v)
            });
        }
        return phase * acc / PI;
    }
    let u = tz.theta(0.5 * r);
    let v = tl.theta(0.5 * r);
    phase * inner(&j_apply(&u), &v) / (PI * dz)
}

fn check_span(h: &Hamiltonian, r: f64) -> Result<()> {
    if !(r >= 0.0) || r > 2.0 * h.end() {
        return Err(Error::domain(format!(
            "r = {r} outside [0, {}]",
            2.0 * h.end()
        )));
    }
    Ok(())
}

/// `k_{r,lambda}(z)` from the transfer matrix at `r/2`.
pub fn reproducing_kernel(h: &Hamiltonian, r: f64, z: C64, lambda: C64) -> Result<C64> {
    ensure_unimodular(h)?;
    check_span(h, r)?;
    let roots = Arc::new(cell_roots(h)?);
    let tz = WaveTable::with_roots(h, roots.clone(), z);
    let tl = WaveTable::with_roots(h, roots, lambda);
    Ok(kernel_closed_form(&tz, &tl, r))
}

/// `(1/2pi) int_0^r P_t(z) conj(P_t(lambda)) dt` by Gauss-Legendre per cell.
pub fn kernel_quadrature(h: &Hamiltonian, r: f64, z: C64, lambda: C64) -> Result<C64> {
    ensure_unimodular(h)?;
    check_span(h, r)?;
    let roots = Arc::new(cell_roots(h)?);
    let tz = WaveTable::with_roots(h, roots.clone(), z);
    let tl = WaveTable::with_roots(h, roots, lambda);
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..tz.cells.len() {
        let (a, b) = (2.0 * tz.nodes[k], (2.0 * tz.nodes[k + 1]).min(r));
        if a >= r {
            break;
        }
        // stay inside the cell so the representative of sqrt(H) is unambiguous
        let rule = |t: f64| {
            let rr = 0.5 * t;
            let psi_z = apply(&tz.roots[k], &tz.theta_in(k, rr));
            let psi_l = apply(&tl.roots[k], &tl.theta_in(k, rr));
            (I * z * rr).exp()
                * project(&psi_z)
                * ((I * lambda * rr).exp() * project(&psi_l)).conj()
        };
        acc += quad::refine_c(a, b, 1e-13, rule);
    }
    Ok(acc / (2.0 * PI))
}

/// `int_0^r |P_t(z)|^2 dt` in closed form (`Im z != 0`).
pub fn wave_norm_closed_form(h: &Hamiltonian, r: f64, z: C64) -> Result<f64> {
    Ok((2.0 * PI * reproducing_kernel(h, r, z, z)?).re)
}

/// A function on `[0, r]` to be transformed.
#[derive(Clone)]
pub enum TimeFunction {
    /// Constant on the cells of `grid`; zero beyond its end.
    PiecewiseConstant { grid: Grid, values: Vec<C64> },
    /// `e_{r,lambda}(t) = conj(P_t(lambda))` on `[0, r]` for the Hamiltonian in use.
    Wave { r: f64, lambda: C64 },
    /// Arbitrary function on `[0, r]`.
    Closure {
        r: f64,
        f: Arc<dyn Fn(f64) -> C64 + Send + Sync>,
    },
}

impl std::fmt::Debug for TimeFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TimeFunction::PiecewiseConstant { grid, .. } => {
                write!(f, "PiecewiseConstant({} cells)", grid.cells())
            }
            TimeFunction::Wave { r, lambda } => write!(f, "Wave(r={r}, lambda={lambda})"),
            TimeFunction::Closure { r, .. } => write!(f, "Closure(r={r})"),
        }
    }
}

impl TimeFunction {
    pub fn piecewise(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::domain("one value per cell required"));
        }
        Ok(TimeFunction::PiecewiseConstant {
            grid,
            values: values.into_iter().map(|v| C64::new(v, 0.0)).collect(),
        })
    }

    pub fn support_end(&self) -> f64 {
        match self {
            TimeFunction::PiecewiseConstant { grid, .. } => grid.end(),
            TimeFunction::Wave { r, .. } | TimeFunction::Closure { r, .. } => *r,
        }
    }

    /// `int |f|^2 dt` (exact for piecewise constants).
    pub fn norm_sq(&self, h: &Hamiltonian) -> Result<f64> {
        match self {
            TimeFunction::PiecewiseConstant { grid, values } => Ok((0..grid.cells())
                .map(|k| grid.width(k) * values[k].norm_sqr())
                .sum()),
            TimeFunction::Wave { r, lambda } => wave_norm_closed_form(h, *r, *lambda),
            TimeFunction::Closure { r, f } => {
                Ok(quad::refine_c(0.0, *r, 1e-12, |t| C64::new(f(t).norm_sqr(), 0.0)).re)
            }
        }
    }
}

/// Evaluates `F_mu f(z)` for one Hamiltonian and function. With `free` set
/// the waves are replaced by `e^{itz}` (the Fourier transform).
struct Transformer<'a> {
    h: &'a Hamiltonian,
    roots: Arc<Vec<Sym2>>,
    f: &'a TimeFunction,
    lambda_table: Option<WaveTable>,
    free: bool,
}

/// `int_0^d (a1 e^{2izs} + a0) conj(b1 e^{2ils} + b0) ds`.
fn pair_integral(z: C64, a1: C64, a0: C64, l: C64, b1: C64, b0: C64, d: f64) -> C64 {
    let lc = l.conj();
    a1 * b1.conj() * phi1(2.0 * I * (z - lc), d)
        + a1 * b0.conj() * phi1(2.0 * I * z, d)
        + a0 * b1.conj() * phi1(-2.0 * I * lc, d)
        + a0 * b0.conj() * d
}

impl<'a> Transformer<'a> {
    fn new(h: &'a Hamiltonian, f: &'a TimeFunction, free: bool) -> Result<Self> {
        ensure_unimodular(h)?;
        let end = f.support_end();
        if !(end > 0.0) || end > 2.0 * h.end() * (1.0 + 1e-14) {
            return Err(Error::domain(format!(
                "support [0, {end}] exceeds the wave range [0, {}]",
                2.0 * h.end()
            )));
        }
        let roots = Arc::new(cell_roots(h)?);
        let lambda_table = match f {
            TimeFunction::Wave { lambda, .. } => {
                Some(WaveTable::with_roots(h, roots.clone(), *lambda))
            }
            _ => None,
        };
        Ok(Self {
            h,
            roots,
            f,
            lambda_table,
            free,
        })
    }

    fn eval(&self, z: C64) -> C64 {
        let table = (!self.free).then(|| WaveTable::with_roots(self.h, self.roots.clone(), z));
        let s = match self.f {
            TimeFunction::PiecewiseConstant { grid, values } => (0..grid.cells())
                .map(|k| {
                    let (a, b) = grid.bounds(k);
                    let integral = match &table {
                        Some(t) => t.integral(a, b),
                        None => (I * z * a).exp() * phi1(I * z, b - a),
                    };
                    values[k] * integral
                })
                .sum(),
            TimeFunction::Wave { r, .. } => {
                let tl = self.lambda_table.as_ref().expect("wave table");
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..tl.cells.len() {
                    let rc = tl.nodes[k];
                    let d = tl.nodes[k + 1].min(0.5 * r) - rc;
                    if d <= 0.0 {
                        break;
                    }
                    let (pz, a1, a0) = match &table {
                        Some(t) => t.cell_form(k),
                        None => (
                            (2.0 * I * z * rc).exp(),
                            C64::new(1.0, 0.0),
                            C64::new(0.0, 0.0),
                        ),
                    };
                    let (pl, b1, b0) = tl.cell_form(k);
                    acc += 2.0 * pz * pl.conj() * pair_integral(z, a1, a0, tl.z, b1, b0, d);
                }
                acc
            }
            TimeFunction::Closure { r, f } => {
                let nodes = self.h.grid().nodes();
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..self.h.grid().cells() {
                    let (a, b) = (2.0 * nodes[k], (2.0 * nodes[k + 1]).min(*r));
                    if a >= *r {
                        break;
                    }
                    acc += quad::refine_c(a, b, 1e-12, |t| {
                        let p = match &table {
                            Some(tb) => {
                                let psi = apply(&tb.roots[k], &tb.theta_in(k, 0.5 * t));
                                (I * z * 0.5 * t).exp() * project(&psi)
                            }
                            None => (I * z * t).exp(),
                        };
                        f(t) * p
                    });
                }
                acc
            }
        };
        s / (2.0 * PI).sqrt()
    }
}

pub fn f_mu_apply(h: &Hamiltonian, f: &TimeFunction, z_grid: &[C64]) -> Result<Vec<C64>> {
    let tr = Transformer::new(h, f, false)?;
    Ok(z_grid.par_iter().map(|&z| tr.eval(z)).collect())
}

/// Pieces of the isometry check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsometryReport {
    /// `||f||^2` in `L^2[0, r]`.
    pub norm_sq: f64,
    /// Estimate of `||F_mu f||^2` in `L^2(mu)`.
    pub transform_norm_sq: f64,
    /// Contribution estimated beyond `|x| = X`.
    pub tail_estimate: f64,
    pub residual: f64,
}

/// Compares `||F_mu f||_{L^2(mu)}` with `||f||`. The weighted norm is written
/// as the free Fourier norm (equal to `||f||^2` by Plancherel) plus the
/// integral of `|F_mu f|^2 w - |F f|^2` over `[-X, X]`, with a `C/X` tail.
pub fn isometry_report(
    h: &Hamiltonian,
    mu: &SpectralMeasure,
    f: &TimeFunction,
    r: f64,
    x_max: f64,
) -> Result<IsometryReport> {
    mu.ensure_absolutely_continuous()?;
    if f.support_end() > r * (1.0 + 1e-14) {
        return Err(Error::domain(format!("f is supported beyond r = {r}")));
    }
    if !(x_max > 0.0) {
        return Err(Error::domain("X must be positive"));
    }
    mu.weight.tail_value()?;
    let tr = Transformer::new(h, f, false)?;
    let free = Transformer::new(h, f, true)?;
    let norm_sq = f.norm_sq(h)?;
    let integrand = |x: f64| {
        let z = C64::new(x, 0.0);
        tr.eval(z).norm_sqr() * mu.weight.eval(x) - free.eval(z).norm_sqr()
    };
    let (inner_part, tail) = line_integral(mu, f.support_end(), x_max, integrand);
    let transform_norm_sq = norm_sq + inner_part + tail;
    Ok(IsometryReport {
        norm_sq,
        transform_norm_sq,
        tail_estimate: tail,
        residual: (transform_norm_sq - norm_sq).abs(),
    })
}

pub fn isometry_residual(
    h: &Hamiltonian,
    mu: &SpectralMeasure,
    f: &TimeFunction,
    r: f64,
    x_max: f64,
) -> Result<f64> {
    isometry_report(h, mu, f, r, x_max).map(|rep| rep.residual)
}

/// Composite Gauss-Legendre over `[-X, X]` (panels aligned with weight
/// breakpoints) plus a tail `(C_- + C_+)/X` fitted from `x^2 g(x)` on `X/2 <= |x| <= X`.
fn line_integral(
    mu: &SpectralMeasure,
    span: f64,
    x_max: f64,
    g: impl Fn(f64) -> f64 + Sync,
) -> (f64, f64) {
    let width = (1.0f64).min(2.0 / span.max(1e-9));
    let mut pts: Vec<f64> = mu
        .weight
        .breakpoints()
        .into_iter()
        .filter(|b| b.abs() < x_max)
        .collect();
    pts.push(-x_max);
    pts.push(x_max);
    pts.push(-0.5 * x_max);
    pts.push(0.5 * x_max);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut panels = Vec::new();
    for w in pts.windows(2) {
        let n = ((w[1] - w[0]) / width).ceil().max(1.0) as usize;
        for i in 0..n {
            let a = w[0] + (w[1] - w[0]) * i as f64 / n as f64;
            let b = w[0] + (w[1] - w[0]) * (i + 1) as f64 / n as f64;
            panels.push((a, b));
        }
    }
    let gl = GaussLegendre::cached(16);
    let sums: Vec<(f64, f64, f64)> = panels
        .par_iter()
        .map(|&(a, b)| {
            let mut s = 0.0;
            let mut moment_lo = 0.0;
            let mut moment_hi = 0.0;
            for (x, w) in gl.mapped(a, b) {
                let v = g(x);
                s += w * v;
                if x <= -0.5 * x_max {
                    moment_lo += w * v * x * x;
                } else if x >= 0.5 * x_max {
                    moment_hi += w * v * x * x;
                }
            }
            (s, moment_lo, moment_hi)
        })
        .collect();
    let total: f64 = sums.iter().map(|s| s.0).sum();
    let c_lo: f64 = sums.iter().map(|s| s.1).sum::<f64>() / (0.5 * x_max);
    let c_hi: f64 = sums.iter().map(|s| s.2).sum::<f64>() / (0.5 * x_max);
    (total, (c_lo + c_hi) / x_max)
}
