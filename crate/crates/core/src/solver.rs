//! Exact per-cell integration of `J M' = z H M`, `M(0, z) = I`.

use crate::error::{Error, Result};
use crate::hamiltonian::{Hamiltonian, Sym2};
use crate::quad;
use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64 as C64;

pub type CMat2 = Matrix2<C64>;
pub type CVec2 = Vector2<C64>;

/// Fundamental solution `M(t, z)` with columns `Theta` and `Phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub t: f64,
    pub z: C64,
    pub m: CMat2,
}

impl TransferMatrix {
    pub fn theta(&self) -> CVec2 {
        self.m.column(0).into()
    }

    pub fn phi(&self) -> CVec2 {
        self.m.column(1).into()
    }

    pub fn det(&self) -> C64 {
        self.m[(0, 0)] * self.m[(1, 1)] - self.m[(0, 1)] * self.m[(1, 0)]
    }
}

/// `sin(q)/q`, even in `q`.
pub fn sinc(q: C64) -> C64 {
    if q.norm() < 1e-4 {
        let q2 = q * q;
        C64::new(1.0, 0.0) - q2 / 6.0 + q2 * q2 / 120.0
    } else {
        q.sin() / q
    }
}

/// `exp(-z * width * J * H_c)` in closed form. The generator
/// `G = z w [[h, h2], [-h1, -h]]` is trace free with `G^2 = -z^2 w^2 det(H) I`.
pub fn cell_propagator(c: &Sym2, width: f64, z: C64) -> CMat2 {
    let zw = z * width;
    let q = zw * c.det().max(0.0).sqrt();
    let cs = q.cos();
    let sn = zw * sinc(q);
    Matrix2::new(cs + sn * c.h, sn * c.h2, -sn * c.h1, cs - sn * c.h)
}

/// Applies the in-cell propagator to a vector without forming the matrix.
pub fn propagate_vec(c: &Sym2, width: f64, z: C64, v: &CVec2) -> CVec2 {
    cell_propagator(c, width, z) * v
}

pub fn transfer_matrix(h: &Hamiltonian, t: f64, z: C64) -> Result<TransferMatrix> {
    h.ensure_valid()?;
    transfer_matrix_unchecked(h, t, z)
}

pub(crate) fn transfer_matrix_unchecked(h: &Hamiltonian, t: f64, z: C64) -> Result<TransferMatrix> {
    let g = h.grid();
    if !(t >= 0.0) || t > g.end() {
        return Err(Error::domain(format!("t = {t} outside [0, {}]", g.end())));
    }
    let mut m = CMat2::identity();
    for k in 0..g.cells() {
        let (a, b) = g.bounds(k);
        if a >= t {
            break;
        }
        let w = b.min(t) - a;
        m = cell_propagator(&h.cell(k), w, z) * m;
    }
    Ok(TransferMatrix { t, z, m })
}

/// `M(t_k, z)` at every grid node.
pub fn node_transfers(h: &Hamiltonian, z: C64) -> Result<Vec<CMat2>> {
    h.ensure_valid()?;
    let g = h.grid();
    let mut out = Vec::with_capacity(g.cells() + 1);
    let mut m = CMat2::identity();
    out.push(m);
    for k in 0..g.cells() {
        m = cell_propagator(&h.cell(k), g.width(k), z) * m;
        out.push(m);
    }
    Ok(out)
}

/// Sesquilinear pairing `<a, b> = a_1 conj(b_1) + a_2 conj(b_2)`.
pub fn inner(a: &CVec2, b: &CVec2) -> C64 {
    a[0] * b[0].conj() + a[1] * b[1].conj()
}

/// `J v` for the signature matrix.
pub fn j_apply(v: &CVec2) -> CVec2 {
    CVec2::new(-v[1], v[0])
}

fn h_apply(c: &Sym2, v: &CVec2) -> CVec2 {
    CVec2::new(v[0] * c.h1 + v[1] * c.h, v[0] * c.h + v[1] * c.h2)
}

/// Residual of `<J Theta(r), Theta(r)> = 2i Im z int_0^r <H Theta, Theta> dt`.
pub fn j_energy_residual(h: &Hamiltonian, r: f64, z: C64) -> Result<f64> {
    h.ensure_valid()?;
    let g = h.grid();
    if !(r >= 0.0) || r > g.end() {
        return Err(Error::domain(format!("r = {r} outside [0, {}]", g.end())));
    }
    let mut theta = CVec2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0));
    let mut integral = C64::new(0.0, 0.0);
    for k in 0..g.cells() {
        let (a, b) = g.bounds(k);
        if a >= r {
            break;
        }
        let w = b.min(r) - a;
        let c = h.cell(k);
        let start = theta;
        integral += quad::refine_c(0.0, w, 1e-10, |s| {
            let th = propagate_vec(&c, s, z, &start);
            inner(&h_apply(&c, &th), &th)
        });
        theta = propagate_vec(&c, w, z, &start);
    }
    let lhs = inner(&j_apply(&theta), &theta);
    let rhs = C64::new(0.0, 2.0 * z.im) * integral;
    Ok((lhs - rhs).norm())
}
