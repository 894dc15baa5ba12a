//! Functions on the half-line: the L1 + L2 norm and its splitting, A2
//! characteristics, and a numerical harness for the log-derivative criterion.

use crate::error::{Error, Result};
use crate::hamiltonian::Grid;

/// Piecewise-constant function on a grid, optionally extended by a constant.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfLineFunction {
    grid: Grid,
    values: Vec<f64>,
    tail: Option<f64>,
}

impl HalfLineFunction {
    pub fn new(grid: Grid, values: Vec<f64>, tail: Option<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::domain(format!(
                "{} values for {} cells",
                values.len(),
                grid.cells()
            )));
        }
        if values.iter().chain(tail.iter()).any(|v| !v.is_finite()) {
            return Err(Error::domain("half-line function values must be finite"));
        }
        Ok(Self { grid, values, tail })
    }

    pub fn constant(c: f64, end: f64) -> Result<Self> {
        Self::new(Grid::uniform(end, 1)?, vec![c], Some(c))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail(&self) -> Option<f64> {
        self.tail
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.grid.locate(t) {
            Some(k) if t < self.grid.end() => self.values[k],
            _ => self.tail.unwrap_or(0.0),
        }
    }

    /// `t -> f(t / y)`.
    pub fn dilate(&self, y: f64) -> Result<Self> {
        if !(y > 0.0) {
            return Err(Error::domain(format!(
                "dilation factor must be positive, got {y}"
            )));
        }
        Ok(Self {
            grid: self.grid.scaled(y),
            values: self.values.clone(),
            tail: self.tail,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            tail: self.tail.map(f),
        }
    }

    fn cell_iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.grid.cells()).map(move |k| (self.grid.width(k), self.values[k]))
    }

    pub fn l1_norm(&self) -> f64 {
        self.cell_iter().map(|(w, v)| w * v.abs()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.cell_iter().map(|(w, v)| w * v * v).sum::<f64>().sqrt()
    }

    fn is_constant(&self) -> bool {
        let v0 = self.values[0];
        self.values.iter().all(|&v| v == v0) && self.tail.map_or(true, |t| t == v0)
    }

    fn ensure_positive(&self) -> Result<()> {
        if let Some(k) = self.values.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::domain(format!(
                "cell {k} has nonpositive value {}",
                self.values[k]
            )));
        }
        if let Some(t) = self.tail {
            if !(t > 0.0) {
                return Err(Error::domain(format!("nonpositive tail {t}")));
            }
        }
        Ok(())
    }

    fn ensure_tail(&self) -> Result<f64> {
        self.tail
            .ok_or_else(|| Error::domain("A2 characteristics need a constant tail"))
    }

    fn ensure_no_tail(&self) -> Result<()> {
        match self.tail {
            Some(t) if t != 0.0 => Err(Error::Unsupported(format!(
                "nonzero tail {t} is not in L1 + L2"
            ))),
            _ => Ok(()),
        }
    }

    /// Pieces `(length, value)` covering `[a, b]`.
    fn pieces(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let end = self.grid.end();
        if a < end {
            let k0 = self.grid.locate(a).unwrap_or(0);
            for k in k0..self.grid.cells() {
                let (lo, hi) = self.grid.bounds(k);
                if lo >= b {
                    break;
                }
                let l = hi.min(b) - lo.max(a);
                if l > 0.0 {
                    out.push((l, self.values[k]));
                }
            }
        }
        if b > end {
            out.push((b - a.max(end), self.tail.unwrap_or(0.0)));
        }
        out
    }
}

/// Objective `||(|f| - c)_+||_1 + ||min(|f|, c)||_2`.
fn truncation_objective(cells: &[(f64, f64)], c: f64) -> f64 {
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    for &(w, v) in cells {
        let a = v.abs();
        l1 += w * (a - c).max(0.0);
        let m = a.min(c);
        l2 += w * m * m;
    }
    l1 + l2.sqrt()
}

/// Minimizing truncation level and objective value: coarse scan, then golden section.
fn best_truncation(cells: &[(f64, f64)]) -> (f64, f64) {
    let top = cells.iter().fold(0.0f64, |m, &(_, v)| m.max(v.abs()));
    if top == 0.0 {
        return (0.0, 0.0);
    }
    const SCAN: usize = 64;
    let mut best = (0usize, f64::INFINITY);
    for i in 0..=SCAN {
        let v = truncation_objective(cells, top * i as f64 / SCAN as f64);
        if v < best.1 {
            best = (i, v);
        }
    }
    let step = top / SCAN as f64;
    let mut lo = (best.0 as f64 - 1.0).max(0.0) * step;
    let mut hi = ((best.0 + 1) as f64 * step).min(top);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = truncation_objective(cells, x1);
    let mut f2 = truncation_objective(cells, x2);
    while hi - lo > 1e-13 * top {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = truncation_objective(cells, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = truncation_objective(cells, x2);
        }
    }
    let c = 0.5 * (lo + hi);
    let v = truncation_objective(cells, c);
    if v <= best.1 {
        (c, v)
    } else {
        (best.0 as f64 * step, best.1)
    }
}

/// Operational `||f||_{1,2}`: best truncation split, an upper bound for the
/// infimum over all splits and within a universal factor of it.
pub fn norm_l1_plus_l2(f: &HalfLineFunction) -> Result<f64> {
    f.ensure_no_tail()?;
    let cells: Vec<_> = f.cell_iter().collect();
    Ok(best_truncation(&cells).1)
}

/// Given `0 <= p <= |g1| + |g2|` pointwise with `p = g1 + g2`, returns
/// nonnegative parts `p1 <= |g1|`, `p2 <= |g2|` with `p1 + p2 = p`.
pub fn rearrange_nonnegative(p: &[f64], g1: &[f64], g2: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut p1 = Vec::with_capacity(p.len());
    let mut p2 = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let a = p[i].min(g1[i].abs());
        p1.push(a);
        p2.push((p[i] - a).max(0.0).min(g2[i].abs().max(p[i] - a)));
    }
    (p1, p2)
}

/// Splits `f = f1 + f2` with `|f1|, |f2| <= |f|`,
/// `||f1||_1 + ||f2||_2 <= 4 ||f||_{1,2}`.
pub fn decompose_l1_l2(f: &HalfLineFunction) -> Result<(HalfLineFunction, HalfLineFunction)> {
    f.ensure_no_tail()?;
    let n = f.values.len();
    let mut f1 = vec![0.0; n];
    let mut f2 = vec![0.0; n];
    for sign in [1.0, -1.0] {
        let part: Vec<f64> = f.values.iter().map(|&v| (sign * v).max(0.0)).collect();
        let cells: Vec<(f64, f64)> = (0..n).map(|k| (f.grid.width(k), part[k])).collect();
        let (c, _) = best_truncation(&cells);
        let g1: Vec<f64> = part.iter().map(|&v| (v - c).max(0.0)).collect();
        let g2: Vec<f64> = part.iter().map(|&v| v.min(c)).collect();
        let (p1, p2) = rearrange_nonnegative(&part, &g1, &g2);
        for k in 0..n {
            f1[k] += sign * p1[k];
            f2[k] += sign * p2[k];
        }
    }
    // snap f1 to multiples of ulp(f) inside [0, |f|] so that f - f1 is exact
    for k in 0..n {
        let v = f.values[k];
        let a = v.abs();
        if a == 0.0 || !a.is_normal() {
            f1[k] = 0.0;
        } else {
            let u = f64::from_bits(a.to_bits() + 1) - a;
            f1[k] = v.signum() * ((f1[k].abs() / u).round() * u).min(a);
        }
        f2[k] = v - f1[k];
    }
    Ok((
        HalfLineFunction::new(f.grid.clone(), f1, f.tail)?,
        HalfLineFunction::new(f.grid.clone(), f2, f.tail)?,
    ))
}

/// Windows `[(n + shift)/y, (n + shift + 2)/y]` of the l1 characteristic; the
/// default `(1, 0)` gives the windows `[n, n + 2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowFamily {
    pub dilation: f64,
    pub shift: f64,
}

impl Default for WindowFamily {
    fn default() -> Self {
        Self {
            dilation: 1.0,
            shift: 0.0,
        }
    }
}

/// `avg(f) avg(1/f) - 1` over pieces, written as a manifestly nonnegative sum.
fn holder_defect(pieces: &[(f64, f64)]) -> f64 {
    let total: f64 = pieces.iter().map(|p| p.0).sum();
    if pieces.len() <= 256 {
        let mut s = 0.0;
        for i in 0..pieces.len() {
            for j in (i + 1)..pieces.len() {
                let (li, fi) = pieces[i];
                let (lj, fj) = pieces[j];
                let d = fi - fj;
                s += li * lj * d * d / (fi * fj);
            }
        }
        s / (total * total)
    } else {
        let a: f64 = pieces.iter().map(|p| p.0 * p.1).sum();
        let b: f64 = pieces.iter().map(|p| p.0 / p.1).sum();
        (a * b / (total * total) - 1.0).max(0.0)
    }
}

/// Per-window terms `int_I f int_I 1/f - 4` (in the window scale) of `[f]_{2,l1}`.
pub fn a2_ell1_terms(f: &HalfLineFunction, family: WindowFamily) -> Result<Vec<f64>> {
    f.ensure_positive()?;
    f.ensure_tail()?;
    let y = family.dilation;
    if !(y > 0.0) || !(family.shift >= 0.0) {
        return Err(Error::domain(
            "window family needs dilation > 0 and shift >= 0",
        ));
    }
    let end = f.grid.end();
    let mut terms = Vec::new();
    let mut n = 0usize;
    loop {
        let a = (n as f64 + family.shift) / y;
        if a >= end {
            break;
        }
        let b = (n as f64 + family.shift + 2.0) / y;
        terms.push(4.0 * holder_defect(&f.pieces(a, b)));
        n += 1;
    }
    Ok(terms)
}

/// `[f]_{2,l1} = sum_n (int_n^{n+2} f int_n^{n+2} 1/f - 4)`.
pub fn a2_ell1(f: &HalfLineFunction) -> Result<f64> {
    a2_ell1_with(f, WindowFamily::default())
}

pub fn a2_ell1_with(f: &HalfLineFunction, family: WindowFamily) -> Result<f64> {
    if f.is_constant() {
        f.ensure_positive()?;
        f.ensure_tail()?;
        return Ok(0.0);
    }
    Ok(a2_ell1_terms(f, family)?.iter().sum())
}

/// `[f]_2 = sup_I avg_I(f) avg_I(1/f)` over grid intervals refined `levels`
/// times dyadically, plus geometric extensions into the tail.
pub fn a2_classical(f: &HalfLineFunction, levels: u32) -> Result<f64> {
    f.ensure_positive()?;
    let tail = f.ensure_tail()?;
    if f.is_constant() {
        return Ok(1.0);
    }
    let g = &f.grid;
    let sub = 1usize << levels.min(8);
    let mut pts = Vec::with_capacity(g.cells() * sub + 40);
    for k in 0..g.cells() {
        let (a, b) = g.bounds(k);
        for s in 0..sub {
            pts.push(a + (b - a) * s as f64 / sub as f64);
        }
    }
    let end = g.end();
    pts.push(end);
    for e in -12..=12 {
        pts.push(end * (1.0 + 2f64.powi(e)));
    }
    // prefix integrals of f and 1/f at every candidate point
    let mut pf = Vec::with_capacity(pts.len());
    let mut pg = Vec::with_capacity(pts.len());
    let (mut af, mut ag) = (0.0, 0.0);
    let mut prev = 0.0;
    for &p in &pts {
        let v = if prev < end {
            f.values[g.locate(prev).unwrap()]
        } else {
            tail
        };
        af += (p - prev) * v;
        ag += (p - prev) / v;
        pf.push(af);
        pg.push(ag);
        prev = p;
    }
    let mut best = 1.0f64;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let l = pts[j] - pts[i];
            let v = (pf[j] - pf[i]) * (pg[j] - pg[i]) / (l * l);
            best = best.max(v);
        }
    }
    Ok(best)
}

/// Output of [`lemma2_harness`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnessReport {
    /// `||g'/g||_{1,2}`.
    pub log_derivative_norm: f64,
    /// `||g h + 1/(g h) - 2||_1`, infinite when the tails do not match.
    pub d: f64,
    /// `[h]_{2,l1}`.
    pub h_characteristic: f64,
    /// `[h]_{2,l1} / (D^2 + 1)`.
    pub ratio: f64,
    /// False when `D` and the norm are finite but `[h]_{2,l1}` is not.
    pub consistent: bool,
}

fn expm1_over(a: f64, w: f64) -> f64 {
    let x = a * w;
    if x.abs() < 1e-8 {
        w * (1.0 + 0.5 * x)
    } else {
        x.exp_m1() / a
    }
}

/// Evaluates the quantities of the log-derivative criterion for
/// `g = g0 exp(int_0^t phi)` and `h`.
pub fn lemma2_harness(
    phi: &HalfLineFunction,
    g0: f64,
    h: &HalfLineFunction,
) -> Result<HarnessReport> {
    if !(g0 > 0.0) {
        return Err(Error::domain("g(0) must be positive"));
    }
    let norm = norm_l1_plus_l2(phi)?;
    let h_char = a2_ell1(h)?;
    let h_tail = h.ensure_tail()?;
    let mut nodes: Vec<f64> = phi
        .grid
        .nodes()
        .iter()
        .chain(h.grid.nodes())
        .copied()
        .collect();
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let mut log_g = g0.ln();
    let mut d = 0.0;
    for w in nodes.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let p = phi.eval(mid);
        let hv = h.eval(mid);
        let len = b - a;
        let start = (log_g).exp() * hv;
        d += start * expm1_over(p, len) + expm1_over(-p, len) / start - 2.0 * len;
        log_g += p * len;
    }
    let end = (log_g.exp()) * h_tail;
    if (end - 1.0).powi(2) / end > 1e-24 {
        d = f64::INFINITY;
    }
    let ratio = h_char / (d * d + 1.0);
    Ok(HarnessReport {
        log_derivative_norm: norm,
        d,
        h_characteristic: h_char,
        ratio,
        consistent: !(d.is_finite() && norm.is_finite()) || h_char.is_finite(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hl(nodes: &[f64], vals: &[f64], tail: Option<f64>) -> HalfLineFunction {
        HalfLineFunction::new(Grid::new(nodes.to_vec()).unwrap(), vals.to_vec(), tail).unwrap()
    }

    #[test]
    fn norm_of_zero_and_indicator() {
        let z = hl(&[0.0, 1.0], &[0.0], None);
        assert_eq!(norm_l1_plus_l2(&z).unwrap(), 0.0);
        let ind = hl(&[0.0, 1.0], &[1.0], None);
        // dense scan oracle
        let oracle = (0..=10_000)
            .map(|i| {
                let c = i as f64 / 10_000.0;
                (1.0 - c).max(0.0) + c
            })
            .fold(f64::INFINITY, f64::min);
        assert!((norm_l1_plus_l2(&ind).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn norm_rejects_tail() {
        let f = hl(&[0.0, 1.0], &[1.0], Some(1.0));
        assert!(matches!(norm_l1_plus_l2(&f), Err(Error::Unsupported(_))));
        assert!(norm_l1_plus_l2(&hl(&[0.0, 1.0], &[1.0], Some(0.0))).is_ok());
    }

    #[test]
    fn norm_matches_dense_scan_on_mixed_function() {
        let f = hl(&[0.0, 0.5, 2.0, 2.2, 6.0], &[3.0, -0.2, 8.0, 0.1], None);
        let cells: Vec<(f64, f64)> = f.cell_iter().collect();
        let oracle = (0..=100_000)
            .map(|i| truncation_objective(&cells, 8.0 * i as f64 / 100_000.0))
            .fold(f64::INFINITY, f64::min);
        let v = norm_l1_plus_l2(&f).unwrap();
        assert!(v <= oracle + 1e-9 && v >= oracle - 1e-6, "{v} vs {oracle}");
    }

    #[test]
    fn small_l2_function_goes_to_second_part() {
        let f = hl(&[0.0, 1.0, 3.0], &[0.5, 0.25], None);
        let (f1, f2) = decompose_l1_l2(&f).unwrap();
        for k in 0..2 {
            assert_eq!(f1.values()[k] + f2.values()[k], f.values()[k]);
            assert!(f1.values()[k].abs() <= f.values()[k].abs());
            assert!(f2.values()[k].abs() <= f.values()[k].abs());
        }
        let n = norm_l1_plus_l2(&f).unwrap();
        assert!(f1.l1_norm() + f2.l2_norm() <= 4.0 * n);
    }

    #[test]
    fn rearrangement_turns_signed_split_into_dominated_parts() {
        let p = [1.0, 2.0, 0.5];
        let g1 = [3.0, -1.0, 0.0];
        let g2 = [-2.0, 3.0, 0.5];
        let (p1, p2) = rearrange_nonnegative(&p, &g1, &g2);
        for i in 0..3 {
            assert!((p1[i] + p2[i] - p[i]).abs() < 1e-15);
            assert!(p1[i] >= 0.0 && p2[i] >= 0.0);
            assert!(p1[i] <= g1[i].abs() && p2[i] <= g2[i].abs());
            assert!(p1[i] <= p[i] && p2[i] <= p[i]);
        }
    }

    #[test]
    fn ell1_characteristic_examples() {
        assert_eq!(
            a2_ell1(&HalfLineFunction::constant(5.0, 3.0).unwrap()).unwrap(),
            0.0
        );
        let f = hl(&[0.0, 1.0], &[2.0], Some(1.0));
        let terms = a2_ell1_terms(&f, WindowFamily::default()).unwrap();
        assert_eq!(terms.len(), 1);
        assert!((terms[0] - 0.5).abs() < 1e-15);
        assert!((a2_ell1(&f).unwrap() - 0.5).abs() < 1e-15);
        assert!(a2_ell1(&hl(&[0.0, 1.0], &[0.0], Some(1.0))).is_err());
    }

    #[test]
    fn ell1_brute_force_oracle() {
        let f = hl(&[0.0, 0.7, 1.9, 3.2], &[2.0, 0.5, 3.0], Some(1.5));
        let dt = 1e-4;
        let mut oracle = 0.0;
        for n in 0..4 {
            let (mut a, mut b) = (0.0, 0.0);
            let steps = (2.0 / dt) as usize;
            for i in 0..steps {
                let t = n as f64 + (i as f64 + 0.5) * dt;
                a += f.eval(t) * dt;
                b += dt / f.eval(t);
            }
            oracle += a * b - 4.0;
        }
        let v = a2_ell1(&f).unwrap();
        assert!((v - oracle).abs() < 1e-3, "{v} vs {oracle}");
    }

    #[test]
    fn classical_characteristic_examples() {
        assert_eq!(
            a2_classical(&HalfLineFunction::constant(3.0, 2.0).unwrap(), 2).unwrap(),
            1.0
        );
        let f = hl(&[0.0, 1.0], &[2.0], Some(1.0));
        // interval [0, 2] straddling t = 1 gives 1 + 0.5 / 4
        let v = a2_classical(&f, 0).unwrap();
        assert!((v - 1.125).abs() < 1e-12, "{v}");
        for &y in &[0.25, 4.0] {
            let d = a2_classical(&f.dilate(y).unwrap(), 0).unwrap();
            assert!((d - v).abs() < 1e-12);
        }
    }

    #[test]
    fn classical_exhaustive_oracle() {
        let f = hl(&[0.0, 0.5, 1.0, 2.0], &[1.0, 4.0, 0.5], Some(2.0));
        let step = 0.01;
        let pts: Vec<f64> = (0..=600).map(|i| i as f64 * step).collect();
        let mut best: f64 = 1.0;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let n = ((pts[j] - pts[i]) / 0.01).round() as usize;
                let (mut a, mut b) = (0.0, 0.0);
                for s in 0..n {
                    let v = f.eval(pts[i] + (s as f64 + 0.5) * 0.01);
                    a += v;
                    b += 1.0 / v;
                }
                best = best.max(a * b / (n * n) as f64);
            }
        }
        let v = a2_classical(&f, 2).unwrap();
        assert!(v >= best - 1e-9, "{v} < {best}");
        assert!(v <= 4.0 * 2.0);
    }

    #[test]
    fn harness_trivial_cases() {
        let phi = hl(&[0.0, 1.0], &[0.0], None);
        let one = HalfLineFunction::constant(1.0, 1.0).unwrap();
        let r = lemma2_harness(&phi, 1.0, &one).unwrap();
        assert_eq!(r.d, 0.0);
        assert_eq!(r.h_characteristic, 0.0);
        let phi = hl(&[0.0, 1.0, 2.0], &[0.5, -0.5], None);
        let r = lemma2_harness(&phi, 1.0, &one).unwrap();
        assert_eq!(r.h_characteristic, 0.0);
        assert!(r.d > 0.0 && r.d.is_finite());
        assert!(r.consistent);
    }

    #[test]
    fn harness_d_matches_quadrature() {
        let phi = hl(&[0.0, 1.0, 2.0], &[0.3, -0.3], None);
        let h = hl(&[0.0, 0.5, 2.5], &[1.2, 0.9], Some(1.0));
        let r = lemma2_harness(&phi, 1.0, &h).unwrap();
        let dt = 1e-5;
        let mut oracle = 0.0;
        for i in 0..(3.0 / dt) as usize {
            let t: f64 = (i as f64 + 0.5) * dt;
            let lg = if t < 1.0 {
                0.3 * t
            } else if t < 2.0 {
                0.3 - 0.3 * (t - 1.0)
            } else {
                0.0
            };
            let gh = lg.exp() * h.eval(t);
            oracle += (gh + 1.0 / gh - 2.0) * dt;
        }
        assert!((r.d - oracle).abs() < 1e-8, "{} vs {oracle}", r.d);
    }

    #[test]
    fn harness_flags_mismatched_tails() {
        let phi = hl(&[0.0, 1.0], &[0.0], None);
        let h = HalfLineFunction::constant(2.0, 1.0).unwrap();
        let r = lemma2_harness(&phi, 1.0, &h).unwrap();
        assert!(r.d.is_infinite());
        assert_eq!(r.ratio, 0.0);
    }
}
