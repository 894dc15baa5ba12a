//! Quadrature rules shared by the solver, the transform and the weight functionals.

use num_complex::Complex64 as C64;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on the three-term recurrence.
    pub fn compute(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Cached rule of order `n`.
    pub fn cached(n: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        guard
            .entry(n)
            .or_insert_with(|| Arc::new(GaussLegendre::compute(n)))
            .clone()
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (c + r * x, r * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    pub fn integrate_c<F: FnMut(f64) -> C64>(&self, a: f64, b: f64, mut f: F) -> C64 {
        self.mapped(a, b).map(|(x, w)| f(x) * w).sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Gauss-Legendre over `panels` equal panels of [a, b].
pub fn composite_c<F: FnMut(f64) -> C64>(
    a: f64,
    b: f64,
    panels: usize,
    order: usize,
    mut f: F,
) -> C64 {
    let rule = GaussLegendre::cached(order);
    let w = (b - a) / panels as f64;
    let mut acc = C64::new(0.0, 0.0);
    for p in 0..panels {
        let lo = a + w * p as f64;
        let hi = if p + 1 == panels { b } else { lo + w };
        acc += rule.integrate_c(lo, hi, &mut f);
    }
    acc
}

/// Refines a per-interval Gauss-Legendre rule (order 8, doubling, then panel
/// splitting) until the relative change falls below `rel_tol`.
pub fn refine_c<F: FnMut(f64) -> C64>(a: f64, b: f64, rel_tol: f64, mut f: F) -> C64 {
    if b <= a {
        return C64::new(0.0, 0.0);
    }
    let mut order = 8;
    let mut panels = 1;
    let mut prev = composite_c(a, b, panels, order, &mut f);
    for _ in 0..12 {
        if order < 64 {
            order *= 2;
        } else {
            panels *= 2;
        }
        let cur = composite_c(a, b, panels, order, &mut f);
        let scale = cur.norm().max(1e-300);
        if (cur - prev).norm() <= rel_tol * scale || (cur - prev).norm() < 1e-300 {
            return cur;
        }
        prev = cur;
    }
    prev
}

const GK_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(a: f64, b: f64, f: &mut F) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * GK_WK[7];
    let mut g = fc * GK_WG[3];
    for i in 0..7 {
        let dx = r * GK_X[i];
        let s = f(c - dx) + f(c + dx);
        k += GK_WK[i] * s;
        if i % 2 == 1 {
            g += GK_WG[i / 2] * s;
        }
    }
    (k * r, ((k - g) * r).abs())
}

/// Adaptive Gauss-Kronrod (7/15) with absolute tolerance `tol`.
pub fn adaptive<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    tol: f64,
    max_intervals: usize,
    mut f: F,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (v, e) = gk15(a, b, &mut f);
    let mut pieces = vec![(a, b, v, e)];
    loop {
        let total_err: f64 = pieces.iter().map(|p| p.3).sum();
        if total_err <= tol || pieces.len() >= max_intervals {
            break;
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = pieces.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (v1, e1) = gk15(lo, mid, &mut f);
        let (v2, e2) = gk15(mid, hi, &mut f);
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
    let mut vals: Vec<(f64, f64)> = pieces.iter().map(|p| (p.0, p.2)).collect();
    vals.sort_by(|x, y| x.0.total_cmp(&y.0));
    vals.iter().map(|p| p.1).sum()
}

/// Adaptive integration over consecutive breakpoints `pts` (sorted).
pub fn adaptive_pieces<F: FnMut(f64) -> f64>(
    pts: &[f64],
    tol: f64,
    max_intervals: usize,
    mut f: F,
) -> f64 {
    let k = pts.len().saturating_sub(1).max(1) as f64;
    pts.windows(2)
        .map(|w| adaptive(w[0], w[1], tol / k, max_intervals, &mut f))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 8, 16, 33] {
            let rule = GaussLegendre::compute(n);
            let wsum: f64 = rule.weights.iter().sum();
            assert!((wsum - 2.0).abs() < 1e-14, "n={n}");
            for p in 0..(2 * n) {
                let exact = if p % 2 == 1 {
                    0.0
                } else {
                    2.0 / (p as f64 + 1.0)
                };
                let got = rule.integrate(-1.0, 1.0, |x| x.powi(p as i32));
                assert!((got - exact).abs() < 1e-13, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn gauss_legendre_known_nodes() {
        let rule = GaussLegendre::compute(2);
        assert!((rule.nodes[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_kinks_and_oscillation() {
        let v = adaptive(-1.0, 1.0, 1e-12, 2000, f64::abs);
        assert!((v - 1.0).abs() < 1e-11);
        let v = adaptive(0.0, 50.0, 1e-11, 5000, |x| (7.0 * x).cos());
        assert!((v - (350.0f64).sin() / 7.0).abs() < 1e-10);
    }

    #[test]
    fn refine_reaches_tolerance() {
        let v = refine_c(0.0, 20.0, 1e-12, |x| C64::new(0.0, 3.0 * x).exp());
        let exact = (C64::new(0.0, 60.0).exp() - 1.0) / C64::new(0.0, 3.0);
        assert!((v - exact).norm() < 1e-10);
    }
}
