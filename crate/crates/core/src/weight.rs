//! Spectral densities on the real line and the measures built from them.

use crate::error::{Error, Result};
use crate::quad::GaussLegendre;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Density `w(x)` of an absolutely continuous spectral measure.
#[derive(Clone)]
pub enum Weight {
    /// `w = c`.
    Constant(f64),
    /// `inner` on `|x| < half_width`, `outer` elsewhere.
    Step {
        inner: f64,
        outer: f64,
        half_width: f64,
    },
    /// `1 + amplitude * (sin(scale x) / (scale x))^2`.
    SincSquared { amplitude: f64, scale: f64 },
    /// `1 + amplitude * cos^2(pi x / (2 half_width))` on `|x| < half_width`, 1 elsewhere.
    CosineBump { amplitude: f64, half_width: f64 },
    /// Piecewise-linear interpolation of samples, constant beyond the ends.
    Sampled(SampledWeight),
    /// `inner` on `[-j, j]`, 1 elsewhere.
    Truncated { inner: Box<Weight>, j: f64 },
    /// Arbitrary density, e.g. one computed from a Hamiltonian.
    Custom(CustomWeight),
}

/// Tabulated density; nodes strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWeight {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

type DensityFn = dyn Fn(f64) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct CustomWeight {
    pub label: String,
    pub f: Arc<DensityFn>,
    pub tail: f64,
    pub even: bool,
    pub breakpoints: Vec<f64>,
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Constant(c) => write!(f, "Constant({c})"),
            Weight::Step {
                inner,
                outer,
                half_width,
            } => {
                write!(
                    f,
                    "Step {{ inner: {inner}, outer: {outer}, half_width: {half_width} }}"
                )
            }
            Weight::SincSquared { amplitude, scale } => {
                write!(
                    f,
                    "SincSquared {{ amplitude: {amplitude}, scale: {scale} }}"
                )
            }
            Weight::CosineBump {
                amplitude,
                half_width,
            } => {
                write!(
                    f,
                    "CosineBump {{ amplitude: {amplitude}, half_width: {half_width} }}"
                )
            }
            Weight::Sampled(s) => write!(f, "Sampled({} nodes)", s.x.len()),
            Weight::Truncated { inner, j } => write!(f, "Truncated {{ inner: {inner:?}, j: {j} }}"),
            Weight::Custom(c) => write!(f, "Custom({})", c.label),
        }
    }
}

impl SampledWeight {
    pub fn new(x: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if x.len() != w.len() || x.len() < 2 {
            return Err(Error::domain(
                "sampled weight needs matching x/w columns with at least 2 rows",
            ));
        }
        if x.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::domain(
                "sampled weight nodes must be strictly increasing",
            ));
        }
        if x.iter().chain(&w).any(|v| !v.is_finite()) {
            return Err(Error::domain("sampled weight must be finite"));
        }
        Ok(Self { x, w })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x <= self.x[0] {
            return self.w[0];
        }
        if x >= self.x[n - 1] {
            return self.w[n - 1];
        }
        let i = self.x.partition_point(|&v| v <= x) - 1;
        let s = (x - self.x[i]) / (self.x[i + 1] - self.x[i]);
        self.w[i] + s * (self.w[i + 1] - self.w[i])
    }

    fn is_even(&self) -> bool {
        let n = self.x.len();
        (0..n).all(|i| {
            let j = n - 1 - i;
            (self.x[i] + self.x[j]).abs() <= 1e-12 * (1.0 + self.x[i].abs())
                && (self.w[i] - self.w[j]).abs() <= 1e-12 * (1.0 + self.w[i].abs())
        })
    }
}

impl Weight {
    pub fn step(inner: f64, outer: f64, half_width: f64) -> Self {
        Weight::Step {
            inner,
            outer,
            half_width,
        }
    }

    pub fn custom(
        label: &str,
        tail: f64,
        even: bool,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Weight::Custom(CustomWeight {
            label: label.to_string(),
            f: Arc::new(f),
            tail,
            even,
            breakpoints: Vec::new(),
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Weight::Constant(c) => *c,
            Weight::Step {
                inner,
                outer,
                half_width,
            } => {
                if x.abs() < *half_width {
                    *inner
                } else {
                    *outer
                }
            }
            Weight::SincSquared { amplitude, scale } => {
                let u = scale * x;
                let s = if u.abs() < 1e-4 {
                    1.0 - u * u / 6.0
                } else {
                    u.sin() / u
                };
                1.0 + amplitude * s * s
            }
            Weight::CosineBump {
                amplitude,
                half_width,
            } => {
                if x.abs() < *half_width {
                    let c = (PI * x / (2.0 * half_width)).cos();
                    1.0 + amplitude * c * c
                } else {
                    1.0
                }
            }
            Weight::Sampled(s) => s.eval(x),
            Weight::Truncated { inner, j } => {
                if x.abs() <= *j {
                    inner.eval(x)
                } else {
                    1.0
                }
            }
            Weight::Custom(c) => (c.f)(x),
        }
    }

    /// Limits of `w` at `-inf` and `+inf`.
    pub fn tails(&self) -> (f64, f64) {
        match self {
            Weight::Constant(c) => (*c, *c),
            Weight::Step { outer, .. } => (*outer, *outer),
            Weight::SincSquared { .. } | Weight::CosineBump { .. } | Weight::Truncated { .. } => {
                (1.0, 1.0)
            }
            Weight::Sampled(s) => (s.w[0], s.w[s.w.len() - 1]),
            Weight::Custom(c) => (c.tail, c.tail),
        }
    }

    /// Common tail value; errors when the two tails differ.
    pub fn tail_value(&self) -> Result<f64> {
        let (l, r) = self.tails();
        if (l - r).abs() > 1e-12 * (1.0 + l.abs()) {
            return Err(Error::domain(format!(
                "weight tails differ: {l} at -inf, {r} at +inf"
            )));
        }
        Ok(r)
    }

    /// Points where `w` may be non-smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v = match self {
            Weight::Constant(_) | Weight::SincSquared { .. } => Vec::new(),
            Weight::Step { half_width, .. } | Weight::CosineBump { half_width, .. } => {
                vec![-half_width, *half_width]
            }
            Weight::Sampled(s) => s.x.clone(),
            Weight::Truncated { inner, j } => {
                let mut b: Vec<f64> = inner
                    .breakpoints()
                    .into_iter()
                    .filter(|x| x.abs() < *j)
                    .collect();
                b.push(-j);
                b.push(*j);
                b
            }
            Weight::Custom(c) => c.breakpoints.clone(),
        };
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Half-width outside of which `w` equals its tail value exactly.
    pub fn compact_half_width(&self) -> Option<f64> {
        match self {
            Weight::Constant(_) => Some(0.0),
            Weight::Step { half_width, .. } | Weight::CosineBump { half_width, .. } => {
                Some(*half_width)
            }
            Weight::Sampled(s) => Some(s.x[0].abs().max(s.x[s.x.len() - 1].abs())),
            Weight::Truncated { j, .. } => Some(*j),
            Weight::SincSquared { .. } | Weight::Custom(_) => None,
        }
    }

    pub fn is_even(&self) -> bool {
        match self {
            Weight::Sampled(s) => s.is_even(),
            Weight::Truncated { inner, .. } => inner.is_even(),
            Weight::Custom(c) => c.even,
            _ => true,
        }
    }

    /// Essential bounds `(c1, c2)`.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Weight::Constant(c) => (*c, *c),
            Weight::Step { inner, outer, .. } => (inner.min(*outer), inner.max(*outer)),
            Weight::SincSquared { amplitude, .. } | Weight::CosineBump { amplitude, .. } => {
                (1.0f64.min(1.0 + amplitude), 1.0f64.max(1.0 + amplitude))
            }
            Weight::Sampled(s) => {
                s.w.iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                        (lo.min(v), hi.max(v))
                    })
            }
            Weight::Truncated { inner, .. } => {
                let (a, b) = inner.bounds();
                (a.min(1.0), b.max(1.0))
            }
            Weight::Custom(c) => {
                // sampled estimate; callers with exact bounds should build the measure directly
                let mut lo = c.tail;
                let mut hi = c.tail;
                for i in -400..=400 {
                    let v = (c.f)(i as f64 * 0.05);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                (lo, hi)
            }
        }
    }

    /// Closed-form accelerant of `w / tail - 1`, when one is known.
    pub fn closed_form_accelerant(&self, t: f64) -> Option<f64> {
        let t = t.abs();
        match self {
            Weight::Constant(_) => Some(0.0),
            Weight::Step {
                inner,
                outer,
                half_width,
            } => {
                let d = inner / outer - 1.0;
                let a = *half_width;
                let u = a * t;
                let s = if u < 1e-4 {
                    a * (1.0 - u * u / 6.0)
                } else {
                    u.sin() / t
                };
                Some(d * s / PI)
            }
            Weight::SincSquared { amplitude, scale } => {
                let b = *scale;
                Some(amplitude / (2.0 * b) * (1.0 - t / (2.0 * b)).max(0.0))
            }
            Weight::CosineBump {
                amplitude,
                half_width,
            } => {
                let a = *half_width;
                let b = PI / a;
                let v = if a * t < 1e-4 {
                    a * (1.0 - (a * t).powi(2) / 6.0) * b * b / (b * b - t * t)
                } else if (t - b).abs() < 1e-6 {
                    a / 2.0
                } else {
                    (a * t).sin() * b * b / (t * (b * b - t * t))
                };
                Some(amplitude / (2.0 * PI) * v)
            }
            _ => None,
        }
    }

    /// Piecewise-linear segments `(x0, g0, x1, g1)` of `g = w / tail - 1` on
    /// `[0, x_max]`, with one-sided values at breakpoints.
    pub fn linear_segments(
        &self,
        x_max: f64,
        per_unit: f64,
        tail: f64,
    ) -> Vec<(f64, f64, f64, f64)> {
        let mut pts: Vec<f64> = match self {
            Weight::Sampled(s) => {
                s.x.iter()
                    .copied()
                    .filter(|&x| x > 0.0 && x < x_max)
                    .collect()
            }
            _ => {
                let n = (x_max * per_unit).ceil().max(1.0) as usize;
                (1..n).map(|i| x_max * i as f64 / n as f64).collect()
            }
        };
        pts.extend(
            self.breakpoints()
                .into_iter()
                .filter(|&x| x > 0.0 && x < x_max),
        );
        pts.push(0.0);
        pts.push(x_max);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts.windows(2)
            .map(|p| {
                let (a, b) = (p[0], p[1]);
                let tiny = 1e-12 * (b - a).min(1.0);
                let ga = self.eval(a + tiny) / tail - 1.0;
                let gb = self.eval(b - tiny) / tail - 1.0;
                (a, ga, b, gb)
            })
            .collect()
    }
}

/// `(1/pi) int g(x) cos(x t) dx` over linear segments on the positive axis.
pub fn cosine_transform_segments(segs: &[(f64, f64, f64, f64)], t: f64) -> f64 {
    let gl = GaussLegendre::cached(8);
    let mut acc = 0.0;
    for &(x0, g0, x1, g1) in segs {
        let dx = x1 - x0;
        if dx <= 0.0 {
            continue;
        }
        let s = (g1 - g0) / dx;
        if (t * dx).abs() < 1.0 {
            acc += gl.integrate(x0, x1, |x| (g0 + s * (x - x0)) * (x * t).cos());
        } else {
            let prim = |x: f64, g: f64| g * (x * t).sin() / t + s * (x * t).cos() / (t * t);
            acc += prim(x1, g1) - prim(x0, g0);
        }
    }
    acc / PI
}

/// Measure `w dx + mu_s` together with the Herglotz constants of its Weyl function.
#[derive(Debug, Clone)]
pub struct SpectralMeasure {
    pub weight: Weight,
    pub c1: f64,
    pub c2: f64,
    /// Point masses `(location, mass)`; numeric routines reject a nonempty list.
    pub singular_part: Vec<(f64, f64)>,
    pub herglotz_a: f64,
    pub herglotz_b: f64,
}

impl SpectralMeasure {
    pub fn new(weight: Weight) -> Self {
        let (c1, c2) = weight.bounds();
        Self {
            weight,
            c1,
            c2,
            singular_part: Vec::new(),
            herglotz_a: 0.0,
            herglotz_b: 0.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(Weight::Constant(c))
    }

    pub fn with_bounds(mut self, c1: f64, c2: f64) -> Self {
        self.c1 = c1;
        self.c2 = c2;
        self
    }

    pub fn density(&self, x: f64) -> f64 {
        self.weight.eval(x)
    }

    pub(crate) fn ensure_absolutely_continuous(&self) -> Result<()> {
        if self.singular_part.is_empty() {
            Ok(())
        } else {
            Err(Error::Unsupported("measures with a singular part".into()))
        }
    }

    /// Bounds required by the inverse problem and the factorization.
    pub(crate) fn ensure_bounded(&self) -> Result<()> {
        self.ensure_absolutely_continuous()?;
        if !(self.c1 > 0.0) || !self.c2.is_finite() {
            return Err(Error::Positivity(format!(
                "weight bounds ({}, {}) violate 0 < c1 <= c2 < inf",
                self.c1, self.c2
            )));
        }
        Ok(())
    }
}

/// `w` on `[-j, j]`, 1 outside.
pub fn truncate_weight(mu: &SpectralMeasure, j: f64) -> Result<SpectralMeasure> {
    if !(j > 0.0) {
        return Err(Error::domain(format!(
            "truncation level must be positive, got {j}"
        )));
    }
    let weight = match &mu.weight {
        Weight::Constant(c) if *c == 1.0 => Weight::Constant(1.0),
        Weight::Constant(c) => Weight::Step {
            inner: *c,
            outer: 1.0,
            half_width: j,
        },
        w => Weight::Truncated {
            inner: Box::new(w.clone()),
            j,
        },
    };
    Ok(SpectralMeasure {
        weight,
        c1: mu.c1.min(1.0),
        c2: mu.c2.max(1.0),
        singular_part: mu.singular_part.clone(),
        herglotz_a: mu.herglotz_a,
        herglotz_b: mu.herglotz_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;

    fn numeric_accelerant(w: &Weight, t: f64, x_max: f64) -> f64 {
        let pts: Vec<f64> = {
            let mut p = vec![0.0, x_max];
            p.extend(
                w.breakpoints()
                    .into_iter()
                    .filter(|&x| x > 0.0 && x < x_max),
            );
            p.sort_by(f64::total_cmp);
            p
        };
        quad::adaptive_pieces(&pts, 1e-12, 20000, |x| (w.eval(x) - 1.0) * (x * t).cos()) / PI
    }

    #[test]
    fn step_accelerant_matches_quadrature() {
        let w = Weight::step(2.0, 1.0, 1.0);
        for &t in &[0.0, 0.3, 1.0, 2.7, 10.0] {
            let closed = w.closed_form_accelerant(t).unwrap();
            let num = numeric_accelerant(&w, t, 1.0);
            assert!((closed - num).abs() < 1e-10, "t={t}");
            let expect = if t == 0.0 {
                1.0 / PI
            } else {
                t.sin() / (PI * t)
            };
            assert!((closed - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn sinc_bump_accelerant_matches_quadrature() {
        let w = Weight::SincSquared {
            amplitude: 0.5,
            scale: 1.0,
        };
        for &t in &[0.0, 0.5, 1.5, 2.5] {
            let closed = w.closed_form_accelerant(t).unwrap();
            // tail of 0.5 sinc^2 beyond X contributes at most 0.5/(pi X)
            let num = numeric_accelerant(&w, t, 4000.0);
            assert!((closed - num).abs() < 1e-4, "t={t}: {closed} vs {num}");
        }
        assert_eq!(w.closed_form_accelerant(0.0), Some(0.25));
    }

    #[test]
    fn cosine_bump_accelerant_matches_quadrature() {
        let w = Weight::CosineBump {
            amplitude: 0.8,
            half_width: 2.0,
        };
        let b = PI / 2.0;
        for &t in &[0.0, 0.7, b, b + 1e-8, 3.0, 9.0] {
            let closed = w.closed_form_accelerant(t).unwrap();
            let num = numeric_accelerant(&w, t, 2.0);
            assert!((closed - num).abs() < 1e-8, "t={t}: {closed} vs {num}");
        }
    }

    #[test]
    fn linear_segments_reproduce_step_transform() {
        let w = Weight::step(3.0, 1.0, 0.75);
        let segs = w.linear_segments(2.0, 10.0, 1.0);
        for &t in &[0.0, 0.2, 1.0, 5.0, 40.0] {
            let a = cosine_transform_segments(&segs, t);
            let b = w.closed_form_accelerant(t).unwrap();
            assert!((a - b).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn sampled_weight_interpolates_and_extends() {
        let s = SampledWeight::new(vec![-1.0, 0.0, 1.0], vec![1.0, 3.0, 1.0]).unwrap();
        let w = Weight::Sampled(s);
        assert_eq!(w.eval(0.5), 2.0);
        assert_eq!(w.eval(7.0), 1.0);
        assert!(w.is_even());
        assert_eq!(w.bounds(), (1.0, 3.0));
        assert!(SampledWeight::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn truncation_examples() {
        let one = truncate_weight(&SpectralMeasure::constant(1.0), 3.0).unwrap();
        assert_eq!(one.density(10.0), 1.0);
        assert_eq!(one.density(0.0), 1.0);
        let two = truncate_weight(&SpectralMeasure::constant(2.0), 1.0).unwrap();
        assert_eq!(two.density(0.5), 2.0);
        assert_eq!(two.density(1.5), 1.0);
        assert_eq!((two.c1, two.c2), (1.0, 2.0));
        let bump = SpectralMeasure::new(Weight::SincSquared {
            amplitude: 0.5,
            scale: 1.0,
        });
        for &j in &[1.0, 10.0, 100.0] {
            let t = truncate_weight(&bump, j).unwrap();
            assert_eq!(t.density(0.9), bump.density(0.9));
        }
        assert!(truncate_weight(&bump, 0.0).is_err());
    }

    #[test]
    fn tails_and_bounds() {
        assert_eq!(Weight::step(2.0, 1.0, 1.0).tail_value().unwrap(), 1.0);
        let s = SampledWeight::new(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
        assert!(Weight::Sampled(s).tail_value().is_err());
        assert_eq!(
            Weight::SincSquared {
                amplitude: 0.5,
                scale: 1.0
            }
            .bounds(),
            (1.0, 1.5)
        );
    }
}
