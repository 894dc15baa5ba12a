//! Piecewise-constant Hamiltonians on the half-line and their structural transforms.

use crate::error::{Error, Result};
use nalgebra::Matrix2;

/// Cell boundaries `0 = t_0 < t_1 < ... < t_K`; functions on the grid are
/// constant on each half-open cell `[t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
}

impl Grid {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::domain("grid needs at least one cell"));
        }
        if nodes[0] != 0.0 {
            return Err(Error::domain(format!(
                "grid must start at 0, got {}",
                nodes[0]
            )));
        }
        if nodes.iter().any(|t| !t.is_finite()) {
            return Err(Error::domain("grid nodes must be finite"));
        }
        if let Some(w) = nodes.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::domain(format!(
                "grid nodes not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self { nodes })
    }

    /// `cells` equal cells on `[0, end]`.
    pub fn uniform(end: f64, cells: usize) -> Result<Self> {
        if !(end > 0.0) || cells == 0 {
            return Err(Error::domain(
                "uniform grid needs end > 0 and at least one cell",
            ));
        }
        let h = end / cells as f64;
        let mut nodes: Vec<f64> = (0..=cells).map(|k| k as f64 * h).collect();
        nodes[cells] = end;
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn end(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn bounds(&self, k: usize) -> (f64, f64) {
        (self.nodes[k], self.nodes[k + 1])
    }

    pub fn width(&self, k: usize) -> f64 {
        self.nodes[k + 1] - self.nodes[k]
    }

    /// Cell containing `t` (right-continuous; the end point belongs to the last cell).
    pub fn locate(&self, t: f64) -> Option<usize> {
        if !(t >= 0.0) || t > self.end() {
            return None;
        }
        let idx = self.nodes.partition_point(|&n| n <= t);
        Some(idx.saturating_sub(1).min(self.cells() - 1))
    }

    pub fn scaled(&self, y: f64) -> Grid {
        Grid {
            nodes: self.nodes.iter().map(|t| t * y).collect(),
        }
    }
}

/// Real symmetric 2x2 matrix `[[h1, h], [h, h2]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub h1: f64,
    pub h: f64,
    pub h2: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 {
        h1: 1.0,
        h: 0.0,
        h2: 1.0,
    };

    pub fn new(h1: f64, h: f64, h2: f64) -> Self {
        Self { h1, h, h2 }
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Self {
            h1: a,
            h: 0.0,
            h2: b,
        }
    }

    pub fn det(&self) -> f64 {
        self.h1 * self.h2 - self.h * self.h
    }

    pub fn trace(&self) -> f64 {
        self.h1 + self.h2
    }

    pub fn is_finite(&self) -> bool {
        self.h1.is_finite() && self.h.is_finite() && self.h2.is_finite()
    }

    pub fn is_psd(&self) -> bool {
        self.h1 >= 0.0 && self.h2 >= 0.0 && self.det() >= 0.0
    }

    pub fn to_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.h1, self.h, self.h, self.h2)
    }

    /// `J^T S J` for the signature matrix `J`.
    pub fn dual(&self) -> Sym2 {
        Sym2::new(self.h2, -self.h, self.h1)
    }

    /// `D S D` with `D = diag(1/sqrt(c), sqrt(c))`.
    pub fn gauge(&self, c: f64) -> Sym2 {
        Sym2::new(self.h1 / c, self.h, self.h2 * c)
    }

    pub fn scaled(&self, s: f64) -> Sym2 {
        Sym2::new(self.h1 * s, self.h * s, self.h2 * s)
    }

    pub fn max_abs_diff(&self, o: &Sym2) -> f64 {
        (self.h1 - o.h1)
            .abs()
            .max((self.h - o.h).abs())
            .max((self.h2 - o.h2).abs())
    }
}

/// The signature matrix `J = [[0, -1], [1, 0]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SignatureMatrix;

impl SignatureMatrix {
    pub fn matrix() -> Matrix2<f64> {
        Matrix2::new(0.0, -1.0, 1.0, 0.0)
    }
}

/// Grid-sampled Hamiltonian `t -> H(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    grid: Grid,
    cells: Vec<Sym2>,
    unimodular: bool,
}

/// Problems found by [`Hamiltonian::validate`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    /// Cells that are not positive semi-definite, with their determinant.
    pub psd_violations: Vec<(usize, f64)>,
    /// Cells with non-finite entries.
    pub non_finite: Vec<usize>,
    /// Largest `|det - 1|` when the unimodular flag is set.
    pub det_deviation: f64,
    /// Cells whose determinant differs from 1 by more than the tolerance.
    pub det_violations: Vec<usize>,
    /// True when the trace vanishes on every cell.
    pub trace_vanishes: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.psd_violations.is_empty()
            && self.non_finite.is_empty()
            && self.det_violations.is_empty()
            && !self.trace_vanishes
    }
}

/// Tolerance for the unimodular claim; written values are rounded to f64.
pub const DET_TOL: f64 = 1e-12;

impl Hamiltonian {
    pub fn new(grid: Grid, cells: Vec<Sym2>, unimodular: bool) -> Result<Self> {
        if cells.len() != grid.cells() {
            return Err(Error::domain(format!(
                "{} cell matrices for {} grid cells",
                cells.len(),
                grid.cells()
            )));
        }
        Ok(Self {
            grid,
            cells,
            unimodular,
        })
    }

    /// Constant Hamiltonian on `[0, end]` with `n` equal cells.
    pub fn constant(cell: Sym2, end: f64, n: usize) -> Result<Self> {
        let unimodular = (cell.det() - 1.0).abs() <= DET_TOL;
        Self::new(Grid::uniform(end, n)?, vec![cell; n], unimodular)
    }

    pub fn identity(end: f64, n: usize) -> Result<Self> {
        Self::constant(Sym2::IDENTITY, end, n)
    }

    /// Midpoint sampling of a function `t -> H(t)` on `grid`.
    pub fn from_fn(grid: Grid, unimodular: bool, f: impl Fn(f64) -> Sym2) -> Result<Self> {
        let cells = (0..grid.cells())
            .map(|k| {
                let (a, b) = grid.bounds(k);
                f(0.5 * (a + b))
            })
            .collect();
        Self::new(grid, cells, unimodular)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn cells(&self) -> &[Sym2] {
        &self.cells
    }

    pub fn cell(&self, k: usize) -> Sym2 {
        self.cells[k]
    }

    pub fn is_unimodular(&self) -> bool {
        self.unimodular
    }

    pub fn end(&self) -> f64 {
        self.grid.end()
    }

    /// Cell value at `t` (right-continuous).
    pub fn at(&self, t: f64) -> Option<Sym2> {
        self.grid.locate(t).map(|k| self.cells[k])
    }

    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::default();
        let mut all_zero_trace = true;
        for (k, c) in self.cells.iter().enumerate() {
            if !c.is_finite() {
                rep.non_finite.push(k);
                continue;
            }
            if !c.is_psd() {
                rep.psd_violations.push((k, c.det()));
            }
            if c.trace() != 0.0 {
                all_zero_trace = false;
            }
            if self.unimodular {
                let d = (c.det() - 1.0).abs();
                rep.det_deviation = rep.det_deviation.max(d);
                if d > DET_TOL {
                    rep.det_violations.push(k);
                }
            }
        }
        rep.trace_vanishes = all_zero_trace;
        rep
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let rep = self.validate();
        if rep.is_valid() {
            return Ok(());
        }
        let mut msg = Vec::new();
        if let Some((k, d)) = rep.psd_violations.first() {
            msg.push(format!("cell {k} not PSD (det {d})"));
        }
        if let Some(k) = rep.non_finite.first() {
            msg.push(format!("cell {k} not finite"));
        }
        if let Some(k) = rep.det_violations.first() {
            msg.push(format!(
                "cell {k} det deviates from 1 by {:e}",
                rep.det_deviation
            ));
        }
        if rep.trace_vanishes {
            msg.push("trace vanishes identically".into());
        }
        Err(Error::Validation(msg.join("; ")))
    }

    pub fn dual(&self) -> Hamiltonian {
        Hamiltonian {
            grid: self.grid.clone(),
            cells: self.cells.iter().map(Sym2::dual).collect(),
            unimodular: self.unimodular,
        }
    }

    /// `t -> H(t / y)`.
    pub fn dilate(&self, y: f64) -> Result<Hamiltonian> {
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::domain(format!(
                "dilation factor must be positive, got {y}"
            )));
        }
        Ok(Hamiltonian {
            grid: self.grid.scaled(y),
            cells: self.cells.clone(),
            unimodular: self.unimodular,
        })
    }

    /// Restriction to `[0, end]`, truncating the cell that contains `end`.
    pub fn restrict(&self, end: f64) -> Result<Hamiltonian> {
        if !(end > 0.0) || end > self.end() {
            return Err(Error::domain(format!(
                "restriction end {end} outside (0, {}]",
                self.end()
            )));
        }
        let k = self.grid.locate(end).expect("inside grid");
        let mut nodes: Vec<f64> = self.grid.nodes()[..=k].to_vec();
        let mut cells: Vec<Sym2> = self.cells[..=k].to_vec();
        if end > nodes[k] {
            nodes.push(end);
        } else {
            cells.pop();
        }
        Hamiltonian::new(Grid::new(nodes)?, cells, self.unimodular)
    }

    /// Rescales every cell by `1/sqrt(det)` and sets the unimodular flag.
    pub fn normalize_det(&self) -> Result<Hamiltonian> {
        let cells = self
            .cells
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let d = c.det();
                if !(d > 0.0) {
                    return Err(Error::domain(format!(
                        "cell {k} has det {d}, cannot normalize"
                    )));
                }
                Ok(c.scaled(1.0 / d.sqrt()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Hamiltonian {
            grid: self.grid.clone(),
            cells,
            unimodular: true,
        })
    }

    /// Maximum cell-wise entry difference; grids must coincide.
    pub fn max_cell_diff(&self, other: &Hamiltonian) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::domain("grids differ"));
        }
        Ok(self
            .cells
            .iter()
            .zip(&other.cells)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_cell() -> Hamiltonian {
        Hamiltonian::new(
            Grid::new(vec![0.0, 1.0, 2.0]).unwrap(),
            vec![Sym2::diag(2.0, 0.5), Sym2::new(2.0, 1.0, 1.0)],
            true,
        )
        .unwrap()
    }

    #[test]
    fn grid_rejects_bad_nodes() {
        assert!(Grid::new(vec![0.0]).is_err());
        assert!(Grid::new(vec![0.5, 1.0]).is_err());
        assert!(Grid::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(Grid::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn locate_is_right_continuous() {
        let g = Grid::new(vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(g.locate(0.0), Some(0));
        assert_eq!(g.locate(0.999), Some(0));
        assert_eq!(g.locate(1.0), Some(1));
        assert_eq!(g.locate(2.0), Some(1));
        assert_eq!(g.locate(2.1), None);
        assert_eq!(g.locate(-0.1), None);
    }

    #[test]
    fn identity_is_valid() {
        let h = Hamiltonian::identity(10.0, 4).unwrap();
        let r = h.validate();
        assert!(r.is_valid());
        assert_eq!(r.det_deviation, 0.0);
    }

    #[test]
    fn indefinite_cell_is_reported() {
        let h = Hamiltonian::new(
            Grid::uniform(1.0, 1).unwrap(),
            vec![Sym2::new(1.0, 2.0, 1.0)],
            false,
        )
        .unwrap();
        let r = h.validate();
        assert_eq!(r.psd_violations, vec![(0, -3.0)]);
        assert!(h.ensure_valid().is_err());
    }

    #[test]
    fn unimodular_diagonal_cell_has_zero_deviation() {
        let h = Hamiltonian::new(
            Grid::uniform(1.0, 1).unwrap(),
            vec![Sym2::diag(2.0, 0.5)],
            true,
        )
        .unwrap();
        assert_eq!(h.validate().det_deviation, 0.0);
    }

    #[test]
    fn vanishing_trace_is_invalid() {
        let h = Hamiltonian::new(
            Grid::uniform(1.0, 2).unwrap(),
            vec![Sym2::diag(0.0, 0.0); 2],
            false,
        )
        .unwrap();
        assert!(h.validate().trace_vanishes);
    }

    #[test]
    fn dual_examples() {
        assert_eq!(Sym2::diag(3.0, 7.0).dual(), Sym2::diag(7.0, 3.0));
        assert_eq!(Sym2::IDENTITY.dual(), Sym2::IDENTITY);
        assert_eq!(Sym2::new(2.0, 1.0, 1.0).dual(), Sym2::new(1.0, -1.0, 2.0));
        let h = two_cell();
        assert_eq!(h.dual().dual(), h);
        assert!(h.dual().is_unimodular());
    }

    #[test]
    fn dual_matches_matrix_conjugation() {
        let j = SignatureMatrix::matrix();
        let s = Sym2::new(2.0, 1.0, 1.0);
        let d = j.transpose() * s.to_matrix() * j;
        assert_eq!(d, s.dual().to_matrix());
        assert_eq!(j * j, -Matrix2::identity());
        assert_eq!(j.transpose(), -j);
    }

    #[test]
    fn dilate_scales_grid_only() {
        let h = two_cell();
        assert_eq!(h.dilate(1.0).unwrap(), h);
        let d = h.dilate(2.0).unwrap();
        assert_eq!(d.grid().nodes(), &[0.0, 2.0, 4.0]);
        assert_eq!(d.cells(), h.cells());
        assert!(h.dilate(0.0).is_err());
        assert!(h.dilate(-1.0).is_err());
    }

    #[test]
    fn restrict_cuts_partial_cell() {
        let h = two_cell();
        let r = h.restrict(1.5).unwrap();
        assert_eq!(r.grid().nodes(), &[0.0, 1.0, 1.5]);
        let r = h.restrict(1.0).unwrap();
        assert_eq!(r.grid().nodes(), &[0.0, 1.0]);
        assert_eq!(r.cells().len(), 1);
    }

    #[test]
    fn normalize_det_enforces_unimodularity() {
        let h = Hamiltonian::new(
            Grid::uniform(2.0, 2).unwrap(),
            vec![Sym2::diag(4.0, 1.0), Sym2::new(3.0, 1.0, 3.0)],
            false,
        )
        .unwrap();
        let n = h.normalize_det().unwrap();
        assert!(n.validate().is_valid());
        for c in n.cells() {
            assert!((c.det() - 1.0).abs() < 1e-14);
        }
    }
}
