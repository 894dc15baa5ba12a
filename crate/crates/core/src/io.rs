//! Plain-text file formats. Floats are written with the shortest decimal
//! representation that parses back to the same bits.

use crate::a2::HalfLineFunction;
use crate::error::{Error, Result};
use crate::hamiltonian::{Grid, Hamiltonian, Sym2};
use crate::weight::SampledWeight;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use std::fmt::Write as _;
use std::path::Path;

pub const HAMILTONIAN_HEADER: &str = "#canon-hamiltonian v1";
pub const WEIGHT_HEADER: &str = "#weight v1";
pub const HALFLINE_HEADER: &str = "#halfline v1";
pub const MATRIX_HEADER: &str = "#matrix v1";
pub const SAMPLES_HEADER: &str = "#samples v1";

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Data lines (1-based numbers) after checking the header; `#` lines are
/// returned separately as directives.
type Numbered<'a> = Vec<(usize, &'a str)>;

fn lines<'a>(text: &'a str, header: &str) -> Result<(Numbered<'a>, Numbered<'a>)> {
    let mut it = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    match it.next() {
        Some((_, l)) if l == header || l.starts_with(&format!("{header} ")) => {}
        Some((n, l)) => return Err(perr(n, format!("expected header `{header}`, found `{l}`"))),
        None => return Err(perr(1, format!("empty input, expected `{header}`"))),
    }
    let (mut data, mut directives) = (Vec::new(), Vec::new());
    for (n, l) in it {
        if l.starts_with('#') {
            directives.push((n, l));
        } else {
            data.push((n, l));
        }
    }
    Ok((data, directives))
}

fn floats(line: usize, s: &str, sep: Option<char>, count: Option<usize>) -> Result<Vec<f64>> {
    let parts: Vec<&str> = match sep {
        Some(c) => s.split(c).map(str::trim).collect(),
        None => s.split_whitespace().collect(),
    };
    if let Some(c) = count {
        if parts.len() != c {
            return Err(perr(
                line,
                format!("expected {c} columns, found {}", parts.len()),
            ));
        }
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| perr(line, format!("not a number: `{p}`")))
        })
        .collect()
}

/// Contiguous cells `[t_start, t_end)` starting at 0.
fn cells_to_grid(rows: &[(usize, f64, f64)]) -> Result<Grid> {
    let first = rows.first().ok_or_else(|| perr(1, "no data rows"))?;
    if first.1 != 0.0 {
        return Err(perr(
            first.0,
            format!("first cell must start at 0, found {}", first.1),
        ));
    }
    let mut nodes = vec![0.0];
    for (i, &(n, a, b)) in rows.iter().enumerate() {
        if i > 0 && a != rows[i - 1].2 {
            return Err(perr(
                n,
                format!(
                    "cell starts at {a} but the previous cell ends at {}",
                    rows[i - 1].2
                ),
            ));
        }
        if !(b > a) {
            return Err(perr(n, format!("empty or reversed cell [{a}, {b}]")));
        }
        nodes.push(b);
    }
    Grid::new(nodes).map_err(|e| perr(first.0, e.to_string()))
}

pub fn write_hamiltonian(h: &Hamiltonian) -> String {
    let mut s = String::from(HAMILTONIAN_HEADER);
    s.push('\n');
    if h.is_unimodular() {
        s.push_str("#unimodular\n");
    }
    for k in 0..h.grid().cells() {
        let (a, b) = h.grid().bounds(k);
        let c = h.cell(k);
        let _ = writeln!(s, "{a} {b} {} {} {}", c.h1, c.h, c.h2);
    }
    s
}

pub fn read_hamiltonian(text: &str) -> Result<Hamiltonian> {
    let (data, directives) = lines(text, HAMILTONIAN_HEADER)?;
    let unimodular = directives.iter().any(|(_, l)| *l == "#unimodular");
    let mut bounds = Vec::with_capacity(data.len());
    let mut cells = Vec::with_capacity(data.len());
    for &(n, l) in &data {
        let v = floats(n, l, None, Some(5))?;
        bounds.push((n, v[0], v[1]));
        cells.push(Sym2::new(v[2], v[3], v[4]));
    }
    let grid = cells_to_grid(&bounds)?;
    Hamiltonian::new(grid, cells, unimodular)
}

pub fn write_weight(w: &SampledWeight) -> String {
    let mut s = String::from(WEIGHT_HEADER);
    s.push('\n');
    for (x, v) in w.x.iter().zip(&w.w) {
        let _ = writeln!(s, "{x} {v}");
    }
    s
}

pub fn read_weight(text: &str) -> Result<SampledWeight> {
    let (data, _) = lines(text, WEIGHT_HEADER)?;
    let (mut x, mut w) = (Vec::new(), Vec::new());
    for &(n, l) in &data {
        let v = floats(n, l, None, Some(2))?;
        x.push(v[0]);
        w.push(v[1]);
    }
    SampledWeight::new(x, w).map_err(|e| perr(data.first().map_or(1, |d| d.0), e.to_string()))
}

pub fn write_halfline(f: &HalfLineFunction) -> String {
    let mut s = String::from(HALFLINE_HEADER);
    s.push('\n');
    if let Some(t) = f.tail() {
        let _ = writeln!(s, "#tail {t}");
    }
    for (k, v) in f.values().iter().enumerate() {
        let (a, b) = f.grid().bounds(k);
        let _ = writeln!(s, "{a} {b} {v}");
    }
    s
}

pub fn read_halfline(text: &str) -> Result<HalfLineFunction> {
    let (data, directives) = lines(text, HALFLINE_HEADER)?;
    let mut tail = None;
    for &(n, l) in &directives {
        if let Some(rest) = l.strip_prefix("#tail") {
            tail = Some(floats(n, rest, None, Some(1))?[0]);
        }
    }
    let mut bounds = Vec::new();
    let mut values = Vec::new();
    for &(n, l) in &data {
        let v = floats(n, l, None, Some(3))?;
        bounds.push((n, v[0], v[1]));
        values.push(v[2]);
    }
    HalfLineFunction::new(cells_to_grid(&bounds)?, values, tail)
}

pub fn write_matrix(m: &DMatrix<f64>) -> String {
    let mut s = format!("{MATRIX_HEADER} N={}\n", m.nrows());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn read_matrix(text: &str) -> Result<DMatrix<f64>> {
    let head = text.lines().next().unwrap_or("").trim();
    let n: usize = head
        .strip_prefix(MATRIX_HEADER)
        .and_then(|r| r.trim().strip_prefix("N="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| perr(1, format!("expected `{MATRIX_HEADER} N=<n>`")))?;
    let (data, _) = lines(text, MATRIX_HEADER)?;
    if data.len() != n {
        return Err(perr(
            data.last().map_or(1, |d| d.0),
            format!("expected {n} rows, found {}", data.len()),
        ));
    }
    let mut m = DMatrix::zeros(n, n);
    for (i, &(ln, l)) in data.iter().enumerate() {
        let v = floats(ln, l, Some(','), Some(n))?;
        for (j, x) in v.into_iter().enumerate() {
            m[(i, j)] = x;
        }
    }
    Ok(m)
}

/// Complex samples `(z, value)`, one row `z_re z_im value_re value_im` each.
pub fn write_samples(rows: &[(C64, C64)]) -> String {
    let mut s = String::from(SAMPLES_HEADER);
    s.push('\n');
    for (z, v) in rows {
        let _ = writeln!(s, "{} {} {} {}", z.re, z.im, v.re, v.im);
    }
    s
}

pub fn read_samples(text: &str) -> Result<Vec<(C64, C64)>> {
    let (data, _) = lines(text, SAMPLES_HEADER)?;
    data.iter()
        .map(|&(n, l)| {
            let v = floats(n, l, None, Some(4))?;
            Ok((C64::new(v[0], v[1]), C64::new(v[2], v[3])))
        })
        .collect()
}

/// Ordered `key=value` report.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(|v| v.parse().ok())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut r = Report::new();
        for (i, l) in text.lines().enumerate() {
            let l = l.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| perr(i + 1, format!("expected key=value, found `{l}`")))?;
            r.push(k.trim(), v.trim());
        }
        Ok(r)
    }
}

impl std::fmt::Display for Report {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

pub fn read_file(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    Ok(std::fs::write(path, contents)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamiltonian_round_trip_is_bit_exact() {
        let h = Hamiltonian::new(
            Grid::new(vec![0.0, 0.1, 1.0 / 3.0, 2.5]).unwrap(),
            vec![
                Sym2::new(2.0, 0.1, 0.5 + 0.005),
                Sym2::diag(1e-7, 3.0e5),
                Sym2::new(std::f64::consts::PI, -1.0 / 7.0, 1.0),
            ],
            false,
        )
        .unwrap();
        let text = write_hamiltonian(&h);
        let back = read_hamiltonian(&text).unwrap();
        assert_eq!(back.cells(), h.cells());
        assert_eq!(back.grid().nodes(), h.grid().nodes());
        assert_eq!(write_hamiltonian(&back), text);
        assert!(!text.contains('e'));
    }

    #[test]
    fn unimodular_flag_round_trips() {
        let h = Hamiltonian::constant(Sym2::diag(2.0, 0.5), 1.0, 2).unwrap();
        let h = Hamiltonian::new(h.grid().clone(), h.cells().to_vec(), true).unwrap();
        let back = read_hamiltonian(&write_hamiltonian(&h)).unwrap();
        assert!(back.is_unimodular());
    }

    #[test]
    fn malformed_hamiltonians_report_lines() {
        let bad = "#canon-hamiltonian v1\n0 1 1 0 1\n1 2 1 0\n";
        match read_hamiltonian(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let gap = "#canon-hamiltonian v1\n0 1 1 0 1\n1.5 2 1 0 1\n";
        assert!(matches!(
            read_hamiltonian(gap),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            read_hamiltonian("#weight v1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn weight_halfline_matrix_round_trips() {
        let w = SampledWeight::new(vec![-1.0, 0.0, 0.7], vec![1.5, 2.0, 1.0 / 3.0]).unwrap();
        assert_eq!(read_weight(&write_weight(&w)).unwrap(), w);
        let f = HalfLineFunction::new(
            Grid::new(vec![0.0, 0.25, 4.0]).unwrap(),
            vec![-0.1, 7.0],
            Some(1.0 / 9.0),
        )
        .unwrap();
        assert_eq!(read_halfline(&write_halfline(&f)).unwrap(), f);
        let g =
            HalfLineFunction::new(Grid::uniform(1.0, 2).unwrap(), vec![1.0, 2.0], None).unwrap();
        assert_eq!(read_halfline(&write_halfline(&g)).unwrap(), g);
        let m = DMatrix::from_fn(3, 3, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0));
        let text = write_matrix(&m);
        assert!(text.starts_with("#matrix v1 N=3\n"));
        assert_eq!(read_matrix(&text).unwrap(), m);
    }

    #[test]
    fn samples_round_trip() {
        let rows = vec![
            (C64::new(0.5, -1.0), C64::new(1.0 / 3.0, 2e-300)),
            (C64::new(0.0, 0.0), C64::new(-0.0, 7.0)),
        ];
        let back = read_samples(&write_samples(&rows)).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn reports_round_trip() {
        let mut r = Report::new();
        r.push("residual", 1.25e-7)
            .push("cond", 1.5)
            .push("leakage", 0.0);
        let text = r.to_string();
        assert!(text.starts_with("residual="));
        assert_eq!(Report::parse(&text).unwrap(), r);
        assert_eq!(Report::parse(&text).unwrap().get_f64("cond"), Some(1.5));
    }
}
