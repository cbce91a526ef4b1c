//! Uniform grids and sampled functions.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Uniform grid `t_i = a + i h`, `i = 0..=n`, `h = (b - a) / n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    a: f64,
    b: f64,
    n: usize,
}

impl Grid {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::InvalidGrid(format!("need finite a < b, got [{a}, {b}]")));
        }
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 intervals, got {n}")));
        }
        Ok(Grid { a, b, n })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Number of intervals.
    pub fn intervals(&self) -> usize {
        self.n
    }

    /// Number of nodes, `n + 1`.
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n {
            self.b
        } else {
            self.a + i as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Same interval, `n` intervals.
    pub fn refined(&self, n: usize) -> Result<Grid> {
        Grid::new(self.a, self.b, n)
    }
}

/// Samples of an `R^dim`-valued function at the nodes of a [`Grid`].
///
/// Values are stored node-major. Operators that hit a genuine singularity
/// (the Riemann-Liouville derivative at its base point) store NaN there;
/// such nodes report [`GridFunction::is_flagged`] and quadratures skip them.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    dim: usize,
    values: Vec<f64>,
}

impl GridFunction {
    /// Rejects non-finite entries.
    pub fn new(grid: Grid, dim: usize, values: Vec<f64>) -> Result<Self> {
        let gf = Self::with_flags(grid, dim, values)?;
        if let Some(i) = gf.first_flagged() {
            return Err(Error::NonFinite { what: "grid function".into(), index: i });
        }
        Ok(gf)
    }

    /// Like [`GridFunction::new`] but NaN entries are kept as flagged nodes.
    pub fn with_flags(grid: Grid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() * dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values ({} nodes x dim {}), got {}",
                grid.len() * dim,
                grid.len(),
                dim,
                values.len()
            )));
        }
        Ok(GridFunction { grid, dim, values })
    }

    pub fn zeros(grid: Grid, dim: usize) -> Self {
        GridFunction { grid, dim, values: vec![0.0; grid.len() * dim] }
    }

    pub fn scalar(grid: Grid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, 1, values)
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, 1, grid.nodes().into_iter().map(f).collect())
    }

    pub fn from_fn_vec(grid: Grid, dim: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len() * dim);
        for t in grid.nodes() {
            let row = f(t);
            if row.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "sampler returned {} components, expected {dim}",
                    row.len()
                )));
            }
            values.extend(row);
        }
        Self::new(grid, dim, values)
    }

    /// Builds from per-component columns, each of length `grid.len()`.
    pub fn from_columns(grid: Grid, columns: &[Vec<f64>]) -> Result<Self> {
        let dim = columns.len();
        for c in columns {
            if c.len() != grid.len() {
                return Err(Error::DimensionMismatch(format!(
                    "column of length {} on a grid with {} nodes",
                    c.len(),
                    grid.len()
                )));
            }
        }
        let mut values = Vec::with_capacity(grid.len() * dim);
        for i in 0..grid.len() {
            values.extend(columns.iter().map(|c| c[i]));
        }
        Self::with_flags(grid, dim, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.dim + k]
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i, k)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|k| self.component(k)).collect()
    }

    pub fn is_flagged(&self, i: usize) -> bool {
        self.row(i).iter().any(|v| !v.is_finite())
    }

    pub fn first_flagged(&self) -> Option<usize> {
        (0..self.len()).find(|&i| self.is_flagged(i))
    }

    /// Applies a per-component scalar transform, keeping the grid.
    pub fn map_components(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let cols: Vec<Vec<f64>> = self.columns().iter().map(|c| f(c)).collect();
        Self::from_columns(self.grid, &cols)
    }

    /// `c1 * self + c2 * other`.
    pub fn combine(&self, c1: f64, other: &GridFunction, c2: f64) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| c1 * x + c2 * y).collect();
        Self::with_flags(self.grid, self.dim, values)
    }

    pub fn check_compatible(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid || self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "grid functions differ: {:?} dim {} vs {:?} dim {}",
                self.grid, self.dim, other.grid, other.dim
            )));
        }
        Ok(())
    }

    /// Max-norm over all finite entries.
    pub fn max_norm(&self) -> f64 {
        self.values.iter().filter(|v| v.is_finite()).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// CSV with header `t,v0,v1,...`, one row per node, 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((0..self.dim).map(|k| format!("v{k}")))
            .collect();
        let cols = self.columns();
        let t = self.grid.nodes();
        write_table(w, &header, &std::iter::once(t).chain(cols).collect::<Vec<_>>())
    }

    /// Reads the format produced by [`GridFunction::write_csv`]. The grid is
    /// reconstructed from the first and last `t` and the row count.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        if header.get(0) != Some("t") {
            return Err(Error::Csv("first column must be `t`".into()));
        }
        let dim = header.len() - 1;
        let mut ts = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Csv(format!("{s:?}: {e}")));
            ts.push(parse(&rec[0])?);
            for k in 0..dim {
                values.push(parse(&rec[k + 1])?);
            }
        }
        if ts.len() < 3 {
            return Err(Error::Csv("need at least 3 rows".into()));
        }
        let grid = Grid::new(ts[0], *ts.last().unwrap(), ts.len() - 1)?;
        Self::with_flags(grid, dim, values)
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// Writes named columns of equal length as CSV.
pub fn write_table<W: Write>(w: W, header: &[String], columns: &[Vec<f64>]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(header)?;
    let rows = columns.first().map_or(0, |c| c.len());
    for i in 0..rows {
        wtr.write_record(columns.iter().map(|c| fmt_f64(c[i])))?;
    }
    wtr.flush()?;
    Ok(())
}
