//! Dense linear algebra used throughout the crate.
//!
//! Matrices are small (at most a few thousand rows by a few hundred columns),
//! row-major and `f64`. Nothing here allocates more than `O(rows * cols)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix text format: {0}")]
    Parse(String),
    #[error("smallest singular value did not converge in {iterations} iterations; last bracket [{lo}, {hi}]")]
    Convergence { iterations: usize, lo: f64, hi: f64 },
}

/// Row-major dense matrix with finite entries.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl TryFrom<RawMatrix> for Matrix {
    type Error = LinalgError;

    fn try_from(raw: RawMatrix) -> Result<Self, Self::Error> {
        Matrix::new(raw.rows, raw.cols, raw.entries)
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix({}x{})", self.rows, self.cols)?;
        for r in 0..self.rows.min(8) {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        if self.rows > 8 {
            writeln!(f, "  ...")?;
        }
        Ok(())
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self, LinalgError> {
        if entries.len() != rows * cols {
            return Err(LinalgError::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite { row: pos / cols.max(1), col: pos % cols.max(1) });
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.entries[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(LinalgError::Dimension(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            entries.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, entries)
    }

    /// Builds a matrix entry by entry.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                entries.push(f(r, c));
            }
        }
        Self { rows, cols, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, entries: self.entries.iter().map(|v| v * c).collect() }
    }

    /// Returns the matrix whose row `i` is row `perm[i]` of `self`.
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Self, LinalgError> {
        if perm.len() != self.rows {
            return Err(LinalgError::Dimension("permutation length differs from row count".into()));
        }
        let mut entries = Vec::with_capacity(self.entries.len());
        for &p in perm {
            entries.extend_from_slice(self.row(p));
        }
        Ok(Self { rows: self.rows, cols: self.cols, entries })
    }

    /// Keeps the listed rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut entries = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            entries.extend_from_slice(self.row(r));
        }
        Self { rows: rows.len(), cols: self.cols, entries }
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "mul_vec: vector length");
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// `Aᵀ y`.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "tr_mul_vec: vector length");
        let mut out = vec![0.0; self.cols];
        for (r, &yr) in y.iter().enumerate() {
            if yr != 0.0 {
                for (o, a) in out.iter_mut().zip(self.row(r)) {
                    *o += yr * a;
                }
            }
        }
        out
    }

    /// `AᵀA`, symmetric `cols × cols`.
    pub fn gram(&self) -> Matrix {
        let n = self.cols;
        let mut g = Matrix::zeros(n, n);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..n {
                let ri = row[i];
                if ri == 0.0 {
                    continue;
                }
                for j in i..n {
                    g.entries[i * n + j] += ri * row[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                g.entries[i * n + j] = g.entries[j * n + i];
            }
        }
        g
    }

    /// Parses the plain-text fixture format: a `rows cols` header followed by
    /// one whitespace-separated row per line.
    pub fn parse_text(text: &str) -> Result<Self, LinalgError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| LinalgError::Parse("empty input".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| LinalgError::Parse(format!("header `{header}`: {e}"))))
            .collect::<Result<_, _>>()?;
        let [rows, cols] = dims[..] else {
            return Err(LinalgError::Parse(format!("header `{header}` must be `rows cols`")));
        };
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let line = lines.next().ok_or_else(|| LinalgError::Parse(format!("missing row {r}")))?;
            let before = entries.len();
            for tok in line.split_whitespace() {
                entries.push(tok.parse::<f64>().map_err(|e| LinalgError::Parse(format!("row {r}: `{tok}`: {e}")))?);
            }
            if entries.len() - before != cols {
                return Err(LinalgError::Parse(format!("row {r} has {} entries, expected {cols}", entries.len() - before)));
            }
        }
        if lines.next().is_some() {
            return Err(LinalgError::Parse(format!("more than {rows} rows")));
        }
        Matrix::new(rows, cols, entries)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows, self.cols);
        for r in 0..self.rows {
            let row: Vec<String> = self.row(r).iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

impl FromStr for Matrix {
    type Err = LinalgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Matrix::parse_text(s)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Norm order supported by [`ProjectedNorm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormOrder {
    L1,
    L2,
}

/// `‖x_S‖_p`: the ℓp norm of `x` restricted to coordinates `S`.
/// `subset == None` means all coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectedNorm {
    pub subset: Option<Vec<usize>>,
    pub order: NormOrder,
}

impl ProjectedNorm {
    pub fn full(order: NormOrder) -> Self {
        Self { subset: None, order }
    }

    pub fn on(subset: Vec<usize>, order: NormOrder) -> Self {
        Self { subset: Some(subset), order }
    }
}

/// Evaluates `‖x_S‖_p`. Panics if an index in `S` is out of range.
pub fn norm(x: &[f64], spec: &ProjectedNorm) -> f64 {
    let acc = |it: &mut dyn Iterator<Item = f64>| match spec.order {
        NormOrder::L1 => it.map(f64::abs).sum::<f64>(),
        NormOrder::L2 => it.map(|v| v * v).sum::<f64>().sqrt(),
    };
    match &spec.subset {
        None => acc(&mut x.iter().copied()),
        Some(s) => acc(&mut s.iter().map(|&i| x[i])),
    }
}

pub fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn linf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Row-wise Hadamard product of `ℓ_1×n, …, ℓ_s×n` factors.
///
/// The output has `Πℓ_i` rows; row `(i_1, …, i_s)` (lexicographic, last
/// factor fastest) holds `Π_j factors[j][i_j, c]` in column `c`.
pub fn hadamard_row_product(factors: &[Matrix]) -> Result<Matrix, LinalgError> {
    let first = factors
        .first()
        .ok_or_else(|| LinalgError::Dimension("hadamard product of zero factors".into()))?;
    let n = first.cols;
    if let Some((i, f)) = factors.iter().enumerate().find(|(_, f)| f.cols != n) {
        return Err(LinalgError::Dimension(format!("factor {i} has {} columns, expected {n}", f.cols)));
    }
    let mut acc = first.clone();
    for f in &factors[1..] {
        let mut entries = Vec::with_capacity(acc.rows * f.rows * n);
        for r in 0..acc.rows {
            let left = acc.row(r);
            for s in 0..f.rows {
                entries.extend(left.iter().zip(f.row(s)).map(|(a, b)| a * b));
            }
        }
        acc = Matrix { rows: acc.rows * f.rows, cols: n, entries };
    }
    Ok(acc)
}

/// Knobs for [`smallest_singular_value_with`].
#[derive(Debug, Clone, Copy)]
pub struct SvdOptions {
    pub max_iterations: usize,
    /// Relative change of the Rayleigh quotient below which iteration stops.
    pub rel_tolerance: f64,
    pub seed: u64,
}

impl Default for SvdOptions {
    fn default() -> Self {
        Self { max_iterations: 20_000, rel_tolerance: 1e-14, seed: 0x5EED_5EED }
    }
}

pub fn smallest_singular_value(a: &Matrix) -> Result<f64, LinalgError> {
    smallest_singular_value_with(a, &SvdOptions::default())
}

/// σ_min(A) for `rows ≥ cols`, by inverse power iteration on `AᵀA`.
///
/// `AᵀA` is Cholesky-factored once; if it is numerically singular a small
/// diagonal shift is added and the iteration runs on the shifted matrix. The
/// result is `‖Av‖₂` for the converged unit vector `v`.
pub fn smallest_singular_value_with(a: &Matrix, opts: &SvdOptions) -> Result<f64, LinalgError> {
    let n = a.cols;
    if a.rows < n {
        return Err(LinalgError::Dimension(format!(
            "smallest_singular_value needs rows >= cols, got {}x{}",
            a.rows, a.cols
        )));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let g = a.gram();
    let trace: f64 = (0..n).map(|i| g.get(i, i)).sum();
    if trace == 0.0 {
        return Ok(0.0);
    }
    let factor = cholesky(&g).or_else(|| {
        let mut shift = 1e-13 * trace / n as f64;
        loop {
            let mut shifted = g.clone();
            for i in 0..n {
                shifted.entries[i * n + i] += shift;
            }
            if let Some(l) = cholesky(&shifted) {
                return Some(l);
            }
            shift *= 100.0;
            if shift > trace {
                return None;
            }
        }
    });
    let Some(l) = factor else {
        return Err(LinalgError::Convergence { iterations: 0, lo: 0.0, hi: f64::INFINITY });
    };

    let mut r = rng::seeded(opts.seed);
    let mut v: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
    normalize(&mut v);
    let rayleigh = |v: &[f64]| l2(&a.mul_vec(v)).powi(2);
    let mut prev = rayleigh(&v);
    for _ in 0..opts.max_iterations {
        let mut w = cholesky_solve(&l, &v);
        if normalize(&mut w) == 0.0 {
            return Ok(0.0);
        }
        v = w;
        let cur = rayleigh(&v);
        if (prev - cur).abs() <= opts.rel_tolerance * cur.max(f64::MIN_POSITIVE) || cur <= 1e-300 {
            return Ok(l2(&a.mul_vec(&v)));
        }
        prev = cur;
    }
    let cur = rayleigh(&v);
    Err(LinalgError::Convergence {
        iterations: opts.max_iterations,
        lo: prev.min(cur).max(0.0).sqrt(),
        hi: prev.max(cur).max(0.0).sqrt(),
    })
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = l2(v);
    if n > 0.0 && n.is_finite() {
        v.iter_mut().for_each(|x| *x /= n);
        n
    } else {
        0.0
    }
}

/// Lower-triangular `L` with `LLᵀ = G`, or `None` if `G` is not numerically
/// positive definite.
fn cholesky(g: &Matrix) -> Option<Matrix> {
    let n = g.rows;
    let mut l = Matrix::zeros(n, n);
    let scale = (0..n).map(|i| g.get(i, i)).fold(0.0, f64::max);
    for j in 0..n {
        let mut d = g.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if d <= 1e-15 * scale || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in j + 1..n {
            let mut s = g.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / d);
        }
    }
    Some(l)
}

fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l.get(k, i) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    y
}
