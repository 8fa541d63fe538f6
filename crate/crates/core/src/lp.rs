//! Exact ℓ1-residual minimization: `min_x ‖A x − ỹ‖₁`.
//!
//! The problem is solved as the linear program
//!
//! ```text
//! minimize   Σ p_i + Σ q_i
//! subject to A (x⁺ − x⁻) − p + q = ỹ,   x⁺, x⁻, p, q ≥ 0
//! ```
//!
//! on a dense tableau. Starting from the basis `{q_i : ỹ_i ≥ 0} ∪ {p_i : ỹ_i < 0}`
//! the program is primal feasible, so no phase one is needed and the
//! objective is bounded below by zero. The returned `x = x⁺ − x⁻` is read off
//! a basic feasible solution, i.e. a vertex of the reformulation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: matrix has {rows} rows, right-hand side has {len}")]
    Dimension { rows: usize, len: usize },
    #[error("empty problem ({rows}x{cols})")]
    Empty { rows: usize, cols: usize },
    #[error("non-finite input")]
    NonFinite,
    #[error("iteration limit {limit} reached; best incumbent residual {}", best.residual)]
    IterationLimit { limit: usize, best: L1Solution },
    #[error("numerical breakdown: entering column {column} has no positive pivot")]
    Breakdown { column: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum PivotRule {
    /// Lowest-index entering column, lowest-index leaving variable on ties.
    /// Never cycles.
    #[default]
    Bland,
    /// Most negative reduced cost; falls back to Bland after a run of
    /// degenerate pivots.
    Dantzig,
}

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    pub rule: PivotRule,
    pub max_iterations: usize,
    pub pivot_tolerance: f64,
    pub cost_tolerance: f64,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self { rule: PivotRule::Bland, max_iterations: 200_000, pivot_tolerance: 1e-9, cost_tolerance: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Solution {
    pub x: Vec<f64>,
    /// `‖A x − ỹ‖₁`, recomputed from `x`.
    pub residual: f64,
    pub iterations: usize,
}

pub fn minimize_l1_residual(a: &Matrix, y: &[f64]) -> Result<L1Solution, LpError> {
    minimize_l1_residual_with(a, y, &LpOptions::default())
}

pub fn minimize_l1_residual_with(a: &Matrix, y: &[f64], opts: &LpOptions) -> Result<L1Solution, LpError> {
    let (k, d) = (a.rows(), a.cols());
    if y.len() != k {
        return Err(LpError::Dimension { rows: k, len: y.len() });
    }
    if k == 0 || d == 0 {
        return Err(LpError::Empty { rows: k, cols: d });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(LpError::NonFinite);
    }
    let mut t = Tableau::new(a, y);
    let mut iterations = 0;
    let mut degenerate_run = 0usize;
    loop {
        let bland = match opts.rule {
            PivotRule::Bland => true,
            PivotRule::Dantzig => degenerate_run > 50,
        };
        let Some(col) = t.entering(opts.cost_tolerance, bland) else {
            break;
        };
        if iterations >= opts.max_iterations {
            return Err(LpError::IterationLimit { limit: opts.max_iterations, best: t.solution(a, y, iterations) });
        }
        let row = t.leaving(col, opts.pivot_tolerance).ok_or(LpError::Breakdown { column: col })?;
        if t.rhs(row) <= opts.pivot_tolerance {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
        t.pivot(row, col);
        iterations += 1;
    }
    Ok(t.solution(a, y, iterations))
}

/// Dense tableau over columns `[x⁺ (d) | x⁻ (d) | p (k) | q (k)]` plus a
/// right-hand-side column; the last row holds reduced costs.
struct Tableau {
    k: usize,
    d: usize,
    width: usize,
    cells: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn new(a: &Matrix, y: &[f64]) -> Self {
        let (k, d) = (a.rows(), a.cols());
        let nvars = 2 * d + 2 * k;
        let width = nvars + 1;
        let mut cells = vec![0.0; (k + 1) * width];
        let mut basis = Vec::with_capacity(k);
        for i in 0..k {
            let sign = if y[i] >= 0.0 { 1.0 } else { -1.0 };
            let row = &mut cells[i * width..(i + 1) * width];
            for (j, &v) in a.row(i).iter().enumerate() {
                row[j] = sign * v;
                row[d + j] = -sign * v;
            }
            row[2 * d + i] = -sign;
            row[2 * d + k + i] = sign;
            row[nvars] = sign * y[i];
            basis.push(if sign > 0.0 { 2 * d + k + i } else { 2 * d + i });
        }
        // Reduced costs c_j − Σ_i T_ij (every initial basic variable has cost 1).
        let mut cost = vec![0.0; width];
        for j in 2 * d..nvars {
            cost[j] = 1.0;
        }
        for i in 0..k {
            for j in 0..width {
                cost[j] -= cells[i * width + j];
            }
        }
        cells[k * width..].copy_from_slice(&cost);
        Self { k, d, width, cells, basis }
    }

    fn rhs(&self, row: usize) -> f64 {
        self.cells[row * self.width + self.width - 1]
    }

    fn entering(&self, tol: f64, bland: bool) -> Option<usize> {
        let costs = &self.cells[self.k * self.width..(self.k + 1) * self.width - 1];
        if bland {
            costs.iter().position(|&c| c < -tol)
        } else {
            let (j, &c) = costs
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))?;
            (c < -tol).then_some(j)
        }
    }

    fn leaving(&self, col: usize, tol: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.k {
            let a = self.cells[i * self.width + col];
            if a > tol {
                let ratio = self.rhs(i).max(0.0) / a;
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - 1e-12 * br.max(1.0)
                            || (ratio <= br + 1e-12 * br.max(1.0) && self.basis[i] < self.basis[bi])
                        {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
        }
        best.map(|(i, _)| i)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let p = self.cells[row * w + col];
        for v in &mut self.cells[row * w..(row + 1) * w] {
            *v /= p;
        }
        let pivot_row = self.cells[row * w..(row + 1) * w].to_vec();
        for i in 0..=self.k {
            if i == row {
                continue;
            }
            let f = self.cells[i * w + col];
            if f != 0.0 {
                for (c, pv) in self.cells[i * w..(i + 1) * w].iter_mut().zip(&pivot_row) {
                    *c -= f * pv;
                }
                self.cells[i * w + col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    fn solution(&self, a: &Matrix, y: &[f64], iterations: usize) -> L1Solution {
        let mut x = vec![0.0; self.d];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.d {
                x[b] += self.rhs(i);
            } else if b < 2 * self.d {
                x[b - self.d] -= self.rhs(i);
            }
        }
        let residual = a.mul_vec(&x).iter().zip(y).map(|(u, v)| (u - v).abs()).sum();
        L1Solution { x, residual, iterations }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    /// Objective of a 1-column problem on a fine grid.
    fn grid_min(col: &[f64], y: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        let mut x = -20.0;
        while x <= 20.0 + 1e-9 {
            let obj: f64 = col.iter().zip(y).map(|(a, yi)| (a * x - yi).abs()).sum();
            best = best.min(obj);
            x += 1e-3;
        }
        best
    }

    #[test]
    fn identity_recovers_exactly() {
        let s = minimize_l1_residual(&Matrix::identity(2), &[1.0, 2.0]).unwrap();
        assert_eq!(s.x, vec![1.0, 2.0]);
        assert_eq!(s.residual, 0.0);
    }

    #[test]
    fn weighted_median_three_points() {
        let a = Matrix::from_rows(&[[1.0], [1.0], [1.0]]).unwrap();
        let y = [0.0, 0.0, 10.0];
        let s = minimize_l1_residual(&a, &y).unwrap();
        let oracle = grid_min(&[1.0, 1.0, 1.0], &y);
        assert!((oracle - 10.0).abs() < 1e-6);
        assert!((s.residual - oracle).abs() < 1e-7);
        assert!(s.x[0].abs() < 1e-9);
    }

    #[test]
    fn two_points_returns_a_vertex() {
        let a = Matrix::from_rows(&[[1.0], [1.0]]).unwrap();
        let y = [3.0, 5.0];
        let s = minimize_l1_residual(&a, &y).unwrap();
        let oracle = grid_min(&[1.0, 1.0], &y);
        assert!((oracle - 2.0).abs() < 1e-6);
        assert!((s.residual - 2.0).abs() < 1e-7);
        assert!((s.x[0] - 3.0).abs() < 1e-9 || (s.x[0] - 5.0).abs() < 1e-9, "{:?}", s.x);
    }

    #[test]
    fn negative_targets() {
        let a = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        let s = minimize_l1_residual(&a, &[-2.0, -3.0, -5.0]).unwrap();
        assert!(s.residual < 1e-9);
        assert!((s.x[0] + 2.0).abs() < 1e-9 && (s.x[1] + 3.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        let a = Matrix::identity(2);
        assert!(matches!(minimize_l1_residual(&a, &[1.0]), Err(LpError::Dimension { .. })));
        assert!(matches!(minimize_l1_residual(&a, &[1.0, f64::NAN]), Err(LpError::NonFinite)));
        assert!(matches!(minimize_l1_residual(&Matrix::zeros(0, 0), &[]), Err(LpError::Empty { .. })));
    }

    #[test]
    fn iteration_limit_carries_incumbent() {
        let mut r = rng::seeded(1);
        let a = Matrix::from_fn(20, 5, |_, _| r.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..20).map(|_| r.random_range(-3.0..3.0)).collect();
        let opts = LpOptions { max_iterations: 2, ..Default::default() };
        match minimize_l1_residual_with(&a, &y, &opts) {
            Err(LpError::IterationLimit { best, .. }) => assert_eq!(best.x.len(), 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pivot_rules_agree_on_objective() {
        let mut r = rng::seeded(2);
        for _ in 0..10 {
            let a = Matrix::from_fn(40, 8, |_, _| if r.random_bool(0.5) { 1.0 } else { -1.0 });
            let y: Vec<f64> = (0..40).map(|_| r.random_range(-10.0..10.0)).collect();
            let b = minimize_l1_residual(&a, &y).unwrap();
            let d = minimize_l1_residual_with(&a, &y, &LpOptions { rule: PivotRule::Dantzig, ..Default::default() })
                .unwrap();
            assert!((b.residual - d.residual).abs() < 1e-7);
        }
    }

    fn problem(seed: u64, k: usize, d: usize) -> (Matrix, Vec<f64>, rng::Rng) {
        let mut r = rng::seeded(seed);
        let a = Matrix::from_fn(k, d, |_, _| r.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..k).map(|_| r.random_range(-5.0..5.0)).collect();
        (a, y, r)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn dominates_random_probes(seed in any::<u64>(), k in 1usize..12, d in 1usize..4) {
            let (a, y, mut r) = problem(seed, k, d);
            let s = minimize_l1_residual(&a, &y).unwrap();
            for _ in 0..20 {
                let probe: Vec<f64> = s.x.iter().map(|v| v + r.random_range(-2.0..2.0)).collect();
                let obj: f64 = a.mul_vec(&probe).iter().zip(&y).map(|(u, v)| (u - v).abs()).sum();
                prop_assert!(s.residual <= obj + 1e-7);
            }
        }

        #[test]
        fn consistent_systems_are_fit_exactly(seed in any::<u64>(), extra in 0usize..6, d in 1usize..5) {
            let mut r = rng::seeded(seed);
            let k = d + extra;
            let a = Matrix::from_fn(k, d, |_, _| r.random_range(-1.0..1.0));
            prop_assume!(crate::linalg::smallest_singular_value(&a).unwrap() > 1e-3);
            let x0: Vec<f64> = (0..d).map(|_| r.random_range(-5.0..5.0)).collect();
            let y = a.mul_vec(&x0);
            let s = minimize_l1_residual(&a, &y).unwrap();
            for (u, v) in a.mul_vec(&s.x).iter().zip(&y) {
                prop_assert!((u - v).abs() < 1e-6);
            }
        }

        #[test]
        fn joint_scaling(seed in any::<u64>(), k in 2usize..10, d in 1usize..3, c in 0.1f64..10.0) {
            let (a, y, _) = problem(seed, k, d);
            let s1 = minimize_l1_residual(&a, &y).unwrap();
            let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
            let s2 = minimize_l1_residual(&a.scaled(c), &ys).unwrap();
            prop_assert!((s2.residual - c * s1.residual).abs() <= 1e-7 * c.max(1.0) * s1.residual.max(1.0));
            // Pivot sequences are identical up to rounding, so the vertex is too.
            for (u, v) in s1.x.iter().zip(&s2.x) {
                prop_assert!((u - v).abs() <= 1e-6 * u.abs().max(1.0));
            }
        }
    }
}
