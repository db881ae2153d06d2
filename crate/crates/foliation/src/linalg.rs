//! Small dense linear algebra over a generic complex scalar: products,
//! Gauss-Jordan inversion, nullspaces, and rectangular solves. Pivot decisions
//! are exact on the rational path and tolerance-based on the numeric path.

use crate::scalar::Scalar;

/// Relative pivot threshold on the numeric path.
const PIVOT_TOL: f64 = 1e-9;

fn matrix_scale<C: Scalar>(a: &[Vec<C>]) -> f64 {
    a.iter()
        .flatten()
        .map(|x| x.abs())
        .fold(0.0f64, f64::max)
        .max(1.0)
}

fn negligible<C: Scalar>(x: &C, scale: f64) -> bool {
    x.is_zero_within(PIVOT_TOL * scale)
}

pub fn identity<C: Scalar>(n: usize) -> Vec<Vec<C>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { C::one() } else { C::zero() })
                .collect()
        })
        .collect()
}

pub fn mat_mul<C: Scalar>(a: &[Vec<C>], b: &[Vec<C>]) -> Vec<Vec<C>> {
    let n = a.len();
    let m = b[0].len();
    let k = b.len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut s = C::zero();
                    for l in 0..k {
                        s = s + a[i][l].clone() * b[l][j].clone();
                    }
                    s
                })
                .collect()
        })
        .collect()
}

pub fn mat_vec<C: Scalar>(a: &[Vec<C>], v: &[C]) -> Vec<C> {
    a.iter()
        .map(|row| {
            let mut s = C::zero();
            for (x, y) in row.iter().zip(v) {
                s = s + x.clone() * y.clone();
            }
            s
        })
        .collect()
}

pub fn mat_sub<C: Scalar>(a: &[Vec<C>], b: &[Vec<C>]) -> Vec<Vec<C>> {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| {
            ra.iter()
                .zip(rb)
                .map(|(x, y)| x.clone() - y.clone())
                .collect()
        })
        .collect()
}

pub fn is_zero_matrix<C: Scalar>(a: &[Vec<C>], scale: f64) -> bool {
    a.iter().flatten().all(|x| negligible(x, scale))
}

/// Gauss-Jordan inverse; None when the matrix is singular (up to the pivot
/// tolerance on the numeric path).
pub fn mat_inverse<C: Scalar>(a: &[Vec<C>]) -> Option<Vec<Vec<C>>> {
    let n = a.len();
    let scale = matrix_scale(a);
    let mut work: Vec<Vec<C>> = a.to_vec();
    let mut inv = identity::<C>(n);
    for col in 0..n {
        let pivot = (col..n)
            .filter(|&r| !negligible(&work[r][col], scale))
            .max_by(|&r1, &r2| {
                work[r1][col]
                    .abs()
                    .partial_cmp(&work[r2][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })?;
        work.swap(col, pivot);
        inv.swap(col, pivot);
        let p = work[col][col].clone();
        for j in 0..n {
            work[col][j] = work[col][j].clone() / p.clone();
            inv[col][j] = inv[col][j].clone() / p.clone();
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = work[r][col].clone();
            if f.is_zero() {
                continue;
            }
            for j in 0..n {
                work[r][j] = work[r][j].clone() - f.clone() * work[col][j].clone();
                inv[r][j] = inv[r][j].clone() - f.clone() * inv[col][j].clone();
            }
        }
    }
    Some(inv)
}

/// Basis of the right nullspace of `a` (list of coordinate vectors).
pub fn nullspace<C: Scalar>(a: &[Vec<C>]) -> Vec<Vec<C>> {
    let rows = a.len();
    if rows == 0 {
        return vec![];
    }
    let cols = a[0].len();
    let scale = matrix_scale(a);
    let mut work: Vec<Vec<C>> = a.to_vec();
    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut r = 0usize;
    for col in 0..cols {
        let pivot = (r..rows)
            .filter(|&i| !negligible(&work[i][col], scale))
            .max_by(|&r1, &r2| {
                work[r1][col]
                    .abs()
                    .partial_cmp(&work[r2][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
        let Some(pivot) = pivot else { continue };
        work.swap(r, pivot);
        let p = work[r][col].clone();
        for j in 0..cols {
            work[r][j] = work[r][j].clone() / p.clone();
        }
        for i in 0..rows {
            if i == r {
                continue;
            }
            let f = work[i][col].clone();
            if f.is_zero() {
                continue;
            }
            for j in 0..cols {
                work[i][j] = work[i][j].clone() - f.clone() * work[r][j].clone();
            }
        }
        pivot_cols.push(col);
        r += 1;
        if r == rows {
            break;
        }
    }
    let mut basis = Vec::new();
    for free in 0..cols {
        if pivot_cols.contains(&free) {
            continue;
        }
        let mut v = vec![C::zero(); cols];
        v[free] = C::one();
        for (rank_row, &pc) in pivot_cols.iter().enumerate() {
            v[pc] = -work[rank_row][free].clone();
        }
        basis.push(v);
    }
    basis
}

/// Solve B x = r for each column r of `rhs_cols`, where `b_cols` are the
/// columns of B (full column rank, consistent system). Returns the coordinate
/// columns, or None when the system is inconsistent beyond tolerance.
pub fn solve_in_span<C: Scalar>(b_cols: &[Vec<C>], rhs_cols: &[Vec<C>]) -> Option<Vec<Vec<C>>> {
    let n = b_cols[0].len();
    let k = b_cols.len();
    let nr = rhs_cols.len();
    // augmented rows: [B | rhs]
    let mut aug: Vec<Vec<C>> = (0..n)
        .map(|i| {
            let mut row: Vec<C> = b_cols.iter().map(|c| c[i].clone()).collect();
            row.extend(rhs_cols.iter().map(|c| c[i].clone()));
            row
        })
        .collect();
    let scale = matrix_scale(&aug);
    let mut pivot_rows: Vec<usize> = Vec::new();
    let mut r = 0usize;
    for col in 0..k {
        let pivot = (r..n)
            .filter(|&i| !negligible(&aug[i][col], scale))
            .max_by(|&r1, &r2| {
                aug[r1][col]
                    .abs()
                    .partial_cmp(&aug[r2][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })?;
        aug.swap(r, pivot);
        let p = aug[r][col].clone();
        for j in 0..k + nr {
            aug[r][j] = aug[r][j].clone() / p.clone();
        }
        for i in 0..n {
            if i == r {
                continue;
            }
            let f = aug[i][col].clone();
            if f.is_zero() {
                continue;
            }
            for j in 0..k + nr {
                aug[i][j] = aug[i][j].clone() - f.clone() * aug[r][j].clone();
            }
        }
        pivot_rows.push(r);
        r += 1;
    }
    // rows past the rank must have zero right-hand side
    for i in r..n {
        for j in k..k + nr {
            if !negligible(&aug[i][j], scale) {
                return None;
            }
        }
    }
    Some(
        (0..nr)
            .map(|c| (0..k).map(|row| aug[row][k + c].clone()).collect())
            .collect(),
    )
}

/// Growing row-echelon basis used for independence tests.
pub struct Echelon<C: Scalar> {
    rows: Vec<(usize, Vec<C>)>,
    scale: f64,
}

impl<C: Scalar> Echelon<C> {
    pub fn new(scale: f64) -> Self {
        Echelon { rows: Vec::new(), scale: scale.max(1.0) }
    }

    /// Insert `v` if independent of the current span; returns whether it was.
    pub fn insert(&mut self, v: &[C]) -> bool {
        let mut w = v.to_vec();
        for (piv, row) in &self.rows {
            let f = w[*piv].clone();
            if f.is_zero() {
                continue;
            }
            for (a, b) in w.iter_mut().zip(row) {
                *a = a.clone() - f.clone() * b.clone();
            }
        }
        let lead = w
            .iter()
            .enumerate()
            .filter(|(_, x)| !negligible(*x, self.scale))
            .max_by(|(_, a), (_, b)| {
                a.abs().partial_cmp(&b.abs()).unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|(i, _)| i);
        let Some(lead) = lead else { return false };
        let p = w[lead].clone();
        for x in w.iter_mut() {
            *x = x.clone() / p.clone();
        }
        self.rows.push((lead, w));
        true
    }
}

pub fn frobenius<C: Scalar>(a: &[Vec<C>]) -> f64 {
    a.iter()
        .flatten()
        .map(|x| x.abs().powi(2))
        .sum::<f64>()
        .sqrt()
}
