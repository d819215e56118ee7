//! Permanents and extended permanents of nonnegative matrices.
//!
//! The extended permanent of an `M x N` matrix `A` is `Per([I_M A])`: the sum,
//! over every partial one-to-one matching of rows to columns, of the product
//! of the matched entries (the empty matching contributes 1). Equivalently it
//! is the sum of `Per(A[α, β])` over all equal-size row and column subsets.
//!
//! Two evaluators are provided:
//! * [`extended_permanent`] runs a row-by-row dynamic program over the set
//!   of already-matched columns, `O(M N 2^min(M,N))`, with only nonnegative
//!   additions;
//! * [`graded_minor_sums`] enumerates the square minors explicitly and
//!   evaluates each with Ryser's formula, grouped by order `k`.

use crate::error::{Error, Result};

/// Dense nonnegative real matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Structure(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Domain(format!(
                "entries must be finite and nonnegative, found {bad}"
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Structure("ragged rows".into()));
        }
        Self::new(r, c, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(value.is_finite() && value >= 0.0);
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        assert!(c.is_finite() && c >= 0.0, "scale must be finite and nonnegative");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// `c * self * diag(weights)`: column `j` multiplied by `c * weights[j]`.
    pub fn scale_columns(&self, c: f64, weights: &[f64]) -> Self {
        assert_eq!(weights.len(), self.cols);
        let mut data = self.data.clone();
        for row in data.chunks_mut(self.cols.max(1)) {
            for (v, w) in row.iter_mut().zip(weights) {
                *v *= c * w;
            }
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Submatrix on the given row and column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            for &j in cols {
                data.push(self.get(i, j));
            }
        }
        Self {
            rows: rows.len(),
            cols: cols.len(),
            data,
        }
    }

    pub fn without_col(&self, col: usize) -> Self {
        let rows: Vec<usize> = (0..self.rows).collect();
        let cols: Vec<usize> = (0..self.cols).filter(|&j| j != col).collect();
        self.select(&rows, &cols)
    }

    pub fn without_row_col(&self, row: usize, col: usize) -> Self {
        let rows: Vec<usize> = (0..self.rows).filter(|&i| i != row).collect();
        let cols: Vec<usize> = (0..self.cols).filter(|&j| j != col).collect();
        self.select(&rows, &cols)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (acc, v) in s.iter_mut().zip(self.row(i)) {
                *acc += v;
            }
        }
        s
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Drops all-zero rows and columns, which never contribute to a
    /// (extended) permanent term with nonzero weight.
    fn compact(&self) -> Self {
        let rows: Vec<usize> = (0..self.rows)
            .filter(|&i| self.row(i).iter().any(|&v| v != 0.0))
            .collect();
        let cols: Vec<usize> = (0..self.cols)
            .filter(|&j| (0..self.rows).any(|i| self.get(i, j) != 0.0))
            .collect();
        if rows.len() == self.rows && cols.len() == self.cols {
            self.clone()
        } else {
            self.select(&rows, &cols)
        }
    }
}

/// Largest order accepted by [`permanent_exact`].
pub const EXACT_LIMIT: usize = 7;
/// Largest order accepted by [`permanent_ryser`].
pub const RYSER_LIMIT: usize = 30;
/// Largest `min(rows, cols)` (after dropping zero rows and columns) accepted
/// by the extended-permanent dynamic program.
pub const EXTENDED_LIMIT: usize = 24;

fn require_square(a: &RealMatrix) -> Result<usize> {
    if a.rows != a.cols {
        return Err(Error::Structure(format!(
            "permanent needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    Ok(a.rows)
}

/// Permanent by direct summation over all `n!` permutations. Reference
/// evaluator for `n <= 7`.
pub fn permanent_exact(a: &RealMatrix) -> Result<f64> {
    let n = require_square(a)?;
    if n > EXACT_LIMIT {
        return Err(Error::Size {
            what: "permutation-sum permanent",
            order: n,
            limit: EXACT_LIMIT,
        });
    }
    fn walk(a: &RealMatrix, row: usize, used: u32, prod: f64, acc: &mut f64) {
        if row == a.rows {
            *acc += prod;
            return;
        }
        for j in 0..a.cols {
            if used & (1 << j) == 0 {
                walk(a, row + 1, used | (1 << j), prod * a.get(row, j), acc);
            }
        }
    }
    let mut acc = 0.0;
    walk(a, 0, 0, 1.0, &mut acc);
    Ok(acc)
}

/// Permanent by Ryser's inclusion-exclusion formula, visiting column subsets
/// in Gray-code order and accumulating with Kahan summation.
pub fn permanent_ryser(a: &RealMatrix) -> Result<f64> {
    let n = require_square(a)?;
    if n > RYSER_LIMIT {
        return Err(Error::Size {
            what: "Ryser permanent",
            order: n,
            limit: RYSER_LIMIT,
        });
    }
    Ok(ryser_unchecked(a))
}

fn ryser_unchecked(a: &RealMatrix) -> f64 {
    let n = a.rows;
    if n == 0 {
        return 1.0;
    }
    // Per(A) = (-1)^n sum_{S} (-1)^{|S|} prod_i sum_{j in S} a_ij
    let mut row_sums = vec![0.0; n];
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut in_set = vec![false; n];
    let mut set_size = 0usize;
    let total: u64 = 1 << n;
    for k in 1..total {
        let j = k.trailing_zeros() as usize;
        if in_set[j] {
            in_set[j] = false;
            set_size -= 1;
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s -= a.get(i, j);
            }
        } else {
            in_set[j] = true;
            set_size += 1;
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s += a.get(i, j);
            }
        }
        let prod: f64 = row_sums.iter().product();
        let term = if (n - set_size).is_multiple_of(2) { prod } else { -prod };
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Extended permanent `Per([I_M A])` of a nonnegative `M x N` matrix.
///
/// Overflows to `+inf` for very large entries; use
/// [`extended_permanent_log2`] there.
///
/// # Panics
/// If `min(M, N)` exceeds [`EXTENDED_LIMIT`] after dropping zero rows and
/// columns.
pub fn extended_permanent(a: &RealMatrix) -> f64 {
    let a = oriented(a);
    let c = a.cols;
    let mut dp = vec![0.0; 1usize << c];
    dp[0] = 1.0;
    for i in 0..a.rows {
        push_row(&mut dp, a.row(i), 1.0);
    }
    dp.iter().sum()
}

/// `log2` of [`extended_permanent`], finite whenever the true value is.
///
/// Each row's options (unmatched, or matched to column `j`) are divided by a
/// power of two that brings the largest weight to at most 1, and the state
/// vector is renormalized after every row; the exponents are accumulated
/// separately.
pub fn extended_permanent_log2(a: &RealMatrix) -> f64 {
    let a = oriented(a);
    let c = a.cols;
    let mut dp = vec![0.0; 1usize << c];
    dp[0] = 1.0;
    let mut log2_scale = 0.0_f64;
    for i in 0..a.rows {
        let row = a.row(i);
        let peak = row.iter().copied().fold(1.0_f64, f64::max);
        let shift = if peak > 1.0 { peak.log2().ceil() } else { 0.0 };
        let row_scale = (-shift).exp2();
        log2_scale += shift;
        let scaled: Vec<f64> = row.iter().map(|v| v * row_scale).collect();
        push_row(&mut dp, &scaled, row_scale);
        let top = dp.iter().copied().fold(0.0_f64, f64::max);
        if top > 0.0 {
            let e = top.log2().floor();
            if e != 0.0 {
                let f = (-e).exp2();
                dp.iter_mut().for_each(|v| *v *= f);
                log2_scale += e;
            }
        }
    }
    log2_scale + dp.iter().sum::<f64>().log2()
}

/// Orientation with the smaller dimension as columns, zero lines removed.
fn oriented(a: &RealMatrix) -> RealMatrix {
    let a = a.compact();
    let a = if a.cols > a.rows { a.transpose() } else { a };
    assert!(
        a.cols <= EXTENDED_LIMIT,
        "extended permanent: effective order {} exceeds limit {EXTENDED_LIMIT}",
        a.cols
    );
    a
}

/// One row of the matching DP. `dp[mask]` is the weight of all partial
/// matchings of the rows seen so far that use exactly the columns in `mask`.
/// Masks are visited in decreasing order so every update reads the previous
/// row's value.
fn push_row(dp: &mut [f64], row: &[f64], skip_weight: f64) {
    let c = row.len();
    for mask in (0..dp.len()).rev() {
        let base = dp[mask];
        if base == 0.0 {
            continue;
        }
        for (j, &w) in row.iter().enumerate().take(c) {
            let bit = 1usize << j;
            if mask & bit == 0 && w != 0.0 {
                dp[mask | bit] += base * w;
            }
        }
        dp[mask] = base * skip_weight;
    }
}

/// `[S_0, S_1, ..., S_K]` with `S_k = sum over |α| = |β| = k of Per(A[α, β])`
/// and `K = min(M, N)`; `S_0 = 1`. Their sum is the extended permanent.
///
/// Enumerates every pair of subsets, so it is meant for small matrices.
pub fn graded_minor_sums(a: &RealMatrix) -> Vec<f64> {
    let kmax = a.rows.min(a.cols);
    assert!(kmax <= RYSER_LIMIT);
    let row_sets = subsets_by_size(a.rows);
    let col_sets = subsets_by_size(a.cols);
    (0..=kmax)
        .map(|k| {
            let mut s = 0.0;
            for alpha in &row_sets[k] {
                for beta in &col_sets[k] {
                    s += ryser_unchecked(&a.select(alpha, beta));
                }
            }
            s
        })
        .collect()
}

fn subsets_by_size(n: usize) -> Vec<Vec<Vec<usize>>> {
    assert!(n < 31, "subset enumeration limited to 30 elements");
    let mut out = vec![Vec::new(); n + 1];
    for mask in 0u32..(1u32 << n) {
        let members: Vec<usize> = (0..n).filter(|&j| mask & (1 << j) != 0).collect();
        out[members.len()].push(members);
    }
    out
}

/// Split of `F(λ) = Per~(γ Ω diag(λ))` into the part independent of `λ_i`
/// and the coefficient of `λ_i`: `F = f0 + λ_i f1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarginalExpansion {
    /// Extended permanent with transmit mode `i` removed.
    pub f0: f64,
    /// Marginal utility coefficient of mode `i`.
    pub f1: f64,
}

/// Affine expansion of the extended permanent in `λ_i` (0-based `i`).
///
/// `f0 = Per~(γ Ω_(i) diag(λ_(i)))` and
/// `f1 = γ Σ_m Ω[m,i] Per~(γ Ω^(i)_(m) diag(λ_(i)))`, where `Ω_(i)` drops
/// column `i` and `Ω^(i)_(m)` also drops row `m`.
pub fn marginal_expansion(
    omega: &RealMatrix,
    lambda: &[f64],
    gamma: f64,
    i: usize,
) -> Result<MarginalExpansion> {
    if lambda.len() != omega.cols {
        return Err(Error::Structure(format!(
            "power vector has {} entries for {} transmit modes",
            lambda.len(),
            omega.cols
        )));
    }
    if i >= omega.cols {
        return Err(Error::Structure(format!(
            "mode index {i} out of range for {} transmit modes",
            omega.cols
        )));
    }
    let lambda_rest: Vec<f64> = lambda
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &l)| l)
        .collect();

    let f0 = extended_permanent(&omega.without_col(i).scale_columns(gamma, &lambda_rest));
    let mut f1 = 0.0;
    for m in 0..omega.rows {
        let w = omega.get(m, i);
        if w == 0.0 {
            continue;
        }
        let minor = omega.without_row_col(m, i).scale_columns(gamma, &lambda_rest);
        f1 += w * extended_permanent(&minor);
    }
    Ok(MarginalExpansion {
        f0,
        f1: gamma * f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> RealMatrix {
        RealMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn exact_permanent_small_cases() {
        assert_eq!(permanent_exact(&m(&[&[5.0]])).unwrap(), 5.0);
        let i3 = m(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        assert_eq!(permanent_exact(&i3).unwrap(), 1.0);
        // 1*4 + 2*3
        assert_eq!(permanent_exact(&m(&[&[1.0, 2.0], &[3.0, 4.0]])).unwrap(), 10.0);
    }

    #[test]
    fn exact_permanent_size_limit() {
        let big = RealMatrix::filled(8, 8, 1.0);
        assert!(matches!(permanent_exact(&big), Err(Error::Size { .. })));
        assert!(matches!(
            permanent_exact(&RealMatrix::zeros(2, 3)),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn ryser_known_values() {
        assert_eq!(permanent_ryser(&RealMatrix::filled(4, 4, 1.0)).unwrap(), 24.0);
        assert_eq!(permanent_ryser(&m(&[&[1.0, 2.0], &[3.0, 4.0]])).unwrap(), 10.0);
        assert_eq!(permanent_ryser(&RealMatrix::filled(0, 0, 1.0)).unwrap(), 1.0);
    }

    #[test]
    fn negative_entries_rejected() {
        assert!(matches!(
            RealMatrix::new(1, 2, vec![1.0, -0.5]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn extended_permanent_small_cases() {
        assert_eq!(extended_permanent(&m(&[&[3.0]])), 4.0);
        assert_eq!(extended_permanent(&RealMatrix::zeros(3, 5)), 1.0);
        // 1 + (1+2+3+4) + 10
        assert_eq!(extended_permanent(&m(&[&[1.0, 2.0], &[3.0, 4.0]])), 21.0);
        assert_eq!(
            graded_minor_sums(&m(&[&[1.0, 2.0], &[3.0, 4.0]])),
            vec![1.0, 10.0, 10.0]
        );
    }

    #[test]
    fn extended_permanent_log2_small_cases() {
        assert_eq!(extended_permanent_log2(&RealMatrix::zeros(2, 2)), 0.0);
        let v = extended_permanent_log2(&m(&[&[1.0, 2.0], &[3.0, 4.0]]));
        assert!((v - 21f64.log2()).abs() < 1e-14);
    }

    #[test]
    fn extended_permanent_log2_huge_entries() {
        // [[x]] -> log2(1 + x) with x far beyond f64 range after squaring.
        let x = 1e300;
        let a = RealMatrix::filled(2, 2, x);
        // 1 + 4x + 2x^2
        let expected = 1.0 + 2.0 * x.log2();
        assert!((extended_permanent_log2(&a) - expected).abs() < 1e-9);
        assert!(extended_permanent(&a).is_infinite());
    }

    #[test]
    fn marginal_expansion_scalar() {
        let omega = m(&[&[2.5]]);
        let e = marginal_expansion(&omega, &[1.0], 0.4, 0).unwrap();
        assert_eq!(e.f0, 1.0);
        assert!((e.f1 - 0.4 * 2.5).abs() < 1e-15);
    }

    #[test]
    fn marginal_expansion_zero_column() {
        let omega = m(&[&[1.0, 0.0, 2.0], &[0.5, 0.0, 1.0]]);
        let e = marginal_expansion(&omega, &[1.0, 1.0, 1.0], 2.0, 1).unwrap();
        assert_eq!(e.f1, 0.0);
        assert!(marginal_expansion(&omega, &[1.0, 1.0, 1.0], 2.0, 3).is_err());
        assert!(marginal_expansion(&omega, &[1.0, 1.0], 2.0, 0).is_err());
    }
}
