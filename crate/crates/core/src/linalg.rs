//! Dense complex linear-algebra helpers on top of `faer`.
//!
//! Every inversion in the crate goes through [`factor`], which attaches a
//! 1-norm condition estimate and rejects singular or ill-conditioned input.

use faer::linalg::solvers::{DenseSolveCore, PartialPivLu, Solve};
use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = Mat<Complex64>;

/// Matrices whose 1-norm condition estimate exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const J: Complex64 = Complex64::new(0.0, 1.0);

/// LU factorization with partial pivoting plus its condition estimate.
pub struct Factored {
    lu: PartialPivLu<Complex64>,
    condition: f64,
}

impl Factored {
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Solves `A X = B`.
    pub fn solve(&self, rhs: &CMat) -> CMat {
        self.lu.solve(rhs)
    }

    /// Solves `A^T X = B`.
    pub fn solve_transpose(&self, rhs: &CMat) -> CMat {
        self.lu.solve_transpose(rhs)
    }

    pub fn inverse(&self) -> CMat {
        self.lu.inverse()
    }
}

/// Factors a square matrix, failing with [`Error::Conditioning`] when the
/// condition estimate is not finite or exceeds `max_condition`.
pub fn factor_with_limit(a: &CMat, what: &str, max_condition: f64) -> Result<Factored> {
    if a.nrows() != a.ncols() {
        return Err(Error::Structural(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Ok(Factored { lu: a.partial_piv_lu(), condition: 1.0 });
    }
    if !all_finite(a) {
        return Err(Error::Conditioning { what: what.to_string(), estimate: f64::INFINITY });
    }
    let lu = a.partial_piv_lu();
    let condition = norm1(a) * inverse_norm1_estimate(&lu, a.nrows());
    if !condition.is_finite() || condition > max_condition {
        return Err(Error::Conditioning { what: what.to_string(), estimate: condition });
    }
    Ok(Factored { lu, condition })
}

pub fn factor(a: &CMat, what: &str) -> Result<Factored> {
    factor_with_limit(a, what, MAX_CONDITION)
}

/// Hager/Higham estimate of `||A^-1||_1` from an existing LU factorization.
fn inverse_norm1_estimate(lu: &PartialPivLu<Complex64>, n: usize) -> f64 {
    let mut x = Mat::<Complex64>::from_fn(n, 1, |_, _| Complex64::new(1.0 / n as f64, 0.0));
    let mut estimate = 0.0;
    let mut last_j = usize::MAX;
    for _ in 0..5 {
        let y = lu.solve(&x);
        estimate = (0..n).map(|i| y[(i, 0)].norm()).sum::<f64>();
        if !estimate.is_finite() {
            return f64::INFINITY;
        }
        let xi = Mat::<Complex64>::from_fn(n, 1, |i, _| {
            let v = y[(i, 0)];
            let m = v.norm();
            if m == 0.0 {
                ONE
            } else {
                v / m
            }
        });
        let z = lu.solve_adjoint(&xi);
        let (j, zmax) = (0..n)
            .map(|i| (i, z[(i, 0)].norm()))
            .fold((0, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc });
        let ztx: f64 = (0..n).map(|i| (z[(i, 0)].conj() * x[(i, 0)]).re).sum();
        if zmax <= ztx || j == last_j {
            break;
        }
        last_j = j;
        x = Mat::<Complex64>::zeros(n, 1);
        x[(j, 0)] = ONE;
    }
    // Higham's alternating-sign probe guards against underestimates.
    let probe = Mat::<Complex64>::from_fn(n, 1, |i, _| {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
        Complex64::new(sign * (1.0 + i as f64 / denom), 0.0)
    });
    let y = lu.solve(&probe);
    let alt = 2.0 * (0..n).map(|i| y[(i, 0)].norm()).sum::<f64>() / (3.0 * n as f64);
    estimate.max(alt)
}

pub fn all_finite(a: &CMat) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].re.is_finite() && a[(i, j)].im.is_finite()))
}

/// Maximum absolute column sum.
pub fn norm1(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn frobenius(a: &CMat) -> f64 {
    frobenius_sq(a).sqrt()
}

pub fn frobenius_sq(a: &CMat) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)].norm_sqr();
        }
    }
    acc
}

pub fn max_abs(a: &CMat) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

/// `max |A - A^T| / max |A|`, zero for the empty or zero matrix.
pub fn symmetry_defect(a: &CMat) -> f64 {
    let scale = max_abs(a);
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..j {
            worst = worst.max((a[(i, j)] - a[(j, i)]).norm());
        }
    }
    worst / scale
}

pub fn diagonal(values: &[Complex64]) -> CMat {
    let n = values.len();
    Mat::from_fn(n, n, |i, j| if i == j { values[i] } else { ZERO })
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

/// Copies `a[rows, cols]` into an owned matrix.
pub fn block(a: &CMat, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> CMat {
    Mat::from_fn(rows.len(), cols.len(), |i, j| a[(rows.start + i, cols.start + j)])
}

/// `||A - B||_F / max(||B||_F, tiny)`.
pub fn relative_difference(a: &CMat, b: &CMat) -> f64 {
    let diff = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)]);
    frobenius(&diff) / frobenius(b).max(f64::MIN_POSITIVE)
}
