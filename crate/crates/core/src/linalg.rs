//! Small dense linear-algebra helpers on top of `nalgebra`.
//!
//! Everything here works on dynamically sized matrices; state dimensions in
//! this problem are tiny, so clarity wins over allocation counts.

use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Eigenvalue slack for positive-semidefinite comparisons, relative to
/// `max(1, max|entry|)` of the matrices compared.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Outcome of comparing two symmetric matrices in the Loewner order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PsdOrder {
    Equal,
    /// `x <= y`, i.e. `y - x` is PSD.
    Less,
    /// `x >= y`.
    Greater,
    Incomparable,
}

impl PsdOrder {
    pub fn reverse(self) -> Self {
        match self {
            PsdOrder::Less => PsdOrder::Greater,
            PsdOrder::Greater => PsdOrder::Less,
            other => other,
        }
    }

    /// `x <= y` holds (including equality).
    pub fn is_le(self) -> bool {
        matches!(self, PsdOrder::Less | PsdOrder::Equal)
    }

    pub fn is_ge(self) -> bool {
        matches!(self, PsdOrder::Greater | PsdOrder::Equal)
    }
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Largest absolute entry.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn min_eigenvalue(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |acc, &x| acc.min(x))
}

pub fn max_eigenvalue(m: &Matrix) -> f64 {
    symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::NEG_INFINITY, |acc, &x| acc.max(x))
}

pub fn is_psd(m: &Matrix, tol: f64) -> bool {
    min_eigenvalue(m) >= -tol
}

pub fn is_symmetric(m: &Matrix, tol: f64) -> bool {
    m.is_square() && max_abs(&(m - m.transpose())) <= tol
}

pub fn psd_compare(x: &Matrix, y: &Matrix, tol: f64) -> PsdOrder {
    let tol = tol * max_abs(x).max(max_abs(y)).max(1.0);
    let diff = y - x;
    let lo = min_eigenvalue(&diff);
    let hi = max_eigenvalue(&diff);
    match (lo >= -tol, hi <= tol) {
        (true, true) => PsdOrder::Equal,
        (true, false) => PsdOrder::Less,
        (false, true) => PsdOrder::Greater,
        (false, false) => PsdOrder::Incomparable,
    }
}

/// Eigenvalues of a general real square matrix (Hessenberg reduction followed
/// by shifted QR iterations, via the real Schur form).
pub fn eigenvalues(m: &Matrix) -> Vec<Complex<f64>> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    m.clone().complex_eigenvalues().iter().copied().collect()
}

pub fn modulus(z: Complex<f64>) -> f64 {
    libm::hypot(z.re, z.im)
}

pub fn spectral_radius(m: &Matrix) -> f64 {
    eigenvalues(m).iter().fold(0.0, |acc, &z| acc.max(modulus(z)))
}

pub fn spectral_norm(m: &Matrix) -> f64 {
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0, |acc: f64, &s| acc.max(s))
}

/// Numerical rank of a complex matrix, counting singular values above
/// `rel_tol` times the largest one.
pub fn complex_rank(m: &DMatrix<Complex<f64>>, rel_tol: f64) -> usize {
    let sv = m.clone().singular_values();
    let largest = sv.iter().fold(0.0, |acc: f64, &s| acc.max(s));
    if largest == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * largest).count()
}

/// Solves `X * d = n` for `X` (that is, `X = n d^{-1}`) without forming the
/// inverse. Returns `None` when `d` is numerically singular.
pub fn solve_right(n: &Matrix, d: &Matrix) -> Option<Matrix> {
    let lu = d.transpose().lu();
    let xt = lu.solve(&n.transpose())?;
    if xt.iter().all(|v| v.is_finite()) {
        Some(xt.transpose())
    } else {
        None
    }
}

/// `X = n d^+` for symmetric positive semidefinite `d`, dropping eigenvalues
/// at or below `rel_tol` times the largest. Agrees with [`solve_right`] when
/// `d` is well conditioned; a zero `d` gives `X = 0`.
pub fn psd_solve_right(n: &Matrix, d: &Matrix, rel_tol: f64) -> Option<Matrix> {
    let eig = symmetrize(d).symmetric_eigen();
    let largest = eig.eigenvalues.iter().fold(0.0, |acc: f64, &v| acc.max(v));
    let cut = rel_tol * largest;
    let inv = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&v| if v > cut { 1.0 / v } else { 0.0 }),
    );
    let u = &eig.eigenvectors;
    let x = n * u * Matrix::from_diagonal(&inv) * u.transpose();
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub(crate) fn check_square(context: &'static str, m: &Matrix, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            context,
            expected: (n, n),
            found: m.shape(),
        });
    }
    Ok(())
}

pub(crate) fn check_len(context: &'static str, v: &Vector, len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::DimensionMismatch {
            context,
            expected: (len, 1),
            found: (v.len(), 1),
        });
    }
    Ok(())
}

/// Builds a matrix from row slices. Panics on ragged input; meant for
/// constants and tests.
pub fn mat(rows: &[&[f64]]) -> Matrix {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    assert!(rows.iter().all(|r| r.len() == ncols), "ragged matrix literal");
    Matrix::from_fn(nrows, ncols, |i, j| rows[i][j])
}

pub fn scalar(x: f64) -> Matrix {
    Matrix::from_element(1, 1, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_compare_orders_diagonal_matrices() {
        let a = mat(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let b = mat(&[&[2.0, 0.0], &[0.0, 1.5]]);
        let c = mat(&[&[3.0, 0.0], &[0.0, 0.5]]);
        assert_eq!(psd_compare(&a, &b, PSD_TOLERANCE), PsdOrder::Less);
        assert_eq!(psd_compare(&b, &a, PSD_TOLERANCE), PsdOrder::Greater);
        assert_eq!(psd_compare(&a, &a, PSD_TOLERANCE), PsdOrder::Equal);
        assert_eq!(psd_compare(&b, &c, PSD_TOLERANCE), PsdOrder::Incomparable);
    }

    #[test]
    fn spectral_radius_of_rotation_like_matrix() {
        // eigenvalues 0.5 +- 0.5i
        let m = mat(&[&[0.5, -0.5], &[0.5, 0.5]]);
        assert!((spectral_radius(&m) - libm::sqrt(0.5)).abs() < 1e-12);
    }

    #[test]
    fn solve_right_matches_inverse() {
        let d = mat(&[&[4.0, 1.0], &[1.0, 3.0]]);
        let n = mat(&[&[1.0, 2.0], &[0.0, 1.0]]);
        let x = solve_right(&n, &d).unwrap();
        assert!(max_abs(&(&x * &d - &n)) < 1e-14);
        assert!(solve_right(&n, &Matrix::zeros(2, 2)).is_none());
        let y = psd_solve_right(&n, &d, 1e-12).unwrap();
        assert!(max_abs(&(&x - &y)) < 1e-14);
    }

    #[test]
    fn psd_solve_projects_onto_the_range() {
        // d = v v^T, n = w v^T: the minimum-norm solution is w v^T / |v|^2
        let d = mat(&[&[1.0, 2.0], &[2.0, 4.0]]);
        let n = mat(&[&[3.0, 6.0], &[-1.0, -2.0]]);
        let x = psd_solve_right(&n, &d, 1e-12).unwrap();
        assert!(max_abs(&(&x * &d - &n)) < 1e-12);
        let want = mat(&[&[3.0, 6.0], &[-1.0, -2.0]]) / 5.0;
        assert!(max_abs(&(&x - &want)) < 1e-14);
    }
}
