//! Small dense complex helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, Dyn};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Cholesky factor of the Hermitian part of `a`.
pub fn cholesky(a: &CMat, what: &str) -> Result<Cholesky<C64, Dyn>> {
    let fail = || Error::NotPositiveDefinite(what.to_string());
    let ch = Cholesky::new(hermitian_part(a)).ok_or_else(fail)?;
    // the complex square root never fails, so a negative pivot shows up as
    // an imaginary diagonal entry
    let l = ch.l_dirty();
    let real_positive = |z: C64| z.re.is_finite() && z.re > 0.0 && z.im.abs() <= 1e-8 * z.re;
    if (0..l.nrows()).all(|i| real_positive(l[(i, i)])) {
        Ok(ch)
    } else {
        Err(fail())
    }
}

/// Solves `A X = B` for Hermitian positive definite `A`.
pub fn solve_hpd(a: &CMat, b: &CMat, what: &str) -> Result<CMat> {
    Ok(cholesky(a, what)?.solve(b))
}

pub fn column_norm_sq(m: &CMat, j: usize) -> f64 {
    m.column(j).iter().map(|z| z.norm_sqr()).sum()
}

pub fn row_norm_sq(m: &CMat, i: usize) -> f64 {
    m.row(i).iter().map(|z| z.norm_sqr()).sum()
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Hermitian check with an absolute tolerance on `|A - A^H|`.
pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    m.is_square() && max_abs_diff(m, &m.adjoint()) <= tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_hpd_recovers_rhs() {
        let a = CMat::from_row_slice(
            2,
            2,
            &[
                C64::new(4.0, 0.0),
                C64::new(1.0, 1.0),
                C64::new(1.0, -1.0),
                C64::new(3.0, 0.0),
            ],
        );
        let b = CMat::from_row_slice(2, 1, &[C64::new(1.0, 2.0), C64::new(-1.0, 0.5)]);
        let x = solve_hpd(&a, &b, "test").unwrap();
        assert!(max_abs_diff(&(&a * &x), &b) < 1e-13);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(-1.0, 0.0),
        ]));
        assert!(matches!(
            cholesky(&a, "noise"),
            Err(Error::NotPositiveDefinite(_))
        ));
    }
}
