//! Dense complex matrix helpers shared by every other module.
//!
//! All matrices are `nalgebra::DMatrix<Complex64>` in column-major order, so
//! `as_slice()` of a matrix is its column-stacked vectorization.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;

/// Relative singular-value cutoff used by [`pinv`] and range projectors.
pub const PINV_CUTOFF: f64 = 1e-12;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn ensure_square(m: &ComplexMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Largest entry modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn frobenius(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `max |m - m*|`; zero for hermitian input.
pub fn hermitian_residual(m: &ComplexMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// `max |m - m^T|`; zero for symmetric input.
pub fn symmetric_residual(m: &ComplexMatrix) -> f64 {
    max_abs(&(m - m.transpose()))
}

/// `max |m* m - I|`.
pub fn unitary_residual(m: &ComplexMatrix) -> f64 {
    let n = m.ncols();
    max_abs(&(m.adjoint() * m - ComplexMatrix::identity(n, n)))
}

/// Kronecker product `a ⊗ b` with `a` as the slow (outer) index.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Entrywise complex conjugate, written `X^#` in the block formulas.
pub fn conj(m: &ComplexMatrix) -> ComplexMatrix {
    m.map(|z| z.conj())
}

/// Moore–Penrose pseudo-inverse by SVD; singular values below
/// `PINV_CUTOFF * sigma_max` are treated as zero.
pub fn pinv(m: &ComplexMatrix) -> ComplexMatrix {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return ComplexMatrix::zeros(cols, rows);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = PINV_CUTOFF * smax;
    let mut out = ComplexMatrix::zeros(cols, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        let vk = v_t.row(k).adjoint();
        let uk = u.column(k).adjoint();
        out += (vk * uk) * re(1.0 / s);
    }
    out
}

/// Orthogonal projector onto the column space of `m`.
pub fn range_projector(m: &ComplexMatrix) -> ComplexMatrix {
    let rows = m.nrows();
    if m.ncols() == 0 {
        return ComplexMatrix::zeros(rows, rows);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("svd computed with u");
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let mut p = ComplexMatrix::zeros(rows, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > PINV_CUTOFF * smax && s > 0.0 {
            let uk = u.column(k);
            p += &uk * uk.adjoint();
        }
    }
    p
}

/// Outcome of a positive-semidefiniteness test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsdReport {
    pub psd: bool,
    pub min_eigenvalue: f64,
    pub hermitian_residual: f64,
}

/// Hermitian within `tol` and minimum eigenvalue `>= -tol`.
pub fn is_psd(m: &ComplexMatrix, tol: f64) -> Result<PsdReport> {
    let n = ensure_square(m)?;
    let herm = hermitian_residual(m);
    let min_eigenvalue = if n == 0 {
        0.0
    } else {
        min_eigenvalue_hermitian(&((m + m.adjoint()) * re(0.5)))
    };
    Ok(PsdReport {
        psd: herm <= tol && min_eigenvalue >= -tol,
        min_eigenvalue,
        hermitian_residual: herm,
    })
}

/// Smallest eigenvalue of a hermitian matrix (the anti-hermitian part is ignored).
pub fn min_eigenvalue_hermitian(m: &ComplexMatrix) -> f64 {
    let h = (m + m.adjoint()) * re(0.5);
    h.symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue_hermitian(m: &ComplexMatrix) -> f64 {
    let h = (m + m.adjoint()) * re(0.5);
    h.symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Matrix exponential (scaling and squaring with a Padé approximant).
pub fn matexp(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = ensure_square(m)?;
    if n == 0 {
        return Ok(m.clone());
    }
    Ok(m.exp())
}

/// Largest singular value.
pub fn spectral_norm(m: &ComplexMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn trace(m: &ComplexMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Inverse via LU; errors when a pivot vanishes.
pub fn inverse(m: &ComplexMatrix, what: &str) -> Result<ComplexMatrix> {
    ensure_square(m)?;
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular(what.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(r, cols, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn pinv_of_identity_and_rank_deficient_diagonal() {
        let id = ComplexMatrix::identity(2, 2);
        assert!(max_abs(&(pinv(&id) - &id)) < 1e-15);
        let d = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![re(2.0), re(0.0)]));
        let expected = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![re(0.5), re(0.0)]));
        assert!(max_abs(&(pinv(&d) - expected)) < 1e-15);
    }

    #[test]
    fn penrose_conditions_on_rank_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 3, 2) * random_matrix(&mut rng, 2, 3);
            let p = pinv(&a);
            assert!(max_abs(&(&a * &p * &a - &a)) < 1e-10);
            assert!(max_abs(&(&p * &a * &p - &p)) < 1e-10);
            assert!(hermitian_residual(&(&a * &p)) < 1e-10);
            assert!(hermitian_residual(&(&p * &a)) < 1e-10);
        }
    }

    #[test]
    fn psd_predicate() {
        let z = ComplexMatrix::zeros(3, 3);
        assert!(is_psd(&z, 1e-9).unwrap().psd);
        let d = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![re(1.0), re(-0.1)]));
        let rep = is_psd(&d, 1e-9).unwrap();
        assert!(!rep.psd);
        assert!((rep.min_eigenvalue + 0.1).abs() < 1e-14);
        assert!(is_psd(&ComplexMatrix::zeros(2, 3), 1e-9).is_err());
    }

    #[test]
    fn matexp_basics() {
        let z = ComplexMatrix::zeros(3, 3);
        assert!(max_abs(&(matexp(&z).unwrap() - ComplexMatrix::identity(3, 3))) < 1e-15);
        let d = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.3, 1.0), re(-2.0)]));
        let e = matexp(&d).unwrap();
        assert!((e[(0, 0)] - c(0.3, 1.0).exp()).norm() < 1e-14);
        assert!((e[(1, 1)] - re((-2.0f64).exp())).norm() < 1e-14);
        assert!(e[(0, 1)].norm() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 4, 4);
            let prod = matexp(&a).unwrap() * matexp(&(-&a)).unwrap();
            assert!(max_abs(&(prod - ComplexMatrix::identity(4, 4))) < 1e-10);
            let skew = &a - a.adjoint();
            assert!(unitary_residual(&matexp(&skew).unwrap()) < 1e-10);
        }
        assert!(matexp(&ComplexMatrix::zeros(2, 3)).is_err());
    }
}
