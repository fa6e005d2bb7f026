//! Truncated tensor-product spaces and dense operators on them.
//!
//! Factor 0 is the outermost (slowest) index of the Kronecker product, so an
//! operator `x` on factor 1 of `[2, 2]` embeds as `I₂ ⊗ x`. Mode operators are
//! the top-left blocks of the infinite ladder matrices: `[a, a*] = I` fails
//! only on the top Fock level of each truncated factor.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, re, ComplexMatrix, C64};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HilbertSpec {
    dims: Vec<usize>,
    total: usize,
}

impl HilbertSpec {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidSpace("no factors".into()));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidSpace(format!("factor {pos} has dimension 0")));
        }
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidSpace("total dimension overflows".into()))?;
        Ok(Self { dims, total })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.total
    }

    pub fn num_factors(&self) -> usize {
        self.dims.len()
    }

    /// Appends further factors (e.g. ancilla modes) after the existing ones.
    pub fn extend(&self, extra: &[usize]) -> Result<Self> {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(extra);
        Self::new(dims)
    }

    fn check_factor(&self, factor: usize) -> Result<usize> {
        self.dims.get(factor).copied().ok_or(Error::FactorOutOfRange {
            index: factor,
            factors: self.dims.len(),
        })
    }

    /// Product of the dimensions after `factor`.
    fn stride(&self, factor: usize) -> usize {
        self.dims[factor + 1..].iter().product()
    }

    /// Level of `factor` in the product-basis state with flat index `index`.
    pub fn level(&self, index: usize, factor: usize) -> usize {
        (index / self.stride(factor)) % self.dims[factor]
    }

    /// Flat index of the product-basis state with the given per-factor levels.
    pub fn basis_index(&self, levels: &[usize]) -> Result<usize> {
        if levels.len() != self.dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} levels given for {} factors",
                levels.len(),
                self.dims.len()
            )));
        }
        let mut idx = 0;
        for (f, (&l, &d)) in levels.iter().zip(&self.dims).enumerate() {
            if l >= d {
                return Err(Error::InvalidSpace(format!("factor {f}: level {l} outside 0..{d}")));
            }
            idx = idx * d + l;
        }
        Ok(idx)
    }
}

/// A dense matrix acting on a [`HilbertSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    space: HilbertSpec,
    matrix: ComplexMatrix,
}

impl Operator {
    pub fn new(space: HilbertSpec, matrix: ComplexMatrix) -> Result<Self> {
        let n = space.total_dim();
        if matrix.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, space has dimension {n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { space, matrix })
    }

    pub fn identity(space: &HilbertSpec) -> Self {
        let n = space.total_dim();
        Self { space: space.clone(), matrix: ComplexMatrix::identity(n, n) }
    }

    pub fn zero(space: &HilbertSpec) -> Self {
        let n = space.total_dim();
        Self { space: space.clone(), matrix: ComplexMatrix::zeros(n, n) }
    }

    pub fn scalar(space: &HilbertSpec, value: C64) -> Self {
        let n = space.total_dim();
        Self {
            space: space.clone(),
            matrix: ComplexMatrix::identity(n, n) * value,
        }
    }

    pub fn space(&self) -> &HilbertSpec {
        &self.space
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self { space: self.space.clone(), matrix: self.matrix.adjoint() }
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(Self { space: self.space.clone(), matrix: &self.matrix * &other.matrix })
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(Self { space: self.space.clone(), matrix: &self.matrix + &other.matrix })
    }

    /// Im{X} = (X - X*)/2i, always self-adjoint.
    pub fn im_part(&self) -> Self {
        let m = (&self.matrix - self.matrix.adjoint()) * C64::new(0.0, -0.5);
        Self { space: self.space.clone(), matrix: m }
    }

    pub fn hermitian_residual(&self) -> f64 {
        linalg::hermitian_residual(&self.matrix)
    }

    pub fn norm(&self) -> f64 {
        linalg::frobenius(&self.matrix)
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.matrix)
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.matrix)
    }

    /// `Some(c)` when the operator equals `c·I` within `tol` (absolute, entrywise).
    pub fn as_scalar(&self, tol: f64) -> Option<C64> {
        let n = self.dim();
        if n == 0 {
            return Some(C64::new(0.0, 0.0));
        }
        let c = self.matrix[(0, 0)];
        let resid = linalg::max_abs(&(&self.matrix - ComplexMatrix::identity(n, n) * c));
        (resid <= tol).then_some(c)
    }

    /// `self ⊗ I` on a space with extra factors appended.
    pub fn extend(&self, extra: &[usize]) -> Result<Self> {
        let space = self.space.extend(extra)?;
        let k: usize = extra.iter().product();
        let matrix = linalg::kron(&self.matrix, &ComplexMatrix::identity(k, k));
        Ok(Self { space, matrix })
    }

    pub fn distance(&self, other: &Self) -> f64 {
        linalg::max_abs(&(&self.matrix - &other.matrix))
    }
}

fn assert_same(a: &Operator, b: &Operator) {
    assert!(a.space == b.space, "operator space mismatch: {:?} vs {:?}", a.space.dims(), b.space.dims());
}

impl Add<&Operator> for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_same(self, rhs);
        Operator { space: self.space.clone(), matrix: &self.matrix + &rhs.matrix }
    }
}

impl Add<Operator> for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        &self + &rhs
    }
}

impl Sub<&Operator> for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_same(self, rhs);
        Operator { space: self.space.clone(), matrix: &self.matrix - &rhs.matrix }
    }
}

impl Sub<Operator> for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        &self - &rhs
    }
}

impl AddAssign<&Operator> for Operator {
    fn add_assign(&mut self, rhs: &Operator) {
        assert_same(self, rhs);
        self.matrix += &rhs.matrix;
    }
}

impl Mul<&Operator> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        assert_same(self, rhs);
        Operator { space: self.space.clone(), matrix: &self.matrix * &rhs.matrix }
    }
}

impl Mul<Operator> for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        &self * &rhs
    }
}

impl Mul<C64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: C64) -> Operator {
        Operator { space: self.space.clone(), matrix: &self.matrix * rhs }
    }
}

impl Mul<C64> for Operator {
    type Output = Operator;
    fn mul(mut self, rhs: C64) -> Operator {
        self.matrix *= rhs;
        self
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: f64) -> Operator {
        self * re(rhs)
    }
}

impl Mul<f64> for Operator {
    type Output = Operator;
    fn mul(self, rhs: f64) -> Operator {
        self * re(rhs)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self * -1.0
    }
}

impl Neg for Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self * -1.0
    }
}

/// `[x, y] = xy - yx`.
pub fn commutator(x: &Operator, y: &Operator) -> Result<Operator> {
    if x.space != y.space {
        return Err(Error::SpaceMismatch);
    }
    Ok(Operator {
        space: x.space.clone(),
        matrix: &x.matrix * &y.matrix - &y.matrix * &x.matrix,
    })
}

/// Infallible commutator for operators already known to share a space.
pub(crate) fn comm(x: &Operator, y: &Operator) -> Operator {
    x * y - y * x
}

/// Identity on every factor except `factor`, where `local` acts.
pub fn embed(local: &ComplexMatrix, space: &HilbertSpec, factor: usize) -> Result<Operator> {
    let d = space.check_factor(factor)?;
    if local.shape() != (d, d) {
        return Err(Error::DimensionMismatch(format!(
            "local operator is {}x{}, factor {factor} has dimension {d}",
            local.nrows(),
            local.ncols()
        )));
    }
    let before: usize = space.dims[..factor].iter().product();
    let after = space.stride(factor);
    let m = linalg::kron(
        &linalg::kron(&ComplexMatrix::identity(before, before), local),
        &ComplexMatrix::identity(after, after),
    );
    Operator::new(space.clone(), m)
}

/// Truncated lowering matrix `(a)_{i,i+1} = √(i+1)` of size `d`.
pub fn ladder_matrix(d: usize) -> ComplexMatrix {
    DMatrix::from_fn(d, d, |i, j| if j == i + 1 { re((j as f64).sqrt()) } else { re(0.0) })
}

pub fn annihilator(space: &HilbertSpec, factor: usize) -> Result<Operator> {
    let d = space.check_factor(factor)?;
    if d < 2 {
        return Err(Error::TrivialFactor(factor));
    }
    embed(&ladder_matrix(d), space, factor)
}

pub fn creator(space: &HilbertSpec, factor: usize) -> Result<Operator> {
    Ok(annihilator(space, factor)?.adjoint())
}

pub fn number(space: &HilbertSpec, factor: usize) -> Result<Operator> {
    let a = annihilator(space, factor)?;
    Ok(&a.adjoint() * &a)
}

/// Qubit operators. Level 0 is the ground state, so `sigma_minus` coincides
/// with the two-level lowering matrix and `sigma_z` is the Pauli Z matrix
/// (+1 on the ground state).
pub mod qubit {
    use super::*;

    fn check(space: &HilbertSpec, factor: usize) -> Result<()> {
        let d = space.check_factor(factor)?;
        if d != 2 {
            return Err(Error::DimensionMismatch(format!(
                "qubit operator on factor {factor} of dimension {d}"
            )));
        }
        Ok(())
    }

    pub fn sigma_minus(space: &HilbertSpec, factor: usize) -> Result<Operator> {
        check(space, factor)?;
        embed(&ladder_matrix(2), space, factor)
    }

    pub fn sigma_plus(space: &HilbertSpec, factor: usize) -> Result<Operator> {
        Ok(sigma_minus(space, factor)?.adjoint())
    }

    pub fn sigma_z(space: &HilbertSpec, factor: usize) -> Result<Operator> {
        check(space, factor)?;
        let m = DMatrix::from_row_slice(2, 2, &[re(1.0), re(0.0), re(0.0), re(-1.0)]);
        embed(&m, space, factor)
    }

    pub fn sigma_x(space: &HilbertSpec, factor: usize) -> Result<Operator> {
        check(space, factor)?;
        let m = DMatrix::from_row_slice(2, 2, &[re(0.0), re(1.0), re(1.0), re(0.0)]);
        embed(&m, space, factor)
    }
}

/// Flat indices of basis states in which no factor from `factors` sits on
/// its top level. Canonical commutation relations hold exactly on this block.
pub fn untruncated_indices(space: &HilbertSpec, factors: &[usize]) -> Vec<usize> {
    (0..space.total_dim())
        .filter(|&i| factors.iter().all(|&f| space.level(i, f) + 1 < space.dims()[f]))
        .collect()
}

/// Restriction of a matrix to the given rows/columns.
pub fn sub_block(m: &ComplexMatrix, idx: &[usize]) -> ComplexMatrix {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}
