//! Linear maps on operators, stored as `D² x D²` matrices acting on
//! column-stacked operators: `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.
//!
//! With this convention the Hilbert–Schmidt adjoint of a map is the
//! conjugate transpose of its matrix.

use std::ops::{Add, Mul, Sub};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, C64};
use crate::operator::{HilbertSpec, Operator};
use crate::par::{self, Parallelism};

#[derive(Clone, Debug, PartialEq)]
pub struct SuperOperator {
    space: HilbertSpec,
    matrix: ComplexMatrix,
}

impl SuperOperator {
    pub fn new(space: HilbertSpec, matrix: ComplexMatrix) -> Result<Self> {
        let n = space.total_dim() * space.total_dim();
        if matrix.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "superoperator matrix is {}x{}, expected {n}x{n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { space, matrix })
    }

    pub fn zero(space: &HilbertSpec) -> Self {
        let n = space.total_dim() * space.total_dim();
        Self { space: space.clone(), matrix: ComplexMatrix::zeros(n, n) }
    }

    pub fn identity(space: &HilbertSpec) -> Self {
        let n = space.total_dim() * space.total_dim();
        Self { space: space.clone(), matrix: ComplexMatrix::identity(n, n) }
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

    pub fn apply_matrix(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let d = self.space.total_dim();
        assert_eq!(x.shape(), (d, d), "operator shape");
        let v = DVector::from_column_slice(x.as_slice());
        let out = &self.matrix * v;
        ComplexMatrix::from_column_slice(d, d, out.as_slice())
    }

    pub fn apply(&self, x: &Operator) -> Result<Operator> {
        if x.space() != &self.space {
            return Err(Error::SpaceMismatch);
        }
        Operator::new(self.space.clone(), self.apply_matrix(x.matrix()))
    }

    /// Hilbert–Schmidt adjoint (the Schrödinger-picture dual of a Heisenberg generator).
    pub fn adjoint(&self) -> Self {
        Self { space: self.space.clone(), matrix: self.matrix.adjoint() }
    }

    /// Frobenius norm of the difference; an upper bound on the induced
    /// Hilbert–Schmidt operator norm.
    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!(self.space, other.space, "superoperator space mismatch");
        linalg::frobenius(&(&self.matrix - &other.matrix))
    }

    pub fn norm(&self) -> f64 {
        linalg::frobenius(&self.matrix)
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.matrix)
    }
}

impl Add<&SuperOperator> for &SuperOperator {
    type Output = SuperOperator;
    fn add(self, rhs: &SuperOperator) -> SuperOperator {
        assert_eq!(self.space, rhs.space);
        SuperOperator { space: self.space.clone(), matrix: &self.matrix + &rhs.matrix }
    }
}

impl Sub<&SuperOperator> for &SuperOperator {
    type Output = SuperOperator;
    fn sub(self, rhs: &SuperOperator) -> SuperOperator {
        assert_eq!(self.space, rhs.space);
        SuperOperator { space: self.space.clone(), matrix: &self.matrix - &rhs.matrix }
    }
}

impl Mul<C64> for &SuperOperator {
    type Output = SuperOperator;
    fn mul(self, rhs: C64) -> SuperOperator {
        SuperOperator { space: self.space.clone(), matrix: &self.matrix * rhs }
    }
}

/// Accumulates `X ↦ Σ A X B + L X + X R` and assembles the matrix.
#[derive(Clone, Debug)]
pub struct TermBuilder {
    space: HilbertSpec,
    sandwiches: Vec<(ComplexMatrix, ComplexMatrix)>,
    left: ComplexMatrix,
    right: ComplexMatrix,
}

impl TermBuilder {
    pub fn new(space: &HilbertSpec) -> Self {
        let d = space.total_dim();
        Self {
            space: space.clone(),
            sandwiches: Vec::new(),
            left: ComplexMatrix::zeros(d, d),
            right: ComplexMatrix::zeros(d, d),
        }
    }

    /// `X ↦ c A X B`
    pub fn sandwich(&mut self, c: C64, a: &ComplexMatrix, b: &ComplexMatrix) -> &mut Self {
        if c != C64::new(0.0, 0.0) {
            self.sandwiches.push((a * c, b.clone()));
        }
        self
    }

    /// `X ↦ c A X`
    pub fn left(&mut self, c: C64, a: &ComplexMatrix) -> &mut Self {
        self.left += a * c;
        self
    }

    /// `X ↦ c X B`
    pub fn right(&mut self, c: C64, b: &ComplexMatrix) -> &mut Self {
        self.right += b * c;
        self
    }

    /// `X ↦ c [X, A]`
    pub fn comm_x_first(&mut self, c: C64, a: &ComplexMatrix) -> &mut Self {
        self.right(c, a).left(-c, a)
    }

    /// `X ↦ c [[X, A], B] = c (XAB - AXB - BXA + BAX)`
    pub fn double_comm(&mut self, c: C64, a: &ComplexMatrix, b: &ComplexMatrix) -> &mut Self {
        let ab = a * b;
        let ba = b * a;
        self.right(c, &ab).sandwich(-c, a, b).sandwich(-c, b, a).left(c, &ba)
    }

    /// Applies the accumulated map to one operator without assembling a matrix.
    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = &self.left * x + x * &self.right;
        for (a, b) in &self.sandwiches {
            out += a * x * b;
        }
        out
    }

    pub fn build(&self, mode: Parallelism) -> SuperOperator {
        let d = self.space.total_dim();
        let n = d * d;
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        let chunk = n * d;
        par::for_each_chunk_mut(mode, &mut data, chunk, |l, block| {
            fill_column_block(d, l, block, &self.sandwiches, &self.left, &self.right);
        });
        SuperOperator {
            space: self.space.clone(),
            matrix: ComplexMatrix::from_vec(n, n, data),
        }
    }
}

/// Fills the columns `k + D l` (`k = 0..D`) of the superoperator matrix.
/// `block` is column-major with `D²` rows and `D` columns.
fn fill_column_block(
    d: usize,
    l: usize,
    block: &mut [C64],
    sandwiches: &[(ComplexMatrix, ComplexMatrix)],
    left: &ComplexMatrix,
    right: &ComplexMatrix,
) {
    let n = d * d;
    for (a, b) in sandwiches {
        for j in 0..d {
            let blj = b[(l, j)];
            if blj == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..d {
                let col = &mut block[n * k + d * j..n * k + d * j + d];
                let acol = a.column(k);
                for (out, &aik) in col.iter_mut().zip(acol.iter()) {
                    *out += blj * aik;
                }
            }
        }
    }
    for k in 0..d {
        let col = &mut block[n * k + d * l..n * k + d * l + d];
        for (out, &aik) in col.iter_mut().zip(left.column(k).iter()) {
            *out += aik;
        }
        for j in 0..d {
            block[n * k + k + d * j] += right[(l, j)];
        }
    }
}
