//! SLH models and their composition calculus.
//!
//! A model with `d` channels on a space of dimension `D` stores `S` as a
//! `dD x dD` block matrix (block `(j, k)` is the operator `S_jk`) and `L` as a
//! `dD x D` stacked column. Block-matrix products then implement the
//! operator-matrix products of the series product directly.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, re, ComplexMatrix, C64};
use crate::operator::{HilbertSpec, Operator};

/// Relative tolerance for the model invariants (unitary `S`, self-adjoint `H`).
pub const MODEL_TOL: f64 = 1e-12;

/// `Im{X} = (X - X*) / 2i` for a square (block) matrix.
pub fn im_part(x: &ComplexMatrix) -> ComplexMatrix {
    (x - x.adjoint()) * C64::new(0.0, -0.5)
}

fn stack(ops: &[Operator], dim: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(ops.len() * dim, dim);
    for (j, op) in ops.iter().enumerate() {
        out.view_mut((j * dim, 0), (dim, dim)).copy_from(op.matrix());
    }
    out
}

fn blocks(entries: &[Vec<Operator>], d: usize, dim: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(d * dim, d * dim);
    for (j, row) in entries.iter().enumerate() {
        for (k, op) in row.iter().enumerate() {
            out.view_mut((j * dim, k * dim), (dim, dim)).copy_from(op.matrix());
        }
    }
    out
}

fn check_ops<'a>(space: &HilbertSpec, ops: impl IntoIterator<Item = &'a Operator>) -> Result<()> {
    if ops.into_iter().all(|o| o.space() == space) {
        Ok(())
    } else {
        Err(Error::SpaceMismatch)
    }
}

fn block_identity(d: usize, dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d * dim, d * dim)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlhModel {
    space: HilbertSpec,
    channels: usize,
    s: ComplexMatrix,
    l: ComplexMatrix,
    h: Operator,
}

impl SlhModel {
    /// Builds `(S, L, H)` from operator entries, checking shapes, spaces and
    /// both invariants.
    pub fn new(s: Vec<Vec<Operator>>, l: Vec<Operator>, h: Operator) -> Result<Self> {
        let model = Self::from_parts_unchecked(s, l, h)?;
        model.check_invariants()?;
        Ok(model)
    }

    /// Shape and space checks only; unitarity and self-adjointness are left to
    /// the caller (diagnostic front ends report them instead of failing).
    pub fn from_parts_unchecked(s: Vec<Vec<Operator>>, l: Vec<Operator>, h: Operator) -> Result<Self> {
        let space = h.space().clone();
        let d = l.len();
        if s.len() != d || s.iter().any(|row| row.len() != d) {
            return Err(Error::ChannelMismatch { left: s.len(), right: d });
        }
        check_ops(&space, s.iter().flatten().chain(&l))?;
        let dim = space.total_dim();
        Ok(Self {
            channels: d,
            s: blocks(&s, d, dim),
            l: stack(&l, dim),
            h,
            space,
        })
    }

    /// `S = I` with the given couplings.
    pub fn from_coupling(l: Vec<Operator>, h: Operator) -> Result<Self> {
        let space = h.space().clone();
        check_ops(&space, &l)?;
        let d = l.len();
        let dim = space.total_dim();
        let model = Self {
            channels: d,
            s: block_identity(d, dim),
            l: stack(&l, dim),
            h,
            space,
        };
        model.check_invariants()?;
        Ok(model)
    }

    /// Static scattering component `(S ⊗ I, 0, 0)` for a scalar unitary `S`.
    pub fn scattering(space: &HilbertSpec, s: &ComplexMatrix) -> Result<Self> {
        let d = linalg::ensure_square(s)?;
        let dim = space.total_dim();
        let model = Self {
            space: space.clone(),
            channels: d,
            s: linalg::kron(s, &ComplexMatrix::identity(dim, dim)),
            l: ComplexMatrix::zeros(d * dim, dim),
            h: Operator::zero(space),
        };
        model.check_invariants()?;
        Ok(model)
    }

    /// `(I, 0, 0)` with `d` channels.
    pub fn trivial(space: &HilbertSpec, d: usize) -> Self {
        let dim = space.total_dim();
        Self {
            space: space.clone(),
            channels: d,
            s: block_identity(d, dim),
            l: ComplexMatrix::zeros(d * dim, dim),
            h: Operator::zero(space),
        }
    }

    /// Static scalar `S`, couplings and Hamiltonian given as matrices.
    pub fn from_matrices(
        space: &HilbertSpec,
        s: &ComplexMatrix,
        l: &[ComplexMatrix],
        h: &ComplexMatrix,
    ) -> Result<Self> {
        let h = Operator::new(space.clone(), h.clone())?;
        let l = l
            .iter()
            .map(|m| Operator::new(space.clone(), m.clone()))
            .collect::<Result<Vec<_>>>()?;
        if s.shape() != (l.len(), l.len()) {
            return Err(Error::ChannelMismatch { left: s.nrows(), right: l.len() });
        }
        let dim = space.total_dim();
        let model = Self {
            space: space.clone(),
            channels: l.len(),
            s: linalg::kron(s, &ComplexMatrix::identity(dim, dim)),
            l: stack(&l, dim),
            h,
        };
        model.check_invariants()?;
        Ok(model)
    }

    pub fn check_invariants(&self) -> Result<()> {
        let hr = self.hamiltonian_residual();
        if hr > MODEL_TOL * self.h.max_abs().max(1.0) {
            return Err(Error::NotSelfAdjoint(hr));
        }
        let ur = self.unitarity_residual();
        if ur > MODEL_TOL * linalg::max_abs(&self.s).powi(2).max(1.0) {
            return Err(Error::NotUnitary(ur));
        }
        Ok(())
    }

    /// `max |Σ_l S_lj* S_lk - δ_jk I|`.
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.s.nrows();
        let left = linalg::max_abs(&(self.s.adjoint() * &self.s - ComplexMatrix::identity(n, n)));
        let right = linalg::max_abs(&(&self.s * self.s.adjoint() - ComplexMatrix::identity(n, n)));
        left.max(right)
    }

    pub fn hamiltonian_residual(&self) -> f64 {
        self.h.hermitian_residual()
    }

    pub fn space(&self) -> &HilbertSpec {
        &self.space
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    fn dim(&self) -> usize {
        self.space.total_dim()
    }

    pub fn s_block(&self) -> &ComplexMatrix {
        &self.s
    }

    pub fn l_stack(&self) -> &ComplexMatrix {
        &self.l
    }

    pub fn s(&self, j: usize, k: usize) -> Operator {
        let dim = self.dim();
        let m = self.s.view((j * dim, k * dim), (dim, dim)).into_owned();
        Operator::new(self.space.clone(), m).expect("block has space dimension")
    }

    pub fn l(&self, j: usize) -> Operator {
        let dim = self.dim();
        let m = self.l.view((j * dim, 0), (dim, dim)).into_owned();
        Operator::new(self.space.clone(), m).expect("block has space dimension")
    }

    pub fn l_ops(&self) -> Vec<Operator> {
        (0..self.channels).map(|j| self.l(j)).collect()
    }

    pub fn h(&self) -> &Operator {
        &self.h
    }

    /// The scalar matrix of `S` if every entry is a multiple of the identity
    /// (absolute tolerance `tol`).
    pub fn scalar_s(&self, tol: f64) -> Option<ComplexMatrix> {
        let d = self.channels;
        let mut out = ComplexMatrix::zeros(d, d);
        for j in 0..d {
            for k in 0..d {
                out[(j, k)] = self.s(j, k).as_scalar(tol)?;
            }
        }
        Some(out)
    }

    /// Largest componentwise difference between two models on the same space.
    pub fn distance(&self, other: &Self) -> f64 {
        if self.space != other.space || self.channels != other.channels {
            return f64::INFINITY;
        }
        linalg::max_abs(&(&self.s - &other.s))
            .max(linalg::max_abs(&(&self.l - &other.l)))
            .max(self.h.distance(&other.h))
    }

    /// `K = -½ Σ L_k* L_k - iH`.
    pub fn k(&self) -> Operator {
        let m = self.l.adjoint() * &self.l * re(-0.5) - self.h.matrix() * C64::new(0.0, 1.0);
        Operator::new(self.space.clone(), m).expect("square on space")
    }

    /// Same model with `extra` identity factors appended to the space.
    pub fn extend(&self, extra: &[usize]) -> Result<Self> {
        let k: usize = extra.iter().product();
        let id = ComplexMatrix::identity(k, k);
        let dim = self.dim();
        let grow = |m: &ComplexMatrix, rows: usize, cols: usize| {
            let mut out = ComplexMatrix::zeros(rows * dim * k, cols * dim * k);
            for r in 0..rows {
                for c in 0..cols {
                    let b = m.view((r * dim, c * dim), (dim, dim)).into_owned();
                    out.view_mut((r * dim * k, c * dim * k), (dim * k, dim * k))
                        .copy_from(&linalg::kron(&b, &id));
                }
            }
            out
        };
        Ok(Self {
            space: self.space.extend(extra)?,
            channels: self.channels,
            s: grow(&self.s, self.channels, self.channels),
            l: grow(&self.l, self.channels, 1),
            h: self.h.extend(extra)?,
        })
    }
}

/// Series product `G_B ◁ G_A`: the output of `ga` feeds the input of `gb`.
///
/// `(S_B S_A, L_B + S_B L_A, H_A + H_B + Im{L_B* S_B L_A})`.
pub fn series(gb: &SlhModel, ga: &SlhModel) -> Result<SlhModel> {
    if gb.channels != ga.channels {
        return Err(Error::ChannelMismatch { left: gb.channels, right: ga.channels });
    }
    if gb.space != ga.space {
        return Err(Error::SpaceMismatch);
    }
    let sb_la = &gb.s * &ga.l;
    let h = ga.h.matrix() + gb.h.matrix() + im_part(&(gb.l.adjoint() * &sb_la));
    Ok(SlhModel {
        space: ga.space.clone(),
        channels: ga.channels,
        s: &gb.s * &ga.s,
        l: &gb.l + sb_la,
        h: Operator::new(ga.space.clone(), h)?,
    })
}

/// Concatenation `G₁ ⊞ G₂`: channels of `g1` first.
pub fn concat(g1: &SlhModel, g2: &SlhModel) -> Result<SlhModel> {
    if g1.space != g2.space {
        return Err(Error::SpaceMismatch);
    }
    let dim = g1.dim();
    let (d1, d2) = (g1.channels, g2.channels);
    let d = d1 + d2;
    let mut s = ComplexMatrix::zeros(d * dim, d * dim);
    s.view_mut((0, 0), (d1 * dim, d1 * dim)).copy_from(&g1.s);
    s.view_mut((d1 * dim, d1 * dim), (d2 * dim, d2 * dim)).copy_from(&g2.s);
    let mut l = ComplexMatrix::zeros(d * dim, dim);
    l.view_mut((0, 0), (d1 * dim, dim)).copy_from(&g1.l);
    l.view_mut((d1 * dim, 0), (d2 * dim, dim)).copy_from(&g2.l);
    Ok(SlhModel {
        space: g1.space.clone(),
        channels: d,
        s,
        l,
        h: &g1.h + &g2.h,
    })
}

/// True iff every entry of `S` is a scalar multiple of the identity and the
/// scalar matrix is unitary, both within `tol`.
pub fn is_static(g: &SlhModel, tol: f64) -> bool {
    g.scalar_s(tol)
        .is_some_and(|s| linalg::unitary_residual(&s) <= tol)
}

/// `(S, L, H) -> (I, S* L, H)` for static `S`.
pub fn rotate_out_scattering(g: &SlhModel) -> Result<SlhModel> {
    if !is_static(g, MODEL_TOL.max(1e-12)) {
        return Err(Error::NotStatic);
    }
    let dim = g.dim();
    Ok(SlhModel {
        space: g.space.clone(),
        channels: g.channels,
        s: block_identity(g.channels, dim),
        l: g.s.adjoint() * &g.l,
        h: g.h.clone(),
    })
}

/// Self-adjoint Stratonovich coefficients `E_jk`, `E_j0`, `E_00`
/// (with `E_0k = E_k0*`).
#[derive(Clone, Debug, PartialEq)]
pub struct StratonovichGenerator {
    space: HilbertSpec,
    channels: usize,
    e_ll: ComplexMatrix,
    e_0: ComplexMatrix,
    e_00: Operator,
}

impl StratonovichGenerator {
    pub fn new(e_ll: Vec<Vec<Operator>>, e_0: Vec<Operator>, e_00: Operator) -> Result<Self> {
        let space = e_00.space().clone();
        let d = e_0.len();
        if e_ll.len() != d || e_ll.iter().any(|r| r.len() != d) {
            return Err(Error::ChannelMismatch { left: e_ll.len(), right: d });
        }
        check_ops(&space, e_ll.iter().flatten().chain(&e_0))?;
        let dim = space.total_dim();
        let g = Self {
            channels: d,
            e_ll: blocks(&e_ll, d, dim),
            e_0: stack(&e_0, dim),
            e_00,
            space,
        };
        let resid = linalg::hermitian_residual(&g.e_ll).max(g.e_00.hermitian_residual());
        let scale = linalg::max_abs(&g.e_ll).max(g.e_00.max_abs()).max(1.0);
        if resid > MODEL_TOL * scale {
            return Err(Error::GeneratorNotSelfAdjoint(resid));
        }
        Ok(g)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn space(&self) -> &HilbertSpec {
        &self.space
    }
}

/// Stratonovich generator to Itō-form `(S, L, H)`:
/// `S = (I - iE/2)(I + iE/2)⁻¹`, `L = i(I + iE/2)⁻¹ E_·0`,
/// `H = E_00 + ½ E_0j [Im{(I + iE/2)⁻¹}]_jk E_k0`.
pub fn cayley(e: &StratonovichGenerator) -> Result<SlhModel> {
    let n = e.e_ll.nrows();
    let half_i = C64::new(0.0, 0.5);
    let id = ComplexMatrix::identity(n, n);
    let plus = &id + &e.e_ll * half_i;
    let minus = &id - &e.e_ll * half_i;
    let inv = plus
        .try_inverse()
        .ok_or_else(|| Error::Singular("I + iE/2".into()))?;
    let s = minus * &inv;
    let l = (&inv * &e.e_0) * C64::new(0.0, 1.0);
    let h = e.e_00.matrix() + (e.e_0.adjoint() * im_part(&inv) * &e.e_0) * re(0.5);
    Ok(SlhModel {
        space: e.space.clone(),
        channels: e.channels,
        s,
        l,
        h: Operator::new(e.space.clone(), h)?,
    })
}

/// The two-channel doubled model obtained by replacing each single-channel
/// component's coupling `L` with `[√(n+1) L; -√n L*]` and composing with the
/// vacuum series product. Its Hamiltonian differs from `series(gb, ga)` by
/// `n Im[L_B*, L_A]`.
pub fn naive_doubled_series(ga: &SlhModel, gb: &SlhModel, n: f64) -> Result<SlhModel> {
    if !(n >= 0.0) {
        return Err(Error::InvalidNoise(format!("thermal occupation {n} < 0")));
    }
    for g in [ga, gb] {
        if g.channels != 1 {
            return Err(Error::ChannelMismatch { left: g.channels, right: 1 });
        }
        let dim = g.dim();
        if linalg::max_abs(&(&g.s - ComplexMatrix::identity(dim, dim))) > MODEL_TOL {
            return Err(Error::InvalidParameter("doubled representation requires S = I".into()));
        }
    }
    let double = |g: &SlhModel| -> Result<SlhModel> {
        let l = g.l(0);
        SlhModel::from_coupling(vec![&l * (n + 1.0).sqrt(), l.adjoint() * -n.sqrt()], g.h.clone())
    };
    series(&double(gb)?, &double(ga)?)
}

/// `n Im[L_B*, L_A]`.
pub fn spurious_term(la: &Operator, lb: &Operator, n: f64) -> Operator {
    let c = crate::operator::comm(&lb.adjoint(), la);
    c.im_part() * n
}

/// Builds a block-diagonal static scattering matrix from scalar blocks.
pub fn block_diag(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (p, q) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(p + q, p + q);
    out.view_mut((0, 0), (p, p)).copy_from(a);
    out.view_mut((p, p), (q, q)).copy_from(b);
    out
}
