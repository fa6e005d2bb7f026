//! Itō-form generators for vacuum and Gaussian inputs, the Evans–Hudson maps
//! and the Stratonovich (Wick-ordered) to Itō conversion.
//!
//! Heisenberg-picture Lindbladians are written in the structured form
//! `ℒX = Σ_ab C_ab (A_a* X A_b - ½{A_a* A_b, X}) - i[X, H]` with operators
//! `A = (L₁ … L_d, L₁* … L_d*)` and coefficient matrix
//! `C = [[I + Nᵀ, -M], [-M*, N]]`; the vacuum case keeps only the `L` block.

use crate::error::{Error, Result};
use crate::gaussian::{validate_noise, GaussianNoiseSpec};
use crate::linalg::{self, re, ComplexMatrix, C64};
use crate::operator::{HilbertSpec, Operator};
use crate::par::Parallelism;
use crate::slh::{self, SlhModel};
use crate::superop::{SuperOperator, TermBuilder};

/// Tolerance used when generator constructors validate their noise spec.
pub const NOISE_TOL: f64 = 1e-9;

const ZERO: C64 = C64::new(0.0, 0.0);
const MINUS_I: C64 = C64::new(0.0, -1.0);

fn check_hamiltonian(h: &Operator) -> Result<()> {
    let r = h.hermitian_residual();
    if r > slh::MODEL_TOL * h.max_abs().max(1.0) {
        return Err(Error::NotSelfAdjoint(r));
    }
    Ok(())
}

fn check_couplings(l: &[Operator], h: &Operator) -> Result<()> {
    if l.iter().any(|x| x.space() != h.space()) {
        return Err(Error::SpaceMismatch);
    }
    check_hamiltonian(h)
}

fn check_noise(l: &[Operator], spec: &GaussianNoiseSpec) -> Result<()> {
    if spec.channels() != l.len() {
        return Err(Error::ChannelMismatch { left: l.len(), right: spec.channels() });
    }
    if let Some(c) = validate_noise(spec, NOISE_TOL).first_failure() {
        return Err(Error::InvalidNoise(format!("{} fails (residual {:.3e})", c.name, c.residual)));
    }
    Ok(())
}

/// `K = -½ L_k* L_k - iH`.
pub fn vacuum_k(l: &[Operator], h: &Operator) -> Result<Operator> {
    check_couplings(l, h)?;
    let mut k = h * MINUS_I;
    for lk in l {
        k += &(&lk.adjoint() * lk * -0.5);
    }
    Ok(k)
}

/// `K^(N,M) = -½(δ_ij + n_ji) L_i* L_j - ½ n_ij L_i L_j* + ½ m_ij L_i* L_j* + ½ m̄_ji L_i L_j - iH`.
pub fn gaussian_k(l: &[Operator], h: &Operator, spec: &GaussianNoiseSpec) -> Result<Operator> {
    check_couplings(l, h)?;
    check_noise(l, spec)?;
    let (n, m) = (spec.n(), spec.m());
    let mut k = h * MINUS_I;
    for (i, li) in l.iter().enumerate() {
        let li_s = li.adjoint();
        for (j, lj) in l.iter().enumerate() {
            let lj_s = lj.adjoint();
            let delta = if i == j { 1.0 } else { 0.0 };
            k += &(&li_s * lj * ((n[(j, i)] + delta) * -0.5));
            k += &(li * &lj_s * (n[(i, j)] * -0.5));
            k += &(&li_s * &lj_s * (m[(i, j)] * 0.5));
            k += &(li * lj * (m[(j, i)].conj() * 0.5));
        }
    }
    Ok(k)
}

/// GKSL data of a Heisenberg-picture Lindbladian:
/// `ℒX = Σ_a A_a* X B_a + G X + X G†` with `B_a = Σ_b C_ab A_b` and
/// `G = iH - ½ Σ_ab C_ab A_a* A_b`.
#[derive(Clone, Debug)]
pub struct LindbladForm {
    space: HilbertSpec,
    /// Pairs `(A_a, B_a)` with `B_a ≠ 0`.
    pairs: Vec<(ComplexMatrix, ComplexMatrix)>,
    g: ComplexMatrix,
}

impl LindbladForm {
    /// From jump operators `A_a`, hermitian coefficients `C` and a Hamiltonian.
    pub fn new(ops: &[ComplexMatrix], c: &ComplexMatrix, h: &Operator) -> Result<Self> {
        let dim = h.dim();
        if c.shape() != (ops.len(), ops.len()) {
            return Err(Error::DimensionMismatch(format!(
                "coefficient matrix {:?} for {} operators",
                c.shape(),
                ops.len()
            )));
        }
        let mut g = h.matrix() * C64::new(0.0, 1.0);
        let mut pairs = Vec::new();
        for (a, op_a) in ops.iter().enumerate() {
            let mut b = ComplexMatrix::zeros(dim, dim);
            for (bi, op_b) in ops.iter().enumerate() {
                if c[(a, bi)] != ZERO {
                    b += op_b * c[(a, bi)];
                }
            }
            if b.iter().any(|z| *z != ZERO) {
                g -= op_a.adjoint() * &b * re(0.5);
                pairs.push((op_a.clone(), b));
            }
        }
        Ok(Self { space: h.space().clone(), pairs, g })
    }

    pub fn vacuum(l: &[Operator], h: &Operator) -> Result<Self> {
        check_couplings(l, h)?;
        let ops: Vec<_> = l.iter().map(|x| x.matrix().clone()).collect();
        Self::new(&ops, &ComplexMatrix::identity(l.len(), l.len()), h)
    }

    pub fn gaussian(l: &[Operator], h: &Operator, spec: &GaussianNoiseSpec) -> Result<Self> {
        check_couplings(l, h)?;
        check_noise(l, spec)?;
        let d = l.len();
        let mut ops: Vec<ComplexMatrix> = l.iter().map(|x| x.matrix().clone()).collect();
        ops.extend(l.iter().map(|x| x.matrix().adjoint()));
        Self::new(&ops, &gaussian_coefficients(spec, d), h)
    }

    pub fn space(&self) -> &HilbertSpec {
        &self.space
    }

    /// Jump pairs `(A_a, B_a)`.
    pub fn pairs(&self) -> &[(ComplexMatrix, ComplexMatrix)] {
        &self.pairs
    }

    pub fn g(&self) -> &ComplexMatrix {
        &self.g
    }

    /// Contraction generator `-½ Σ C_ab A_a* A_b - iH`, equal to `G†`.
    pub fn k(&self) -> Operator {
        Operator::new(self.space.clone(), self.g.adjoint()).expect("square on space")
    }

    pub fn heisenberg(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = &self.g * x + x * self.g.adjoint();
        for (a, b) in &self.pairs {
            out += a.adjoint() * x * b;
        }
        out
    }

    pub fn schrodinger(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.g.adjoint() * rho + rho * &self.g;
        for (a, b) in &self.pairs {
            out += b * rho * a.adjoint();
        }
        out
    }

    fn builder(&self) -> TermBuilder {
        let mut t = TermBuilder::new(&self.space);
        for (a, b) in &self.pairs {
            t.sandwich(re(1.0), &a.adjoint(), b);
        }
        t.left(re(1.0), &self.g).right(re(1.0), &self.g.adjoint());
        t
    }

    /// Heisenberg-picture superoperator.
    pub fn superoperator(&self, mode: Parallelism) -> SuperOperator {
        self.builder().build(mode)
    }

    /// Schrödinger-picture superoperator, assembled directly (not by adjoining).
    pub fn schrodinger_superoperator(&self, mode: Parallelism) -> SuperOperator {
        let mut t = TermBuilder::new(&self.space);
        for (a, b) in &self.pairs {
            t.sandwich(re(1.0), b, &a.adjoint());
        }
        t.left(re(1.0), &self.g.adjoint()).right(re(1.0), &self.g);
        t.build(mode)
    }
}

/// `C = [[I + Nᵀ, -M], [-M*, N]]` acting on `(L, L*)`.
pub fn gaussian_coefficients(spec: &GaussianNoiseSpec, d: usize) -> ComplexMatrix {
    let mut c = ComplexMatrix::zeros(2 * d, 2 * d);
    c.view_mut((0, 0), (d, d))
        .copy_from(&(ComplexMatrix::identity(d, d) + spec.n().transpose()));
    c.view_mut((0, d), (d, d)).copy_from(&(-spec.m()));
    c.view_mut((d, 0), (d, d)).copy_from(&(-spec.m().adjoint()));
    c.view_mut((d, d), (d, d)).copy_from(spec.n());
    c
}

/// `ℒX = ½ L_k*[X, L_k] + ½ [L_k*, X] L_k - i[X, H]`.
pub fn vacuum_lindblad(g: &SlhModel, mode: Parallelism) -> SuperOperator {
    LindbladForm::vacuum(&g.l_ops(), g.h())
        .expect("model invariants hold")
        .superoperator(mode)
}

/// `ℒ^(N,M)` for couplings `l` and Hamiltonian `h`.
pub fn gaussian_lindblad(
    l: &[Operator],
    h: &Operator,
    spec: &GaussianNoiseSpec,
    mode: Parallelism,
) -> Result<SuperOperator> {
    Ok(LindbladForm::gaussian(l, h, spec)?.superoperator(mode))
}

/// Gaussian Lindbladian of a model with static scattering: the noise couples
/// through `S* L`, the drift is otherwise unchanged.
pub fn gaussian_lindblad_model(
    g: &SlhModel,
    spec: &GaussianNoiseSpec,
    mode: Parallelism,
) -> Result<SuperOperator> {
    let rotated = slh::rotate_out_scattering(g)?;
    gaussian_lindblad(&rotated.l_ops(), rotated.h(), spec, mode)
}

/// Evans–Hudson map `ℒ_αβ`; index 0 is the time index, channels are `1..=d`.
pub fn evans_hudson(g: &SlhModel, alpha: usize, beta: usize, mode: Parallelism) -> Result<SuperOperator> {
    let d = g.channels();
    for idx in [alpha, beta] {
        if idx > d {
            return Err(Error::IndexOutOfRange { index: idx, max: d });
        }
    }
    let space = g.space();
    let mut t = TermBuilder::new(space);
    match (alpha, beta) {
        (0, 0) => return Ok(vacuum_lindblad(g, mode)),
        (j, 0) => {
            for l in 0..d {
                let s_star = g.s(l, j - 1).adjoint();
                let ll = g.l(l);
                t.sandwich(re(1.0), s_star.matrix(), ll.matrix())
                    .left(re(-1.0), &(s_star.matrix() * ll.matrix()));
            }
        }
        (0, k) => {
            for l in 0..d {
                let s = g.s(l, k - 1);
                let l_star = g.l(l).adjoint();
                t.sandwich(re(1.0), l_star.matrix(), s.matrix())
                    .right(re(-1.0), &(l_star.matrix() * s.matrix()));
            }
        }
        (j, k) => {
            for l in 0..d {
                t.sandwich(re(1.0), g.s(l, j - 1).adjoint().matrix(), g.s(l, k - 1).matrix());
            }
            if j == k {
                let dim = space.total_dim();
                t.left(re(-1.0), &ComplexMatrix::identity(dim, dim));
            }
        }
    }
    Ok(t.build(mode))
}

/// Second moments of the field increments:
/// `dB_i dB_j* = (n_ji + δ_ij) dt`, `dB_i* dB_j = n_ij dt`,
/// `dB_i dB_j = m_ij dt`, `dB_i* dB_j* = m̄_ji dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct ItoTable {
    n: ComplexMatrix,
    m: ComplexMatrix,
}

impl ItoTable {
    pub fn new(spec: &GaussianNoiseSpec) -> Self {
        Self { n: spec.n().clone(), m: spec.m().clone() }
    }

    pub fn channels(&self) -> usize {
        self.n.nrows()
    }

    /// `dB_i dB_j*`
    pub fn b_bstar(&self, i: usize, j: usize) -> C64 {
        self.n[(j, i)] + if i == j { 1.0 } else { 0.0 }
    }

    /// `dB_i* dB_j`
    pub fn bstar_b(&self, i: usize, j: usize) -> C64 {
        self.n[(i, j)]
    }

    /// `dB_i dB_j`
    pub fn b_b(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    /// `dB_i* dB_j*`
    pub fn bstar_bstar(&self, i: usize, j: usize) -> C64 {
        self.m[(j, i)].conj()
    }
}

/// Itō correction to the contraction generator produced by the Wick-ordered
/// Stratonovich terms `dB_k* ∘ L_k U - L_k* U ∘ dB_k`.
pub fn ito_correction_k(l: &[Operator], table: &ItoTable) -> Result<Operator> {
    let d = l.len();
    if table.channels() != d {
        return Err(Error::ChannelMismatch { left: d, right: table.channels() });
    }
    let space = l.first().map(|x| x.space().clone());
    let Some(space) = space else {
        return Err(Error::ChannelMismatch { left: 0, right: 0 });
    };
    let mut out = Operator::zero(&space);
    for (k, lk) in l.iter().enumerate() {
        let lk_s = lk.adjoint();
        for (j, lj) in l.iter().enumerate() {
            let lj_s = lj.adjoint();
            let first = lj * table.bstar_bstar(k, j) - &lj_s * table.bstar_b(k, j);
            out += &(lk * &first * 0.5);
            let second = lj * table.bstar_b(j, k) - &lj_s * table.b_b(j, k);
            out += &(&lk_s * &second * -0.5);
        }
    }
    Ok(out)
}

/// Itō correction to the Heisenberg drift produced by the Wick-ordered
/// Stratonovich terms `dB_k* ∘ j([X, L_k]) + j([L_k*, X]) ∘ dB_k`:
/// `½ dB_k*dB_j* [[X,L_k],L_j] + ½ dB_k*dB_j [L_j*,[X,L_k]]
///  + ½ dB_j*dB_k [[L_k*,X],L_j] + ½ dB_j dB_k [L_j*,[L_k*,X]]`.
pub fn ito_correction_terms(l: &[ComplexMatrix], table: &ItoTable, builder: &mut TermBuilder) {
    let half = re(0.5);
    for (k, lk) in l.iter().enumerate() {
        let lk_s = lk.adjoint();
        for (j, lj) in l.iter().enumerate() {
            let lj_s = lj.adjoint();
            builder
                .double_comm(half * table.bstar_bstar(k, j), lk, lj)
                .double_comm(-half * table.bstar_b(k, j), lk, &lj_s)
                .double_comm(-half * table.bstar_b(j, k), &lk_s, lj)
                .double_comm(half * table.b_b(j, k), &lk_s, &lj_s);
        }
    }
}

fn vacuum_terms(l: &[ComplexMatrix], h: &ComplexMatrix, t: &mut TermBuilder) {
    let half = re(0.5);
    for lk in l {
        let lk_s = lk.adjoint();
        // ½ L*[X, L] + ½ [L*, X] L
        t.sandwich(half, &lk_s, lk)
            .left(-half, &(&lk_s * lk))
            .sandwich(half, &lk_s, lk)
            .right(-half, &(&lk_s * lk));
    }
    t.comm_x_first(MINUS_I, h);
}

/// Converts the representation-free (Stratonovich, Wick-ordered) equations
/// with vacuum coefficients `K`, `ℒ` into Itō form for the field state
/// `spec`, by applying the Itō table to each Stratonovich product.
pub fn strat_to_ito(
    l: &[Operator],
    h: &Operator,
    spec: &GaussianNoiseSpec,
    mode: Parallelism,
) -> Result<(Operator, SuperOperator)> {
    check_couplings(l, h)?;
    check_noise(l, spec)?;
    let table = ItoTable::new(spec);
    let k = if l.is_empty() {
        vacuum_k(l, h)?
    } else {
        &vacuum_k(l, h)? + &ito_correction_k(l, &table)?
    };
    let mats: Vec<ComplexMatrix> = l.iter().map(|x| x.matrix().clone()).collect();
    let mut t = TermBuilder::new(h.space());
    vacuum_terms(&mats, h.matrix(), &mut t);
    ito_correction_terms(&mats, &table, &mut t);
    Ok((k, t.build(mode)))
}

/// Thermal Heisenberg drift `ℒX + ½n[[L*,X],L] + ½n[L*,[X,L]]` for a
/// single-channel model with static scattering.
pub fn thermal_heisenberg_drift(g: &SlhModel, n: f64, mode: Parallelism) -> Result<SuperOperator> {
    if g.channels() != 1 {
        return Err(Error::ChannelMismatch { left: g.channels(), right: 1 });
    }
    if !slh::is_static(g, slh::MODEL_TOL) {
        return Err(Error::NotStatic);
    }
    if !(n >= 0.0) {
        return Err(Error::InvalidNoise(format!("thermal occupation {n} < 0")));
    }
    let l = g.l(0).into_matrix();
    let l_s = l.adjoint();
    let mut t = TermBuilder::new(g.space());
    vacuum_terms(std::slice::from_ref(&l), g.h().matrix(), &mut t);
    // [[L*,X],L] = -[[X,L*],L] and [L*,[X,L]] = -[[X,L],L*]
    t.double_comm(re(-0.5 * n), &l_s, &l).double_comm(re(-0.5 * n), &l, &l_s);
    Ok(t.build(mode))
}

/// Largest entry of the difference between the thermal Heisenberg drift and
/// `gaussian_lindblad(S* L, H, N = [n], M = 0)`, i.e. the worst residual over
/// the matrix-unit basis.
pub fn thermal_heisenberg_check(g: &SlhModel, n: f64, mode: Parallelism) -> Result<f64> {
    let drift = thermal_heisenberg_drift(g, n, mode)?;
    let direct = gaussian_lindblad_model(g, &GaussianNoiseSpec::thermal(1, n)?, mode)?;
    Ok(linalg::max_abs(&(drift.matrix() - direct.matrix())))
}

/// Drift obtained by composing the open-loop Heisenberg equations of `ga`
/// and `gb` (static scattering allowed) under the constraint that the output
/// of `ga` drives `gb`, then converting to Itō form for the field state `spec`.
///
/// Stratonovich drift: `ℒ_A X + ℒ_B X + Σ_k P_k*[X, L_B,k] + [L_B,k*, X] P_k`
/// with `P = S_B L_A`; the noise enters through `S_A* L_A + S_A* S_B* L_B`.
pub fn constrained_series_lindblad(
    ga: &SlhModel,
    gb: &SlhModel,
    spec: &GaussianNoiseSpec,
    mode: Parallelism,
) -> Result<SuperOperator> {
    if ga.channels() != gb.channels() {
        return Err(Error::ChannelMismatch { left: gb.channels(), right: ga.channels() });
    }
    if ga.space() != gb.space() {
        return Err(Error::SpaceMismatch);
    }
    for g in [ga, gb] {
        if !slh::is_static(g, slh::MODEL_TOL) {
            return Err(Error::NotStatic);
        }
    }
    let d = ga.channels();
    let dim = ga.space().total_dim();
    let block = |m: &ComplexMatrix, j: usize| m.view((j * dim, 0), (dim, dim)).into_owned();
    let p = gb.s_block() * ga.l_stack();
    let noise = ga.s_block().adjoint() * (ga.l_stack() + gb.s_block().adjoint() * gb.l_stack());

    let la: Vec<_> = (0..d).map(|j| block(ga.l_stack(), j)).collect();
    let lb: Vec<_> = (0..d).map(|j| block(gb.l_stack(), j)).collect();
    let mut t = TermBuilder::new(ga.space());
    vacuum_terms(&la, ga.h().matrix(), &mut t);
    vacuum_terms(&lb, gb.h().matrix(), &mut t);
    for (k, lbk) in lb.iter().enumerate() {
        let pk = block(&p, k);
        let pk_s = pk.adjoint();
        let lbk_s = lbk.adjoint();
        // P_k*[X, L_Bk] + [L_Bk*, X] P_k
        t.sandwich(re(1.0), &pk_s, lbk)
            .left(re(-1.0), &(&pk_s * lbk))
            .sandwich(re(1.0), &lbk_s, &pk)
            .right(re(-1.0), &(&lbk_s * &pk));
    }
    let noise_ops: Vec<_> = (0..d).map(|j| block(&noise, j)).collect();
    check_noise(&ga.l_ops(), spec)?;
    ito_correction_terms(&noise_ops, &ItoTable::new(spec), &mut t);
    Ok(t.build(mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::operator::{annihilator, qubit};
    use crate::random::{self, ModelShape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const SEQ: Parallelism = Parallelism::Sequential;

    fn space(d: &[usize]) -> HilbertSpec {
        HilbertSpec::new(d.to_vec()).unwrap()
    }

    #[test]
    fn vacuum_k_examples() {
        let sp = space(&[4]);
        let zero = Operator::zero(&sp);
        assert_eq!(vacuum_k(&[], &zero).unwrap().max_abs(), 0.0);
        let a = annihilator(&sp, 0).unwrap();
        let k = vacuum_k(std::slice::from_ref(&a), &zero).unwrap();
        assert!(k.distance(&(&a.adjoint() * &a * -0.5)) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let g = random::slh_model(&mut rng, &space(&[3, 2]), ModelShape::channels(2));
            let k = vacuum_k(&g.l_ops(), g.h()).unwrap();
            let mut sum = &k + &k.adjoint();
            for l in g.l_ops() {
                sum += &(&l.adjoint() * &l);
            }
            assert!(sum.max_abs() < 1e-13);
        }
        assert!(matches!(vacuum_k(&[], &a), Err(Error::NotSelfAdjoint(_))));
    }

    #[test]
    fn vacuum_lindblad_examples() {
        let sp = space(&[4]);
        let a = annihilator(&sp, 0).unwrap();
        let num = &a.adjoint() * &a;
        let ham = SlhModel::from_coupling(vec![], num.clone()).unwrap();
        let x = random::operator(&mut ChaCha8Rng::seed_from_u64(3), &sp, 1.0);
        let lx = vacuum_lindblad(&ham, SEQ).apply(&x).unwrap();
        let expected = crate::operator::commutator(&x, &num).unwrap() * c(0.0, -1.0);
        assert!(lx.distance(&expected) < 1e-13);

        let decay = SlhModel::from_coupling(vec![a.clone()], Operator::zero(&sp)).unwrap();
        let ln = vacuum_lindblad(&decay, SEQ).apply(&num).unwrap();
        let idx = crate::operator::untruncated_indices(&sp, &[0]);
        let block = crate::operator::sub_block(ln.matrix(), &idx);
        let want = crate::operator::sub_block(&(-num.matrix()), &idx);
        assert!(linalg::max_abs(&(block - want)) < 1e-13);
    }

    #[test]
    fn unitality_and_hermiticity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sp = space(&[3, 2]);
        for _ in 0..10 {
            let g = random::slh_model(&mut rng, &sp, ModelShape::channels(2));
            let spec = random::noise(&mut rng, 2, 1.0);
            for lind in [
                vacuum_lindblad(&g, SEQ),
                gaussian_lindblad(&g.l_ops(), g.h(), &spec, SEQ).unwrap(),
            ] {
                assert!(lind.apply(&Operator::identity(&sp)).unwrap().max_abs() < 1e-13);
                let x = random::operator(&mut rng, &sp, 1.0);
                let lhs = lind.apply(&x.adjoint()).unwrap();
                let rhs = lind.apply(&x).unwrap().adjoint();
                assert!(lhs.distance(&rhs) < 1e-12);
            }
        }
    }

    #[test]
    fn schrodinger_is_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sp = space(&[3]);
        let g = random::slh_model(&mut rng, &sp, ModelShape::channels(1));
        let spec = random::noise(&mut rng, 1, 1.0);
        let form = LindbladForm::gaussian(&g.l_ops(), g.h(), &spec).unwrap();
        let heis = form.superoperator(SEQ);
        let schr = form.schrodinger_superoperator(SEQ);
        assert!(heis.adjoint().distance(&schr) < 1e-12);
        let rho = random::density(&mut rng, 3);
        assert!(linalg::max_abs(&(form.schrodinger(&rho) - schr.apply_matrix(&rho))) < 1e-12);
        assert!(linalg::trace(&form.schrodinger(&rho)).norm() < 1e-13);
        assert!(form.k().distance(&gaussian_k(&g.l_ops(), g.h(), &spec).unwrap()) < 1e-12);
    }

    #[test]
    fn evans_hudson_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sp = space(&[3]);
        let g = random::slh_model(&mut rng, &sp, ModelShape::channels(2));
        for j in 1..=2 {
            for k in 1..=2 {
                assert!(evans_hudson(&g, j, k, SEQ).unwrap().max_abs() < 1e-15);
            }
        }
        assert_eq!(evans_hudson(&g, 0, 0, SEQ).unwrap(), vacuum_lindblad(&g, SEQ));
        assert!(matches!(evans_hudson(&g, 3, 0, SEQ), Err(Error::IndexOutOfRange { .. })));

        let theta = 0.6;
        let phase = C64::from_polar(1.0, theta);
        let a = annihilator(&sp, 0).unwrap();
        let gs = SlhModel::new(vec![vec![Operator::scalar(&sp, phase)]], vec![a.clone()], Operator::zero(&sp)).unwrap();
        let x = random::operator(&mut rng, &sp, 1.0);
        let got = evans_hudson(&gs, 1, 0, SEQ).unwrap().apply(&x).unwrap();
        let want = crate::operator::commutator(&x, &a).unwrap() * phase.conj();
        assert!(got.distance(&want) < 1e-13);
        let got = evans_hudson(&gs, 0, 1, SEQ).unwrap().apply(&x).unwrap();
        let want = crate::operator::commutator(&a.adjoint(), &x).unwrap() * phase;
        assert!(got.distance(&want) < 1e-13);
        assert!(evans_hudson(&gs, 1, 1, SEQ).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn gaussian_k_examples() {
        let sp = space(&[4]);
        let a = annihilator(&sp, 0).unwrap();
        let h = Operator::zero(&sp);
        let l = std::slice::from_ref(&a);
        let vac = gaussian_k(l, &h, &GaussianNoiseSpec::vacuum(1)).unwrap();
        assert!(vac.distance(&vacuum_k(l, &h).unwrap()) < 1e-15);
        let n = 0.8;
        let th = gaussian_k(l, &h, &GaussianNoiseSpec::thermal(1, n).unwrap()).unwrap();
        let want = &a.adjoint() * &a * (-(n + 1.0) / 2.0) + &a * &a.adjoint() * (-n / 2.0);
        assert!(th.distance(&want) < 1e-14);
        let bad = GaussianNoiseSpec::single(1.0, re(2.0));
        assert!(matches!(gaussian_k(l, &h, &bad), Err(Error::InvalidNoise(_))));
        assert!(matches!(
            gaussian_k(l, &h, &GaussianNoiseSpec::vacuum(2)),
            Err(Error::ChannelMismatch { .. })
        ));
    }

    #[test]
    fn thermal_qubit_decay_rate() {
        let sp = space(&[2]);
        let sm = qubit::sigma_minus(&sp, 0).unwrap();
        let sz = qubit::sigma_z(&sp, 0).unwrap();
        let n = 1.0;
        let lind = gaussian_lindblad(&[sm], &Operator::zero(&sp), &GaussianNoiseSpec::thermal(1, n).unwrap(), SEQ).unwrap();
        // ℒσ_z = (2n+1)(I - σ_z) - 2n I with σ_z = +1 on the ground state:
        // d<σ_z>/dt = -(2n+1)<σ_z> + 1
        let got = lind.apply(&sz).unwrap();
        let want = &sz * -(2.0 * n + 1.0) + Operator::identity(&sp);
        assert!(got.distance(&want) < 1e-14);
    }

    #[test]
    fn strat_to_ito_examples() {
        let sp = space(&[5]);
        let a = annihilator(&sp, 0).unwrap();
        let h = Operator::zero(&sp);
        let l = std::slice::from_ref(&a);
        let (k, lind) = strat_to_ito(l, &h, &GaussianNoiseSpec::vacuum(1), SEQ).unwrap();
        assert!(k.distance(&vacuum_k(l, &h).unwrap()) < 1e-15);
        let g = SlhModel::from_coupling(l.to_vec(), h.clone()).unwrap();
        assert!(lind.distance(&vacuum_lindblad(&g, SEQ)) < 1e-13);

        let n = 1.7;
        let table = ItoTable::new(&GaussianNoiseSpec::thermal(1, n).unwrap());
        let corr = ito_correction_k(l, &table).unwrap();
        let want = (&a.adjoint() * &a + &a * &a.adjoint()) * (-n / 2.0);
        assert!(corr.distance(&want) < 1e-14);
    }

    #[test]
    fn thermal_check_examples() {
        let sp = space(&[5]);
        let a = annihilator(&sp, 0).unwrap();
        let g = SlhModel::from_coupling(vec![a], Operator::zero(&sp)).unwrap();
        assert!(thermal_heisenberg_check(&g, 0.0, SEQ).unwrap() < 1e-13);
        assert!(thermal_heisenberg_check(&g, 1.0, SEQ).unwrap() < 1e-12);
        let q = space(&[2]);
        let gq = SlhModel::from_coupling(vec![qubit::sigma_minus(&q, 0).unwrap()], qubit::sigma_z(&q, 0).unwrap()).unwrap();
        assert!(thermal_heisenberg_check(&gq, 0.5, SEQ).unwrap() < 1e-12);
        let op_s = SlhModel::from_parts_unchecked(
            vec![vec![qubit::sigma_x(&q, 0).unwrap()]],
            vec![Operator::zero(&q)],
            Operator::zero(&q),
        )
        .unwrap();
        assert!(matches!(thermal_heisenberg_check(&op_s, 0.5, SEQ), Err(Error::NotStatic)));
    }

    #[test]
    fn doubling_table() {
        let map = crate::gaussian::thermal_doubling(1.0).unwrap();
        let spec = map.vacuum_moments();
        let table = ItoTable::new(&spec);
        assert!((table.b_bstar(0, 0) - re(2.0)).norm() < 1e-14);
        assert!((table.bstar_b(0, 0) - re(1.0)).norm() < 1e-14);
        assert!(table.b_b(0, 0).norm() < 1e-14);
    }
}
