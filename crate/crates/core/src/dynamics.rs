//! Time evolution: Heisenberg semigroups `e^{tℒ}`, contraction semigroups
//! `e^{tK}`, Schrödinger-picture master equations, steady states and
//! expectation trajectories.
//!
//! Two master-equation backends exist. [`Backend::Exact`] exponentiates the
//! `D² x D²` generator once per distinct grid spacing. [`Backend::Rk4`] steps
//! `ρ̇ = ℒ†ρ` with sparse operator products and is the only option for the
//! amplifier cascades, where `D` is in the hundreds.

use std::fmt::Write as _;
use std::sync::OnceLock;

use log::warn;
use nalgebra::DVector;
use nalgebra_sparse::{CscMatrix, CsrMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::generators::LindbladForm;
use crate::linalg::{self, re, ComplexMatrix, C64};
use crate::operator::{HilbertSpec, Operator};
use crate::superop::SuperOperator;

pub const DENSITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;
pub const DISSIPATIVE_TOL: f64 = 1e-10;
pub const KERNEL_PIVOT_TOL: f64 = 1e-10;
pub const STEADY_RESIDUAL_TOL: f64 = 1e-10;
/// Upper bound on `h ‖ℒ‖` for the RK4 backend.
pub const STEP_NORM_BOUND: f64 = 0.1;
pub const LEAK_WARN: f64 = 1e-6;
pub const LEAK_FAIL: f64 = 1e-4;
/// RK4 steps between intermediate trace and truncation checks.
const CHECK_EVERY: usize = 250;

/// 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    space: HilbertSpec,
    matrix: ComplexMatrix,
}

impl DensityOperator {
    pub fn new(space: HilbertSpec, matrix: ComplexMatrix) -> Result<Self> {
        let d = space.total_dim();
        if matrix.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!(
                "density matrix is {}x{}, space has dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let tr = linalg::trace(&matrix);
        if (tr - re(1.0)).norm() > DENSITY_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let herm = linalg::hermitian_residual(&matrix);
        if herm > DENSITY_TOL {
            return Err(Error::InvalidDensity(format!("hermitian residual {herm:.3e}")));
        }
        let min = linalg::min_eigenvalue_hermitian(&matrix);
        if min < -DENSITY_TOL {
            return Err(Error::InvalidDensity(format!("eigenvalue {min:.3e}")));
        }
        Ok(Self { space, matrix })
    }

    /// Projector onto a product-basis state.
    pub fn basis(space: &HilbertSpec, levels: &[usize]) -> Result<Self> {
        let idx = space.basis_index(levels)?;
        let d = space.total_dim();
        let mut m = ComplexMatrix::zeros(d, d);
        m[(idx, idx)] = re(1.0);
        Ok(Self { space: space.clone(), matrix: m })
    }

    /// `|ψ⟩⟨ψ| / ⟨ψ|ψ⟩`.
    pub fn from_ket(space: &HilbertSpec, psi: &DVector<C64>) -> Result<Self> {
        if psi.len() != space.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "ket of length {} on dimension {}",
                psi.len(),
                space.total_dim()
            )));
        }
        let norm = psi.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidDensity("zero or non-finite ket".into()));
        }
        let v = psi / re(norm);
        Ok(Self { space: space.clone(), matrix: &v * v.adjoint() })
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

    /// `tr(ρ X)`.
    pub fn expectation(&self, x: &Operator) -> Result<C64> {
        if x.space() != &self.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(trace_product(&self.matrix, x.matrix()))
    }

    /// `self ⊗ other` on the concatenated space.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let space = self.space.extend(other.space.dims())?;
        Ok(Self { space, matrix: linalg::kron(&self.matrix, &other.matrix) })
    }
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    let mut acc = re(0.0);
    for j in 0..a.ncols() {
        for k in 0..a.nrows() {
            acc += a[(j, k)] * b[(k, j)];
        }
    }
    acc
}

/// Population of the top level of `factor`.
pub fn top_level_population(space: &HilbertSpec, rho: &ComplexMatrix, factor: usize) -> f64 {
    let top = space.dims()[factor] - 1;
    (0..space.total_dim())
        .filter(|&i| space.level(i, factor) == top)
        .map(|i| rho[(i, i)].re)
        .sum()
}

fn check_times(times: &[f64]) -> Result<()> {
    if let Some(&t0) = times.first() {
        if !(t0 >= 0.0) || !t0.is_finite() {
            return Err(Error::InvalidParameter(format!("time grid starts at {t0}")));
        }
    }
    for w in times.windows(2) {
        if !(w[1] > w[0]) || !w[1].is_finite() {
            return Err(Error::InvalidParameter(format!(
                "time grid not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("negative or non-finite time {t}")));
    }
    Ok(())
}

/// Expectation values on a time grid. Complex values export as `_re`/`_im`
/// column pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    labels: Vec<String>,
    values: Vec<Vec<C64>>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, labels: Vec<String>, values: Vec<Vec<C64>>) -> Result<Self> {
        check_times(&times)?;
        if values.len() != times.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} value rows for {} times",
                values.len(),
                times.len()
            )));
        }
        if let Some(row) = values.iter().find(|r| r.len() != labels.len()) {
            return Err(Error::DimensionMismatch(format!(
                "row of {} values for {} labels",
                row.len(),
                labels.len()
            )));
        }
        Ok(Self { times, labels, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// One row per time.
    pub fn values(&self) -> &[Vec<C64>] {
        &self.values
    }

    pub fn column(&self, label: &str) -> Option<Vec<C64>> {
        let j = self.labels.iter().position(|l| l == label)?;
        Some(self.values.iter().map(|r| r[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for l in &self.labels {
            let _ = write!(out, ",{l}_re,{l}_im");
        }
        out.push('\n');
        for (t, row) in self.times.iter().zip(&self.values) {
            out.push_str(&format_float(*t));
            for v in row {
                let _ = write!(out, ",{},{}", format_float(v.re), format_float(v.im));
            }
            out.push('\n');
        }
        out
    }
}

/// Density matrices on a time grid.
#[derive(Clone, Debug)]
pub struct StateTrajectory {
    space: HilbertSpec,
    times: Vec<f64>,
    states: Vec<ComplexMatrix>,
}

impl StateTrajectory {
    pub fn space(&self) -> &HilbertSpec {
        &self.space
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[ComplexMatrix] {
        &self.states
    }

    pub fn last(&self) -> Option<&ComplexMatrix> {
        self.states.last()
    }

    pub fn expectations(&self, observables: &[(String, Operator)]) -> Result<Trajectory> {
        if observables.iter().any(|(_, x)| x.space() != &self.space) {
            return Err(Error::SpaceMismatch);
        }
        let values = self
            .states
            .iter()
            .map(|rho| observables.iter().map(|(_, x)| trace_product(rho, x.matrix())).collect())
            .collect();
        Trajectory::new(
            self.times.clone(),
            observables.iter().map(|(l, _)| l.clone()).collect(),
            values,
        )
    }
}

/// `e^{tℒ} X`.
pub fn heisenberg_semigroup(lind: &SuperOperator, t: f64, x: &Operator) -> Result<Operator> {
    check_time(t)?;
    if x.space() != lind.space() {
        return Err(Error::SpaceMismatch);
    }
    let prop = linalg::matexp(&(lind.matrix() * re(t)))?;
    let out = SuperOperator::new(lind.space().clone(), prop)?;
    out.apply(x)
}

/// `e^{tK}` for dissipative `K` (`K + K* <= 0`).
pub fn contraction_semigroup(k: &Operator, t: f64) -> Result<Operator> {
    check_time(t)?;
    let sym = k.matrix() + k.matrix().adjoint();
    let top = linalg::max_eigenvalue_hermitian(&sym);
    if top > DISSIPATIVE_TOL * k.max_abs().max(1.0) {
        return Err(Error::NotDissipative(top));
    }
    Operator::new(k.space().clone(), linalg::matexp(&(k.matrix() * re(t)))?)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Backend {
    #[default]
    Exact,
    /// Fixed-step RK4. `step = None` picks `h = 0.1 / ‖ℒ‖`.
    Rk4 { step: Option<f64> },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvolveOptions {
    pub backend: Backend,
    /// Factors whose top level is watched for truncation leakage.
    pub truncated_factors: Vec<usize>,
}

fn check_state(space: &HilbertSpec, rho: &ComplexMatrix, truncated: &[usize], full: bool) -> Result<()> {
    let tr = linalg::trace(rho);
    let drift = (tr - re(1.0)).norm();
    if drift > TRACE_TOL || !drift.is_finite() {
        return Err(Error::TraceDrift(drift));
    }
    for &f in truncated {
        let pop = top_level_population(space, rho, f);
        if pop > LEAK_FAIL {
            return Err(Error::TruncationLeak { factor: f, population: pop });
        }
        if pop > LEAK_WARN {
            warn!("top level of factor {f} holds population {pop:.3e}");
        }
    }
    if full {
        let min = linalg::min_eigenvalue_hermitian(rho);
        if min < -POSITIVITY_TOL {
            return Err(Error::PositivityViolation(min));
        }
    }
    Ok(())
}

/// Evolves `ρ̇ = ℒ†ρ` with the exact propagator, `ℒ` the Heisenberg-picture
/// generator.
pub fn master_evolve(lind: &SuperOperator, rho0: &DensityOperator, times: &[f64]) -> Result<StateTrajectory> {
    exact_evolve(lind, rho0, times, &[])
}

fn exact_evolve(
    lind: &SuperOperator,
    rho0: &DensityOperator,
    times: &[f64],
    truncated: &[usize],
) -> Result<StateTrajectory> {
    check_times(times)?;
    if rho0.space() != lind.space() {
        return Err(Error::SpaceMismatch);
    }
    let space = lind.space().clone();
    let d = space.total_dim();
    let gen = lind.matrix().adjoint();
    let mut cache: Option<(f64, ComplexMatrix)> = None;
    let mut v = DVector::from_column_slice(rho0.matrix().as_slice());
    let mut now = 0.0;
    let mut states = Vec::with_capacity(times.len());
    for &t in times {
        let dt = t - now;
        if dt > 0.0 {
            let reuse = matches!(&cache, Some((h, _)) if (h - dt).abs() <= 1e-14 * dt.max(1.0));
            if !reuse {
                cache = Some((dt, linalg::matexp(&(&gen * re(dt)))?));
            }
            let (_, p) = cache.as_ref().expect("propagator cached");
            v = p * v;
        }
        now = t;
        let rho = ComplexMatrix::from_column_slice(d, d, v.as_slice());
        check_state(&space, &rho, truncated, true)?;
        states.push(rho);
    }
    Ok(StateTrajectory { space, times: times.to_vec(), states })
}

/// Row-compressed form of `m`, for products `m X`.
fn rows(m: &ComplexMatrix) -> CsrMatrix<C64> {
    CsrMatrix::from(m)
}

/// Column-compressed form of `m`, for products `X m`.
fn cols(m: &ComplexMatrix) -> CscMatrix<C64> {
    CscMatrix::from(m)
}

/// `out += A X`, all dense matrices column-major `d x d`.
fn add_left(a: &CsrMatrix<C64>, x: &[C64], out: &mut [C64], d: usize) {
    let (offsets, idx, vals) = (a.row_offsets(), a.col_indices(), a.values());
    for (xc, oc) in x.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
        for (i, o) in oc.iter_mut().enumerate() {
            let mut acc = re(0.0);
            for p in offsets[i]..offsets[i + 1] {
                acc += vals[p] * xc[idx[p]];
            }
            *o += acc;
        }
    }
}

/// `out += X B`.
fn add_right(x: &[C64], b: &CscMatrix<C64>, out: &mut [C64], d: usize) {
    let (offsets, idx, vals) = (b.col_offsets(), b.row_indices(), b.values());
    for (j, oc) in out.chunks_exact_mut(d).enumerate() {
        for p in offsets[j]..offsets[j + 1] {
            let v = vals[p];
            let xc = &x[idx[p] * d..idx[p] * d + d];
            for (o, &xv) in oc.iter_mut().zip(xc) {
                *o += v * xv;
            }
        }
    }
}

/// One picture of a Lindbladian as `Σ P X Q + L X + X R`.
#[derive(Clone, Debug)]
struct SparseTerms {
    left: CsrMatrix<C64>,
    right: CscMatrix<C64>,
    sandwiches: Vec<(CsrMatrix<C64>, CscMatrix<C64>)>,
}

impl SparseTerms {
    fn nnz(&self) -> usize {
        self.left.nnz() + self.right.nnz() + self.sandwiches.iter().map(|(p, q)| p.nnz() + q.nnz()).sum::<usize>()
    }

    /// `out = map(x)`; `scratch` has the length of `x`.
    fn apply(&self, x: &[C64], out: &mut [C64], scratch: &mut [C64], d: usize) {
        out.fill(re(0.0));
        add_left(&self.left, x, out, d);
        add_right(x, &self.right, out, d);
        for (p, q) in &self.sandwiches {
            scratch.fill(re(0.0));
            add_left(p, x, scratch, d);
            add_right(scratch, q, out, d);
        }
    }
}

/// `X ↦ M + M†` with `M = X R + Σ (X P)† Q`, which equals the full map on
/// hermitian `X` and returns an exactly hermitian result. Every product is a
/// column axpy.
#[derive(Clone, Debug)]
struct HermitianTerms {
    right: CscMatrix<C64>,
    pairs: Vec<(CscMatrix<C64>, CscMatrix<C64>)>,
}

struct HermitianWork {
    m: Vec<C64>,
    t: Vec<C64>,
    z: Vec<C64>,
}

impl HermitianWork {
    fn new(d: usize) -> Self {
        let z = vec![re(0.0); d * d];
        Self { m: z.clone(), t: z.clone(), z }
    }
}

fn adjoint_into(x: &[C64], out: &mut [C64], d: usize) {
    for (j, oc) in out.chunks_exact_mut(d).enumerate() {
        for (i, o) in oc.iter_mut().enumerate() {
            *o = x[j + i * d].conj();
        }
    }
}

impl HermitianTerms {
    fn apply(&self, x: &[C64], out: &mut [C64], w: &mut HermitianWork, d: usize) {
        w.m.fill(re(0.0));
        add_right(x, &self.right, &mut w.m, d);
        for (p, q) in &self.pairs {
            w.t.fill(re(0.0));
            add_right(x, p, &mut w.t, d);
            adjoint_into(&w.t, &mut w.z, d);
            add_right(&w.z, q, &mut w.m, d);
        }
        for j in 0..d {
            for i in 0..d {
                out[i + j * d] = w.m[i + j * d] + w.m[j + i * d].conj();
            }
        }
    }
}

/// Sparse form of a Lindbladian in both pictures.
#[derive(Clone, Debug)]
pub struct SparseGenerator {
    dim: usize,
    schrodinger: SparseTerms,
    heisenberg: SparseTerms,
    schrodinger_h: HermitianTerms,
    heisenberg_h: HermitianTerms,
    norm: OnceLock<f64>,
}

impl SparseGenerator {
    pub fn new(form: &LindbladForm) -> Self {
        let g = form.g();
        let g_dag = g.adjoint();
        let half = |m: &ComplexMatrix| cols(&(m * re(0.5)));
        Self {
            dim: form.space().total_dim(),
            // ℒ†ρ = Σ B ρ A† + G†ρ + ρG
            schrodinger: SparseTerms {
                left: rows(&g_dag),
                right: cols(g),
                sandwiches: form.pairs().iter().map(|(a, b)| (rows(b), cols(&a.adjoint()))).collect(),
            },
            // ℒX = Σ A† X B + G X + X G†
            heisenberg: SparseTerms {
                left: rows(g),
                right: cols(&g_dag),
                sandwiches: form.pairs().iter().map(|(a, b)| (rows(&a.adjoint()), cols(b))).collect(),
            },
            // M = ρG + ½ Σ (ρB†)† A†
            schrodinger_h: HermitianTerms {
                right: cols(g),
                pairs: form.pairs().iter().map(|(a, b)| (cols(&b.adjoint()), half(&a.adjoint()))).collect(),
            },
            // M = XG† + ½ Σ (XA)† B
            heisenberg_h: HermitianTerms {
                right: cols(&g_dag),
                pairs: form.pairs().iter().map(|(a, b)| (cols(a), half(b))).collect(),
            },
            norm: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stored entries of the Schrödinger-picture factors.
    pub fn nnz(&self) -> usize {
        self.schrodinger.nnz()
    }

    /// `ℒ†ρ = Σ B ρ A† + G†ρ + ρG`.
    pub fn schrodinger(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        self.dense(&self.schrodinger, rho)
    }

    /// `ℒX = Σ A† X B + G X + X G†`.
    pub fn heisenberg(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.dense(&self.heisenberg, x)
    }

    /// `ℒ†ρ` through the hermitian kernel; exact only for hermitian `ρ`.
    pub fn schrodinger_hermitian(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let d = self.dim;
        assert_eq!(rho.shape(), (d, d), "operator shape");
        let mut out = ComplexMatrix::zeros(d, d);
        self.schrodinger_h.apply(rho.as_slice(), out.as_mut_slice(), &mut HermitianWork::new(d), d);
        out
    }

    fn dense(&self, terms: &SparseTerms, x: &ComplexMatrix) -> ComplexMatrix {
        let d = self.dim;
        assert_eq!(x.shape(), (d, d), "operator shape");
        let mut out = ComplexMatrix::zeros(d, d);
        let mut scratch = vec![re(0.0); d * d];
        terms.apply(x.as_slice(), out.as_mut_slice(), &mut scratch, d);
        out
    }

    /// Power-iteration estimate of the operator norm of `ℒ†` on the
    /// Hilbert–Schmidt space (largest singular value). Cached.
    pub fn norm_estimate(&self) -> f64 {
        *self.norm.get_or_init(|| self.power_iteration())
    }

    fn power_iteration(&self) -> f64 {
        let d = self.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut x = crate::random::hermitian(&mut rng, d, 1.0);
        x /= re(linalg::frobenius(&x));
        let mut y = ComplexMatrix::zeros(d, d);
        let mut z = ComplexMatrix::zeros(d, d);
        let mut work = HermitianWork::new(d);
        let mut lambda = 0.0;
        for _ in 0..500 {
            self.schrodinger_h.apply(x.as_slice(), y.as_mut_slice(), &mut work, d);
            self.heisenberg_h.apply(y.as_slice(), z.as_mut_slice(), &mut work, d);
            let next = linalg::frobenius(&z);
            if next == 0.0 {
                return 0.0;
            }
            x.copy_from(&z);
            x /= re(next);
            let done = (next - lambda).abs() <= 1e-4 * next;
            lambda = next;
            if done {
                break;
            }
        }
        lambda.sqrt()
    }
}

/// Evolves `ρ̇ = ℒ†ρ` for the Lindbladian `form` with the chosen backend.
pub fn evolve(
    form: &LindbladForm,
    rho0: &DensityOperator,
    times: &[f64],
    opts: &EvolveOptions,
) -> Result<StateTrajectory> {
    if rho0.space() != form.space() {
        return Err(Error::SpaceMismatch);
    }
    for &f in &opts.truncated_factors {
        if f >= form.space().num_factors() {
            return Err(Error::FactorOutOfRange { index: f, factors: form.space().num_factors() });
        }
    }
    match opts.backend {
        Backend::Exact => exact_evolve(
            &form.superoperator(crate::par::Parallelism::default()),
            rho0,
            times,
            &opts.truncated_factors,
        ),
        Backend::Rk4 { step } => rk4_evolve(&SparseGenerator::new(form), rho0, times, step, &opts.truncated_factors),
    }
}

/// Fixed-step RK4 on `ρ̇ = ℒ†ρ`. Each grid interval is split into equal
/// steps no longer than `step`.
pub fn rk4_evolve(
    gen: &SparseGenerator,
    rho0: &DensityOperator,
    times: &[f64],
    step: Option<f64>,
    truncated: &[usize],
) -> Result<StateTrajectory> {
    check_times(times)?;
    if rho0.space().total_dim() != gen.dim {
        return Err(Error::SpaceMismatch);
    }
    let norm = gen.norm_estimate();
    let h = match step {
        Some(h) if !(h > 0.0) || !h.is_finite() => {
            return Err(Error::InvalidParameter(format!("step {h}")));
        }
        Some(h) => {
            if h * norm > STEP_NORM_BOUND * (1.0 + 1e-12) {
                return Err(Error::StepStability(h * norm));
            }
            h
        }
        None if norm > 0.0 => STEP_NORM_BOUND / norm,
        None => f64::INFINITY,
    };
    let space = rho0.space().clone();
    let mut rho = (rho0.matrix() + rho0.matrix().adjoint()) * re(0.5);
    let mut work = Rk4Work::new(gen.dim);
    let mut now = 0.0;
    let mut states = Vec::with_capacity(times.len());
    let mut taken = 0usize;
    for &t in times {
        let dt = t - now;
        if dt > 0.0 {
            let n = if h.is_finite() { (dt / h * (1.0 - 1e-12)).ceil().max(1.0) as usize } else { 1 };
            let hs = dt / n as f64;
            for _ in 0..n {
                work.step(gen, rho.as_mut_slice(), hs);
                taken += 1;
                if taken % CHECK_EVERY == 0 {
                    check_state(&space, &rho, truncated, false)?;
                }
            }
        }
        now = t;
        check_state(&space, &rho, truncated, true)?;
        states.push(rho.clone());
    }
    Ok(StateTrajectory { space, times: times.to_vec(), states })
}

/// RK4 buffers. States stay exactly hermitian: the kernel output is, and
/// stages are real combinations of hermitian matrices.
struct Rk4Work {
    acc: Vec<C64>,
    stage: Vec<C64>,
    k: Vec<C64>,
    kernel: HermitianWork,
}

impl Rk4Work {
    fn new(d: usize) -> Self {
        let z = vec![re(0.0); d * d];
        Self { acc: z.clone(), stage: z.clone(), k: z, kernel: HermitianWork::new(d) }
    }

    fn step(&mut self, gen: &SparseGenerator, rho: &mut [C64], h: f64) {
        let d = gen.dim;
        let f = &gen.schrodinger_h;
        self.acc.copy_from_slice(rho);
        self.stage.copy_from_slice(rho);
        for (weight, next) in [(h / 6.0, 0.5 * h), (h / 3.0, 0.5 * h), (h / 3.0, h), (h / 6.0, 0.0)] {
            f.apply(&self.stage, &mut self.k, &mut self.kernel, d);
            for ((a, s), (&k, &r)) in self.acc.iter_mut().zip(self.stage.iter_mut()).zip(self.k.iter().zip(rho.iter())) {
                *a += k * weight;
                *s = r + k * next;
            }
        }
        rho.copy_from_slice(&self.acc);
    }
}

/// Counts pivots of a full-pivot LU below `KERNEL_PIVOT_TOL` times the
/// largest pivot.
pub fn kernel_dimension(m: &ComplexMatrix) -> usize {
    let u = m.clone().full_piv_lu().u();
    let piv: Vec<f64> = (0..u.nrows().min(u.ncols())).map(|i| u[(i, i)].norm()).collect();
    let max = piv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return m.nrows();
    }
    piv.iter().filter(|&&p| p <= KERNEL_PIVOT_TOL * max).count() + m.nrows().saturating_sub(piv.len())
}

/// Unique stationary state of `ρ̇ = ℒ†ρ`.
pub fn steady_state(lind: &SuperOperator) -> Result<DensityOperator> {
    let space = lind.space().clone();
    let d = space.total_dim();
    let gen = lind.matrix().adjoint();
    let kernel = kernel_dimension(&gen);
    if kernel != 1 {
        return Err(Error::DegenerateKernel(kernel));
    }
    let mut a = gen.clone();
    let n = d * d;
    for j in 0..n {
        a[(0, j)] = re(0.0);
    }
    for i in 0..d {
        a[(0, i + d * i)] = re(1.0);
    }
    let mut rhs = DVector::zeros(n);
    rhs[0] = re(1.0);
    let x = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("trace-constrained steady-state system".into()))?;
    let rho = ComplexMatrix::from_column_slice(d, d, x.as_slice());
    let mut rho = (&rho + rho.adjoint()) * re(0.5);
    let tr = linalg::trace(&rho);
    rho /= tr;
    let residual = (&gen * DVector::from_column_slice(rho.as_slice())).norm();
    if residual > STEADY_RESIDUAL_TOL {
        return Err(Error::NotConverging(format!("steady-state residual {residual:.3e}")));
    }
    DensityOperator::new(space, rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::GaussianNoiseSpec;
    use crate::generators::{gaussian_lindblad, vacuum_lindblad};
    use crate::linalg::c;
    use crate::operator::{annihilator, number, qubit};
    use crate::par::Parallelism;
    use crate::random;
    use crate::slh::SlhModel;

    fn sp(d: &[usize]) -> HilbertSpec {
        HilbertSpec::new(d.to_vec()).unwrap()
    }

    #[test]
    fn density_validation() {
        let q = sp(&[2]);
        assert!(DensityOperator::basis(&q, &[1]).is_ok());
        let bad = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![re(1.5), re(-0.5)]));
        assert!(matches!(DensityOperator::new(q.clone(), bad), Err(Error::InvalidDensity(_))));
        let half = ComplexMatrix::identity(2, 2) * re(0.4);
        assert!(matches!(DensityOperator::new(q.clone(), half), Err(Error::InvalidDensity(_))));
        let psi = DVector::from_vec(vec![re(1.0), c(0.0, 1.0)]);
        let rho = DensityOperator::from_ket(&q, &psi).unwrap();
        assert!((rho.matrix()[(0, 1)] - c(0.0, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn heisenberg_semigroup_examples() {
        let q = sp(&[2]);
        let sz = qubit::sigma_z(&q, 0).unwrap();
        let sx = qubit::sigma_x(&q, 0).unwrap();
        let g = SlhModel::from_coupling(vec![], sz.clone()).unwrap();
        let lind = vacuum_lindblad(&g, Parallelism::Sequential);
        assert!(heisenberg_semigroup(&lind, 0.0, &sx).unwrap().distance(&sx) < 1e-15);
        let rotated = heisenberg_semigroup(&lind, std::f64::consts::PI, &sx).unwrap();
        assert!(rotated.distance(&sx) < 1e-12);
        assert!(matches!(heisenberg_semigroup(&lind, -1.0, &sx), Err(Error::InvalidParameter(_))));

        let cav = sp(&[6]);
        let a = annihilator(&cav, 0).unwrap();
        let num = number(&cav, 0).unwrap();
        let lind = vacuum_lindblad(&SlhModel::from_coupling(vec![a], Operator::zero(&cav)).unwrap(), Parallelism::Sequential);
        let dt = 1e-5;
        let fd = (heisenberg_semigroup(&lind, dt, &num).unwrap() - num.clone()) * (1.0 / dt);
        let idx = crate::operator::untruncated_indices(&cav, &[0]);
        let got = crate::operator::sub_block(fd.matrix(), &idx);
        let want = crate::operator::sub_block(&(-num.matrix()), &idx);
        assert!(linalg::max_abs(&(got - want)) < 1e-4);

        let s = heisenberg_semigroup(&lind, 0.3, &heisenberg_semigroup(&lind, 0.5, &num).unwrap()).unwrap();
        assert!(s.distance(&heisenberg_semigroup(&lind, 0.8, &num).unwrap()) < 1e-10);
    }

    #[test]
    fn contraction_semigroup_examples() {
        let cav = sp(&[4]);
        assert!(contraction_semigroup(&Operator::zero(&cav), 2.0).unwrap().distance(&Operator::identity(&cav)) < 1e-15);
        let num = number(&cav, 0).unwrap();
        let k = &num * -0.5;
        let t = 1.3;
        let e = contraction_semigroup(&k, t).unwrap();
        for n in 0..4 {
            assert!((e.matrix()[(n, n)] - re((-t * n as f64 / 2.0).exp())).norm() < 1e-14);
        }
        assert!(matches!(contraction_semigroup(&num, 1.0), Err(Error::NotDissipative(_))));

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let g = random::slh_model(&mut rng, &sp(&[3, 2]), random::ModelShape::channels(2));
            let k = g.k();
            let mut last = f64::INFINITY;
            for t in [0.0, 0.2, 0.5, 1.0, 2.0] {
                let nrm = linalg::spectral_norm(contraction_semigroup(&k, t).unwrap().matrix());
                assert!(nrm <= 1.0 + 1e-10);
                assert!(nrm <= last + 1e-12);
                last = nrm;
            }
        }
    }

    #[test]
    fn master_evolve_examples() {
        let q = sp(&[2]);
        let zero = SuperOperator::zero(&q);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = DensityOperator::new(q.clone(), random::density(&mut rng, 2)).unwrap();
        let traj = master_evolve(&zero, &rho, &[0.0, 1.0, 5.0]).unwrap();
        for s in traj.states() {
            assert!(linalg::max_abs(&(s - rho.matrix())) < 1e-15);
        }

        let sm = qubit::sigma_minus(&q, 0).unwrap();
        let pe = &sm.adjoint() * &sm;
        let g = SlhModel::from_coupling(vec![sm], Operator::zero(&q)).unwrap();
        let lind = vacuum_lindblad(&g, Parallelism::Sequential);
        let excited = DensityOperator::basis(&q, &[1]).unwrap();
        let times = [0.0, 0.5, 1.0, 2.0];
        let traj = master_evolve(&lind, &excited, &times).unwrap();
        let obs = traj.expectations(&[("pe".into(), pe)]).unwrap();
        for (t, v) in times.iter().zip(obs.column("pe").unwrap()) {
            assert!((v.re - (-t).exp()).abs() < 1e-12);
        }
        assert!(matches!(master_evolve(&lind, &excited, &[1.0, 0.5]), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn duality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = sp(&[3]);
        let g = random::slh_model(&mut rng, &s, random::ModelShape::channels(1));
        let spec = random::noise(&mut rng, 1, 0.8);
        let lind = gaussian_lindblad(&g.l_ops(), g.h(), &spec, Parallelism::Sequential).unwrap();
        let rho = DensityOperator::new(s.clone(), random::density(&mut rng, 3)).unwrap();
        let x = random::operator(&mut rng, &s, 1.0);
        for t in [0.1, 1.0] {
            let lhs = rho.expectation(&heisenberg_semigroup(&lind, t, &x).unwrap()).unwrap();
            let traj = master_evolve(&lind, &rho, &[t]).unwrap();
            let rhs = trace_product(traj.last().unwrap(), x.matrix());
            assert!((lhs - rhs).norm() < 1e-9);
        }
    }

    #[test]
    fn steady_states() {
        let q = sp(&[2]);
        let sm = qubit::sigma_minus(&q, 0).unwrap();
        let g = SlhModel::from_coupling(vec![sm.clone()], Operator::zero(&q)).unwrap();
        let ss = steady_state(&vacuum_lindblad(&g, Parallelism::Sequential)).unwrap();
        assert!(linalg::max_abs(&(ss.matrix() - DensityOperator::basis(&q, &[0]).unwrap().matrix())) < 1e-12);

        let lind = gaussian_lindblad(&[sm], &Operator::zero(&q), &GaussianNoiseSpec::thermal(1, 1.0).unwrap(), Parallelism::Sequential).unwrap();
        let ss = steady_state(&lind).unwrap();
        assert!((ss.matrix()[(0, 0)].re - 2.0 / 3.0).abs() < 1e-12);
        assert!((ss.matrix()[(1, 1)].re - 1.0 / 3.0).abs() < 1e-12);

        assert!(matches!(steady_state(&SuperOperator::zero(&q)), Err(Error::DegenerateKernel(4))));
        let two = sp(&[2, 2]);
        let local = SlhModel::from_coupling(vec![qubit::sigma_minus(&two, 0).unwrap()], Operator::zero(&two)).unwrap();
        assert!(matches!(
            steady_state(&vacuum_lindblad(&local, Parallelism::Sequential)),
            Err(Error::DegenerateKernel(k)) if k > 1
        ));
    }

    fn random_form(seed: u64, dims: &[usize]) -> (LindbladForm, DensityOperator) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = sp(dims);
        let g = random::slh_model(&mut rng, &s, random::ModelShape::channels(1).with_scale(0.5));
        let spec = random::noise(&mut rng, 1, 0.5);
        let form = LindbladForm::gaussian(&g.l_ops(), g.h(), &spec).unwrap();
        let rho = DensityOperator::new(s.clone(), random::density(&mut rng, s.total_dim())).unwrap();
        (form, rho)
    }

    #[test]
    fn sparse_generator_matches_dense() {
        let (form, rho) = random_form(21, &[4]);
        let gen = SparseGenerator::new(&form);
        assert!(linalg::max_abs(&(gen.schrodinger(rho.matrix()) - form.schrodinger(rho.matrix()))) < 1e-13);
        assert!(linalg::max_abs(&(gen.heisenberg(rho.matrix()) - form.heisenberg(rho.matrix()))) < 1e-13);
        assert!(linalg::max_abs(&(gen.schrodinger_hermitian(rho.matrix()) - form.schrodinger(rho.matrix()))) < 1e-13);
        let dense = form.schrodinger_superoperator(Parallelism::Sequential);
        let exact = linalg::spectral_norm(dense.matrix());
        assert!((gen.norm_estimate() - exact).abs() < 1e-2 * exact);
    }

    #[test]
    fn rk4_matches_exact() {
        let (form, rho) = random_form(22, &[4]);
        let exact = evolve(&form, &rho, &[1.0], &EvolveOptions::default()).unwrap();
        let h = 0.05 / SparseGenerator::new(&form).norm_estimate();
        let opts = EvolveOptions { backend: Backend::Rk4 { step: Some(h) }, truncated_factors: vec![] };
        let rk = evolve(&form, &rho, &[1.0], &opts).unwrap();
        let e = linalg::max_abs(&(exact.last().unwrap() - rk.last().unwrap()));
        assert!(e < 1e-8, "rk4 error {e:e}");

        let gen = SparseGenerator::new(&form);
        let norm = gen.norm_estimate();
        let h = 0.1 / norm;
        let err = |h: f64| {
            let r = rk4_evolve(&gen, &rho, &[1.0], Some(h), &[]).unwrap();
            linalg::max_abs(&(exact.last().unwrap() - r.last().unwrap()))
        };
        let ratio = err(h) / err(h / 2.0);
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
        assert!(matches!(rk4_evolve(&gen, &rho, &[1.0], Some(1.0 / norm), &[]), Err(Error::StepStability(_))));
    }

    #[test]
    fn rk4_conserves_trace() {
        let (form, rho) = random_form(23, &[3]);
        let gen = SparseGenerator::new(&form);
        let h = 0.1 / gen.norm_estimate();
        let traj = rk4_evolve(&gen, &rho, &[h * 1e4], Some(h), &[]).unwrap();
        assert!((linalg::trace(traj.last().unwrap()) - re(1.0)).norm() < 1e-9);
    }

    #[test]
    fn truncation_leak_fails() {
        let cav = sp(&[3]);
        let a = annihilator(&cav, 0).unwrap();
        let form = LindbladForm::gaussian(&[a], &Operator::zero(&cav), &GaussianNoiseSpec::thermal(1, 2.0).unwrap()).unwrap();
        let rho = DensityOperator::basis(&cav, &[0]).unwrap();
        let opts = EvolveOptions { backend: Backend::Exact, truncated_factors: vec![0] };
        assert!(matches!(evolve(&form, &rho, &[1.0], &opts), Err(Error::TruncationLeak { factor: 0, .. })));
    }

    #[test]
    fn csv_format() {
        let t = Trajectory::new(vec![0.0, 0.5], vec!["x".into()], vec![vec![c(1.0, 0.0)], vec![c(0.25, -1.0)]]).unwrap();
        let csv = t.to_csv();
        assert_eq!(
            csv,
            "t,x_re,x_im\n0.0000000000000000e0,1.0000000000000000e0,0.0000000000000000e0\n\
             5.0000000000000000e-1,2.5000000000000000e-1,-1.0000000000000000e0\n"
        );
        assert!(Trajectory::new(vec![1.0, 1.0], vec![], vec![vec![], vec![]]).is_err());
    }
}
