//! Gaussian field states: second moments `(N, M)`, covariance matrices,
//! Bogoliubov transformations and vacuum dilations.
//!
//! Conventions: `n_ij = <a_i* a_j>` (hermitian), `m_ij = <a_i a_j>`
//! (symmetric), `F = [[I + Nᵀ, M], [M*, N]]`, and `ã = U a + V a^#` with
//! `W = Δ(U, V) = [[U, V], [V^#, U^#]]` where `X^#` is the entrywise conjugate.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c, conj, re, ComplexMatrix, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianNoiseSpec {
    n: ComplexMatrix,
    m: ComplexMatrix,
}

impl GaussianNoiseSpec {
    /// Shape-checked constructor; validity is a separate question, see [`validate_noise`].
    pub fn new(n: ComplexMatrix, m: ComplexMatrix) -> Result<Self> {
        let d = linalg::ensure_square(&n)?;
        linalg::ensure_square(&m)?;
        if m.nrows() != d {
            return Err(Error::DimensionMismatch(format!(
                "N is {d}x{d} but M is {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self { n, m })
    }

    /// Like [`GaussianNoiseSpec::new`] but rejects specs failing [`validate_noise`].
    pub fn new_valid(n: ComplexMatrix, m: ComplexMatrix, tol: f64) -> Result<Self> {
        let spec = Self::new(n, m)?;
        let report = validate_noise(&spec, tol);
        match report.first_failure() {
            None => Ok(spec),
            Some(check) => Err(Error::InvalidNoise(format!(
                "{} fails (residual {:.3e})",
                check.name, check.residual
            ))),
        }
    }

    pub fn vacuum(channels: usize) -> Self {
        Self {
            n: ComplexMatrix::zeros(channels, channels),
            m: ComplexMatrix::zeros(channels, channels),
        }
    }

    pub fn thermal(channels: usize, n: f64) -> Result<Self> {
        if !(n >= 0.0) {
            return Err(Error::InvalidNoise(format!("thermal occupation {n} < 0")));
        }
        Ok(Self {
            n: ComplexMatrix::identity(channels, channels) * re(n),
            m: ComplexMatrix::zeros(channels, channels),
        })
    }

    /// Single-channel spec with `<b*b> = n`, `<bb> = m`.
    pub fn single(n: f64, m: C64) -> Self {
        Self {
            n: ComplexMatrix::from_element(1, 1, re(n)),
            m: ComplexMatrix::from_element(1, 1, m),
        }
    }

    pub fn channels(&self) -> usize {
        self.n.nrows()
    }

    pub fn n(&self) -> &ComplexMatrix {
        &self.n
    }

    pub fn m(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn is_vacuum(&self) -> bool {
        self.n.iter().chain(self.m.iter()).all(|z| *z == C64::new(0.0, 0.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseReport {
    pub checks: Vec<Check>,
}

impl NoiseReport {
    pub fn is_valid(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_N_HERMITIAN: &str = "N hermitian";
pub const CHECK_N_PSD: &str = "N positive semidefinite";
pub const CHECK_M_SYMMETRIC: &str = "M symmetric";
pub const CHECK_F_PSD: &str = "F positive semidefinite";
pub const CHECK_RANGE: &str = "ran(M) within ran(I+N^T)";
pub const CHECK_KERNEL: &str = "ran(M^*) within ran(N)";
pub const CHECK_SCHUR: &str = "Schur condition M N^- M^* <= I+N^T";

/// Runs every validity condition on `(N, M)` and reports each residual.
///
/// Residuals are magnitudes of violation: entrywise asymmetry for the
/// symmetry checks, `max(0, -λ_min)` for positivity checks and the largest
/// entry of the projector remainder for range checks.
pub fn validate_noise(spec: &GaussianNoiseSpec, tol: f64) -> NoiseReport {
    let d = spec.channels();
    let n = &spec.n;
    let m = &spec.m;
    let id = ComplexMatrix::identity(d, d);
    let mut checks = Vec::with_capacity(7);
    let mut push = |name, residual: f64| {
        checks.push(Check { name, passed: residual <= tol, residual });
    };

    push(CHECK_N_HERMITIAN, linalg::hermitian_residual(n));
    push(CHECK_N_PSD, neg_part(n));
    push(CHECK_M_SYMMETRIC, linalg::symmetric_residual(m));
    push(CHECK_F_PSD, neg_part(&CovarianceMatrix::from_noise(spec).f));

    let top_left = &id + n.transpose();
    let p = linalg::range_projector(&top_left);
    push(CHECK_RANGE, linalg::max_abs(&((&id - p) * m)));

    let pn = linalg::range_projector(n);
    push(CHECK_KERNEL, linalg::max_abs(&(m * (&id - pn))));

    let schur = top_left - m * linalg::pinv(n) * m.adjoint();
    push(CHECK_SCHUR, neg_part(&schur));

    NoiseReport { checks }
}

fn neg_part(m: &ComplexMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    (-linalg::min_eigenvalue_hermitian(m)).max(0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceMatrix {
    pub f: ComplexMatrix,
}

impl CovarianceMatrix {
    pub fn from_noise(spec: &GaussianNoiseSpec) -> Self {
        let d = spec.channels();
        let mut f = ComplexMatrix::zeros(2 * d, 2 * d);
        f.view_mut((0, 0), (d, d))
            .copy_from(&(ComplexMatrix::identity(d, d) + spec.n.transpose()));
        f.view_mut((0, d), (d, d)).copy_from(&spec.m);
        f.view_mut((d, 0), (d, d)).copy_from(&spec.m.adjoint());
        f.view_mut((d, d), (d, d)).copy_from(&spec.n);
        Self { f }
    }

    pub fn vacuum(d: usize) -> Self {
        Self::from_noise(&GaussianNoiseSpec::vacuum(d))
    }

    pub fn modes(&self) -> usize {
        self.f.nrows() / 2
    }

    pub fn n_block(&self) -> ComplexMatrix {
        let d = self.modes();
        self.f.view((d, d), (d, d)).into_owned()
    }

    pub fn m_block(&self) -> ComplexMatrix {
        let d = self.modes();
        self.f.view((0, d), (d, d)).into_owned()
    }

    pub fn top_left(&self) -> ComplexMatrix {
        let d = self.modes();
        self.f.view((0, 0), (d, d)).into_owned()
    }

    /// Noise spec read off the `N` and `M` blocks.
    pub fn to_noise(&self) -> GaussianNoiseSpec {
        GaussianNoiseSpec { n: self.n_block(), m: self.m_block() }
    }

    /// Largest deviation from the block pattern of a physical covariance:
    /// top-left equals `I + Nᵀ`, bottom-left equals `M*`, `N` hermitian, `M` symmetric.
    pub fn structure_residual(&self) -> f64 {
        let d = self.modes();
        let n = self.n_block();
        let m = self.m_block();
        let tl = self.top_left() - ComplexMatrix::identity(d, d) - n.transpose();
        let bl = self.f.view((d, 0), (d, d)).into_owned() - m.adjoint();
        linalg::max_abs(&tl)
            .max(linalg::max_abs(&bl))
            .max(linalg::hermitian_residual(&n))
            .max(linalg::symmetric_residual(&m))
    }

    /// The `d x d` covariance of the first `d` modes.
    pub fn restrict(&self, d: usize) -> Result<Self> {
        let big = self.modes();
        if d > big {
            return Err(Error::DimensionMismatch(format!("cannot restrict {big} modes to {d}")));
        }
        let idx: Vec<usize> = (0..d).chain(big..big + d).collect();
        let f = DMatrix::from_fn(2 * d, 2 * d, |i, j| self.f[(idx[i], idx[j])]);
        Ok(Self { f })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BogoliubovMap {
    pub u: ComplexMatrix,
    pub v: ComplexMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BogoliubovReport {
    /// `max |U U* - V V* - I|`
    pub commutation_residual: f64,
    /// `max |U Vᵀ - V Uᵀ|`
    pub symmetry_residual: f64,
    pub is_bogoliubov: bool,
}

impl BogoliubovMap {
    pub fn new(u: ComplexMatrix, v: ComplexMatrix) -> Result<Self> {
        if u.shape() != v.shape() {
            return Err(Error::DimensionMismatch(format!(
                "U is {:?} but V is {:?}",
                u.shape(),
                v.shape()
            )));
        }
        Ok(Self { u, v })
    }

    pub fn identity(d: usize) -> Self {
        Self { u: ComplexMatrix::identity(d, d), v: ComplexMatrix::zeros(d, d) }
    }

    /// Number of output modes (rows of `U`).
    pub fn outputs(&self) -> usize {
        self.u.nrows()
    }

    /// Number of input modes (columns of `U`).
    pub fn inputs(&self) -> usize {
        self.u.ncols()
    }

    pub fn check(&self, tol: f64) -> BogoliubovReport {
        let k = self.outputs();
        let ccr = &self.u * self.u.adjoint() - &self.v * self.v.adjoint() - ComplexMatrix::identity(k, k);
        let sym = &self.u * self.v.transpose() - &self.v * self.u.transpose();
        let commutation_residual = linalg::max_abs(&ccr);
        let symmetry_residual = linalg::max_abs(&sym);
        BogoliubovReport {
            commutation_residual,
            symmetry_residual,
            is_bogoliubov: commutation_residual <= tol && symmetry_residual <= tol,
        }
    }

    /// `W = Δ(U, V)`.
    pub fn w(&self) -> ComplexMatrix {
        let (k, d) = self.u.shape();
        let mut w = ComplexMatrix::zeros(2 * k, 2 * d);
        w.view_mut((0, 0), (k, d)).copy_from(&self.u);
        w.view_mut((0, d), (k, d)).copy_from(&self.v);
        w.view_mut((k, 0), (k, d)).copy_from(&conj(&self.v));
        w.view_mut((k, d), (k, d)).copy_from(&conj(&self.u));
        w
    }

    /// Covariance of the transformed modes, `W F W†`.
    pub fn transform(&self, f: &CovarianceMatrix) -> Result<CovarianceMatrix> {
        if f.modes() != self.inputs() {
            return Err(Error::DimensionMismatch(format!(
                "map acts on {} modes, covariance has {}",
                self.inputs(),
                f.modes()
            )));
        }
        let w = self.w();
        Ok(CovarianceMatrix { f: &w * &f.f * w.adjoint() })
    }

    /// Second moments of `U a + V a^#` for vacuum `a`: `N = V^# Vᵀ`, `M = U Vᵀ`.
    pub fn vacuum_moments(&self) -> GaussianNoiseSpec {
        GaussianNoiseSpec {
            n: conj(&self.v) * self.v.transpose(),
            m: &self.u * self.v.transpose(),
        }
    }

    /// Inverse of a square Bogoliubov map: `(U*, -Vᵀ)`.
    pub fn inverse(&self) -> Self {
        Self { u: self.u.adjoint(), v: -self.v.transpose() }
    }

    /// Composition `self ∘ inner` (apply `inner` first).
    pub fn compose(&self, inner: &Self) -> Self {
        Self {
            u: &self.u * &inner.u + &self.v * conj(&inner.v),
            v: &self.u * &inner.v + &self.v * conj(&inner.u),
        }
    }
}

/// Pair of vacuum channels `(A₊, A₋)` mapped to `B = √(n+1) A₊ + √n A₋*` and
/// the annihilation-type partner `B̃* = √(n+1) A₋ + √n A₊*`.
pub fn thermal_doubling(n: f64) -> Result<BogoliubovMap> {
    if !(n >= 0.0) {
        return Err(Error::InvalidNoise(format!("thermal occupation {n} < 0")));
    }
    let a = re((n + 1.0).sqrt());
    let b = re(n.sqrt());
    let z = re(0.0);
    Ok(BogoliubovMap {
        u: DMatrix::from_row_slice(2, 2, &[a, z, z, a]),
        v: DMatrix::from_row_slice(2, 2, &[z, b, b, z]),
    })
}

/// The same transformation written on `(A₊, A₋*) -> (B, B̃)`.
pub fn thermal_pair_matrix(n: f64) -> nalgebra::Matrix2<f64> {
    let (a, b) = ((n + 1.0).sqrt(), n.sqrt());
    nalgebra::Matrix2::new(a, b, b, a)
}

/// Closed-form inverse of [`thermal_pair_matrix`].
pub fn thermal_pair_inverse(n: f64) -> nalgebra::Matrix2<f64> {
    let (a, b) = ((n + 1.0).sqrt(), n.sqrt());
    nalgebra::Matrix2::new(a, -b, -b, a)
}

/// Vacuum dilation of a single mode with `<ã*ã> = n`, `<ãã> = m`.
#[derive(Clone, Debug, PartialEq)]
pub enum Dilation {
    /// `ã = α a₁ + β a₂* + γ a₂`.
    TwoMode { alpha: f64, beta: f64, gamma: C64 },
    /// `ã = u a₁ + v a₁*`, reached when `|m|² = n(n+1)`.
    SingleMode { u: f64, v: C64 },
}

impl Dilation {
    /// One-row Bogoliubov map from the vacuum modes to `ã`.
    pub fn as_map(&self) -> BogoliubovMap {
        match *self {
            Dilation::TwoMode { alpha, beta, gamma } => BogoliubovMap {
                u: DMatrix::from_row_slice(1, 2, &[re(alpha), gamma]),
                v: DMatrix::from_row_slice(1, 2, &[re(0.0), re(beta)]),
            },
            Dilation::SingleMode { u, v } => BogoliubovMap {
                u: DMatrix::from_element(1, 1, re(u)),
                v: DMatrix::from_element(1, 1, v),
            },
        }
    }

    /// `(n, m)` recovered from the coefficients.
    pub fn moments(&self) -> (f64, C64) {
        let spec = self.as_map().vacuum_moments();
        (spec.n[(0, 0)].re, spec.m[(0, 0)])
    }
}

/// Relative tolerance for recognising the maximal case `|m|² = n(n+1)`.
pub const MAXIMAL_TOL: f64 = 1e-12;

pub fn dilate_single_mode(n: f64, m: C64) -> Result<Dilation> {
    if !(n >= 0.0) || !m.re.is_finite() || !m.im.is_finite() {
        return Err(Error::InvalidNoise(format!("need n >= 0, got n = {n}")));
    }
    let bound = n * (n + 1.0);
    let m2 = m.norm_sqr();
    let slack = MAXIMAL_TOL * bound.max(1.0);
    if n == 0.0 {
        if m2 > 0.0 {
            return Err(Error::InvalidNoise("n = 0 requires m = 0".into()));
        }
        return Ok(Dilation::TwoMode { alpha: 1.0, beta: 0.0, gamma: c(0.0, 0.0) });
    }
    if m2 > bound + slack {
        return Err(Error::InvalidNoise(format!(
            "Schur condition violated: |m|^2 = {m2} > n(n+1) = {bound}"
        )));
    }
    if (bound - m2).abs() <= slack {
        let phase = C64::from_polar(1.0, m.arg());
        return Ok(Dilation::SingleMode { u: (n + 1.0).sqrt(), v: phase * n.sqrt() });
    }
    Ok(Dilation::TwoMode {
        alpha: (n + 1.0 - m2 / n).sqrt(),
        beta: n.sqrt(),
        gamma: m / n.sqrt(),
    })
}
