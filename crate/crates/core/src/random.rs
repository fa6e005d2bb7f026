//! Seeded random draws of models, noise specs and states for property tests
//! and benchmarks.

use rand::Rng;

use crate::gaussian::{BogoliubovMap, GaussianNoiseSpec};
use crate::linalg::{c, re, ComplexMatrix, C64};
use crate::operator::{HilbertSpec, Operator};
use crate::slh::SlhModel;

pub fn matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        c(rng.random_range(-scale..scale), rng.random_range(-scale..scale))
    })
}

pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> ComplexMatrix {
    let a = matrix(rng, n, n, scale);
    (&a + a.adjoint()) * re(0.5)
}

/// Unitary from the QR factorization of a random matrix.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    loop {
        let a = matrix(rng, n, n, 1.0);
        let qr = a.qr();
        let r = qr.r();
        if (0..n).all(|i| r[(i, i)].norm() > 1e-3) {
            let mut q = qr.q();
            for j in 0..n {
                let phase = r[(j, j)] / r[(j, j)].norm();
                let mut col = q.column_mut(j);
                col *= phase;
            }
            return q;
        }
    }
}

pub fn operator<R: Rng + ?Sized>(rng: &mut R, space: &HilbertSpec, scale: f64) -> Operator {
    let n = space.total_dim();
    Operator::new(space.clone(), matrix(rng, n, n, scale)).expect("shape matches")
}

pub fn hermitian_operator<R: Rng + ?Sized>(rng: &mut R, space: &HilbertSpec, scale: f64) -> Operator {
    let n = space.total_dim();
    Operator::new(space.clone(), hermitian(rng, n, scale)).expect("shape matches")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScatteringKind {
    Identity,
    Static,
    Operator,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelShape {
    pub channels: usize,
    pub scattering: ScatteringKind,
    pub scale: f64,
}

impl ModelShape {
    pub fn channels(d: usize) -> Self {
        Self { channels: d, scattering: ScatteringKind::Identity, scale: 1.0 }
    }

    pub fn with_static_s(mut self) -> Self {
        self.scattering = ScatteringKind::Static;
        self
    }

    pub fn with_operator_s(mut self) -> Self {
        self.scattering = ScatteringKind::Operator;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }
}

pub fn slh_model<R: Rng + ?Sized>(rng: &mut R, space: &HilbertSpec, shape: ModelShape) -> SlhModel {
    let d = shape.channels;
    let dim = space.total_dim();
    let l: Vec<Operator> = (0..d).map(|_| operator(rng, space, shape.scale)).collect();
    let h = hermitian_operator(rng, space, shape.scale);
    let s_full = match shape.scattering {
        ScatteringKind::Identity => ComplexMatrix::identity(d * dim, d * dim),
        ScatteringKind::Static => crate::linalg::kron(&unitary(rng, d), &ComplexMatrix::identity(dim, dim)),
        ScatteringKind::Operator => unitary(rng, d * dim),
    };
    let s = (0..d)
        .map(|j| {
            (0..d)
                .map(|k| {
                    let b = s_full.view((j * dim, k * dim), (dim, dim)).into_owned();
                    Operator::new(space.clone(), b).expect("block shape")
                })
                .collect()
        })
        .collect();
    SlhModel::new(s, l, h).expect("random model satisfies invariants")
}

/// Random Bogoliubov map on `modes` modes: `U = W₁ cosh(r) W₂*`,
/// `V = W₁ sinh(r) W₂ᵀ` with squeezing `0 <= r <= r_max`.
pub fn bogoliubov<R: Rng + ?Sized>(rng: &mut R, modes: usize, r_max: f64) -> BogoliubovMap {
    let w1 = unitary(rng, modes);
    let w2 = unitary(rng, modes);
    let r: Vec<f64> = (0..modes).map(|_| rng.random_range(0.0..=r_max)).collect();
    let ch = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(modes, r.iter().map(|x| re(x.cosh()))));
    let sh = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(modes, r.iter().map(|x| re(x.sinh()))));
    BogoliubovMap { u: &w1 * ch * w2.adjoint(), v: &w1 * sh * w2.transpose() }
}

/// Valid `(N, M)` on `d` channels: the first `d` output modes of a random
/// Bogoliubov map on `2d` vacuum modes, so every eigenvalue of `N` is at most
/// `sinh²(r_max)`.
pub fn noise<R: Rng + ?Sized>(rng: &mut R, d: usize, r_max: f64) -> GaussianNoiseSpec {
    let map = bogoliubov(rng, 2 * d, r_max);
    let rows = BogoliubovMap {
        u: map.u.rows(0, d).into_owned(),
        v: map.v.rows(0, d).into_owned(),
    };
    let spec = rows.vacuum_moments();
    let n = (spec.n() + spec.n().adjoint()) * re(0.5);
    let m = (spec.m() + spec.m().transpose()) * re(0.5);
    GaussianNoiseSpec::new(n, m).expect("square blocks")
}

/// Valid single-channel `(n, m)` with `n` uniform in `[0, n_max]` and `m`
/// uniform in the disc `|m|² <= n(n+1)`.
pub fn single_mode_moments<R: Rng + ?Sized>(rng: &mut R, n_max: f64) -> (f64, C64) {
    let n: f64 = rng.random_range(0.0..=n_max);
    let radius = (n * (n + 1.0)).sqrt() * rng.random::<f64>().sqrt();
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    (n, C64::from_polar(radius, theta))
}

/// Random full-rank density matrix.
pub fn density<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let a = matrix(rng, n, n, 1.0);
    let rho = &a * a.adjoint();
    let tr = crate::linalg::trace(&rho);
    rho / tr
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::validate_noise;
    use crate::linalg;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn draws_satisfy_their_contracts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let u = unitary(&mut rng, 4);
            assert!(linalg::unitary_residual(&u) < 1e-12);
            let map = bogoliubov(&mut rng, 3, 1.0);
            assert!(map.check(1e-11).is_bogoliubov);
            let spec = noise(&mut rng, 2, 1.0);
            assert!(validate_noise(&spec, 1e-9).is_valid());
            let rho = density(&mut rng, 3);
            assert!((linalg::trace(&rho) - re(1.0)).norm() < 1e-14);
            assert!(linalg::is_psd(&rho, 1e-12).unwrap().psd);
        }
    }
}
