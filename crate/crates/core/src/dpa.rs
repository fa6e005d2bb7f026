//! Degenerate parametric amplifier as a thermal-noise source: the two-mode
//! model, its transfer functions and static limit, the cascade with a driven
//! system, and the finite-`k` convergence experiment against the thermal
//! master equation.
//!
//! Phase convention: the physical off-diagonal transfer entry of the linear
//! model is `-v(s/k)`, and [`transfer`] reports it with that sign so the
//! static limit is `+2εκ/(ε²-κ²)`, matching the output Bogoliubov
//! coefficients `√(n+1)`, `√n`.

use std::fmt::Write as _;

use nalgebra::{Matrix2, Vector2};

use crate::dynamics::{self, DensityOperator, EvolveOptions};
use crate::error::{Error, Result};
use crate::gaussian::GaussianNoiseSpec;
use crate::generators::LindbladForm;
use crate::linalg::{c, re, C64};
use crate::operator::{annihilator, HilbertSpec, Operator};
use crate::par::{self, Parallelism};
use crate::slh::{self, SlhModel};

/// Relative distance from `ε = κ` below which parameters are rejected.
pub const POLE_GUARD: f64 = 1e-6;

/// Step rule for cascades: `h = DPA_STEP / (k max(κ, ε))`.
pub const DPA_STEP: f64 = 0.02;

/// Final-time errors at or below this count as converged.
pub const ERROR_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DpaParams {
    pub eps: f64,
    pub kappa: f64,
    pub k: f64,
    pub truncation: usize,
}

fn check_rates(eps: f64, kappa: f64) -> Result<()> {
    if !(eps > 0.0 && kappa > 0.0) || !eps.is_finite() || !kappa.is_finite() {
        return Err(Error::InvalidParameter(format!("rates must be positive: eps={eps}, kappa={kappa}")));
    }
    Ok(())
}

impl DpaParams {
    /// Above threshold: `ε >= κ(1 + 1e-6)`.
    pub fn new(eps: f64, kappa: f64, k: f64, truncation: usize) -> Result<Self> {
        check_rates(eps, kappa)?;
        if eps < kappa * (1.0 + POLE_GUARD) {
            return Err(Error::Pole(format!("need eps > kappa, got eps={eps}, kappa={kappa}")));
        }
        Self::finish(eps, kappa, k, truncation)
    }

    /// Below threshold: `κ >= ε(1 + 1e-6)`. Same thermal occupation formula,
    /// but the cavity modes are damped rather than amplified.
    pub fn below_threshold(eps: f64, kappa: f64, k: f64, truncation: usize) -> Result<Self> {
        check_rates(eps, kappa)?;
        if kappa < eps * (1.0 + POLE_GUARD) {
            return Err(Error::Pole(format!("need kappa > eps, got eps={eps}, kappa={kappa}")));
        }
        Self::finish(eps, kappa, k, truncation)
    }

    fn finish(eps: f64, kappa: f64, k: f64, truncation: usize) -> Result<Self> {
        if !(k >= 0.0) || !k.is_finite() {
            return Err(Error::InvalidParameter(format!("scaling k={k}")));
        }
        if truncation < 2 {
            return Err(Error::InvalidParameter(format!("mode truncation {truncation} < 2")));
        }
        Ok(Self { eps, kappa, k, truncation })
    }

    pub fn with_k(self, k: f64) -> Result<Self> {
        Self::finish(self.eps, self.kappa, k, self.truncation)
    }

    /// Whether the linear drift has a growing mode (`ε > κ`).
    pub fn is_amplifying(&self) -> bool {
        self.eps > self.kappa
    }

    /// `(2εκ/(ε²-κ²))²`, valid on either side of threshold.
    pub fn thermal_n(&self) -> f64 {
        let r = 2.0 * self.eps * self.kappa / (self.eps * self.eps - self.kappa * self.kappa);
        r * r
    }

    pub fn step(&self) -> f64 {
        DPA_STEP / (self.k * self.eps.max(self.kappa))
    }
}

/// `n = (2εκ/(ε²-κ²))²` for `ε > κ > 0`.
pub fn thermal_n(eps: f64, kappa: f64) -> Result<f64> {
    Ok(DpaParams::new(eps, kappa, 1.0, 2)?.thermal_n())
}

/// `u(s) = (s² - κ² - ε²)/(s² + 2sκ + κ² - ε²)`.
pub fn u(eps: f64, kappa: f64, s: C64) -> Result<C64> {
    Ok((s * s - re(kappa * kappa + eps * eps)) / denominator(eps, kappa, s)?)
}

/// `v(s) = 2κε/(s² + 2sκ + κ² - ε²)`.
pub fn v(eps: f64, kappa: f64, s: C64) -> Result<C64> {
    Ok(re(2.0 * kappa * eps) / denominator(eps, kappa, s)?)
}

fn denominator(eps: f64, kappa: f64, s: C64) -> Result<C64> {
    let d = s * s + s * (2.0 * kappa) + re(kappa * kappa - eps * eps);
    let scale = (s.norm() + kappa + eps).powi(2);
    if d.norm() <= 1e-12 * scale {
        return Err(Error::Pole(format!("transfer function pole at s={s}")));
    }
    Ok(d)
}

/// Transfer matrices at one frequency: `ξ₋ = diag(u(s/k), u(s/k))` acts on
/// `(a₊, a₋)`, `ξ₊ = antidiag(-v(s/k))` on the conjugate column `(a₊*, a₋*)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransferPair {
    pub xi_minus: Matrix2<C64>,
    pub xi_plus: Matrix2<C64>,
}

pub fn transfer(params: &DpaParams, s: C64) -> Result<TransferPair> {
    if params.k == 0.0 {
        return Err(Error::Pole("transfer function at k = 0".into()));
    }
    let z = s / params.k;
    let uu = u(params.eps, params.kappa, z)?;
    let vv = -v(params.eps, params.kappa, z)?;
    let zero = re(0.0);
    Ok(TransferPair {
        xi_minus: Matrix2::new(uu, zero, zero, uu),
        xi_plus: Matrix2::new(zero, vv, vv, zero),
    })
}

/// `((ε²+κ²)/(ε²-κ²), 2εκ/(ε²-κ²))`.
pub fn static_limits(eps: f64, kappa: f64) -> (f64, f64) {
    let d = eps * eps - kappa * kappa;
    ((eps * eps + kappa * kappa) / d, 2.0 * eps * kappa / d)
}

/// Coefficients `(α, β)` of `√k c₊ ≈ α a₊ + β a₋*` obtained by setting the
/// mode derivatives to zero and solving the 2x2 linear system numerically.
pub fn adiabatic_coefficients(eps: f64, kappa: f64) -> Result<(f64, f64)> {
    // 0 = -κ x + ε y - √(2κ) a, 0 = ε x - κ y - √(2κ) b with x = √k c₊, y = √k c₋*
    let m = Matrix2::new(-kappa, eps, eps, -kappa);
    let inv = m
        .try_inverse()
        .ok_or_else(|| Error::Pole(format!("adiabatic system singular at eps={eps}, kappa={kappa}")))?;
    let g = (2.0 * kappa).sqrt();
    let col_a = inv * Vector2::new(g, 0.0);
    let col_b = inv * Vector2::new(0.0, g);
    Ok((col_a[0], col_b[0]))
}

/// Output coefficients of `b = a₊ + √(2κk) c₊` after adiabatic elimination.
pub fn output_coefficients(eps: f64, kappa: f64) -> Result<(f64, f64)> {
    let (alpha, beta) = adiabatic_coefficients(eps, kappa)?;
    let g = (2.0 * kappa).sqrt();
    Ok((1.0 + g * alpha, g * beta))
}

/// The amplifier on `space`, with modes `c₊`, `c₋` on factors `plus`, `minus`:
/// `L± = √(2κk) c±`, `H = (εk/i)(c₊c₋ - c₊*c₋*)`.
pub fn build_dpa(params: &DpaParams, space: &HilbertSpec, plus: usize, minus: usize) -> Result<SlhModel> {
    if plus == minus {
        return Err(Error::InvalidParameter("amplifier modes must sit on distinct factors".into()));
    }
    for f in [plus, minus] {
        let dims = space.dims();
        let d = *dims.get(f).ok_or(Error::FactorOutOfRange { index: f, factors: dims.len() })?;
        if d != params.truncation {
            return Err(Error::DimensionMismatch(format!(
                "factor {f} has dimension {d}, amplifier truncation is {}",
                params.truncation
            )));
        }
    }
    let cp = annihilator(space, plus)?;
    let cm = annihilator(space, minus)?;
    let g = (2.0 * params.kappa * params.k).sqrt();
    let pair = &cp * &cm;
    let h = (&pair - &pair.adjoint()) * c(0.0, -params.eps * params.k);
    SlhModel::from_coupling(vec![&cp * g, &cm * g], h)
}

/// `(G ⊞ (1,0,0)) ◁ G_DPA` on `g.space ⊗ [T] ⊗ [T]`, the system first.
pub fn cascade(g: &SlhModel, params: &DpaParams) -> Result<SlhModel> {
    if g.channels() != 1 {
        return Err(Error::ChannelMismatch { left: g.channels(), right: 1 });
    }
    if !slh::is_static(g, slh::MODEL_TOL) {
        return Err(Error::NotStatic);
    }
    let t = params.truncation;
    let sys = g.extend(&[t, t])?;
    let space = sys.space().clone();
    let n = space.num_factors();
    let amp = build_dpa(params, &space, n - 2, n - 1)?;
    let through = SlhModel::trivial(&space, 1);
    slh::series(&slh::concat(&sys, &through)?, &amp)
}

/// One row of the convergence table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub k: f64,
    pub t: f64,
    pub cascade: C64,
    pub thermal: C64,
}

impl ConvergenceRow {
    pub fn abs_error(&self) -> f64 {
        (self.cascade - self.thermal).norm()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub thermal_n: f64,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// `(k, error)` at the last time of the grid, in sweep order.
    pub fn final_errors(&self) -> Vec<(f64, f64)> {
        let Some(t_end) = self.rows.iter().map(|r| r.t).reduce(f64::max) else {
            return Vec::new();
        };
        self.rows.iter().filter(|r| r.t == t_end).map(|r| (r.k, r.abs_error())).collect()
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.final_errors().windows(2).all(|w| w[1].1 < w[0].1)
    }

    /// Strictly decreasing final-time errors, or all of them at the floor.
    pub fn converging(&self) -> bool {
        self.strictly_decreasing() || self.final_errors().iter().all(|&(_, e)| e <= ERROR_FLOOR)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# thermal_n={}\n", dynamics::format_float(self.thermal_n));
        out.push_str("k,t,observable_cascade,observable_thermal,abs_error\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                dynamics::format_float(r.k),
                dynamics::format_float(r.t),
                dynamics::format_float(r.cascade.re),
                dynamics::format_float(r.thermal.re),
                dynamics::format_float(r.abs_error())
            );
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct ConvergenceSetup {
    pub system: SlhModel,
    /// `ε`, `κ` and mode truncation; `k` is taken from `k_list`.
    pub params: DpaParams,
    pub k_list: Vec<f64>,
    pub observable: Operator,
    pub times: Vec<f64>,
    pub rho0: DensityOperator,
}

/// Evolves the cascade for each `k` from `ρ₀ ⊗ |0,0⟩⟨0,0|` under the vacuum
/// master equation and compares `⟨observable⟩` with the thermal model
/// `ℒ^(N=[n], M=0)` of the system alone.
pub fn convergence_experiment(setup: &ConvergenceSetup, mode: Parallelism) -> Result<ConvergenceTable> {
    let sys = &setup.system;
    if setup.observable.space() != sys.space() || setup.rho0.space() != sys.space() {
        return Err(Error::SpaceMismatch);
    }
    if setup.k_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("k_list must be strictly increasing".into()));
    }
    if setup.k_list.iter().any(|&k| !(k > 0.0)) {
        return Err(Error::InvalidParameter("k_list entries must be positive".into()));
    }
    let n = setup.params.thermal_n();
    let rotated = slh::rotate_out_scattering(sys)?;
    let thermal = LindbladForm::gaussian(&rotated.l_ops(), rotated.h(), &GaussianNoiseSpec::thermal(1, n)?)?;
    let reference = dynamics::evolve(&thermal, &setup.rho0, &setup.times, &EvolveOptions::default())?
        .expectations(&[("x".into(), setup.observable.clone())])?;
    let reference = reference.column("x").expect("single observable");

    let t = setup.params.truncation;
    let vacuum_modes = DensityOperator::basis(&HilbertSpec::new(vec![t, t])?, &[0, 0])?;
    let rho0 = setup.rho0.tensor(&vacuum_modes)?;
    let obs = setup.observable.extend(&[t, t])?;
    let factors = sys.space().num_factors();

    let runs = par::map(mode, &setup.k_list, |&k| -> Result<Vec<ConvergenceRow>> {
        let params = setup.params.with_k(k)?;
        let model = cascade(sys, &params)?;
        let form = LindbladForm::vacuum(&model.l_ops(), model.h())?;
        let gen = dynamics::SparseGenerator::new(&form);
        let h = params.step().min(dynamics::STEP_NORM_BOUND / gen.norm_estimate());
        let traj = dynamics::rk4_evolve(&gen, &rho0, &setup.times, Some(h), &[factors, factors + 1])?;
        let vals = traj.expectations(&[("x".into(), obs.clone())])?.column("x").expect("single observable");
        Ok(setup
            .times
            .iter()
            .zip(vals)
            .zip(&reference)
            .map(|((&t, cascade), &thermal)| ConvergenceRow { k, t, cascade, thermal })
            .collect())
    });
    let mut rows = Vec::new();
    for r in runs {
        rows.extend(r?);
    }
    Ok(ConvergenceTable { thermal_n: n, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::vacuum_lindblad;
    use crate::linalg;
    use crate::operator::qubit;

    #[test]
    fn thermal_n_examples() {
        assert!((thermal_n(2.0, 1.0).unwrap() - 16.0 / 9.0).abs() < 1e-15);
        assert!((thermal_n(3.0, 1.0).unwrap() - 0.5625).abs() < 1e-15);
        assert!(matches!(thermal_n(1.0, 1.0), Err(Error::Pole(_))));
        assert!(matches!(thermal_n(1.0 + 1e-9, 1.0), Err(Error::Pole(_))));
        assert!(matches!(thermal_n(1.0, 3.0), Err(Error::Pole(_))));
        let mirror = DpaParams::below_threshold(1.0, 3.0, 1.0, 8).unwrap();
        assert!((mirror.thermal_n() - 0.5625).abs() < 1e-15);
    }

    #[test]
    fn transfer_examples() {
        let p = DpaParams::new(2.0, 1.0, 1.0, 4).unwrap();
        let z = transfer(&p, re(0.0)).unwrap();
        assert!((z.xi_minus[(0, 0)] - re(5.0 / 3.0)).norm() < 1e-15);
        assert!((z.xi_plus[(0, 1)].norm() - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(z.xi_minus[(0, 1)], re(0.0));
        assert_eq!(z.xi_plus[(0, 0)], re(0.0));
        let (a, b) = static_limits(2.0, 1.0);
        assert!((z.xi_plus[(1, 0)] - re(b)).norm() < 1e-15 && (a - 5.0 / 3.0).abs() < 1e-15);

        let mut last = f64::INFINITY;
        for k in [10.0, 100.0, 1000.0] {
            let e = (transfer(&p.with_k(k).unwrap(), re(1.0)).unwrap().xi_minus[(0, 0)] - re(5.0 / 3.0)).norm();
            assert!(e < last);
            last = e;
        }
    }

    #[test]
    fn transfer_matches_state_space() {
        let p = DpaParams::new(3.0, 1.0, 7.0, 4).unwrap();
        let s = c(0.4, 2.5);
        // x = (c₊, c₋*), x' = A x - √(2κk) a, y = a + √(2κk) x
        let (eps, kap, k) = (p.eps, p.kappa, p.k);
        let a = Matrix2::new(re(-k * kap), re(k * eps), re(k * eps), re(-k * kap));
        let resolvent = (Matrix2::identity() * s - a).try_inverse().unwrap();
        let g = Matrix2::identity() - resolvent * re(2.0 * kap * k);
        let z = transfer(&p, s).unwrap();
        assert!((g[(0, 0)] - z.xi_minus[(0, 0)]).norm() < 1e-13);
        assert!((g[(0, 1)] - z.xi_plus[(0, 1)]).norm() < 1e-13);
    }

    #[test]
    fn limit_is_bogoliubov() {
        for (eps, kappa) in [(3.0, 1.0), (2.0, 1.0), (1.0, 3.0)] {
            let (a, b) = static_limits(eps, kappa);
            assert!((a * a - b * b - 1.0).abs() < 1e-12);
            let (o1, o2) = output_coefficients(eps, kappa).unwrap();
            assert!((o1 - a).abs() < 1e-12 && (o2 - b).abs() < 1e-12);
        }
        let (alpha, beta) = adiabatic_coefficients(3.0, 1.0).unwrap();
        let pre = 2f64.sqrt() / 8.0;
        assert!((alpha - pre).abs() < 1e-15 && (beta - 3.0 * pre).abs() < 1e-15);
    }

    #[test]
    fn dpa_model() {
        let space = HilbertSpec::new(vec![4, 4]).unwrap();
        let p = DpaParams::new(3.0, 1.0, 2.0, 4).unwrap();
        let g = build_dpa(&p, &space, 0, 1).unwrap();
        assert!(g.h().hermitian_residual() < 1e-15);
        let zero = build_dpa(&p.with_k(0.0).unwrap(), &space, 0, 1).unwrap();
        assert_eq!(zero.l_ops().iter().map(|l| l.max_abs()).sum::<f64>(), 0.0);
        assert_eq!(zero.h().max_abs(), 0.0);
        assert!(matches!(build_dpa(&p, &space, 0, 2), Err(Error::FactorOutOfRange { .. })));

        // c₊ drift: -kκ c₊ + kε c₋* on the untruncated block
        let lind = vacuum_lindblad(&g, Parallelism::Sequential);
        let cp = annihilator(&space, 0).unwrap();
        let cm = annihilator(&space, 1).unwrap();
        let drift = lind.apply(&cp).unwrap();
        let want = &cp * (-p.k * p.kappa) + &cm.adjoint() * (p.k * p.eps);
        let idx: Vec<usize> = (0..16).filter(|&i| space.level(i, 0) < 2 && space.level(i, 1) < 2).collect();
        let diff = crate::operator::sub_block(&(drift - want).into_matrix(), &idx);
        assert!(linalg::max_abs(&diff) < 1e-12);
    }

    #[test]
    fn cascade_structure() {
        let sys = HilbertSpec::new(vec![3]).unwrap();
        let p = DpaParams::new(3.0, 1.0, 5.0, 3).unwrap();
        let trivial = SlhModel::trivial(&HilbertSpec::new(vec![1]).unwrap(), 1);
        let plain = cascade(&trivial, &p).unwrap();
        let direct = build_dpa(&p, plain.space(), 1, 2).unwrap();
        assert!(plain.distance(&direct) < 1e-13);

        let gamma: f64 = 0.7;
        let a = annihilator(&sys, 0).unwrap();
        let g = SlhModel::from_coupling(vec![&a * gamma.sqrt()], Operator::zero(&sys)).unwrap();
        let casc = cascade(&g, &p).unwrap();
        let full = casc.space().clone();
        let a_f = annihilator(&full, 0).unwrap();
        let cp = annihilator(&full, 1).unwrap();
        let cm = annihilator(&full, 2).unwrap();
        let r = (2.0 * p.kappa * p.k).sqrt();
        assert!(casc.l(0).distance(&(&a_f * gamma.sqrt() + &cp * r)) < 1e-13);
        assert!(casc.l(1).distance(&(&cm * r)) < 1e-13);
        assert!(casc.h().hermitian_residual() < 1e-13);

        let q = HilbertSpec::new(vec![2]).unwrap();
        let op_s = SlhModel::from_parts_unchecked(
            vec![vec![qubit::sigma_x(&q, 0).unwrap()]],
            vec![Operator::zero(&q)],
            Operator::zero(&q),
        )
        .unwrap();
        assert!(matches!(cascade(&op_s, &p), Err(Error::NotStatic)));
    }

    #[test]
    fn trivial_system_has_zero_error() {
        let one = HilbertSpec::new(vec![1]).unwrap();
        let setup = ConvergenceSetup {
            system: SlhModel::trivial(&one, 1),
            params: DpaParams::below_threshold(1.0, 3.0, 1.0, 6).unwrap(),
            k_list: vec![1.0, 2.0],
            observable: Operator::identity(&one),
            times: vec![0.5],
            rho0: DensityOperator::basis(&one, &[0]).unwrap(),
        };
        let table = convergence_experiment(&setup, Parallelism::Sequential).unwrap();
        assert!(table.rows.iter().all(|r| r.abs_error() < 1e-12));
        let csv = table.to_csv();
        assert!(csv.starts_with("# thermal_n=5.6250000000000000e-1\nk,t,observable_cascade,observable_thermal,abs_error\n"));
    }
}
