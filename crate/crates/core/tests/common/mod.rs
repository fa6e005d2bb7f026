//! Independent reference implementations. Everything here works on plain
//! dense matrices applied to matrix units, without the crate's term builder.
#![allow(dead_code)]

use gqfn::linalg::{ComplexMatrix, C64};

pub const I: C64 = C64::new(0.0, 1.0);

pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frobenius(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn comm(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

/// `(X - X*)/2i`
pub fn im(x: &ComplexMatrix) -> ComplexMatrix {
    (x - x.adjoint()) / (re(2.0) * I)
}

/// Matrix of a linear map on `d x d` matrices in the column-stacking
/// convention: column `k + d l` holds `vec(f(E_kl))`.
pub fn superop_from_fn(d: usize, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> ComplexMatrix {
    let n = d * d;
    let mut out = ComplexMatrix::zeros(n, n);
    for l in 0..d {
        for k in 0..d {
            let mut e = ComplexMatrix::zeros(d, d);
            e[(k, l)] = re(1.0);
            let y = f(&e);
            out.column_mut(k + d * l).copy_from_slice(y.as_slice());
        }
    }
    out
}

/// `½ L*[X, L] + ½ [L*, X] L` summed over channels, minus `i[X, H]`.
pub fn vacuum_lindblad(l: &[ComplexMatrix], h: &ComplexMatrix, x: &ComplexMatrix) -> ComplexMatrix {
    let mut out = -(comm(x, h) * I);
    for lk in l {
        let ls = lk.adjoint();
        out += (&ls * comm(x, lk) + comm(&ls, x) * lk) * re(0.5);
    }
    out
}

/// `ℒ^(N,M)X` written term by term.
pub fn gaussian_lindblad(
    l: &[ComplexMatrix],
    h: &ComplexMatrix,
    n: &ComplexMatrix,
    m: &ComplexMatrix,
    x: &ComplexMatrix,
) -> ComplexMatrix {
    let d = l.len();
    let mut out = -(comm(x, h) * I);
    let brace = |a: &ComplexMatrix, b: &ComplexMatrix| a * comm(x, b) + comm(a, x) * b;
    for i in 0..d {
        for j in 0..d {
            let (li, lj) = (&l[i], &l[j]);
            let (lis, ljs) = (li.adjoint(), lj.adjoint());
            let delta = if i == j { 1.0 } else { 0.0 };
            out += brace(&lis, lj) * ((re(delta) + n[(j, i)]) * 0.5);
            out += brace(li, &ljs) * (n[(i, j)] * 0.5);
            out -= brace(&lis, &ljs) * (m[(i, j)] * 0.5);
            out -= brace(li, lj) * (m[(j, i)].conj() * 0.5);
        }
    }
    out
}

/// `ℒ^(N,M) - ℒ` in the anticommutator-style form.
pub fn lindblad_correction(l: &[ComplexMatrix], n: &ComplexMatrix, m: &ComplexMatrix, x: &ComplexMatrix) -> ComplexMatrix {
    let d = l.len();
    let dim = x.nrows();
    let mut out = ComplexMatrix::zeros(dim, dim);
    let brace = |a: &ComplexMatrix, b: &ComplexMatrix| a * comm(x, b) + comm(a, x) * b;
    for i in 0..d {
        for j in 0..d {
            let (li, lj) = (&l[i], &l[j]);
            let (lis, ljs) = (li.adjoint(), lj.adjoint());
            out += brace(&lis, lj) * (n[(j, i)] * 0.5);
            out += brace(li, &ljs) * (n[(i, j)] * 0.5);
            out -= brace(&lis, &ljs) * (m[(i, j)] * 0.5);
            out -= brace(li, lj) * (m[(j, i)].conj() * 0.5);
        }
    }
    out
}

/// `K = -½ Σ L*L - iH`.
pub fn vacuum_k(l: &[ComplexMatrix], h: &ComplexMatrix) -> ComplexMatrix {
    let mut k = -(h * I);
    for lk in l {
        k -= lk.adjoint() * lk * re(0.5);
    }
    k
}

/// `K^(N,M) - K`.
pub fn k_correction(l: &[ComplexMatrix], n: &ComplexMatrix, m: &ComplexMatrix) -> ComplexMatrix {
    let d = l.len();
    let dim = l[0].nrows();
    let mut out = ComplexMatrix::zeros(dim, dim);
    for i in 0..d {
        for j in 0..d {
            let (li, lj) = (&l[i], &l[j]);
            let (lis, ljs) = (li.adjoint(), lj.adjoint());
            out -= &lis * lj * (n[(j, i)] * 0.5);
            out -= li * &ljs * (n[(i, j)] * 0.5);
            out += &lis * &ljs * (m[(i, j)] * 0.5);
            out += li * lj * (m[(j, i)].conj() * 0.5);
        }
    }
    out
}

/// Series product computed from the block formulas on explicit operator
/// blocks: `(S_B S_A, L_B + S_B L_A, H_A + H_B + Im{L_B* S_B L_A})`.
pub struct Triple {
    pub s: Vec<Vec<ComplexMatrix>>,
    pub l: Vec<ComplexMatrix>,
    pub h: ComplexMatrix,
}

pub fn series(b: &Triple, a: &Triple) -> Triple {
    let d = a.l.len();
    let dim = a.h.nrows();
    let zero = || ComplexMatrix::zeros(dim, dim);
    let mut s = vec![vec![zero(); d]; d];
    let mut l = b.l.clone();
    let mut h = &a.h + &b.h;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                s[i][j] += &b.s[i][k] * &a.s[k][j];
            }
            l[i] += &b.s[i][j] * &a.l[j];
        }
    }
    let mut cross = zero();
    for i in 0..d {
        for j in 0..d {
            cross += b.l[i].adjoint() * &b.s[i][j] * &a.l[j];
        }
    }
    h += im(&cross);
    Triple { s, l, h }
}

/// Symplectic residual `max |W J W† - J|` with `J = diag(I, -I)`.
pub fn symplectic_residual(u: &ComplexMatrix, v: &ComplexMatrix) -> f64 {
    let (k, d) = u.shape();
    let conj = |m: &ComplexMatrix| m.map(|z| z.conj());
    let mut w = ComplexMatrix::zeros(2 * k, 2 * d);
    w.view_mut((0, 0), (k, d)).copy_from(u);
    w.view_mut((0, d), (k, d)).copy_from(v);
    w.view_mut((k, 0), (k, d)).copy_from(&conj(v));
    w.view_mut((k, d), (k, d)).copy_from(&conj(u));
    let j = |n: usize| {
        ComplexMatrix::from_fn(2 * n, 2 * n, |r, c| if r != c { re(0.0) } else if r < n { re(1.0) } else { re(-1.0) })
    };
    max_abs(&(&w * j(d) * w.adjoint() - j(k)))
}

/// `ℒ^(N,M) - ℒ` in the double-commutator form (needs symmetric `M`).
pub fn lindblad_correction_nested(
    l: &[ComplexMatrix],
    n: &ComplexMatrix,
    m: &ComplexMatrix,
    x: &ComplexMatrix,
) -> ComplexMatrix {
    let d = l.len();
    let dim = x.nrows();
    let mut out = ComplexMatrix::zeros(dim, dim);
    for i in 0..d {
        for j in 0..d {
            let (li, lj) = (&l[i], &l[j]);
            let (lis, ljs) = (li.adjoint(), lj.adjoint());
            out += (comm(&lis, &comm(x, lj)) + comm(&comm(&lis, x), lj)) * (n[(j, i)] * 0.5);
            out += comm(&ljs, &comm(&lis, x)) * (m[(i, j)] * 0.5);
            out += comm(&comm(x, li), lj) * (m[(i, j)].conj() * 0.5);
        }
    }
    out
}
