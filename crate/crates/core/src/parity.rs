//! Fields as parity-extended Chebyshev series on `[-1, 1]` and the left
//! eigenfunctionals of the generator in that representation.
//!
//! With `u₁` extended oddly and `u₂` evenly, level `l` of the series is the
//! pair `(T_{2l+1}, T_{2l})`. Both `L₀` and `L'` map level `l` into levels
//! `≤ l`, so the generator is block upper triangular and its `2×2` diagonal
//! blocks carry exactly the analytic eigenvalues.

use crate::error::{Error, Result};
use crate::operators::{Field, Problem};
use crate::scalar::Real;
use crate::spectral::{chop_tail_at, eval_coeffs};

/// Coefficients `a_l` of `u₁ = Σ a_l T_{2l+1}` and `b_l` of `u₂ = Σ b_l T_{2l}`,
/// interleaved as `[a_0, b_0, a_1, b_1, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ParitySeries<T> {
    pub coeffs: Vec<T>,
}

impl<T: Real> ParitySeries<T> {
    /// Samples the extension at `4·levels + 1` Lobatto points of `[-1, 1]`
    /// and transforms.
    pub fn from_field(u: &Field<T>, levels: usize) -> Self {
        let c1 = u.u1.coeffs();
        let c2 = u.u2.coeffs();
        let m = 4 * levels;
        let pi = T::lit(std::f64::consts::PI);
        let mut f1 = Vec::with_capacity(m + 1);
        let mut f2 = Vec::with_capacity(m + 1);
        for j in 0..=m {
            let x = (pi * T::from_usize_lossy(j) / T::from_usize_lossy(m)).cos();
            let r = x.abs();
            let v1 = eval_coeffs(&c1, r);
            f1.push(if x < T::zero() { -v1 } else { v1 });
            f2.push(eval_coeffs(&c2, r));
        }
        let t1 = cgl_transform(&f1);
        let t2 = cgl_transform(&f2);
        let mut coeffs = vec![T::zero(); 2 * levels];
        for l in 0..levels {
            coeffs[2 * l] = t1[2 * l + 1];
            coeffs[2 * l + 1] = t2[2 * l];
        }
        let scale = coeffs.iter().fold(T::zero(), |s, c| s.max(c.abs()));
        let (mut odd, mut even): (Vec<T>, Vec<T>) =
            (coeffs.iter().step_by(2).copied().collect(), coeffs.iter().skip(1).step_by(2).copied().collect());
        chop_tail_at(&mut odd, scale);
        chop_tail_at(&mut even, scale);
        for l in 0..levels {
            coeffs[2 * l] = odd[l];
            coeffs[2 * l + 1] = even[l];
        }
        Self { coeffs }
    }

    pub fn dot(&self, y: &[T]) -> T {
        self.coeffs
            .iter()
            .zip(y)
            .fold(T::zero(), |s, (c, w)| s + *c * *w)
    }
}

/// Chebyshev coefficients from values at `cos(πj/m)`, `j = 0..=m`.
fn cgl_transform<T: Real>(f: &[T]) -> Vec<T> {
    let m = f.len() - 1;
    let pi = T::lit(std::f64::consts::PI);
    let half = T::lit(0.5);
    (0..=m)
        .map(|i| {
            let mut s = T::zero();
            for (j, v) in f.iter().enumerate() {
                let w = if j == 0 || j == m { half } else { T::one() };
                let arg = pi * T::from_usize_lossy((i * j) % (2 * m)) / T::from_usize_lossy(m);
                s += w * *v * arg.cos();
            }
            let c = s * T::lit(2.0) / T::from_usize_lossy(m);
            if i == 0 || i == m {
                c * half
            } else {
                c
            }
        })
        .collect()
}

fn cheb_derivative<T: Real>(c: &[T]) -> Vec<T> {
    let n = c.len();
    let mut d = vec![T::zero(); n];
    if n < 2 {
        return d;
    }
    for k in (0..n - 1).rev() {
        let next = if k + 2 < n { d[k + 2] } else { T::zero() };
        d[k] = next + T::lit(2.0) * T::from_usize_lossy(k + 1) * c[k + 1];
    }
    d[0] *= T::lit(0.5);
    d
}

fn cheb_times_x<T: Real>(c: &[T]) -> Vec<T> {
    let n = c.len();
    let mut out = vec![T::zero(); n];
    let half = T::lit(0.5);
    for (k, v) in c.iter().enumerate() {
        if *v == T::zero() {
            continue;
        }
        if k == 0 {
            out[1] += *v;
        } else {
            if k + 1 < n {
                out[k + 1] += half * *v;
            }
            out[k - 1] += half * *v;
        }
    }
    out
}

/// `∫₀^x` of an even series; the result is odd.
fn cheb_integral_even<T: Real>(c: &[T]) -> Vec<T> {
    let n = c.len();
    let mut out = vec![T::zero(); n];
    for (k, v) in c.iter().enumerate().step_by(2) {
        if *v == T::zero() {
            continue;
        }
        if k == 0 {
            out[1] += *v;
        } else {
            if k + 1 < n {
                out[k + 1] += *v / T::from_usize_lossy(2 * (k + 1));
            }
            out[k - 1] -= *v / T::from_usize_lossy(2 * (k - 1));
        }
    }
    out
}

/// The generator on the first `levels` levels, row-major, in the interleaved
/// ordering of [`ParitySeries`].
pub(crate) fn generator_matrix<T: Real>(problem: &Problem<T>, levels: usize) -> Vec<T> {
    let dim = 2 * levels;
    let deg = 2 * levels;
    let pc0 = problem.pc0();
    let mut a = vec![T::zero(); dim * dim];
    for col in 0..dim {
        let l = col / 2;
        let mut u1 = vec![T::zero(); deg];
        let mut u2 = vec![T::zero(); deg];
        if col % 2 == 0 {
            u1[2 * l + 1] = T::one();
        } else {
            u2[2 * l] = T::one();
        }
        let d1 = cheb_derivative(&u1);
        let d2 = cheb_derivative(&u2);
        let xd1 = cheb_times_x(&d1);
        let xd2 = cheb_times_x(&d2);
        let int2 = cheb_integral_even(&u2);
        for r in 0..levels {
            let i = 2 * r + 1;
            a[(2 * r) * dim + col] = -xd1[i] + d2[i] + pc0 * int2[i];
            let i = 2 * r;
            a[(2 * r + 1) * dim + col] = d1[i] - xd2[i];
        }
    }
    a
}

/// Row vector `y` with `y·A = λ·y` that vanishes below `level`, i.e. the
/// functional picking out the eigenvector at `level` along all higher ones.
pub(crate) fn left_eigenfunctional<T: Real>(
    a: &[T],
    levels: usize,
    level: usize,
    lambda: T,
) -> Result<Vec<T>> {
    let dim = 2 * levels;
    let at = |r: usize, c: usize| a[r * dim + c];
    let mut y = vec![T::zero(); dim];
    let (p, q) = (2 * level, 2 * level + 1);
    let (al, be, ga, de) = (at(p, p) - lambda, at(p, q), at(q, p), at(q, q) - lambda);
    let scale = al.abs().max(be.abs()).max(ga.abs()).max(de.abs()).max(T::one());
    if (al * de - be * ga).abs() > T::lit(1e-9) * scale * scale {
        return Err(Error::InvalidParams(format!(
            "{} is not an eigenvalue of level {level}",
            lambda.as_f64()
        )));
    }
    let first = (ga, -al);
    let second = (de, -be);
    let pick = if first.0.abs() + first.1.abs() >= second.0.abs() + second.1.abs() {
        first
    } else {
        second
    };
    y[p] = pick.0;
    y[q] = pick.1;
    for l in level + 1..levels {
        let (p, q) = (2 * l, 2 * l + 1);
        let mut r0 = T::zero();
        let mut r1 = T::zero();
        for i in 2 * level..p {
            if y[i] != T::zero() {
                r0 -= y[i] * at(i, p);
                r1 -= y[i] * at(i, q);
            }
        }
        // Solve (y_p, y_q)·(B - λ) = (r0, r1).
        let (al, be, ga, de) = (at(p, p) - lambda, at(p, q), at(q, p), at(q, q) - lambda);
        let det = al * de - be * ga;
        let scale = al.abs().max(be.abs()).max(ga.abs()).max(de.abs()).max(T::one());
        if det.abs() <= T::lit(1e-9) * scale * scale {
            return Err(Error::InvalidParams(format!(
                "eigenvalue {} recurs at level {l}; no invariant complement separates it",
                lambda.as_f64()
            )));
        }
        y[p] = (r0 * de - r1 * ga) / det;
        y[q] = (r1 * al - r0 * be) / det;
    }
    Ok(y)
}
