//! Chebyshev–Gauss–Lobatto collocation on `[0, 1]`.
//!
//! Nodes are `ρ_i = (1 + x_i)/2` with `x_i = -cos(π i/(n-1))`, so node 0 is
//! `ρ = 0` and node `n-1` is `ρ = 1`. Coefficients refer to the shifted
//! polynomials `T_j(2ρ - 1)`. Differentiation and integration run in
//! coefficient space with the standard three-term recurrences; dense
//! matrices are only built for the time stepper.

use std::fmt::Write as _;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_traits::{Float, One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::{max_modulus, Real, Value};

/// Coefficients below this multiple of machine epsilon (relative to the
/// largest coefficient) at the tail of a series are treated as round-off and
/// dropped before differentiation.
const CHOP_EPS_MULTIPLE: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ChebBasis<T> {
    n: usize,
    nodes: Vec<T>,
    quad_weights: Vec<T>,
    /// `table[i * n + j] = T_j(x_i)`.
    table: Vec<T>,
    /// Barycentric weights of the Lobatto grid.
    bary: Vec<T>,
}

/// Builds the collocation basis with `n` nodes.
pub fn make_basis<T: Real>(n: usize) -> Result<Arc<ChebBasis<T>>> {
    ChebBasis::new(n).map(Arc::new)
}

impl<T: Real> ChebBasis<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewNodes(n));
        }
        let big_n = n - 1;
        let pi = T::PI();
        let two_n = T::from_usize_lossy(2 * big_n);
        // cos(π k / N) written as a sine of a symmetric argument so that the
        // grid is exactly symmetric and hits 0, ±1 exactly.
        let cos_k: Vec<T> = (0..=2 * big_n)
            .map(|k| {
                let arg = big_n as f64 - 2.0 * k as f64;
                (pi * T::lit(arg) / two_n).sin()
            })
            .collect();

        let nodes: Vec<T> = (0..n)
            .map(|i| {
                let x = -cos_k[i];
                (T::one() + x) / T::lit(2.0)
            })
            .collect();

        let mut table = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                let idx = (i * j) % (2 * big_n);
                let sign = if j % 2 == 0 { T::one() } else { -T::one() };
                table[i * n + j] = sign * cos_k[idx];
            }
        }

        let bary: Vec<T> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { T::one() } else { -T::one() };
                if i == 0 || i == big_n {
                    s / T::lit(2.0)
                } else {
                    s
                }
            })
            .collect();

        let mut basis = Self {
            n,
            nodes,
            quad_weights: Vec::new(),
            table,
            bary,
        };
        basis.quad_weights = basis.clenshaw_curtis_weights();
        Ok(basis)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn quad_weights(&self) -> &[T] {
        &self.quad_weights
    }

    fn end_factor(&self, i: usize) -> T {
        if i == 0 || i == self.n - 1 {
            T::lit(0.5)
        } else {
            T::one()
        }
    }

    /// Weights from the moments `∫_{-1}^{1} T_j = 2/(1-j²)` (even `j`)
    /// pushed through the value→coefficient transform, halved for `[0,1]`.
    fn clenshaw_curtis_weights(&self) -> Vec<T> {
        let n = self.n;
        let big_n = T::from_usize_lossy(n - 1);
        let moments: Vec<T> = (0..n)
            .map(|j| {
                if j % 2 == 1 {
                    T::zero()
                } else {
                    let jj = T::from_usize_lossy(j);
                    T::lit(2.0) / (T::one() - jj * jj)
                }
            })
            .collect();
        (0..n)
            .map(|i| {
                let mut w = T::zero();
                for (j, m) in moments.iter().enumerate() {
                    if *m != T::zero() {
                        w += *m * self.end_factor(j) * self.table[i * n + j];
                    }
                }
                w * self.end_factor(i) * T::lit(2.0) / big_n * T::lit(0.5)
            })
            .collect()
    }

    /// Values at the nodes → Chebyshev coefficients (DCT-I).
    pub fn to_coeffs<V: Value<Real = T>>(&self, values: &[V]) -> Vec<V> {
        let n = self.n;
        assert_eq!(values.len(), n, "to_coeffs: length mismatch");
        let scale = T::lit(2.0) / T::from_usize_lossy(n - 1);
        (0..n)
            .map(|j| {
                let mut acc = V::zero();
                for (i, v) in values.iter().enumerate() {
                    acc += *v * (self.table[i * n + j] * self.end_factor(i));
                }
                acc * (scale * self.end_factor(j))
            })
            .collect()
    }

    /// Chebyshev coefficients → values at the nodes.
    pub fn from_coeffs<V: Value<Real = T>>(&self, coeffs: &[V]) -> Vec<V> {
        let n = self.n;
        assert_eq!(coeffs.len(), n, "from_coeffs: length mismatch");
        (0..n)
            .map(|i| {
                let row = &self.table[i * n..(i + 1) * n];
                let mut acc = V::zero();
                for (c, t) in coeffs.iter().zip(row) {
                    acc += *c * *t;
                }
                acc
            })
            .collect()
    }

    /// Coefficients with the round-off tail removed.
    pub fn to_coeffs_chopped<V: Value<Real = T>>(&self, values: &[V]) -> Vec<V> {
        let mut c = self.to_coeffs(values);
        chop_tail(&mut c);
        c
    }

    /// Evaluates the interpolant through `values` at an arbitrary `ρ`
    /// (barycentric formula of the second kind).
    pub fn interpolate<V: Value<Real = T>>(&self, values: &[V], rho: T) -> V {
        assert_eq!(values.len(), self.n, "interpolate: length mismatch");
        let mut num = V::zero();
        let mut den = T::zero();
        for (i, (&node, &w)) in self.nodes.iter().zip(&self.bary).enumerate() {
            let d = rho - node;
            if d == T::zero() {
                return values[i];
            }
            let q = w / d;
            num += values[i] * q;
            den += q;
        }
        num * (T::one() / den)
    }

    /// Dense first-derivative matrix on the nodes. Built column by column
    /// from the coefficient recurrence (no chopping, the columns are not
    /// smooth functions).
    pub fn diff_matrix(&self) -> DenseMatrix<T> {
        let n = self.n;
        let mut m = DenseMatrix::zeros(n, n);
        for col in 0..n {
            let mut e = vec![T::zero(); n];
            e[col] = T::one();
            let c = self.to_coeffs(&e);
            let d = self.from_coeffs(&derivative_coeffs(&c));
            for (row, v) in d.into_iter().enumerate() {
                m.set(row, col, v);
            }
        }
        m
    }

    /// Dense matrix of `f ↦ ∫_0^ρ f`.
    pub fn antiderivative_matrix(&self) -> DenseMatrix<T> {
        let n = self.n;
        let mut m = DenseMatrix::zeros(n, n);
        for col in 0..n {
            let mut e = vec![T::zero(); n];
            e[col] = T::one();
            let c = self.to_coeffs(&e);
            let d = self.from_coeffs(&antiderivative_coeffs(&c));
            for (row, v) in d.into_iter().enumerate() {
                m.set(row, col, v);
            }
        }
        m
    }
}

/// Zeroes the trailing coefficients that sit below the round-off plateau.
pub fn chop_tail<V: Value>(coeffs: &mut [V]) {
    let scale = max_modulus(coeffs);
    chop_tail_at(coeffs, scale);
}

/// As [`chop_tail`], with the plateau measured against `scale` instead of
/// the largest coefficient. Used for differences of nearly equal functions,
/// where the round-off of the operands sets the noise level.
pub fn chop_tail_at<V: Value>(coeffs: &mut [V], scale: V::Real) {
    if scale == V::Real::zero() {
        return;
    }
    let tol = scale * V::Real::epsilon() * V::Real::lit(CHOP_EPS_MULTIPLE);
    let keep = coeffs
        .iter()
        .rposition(|c| c.modulus() > tol)
        .map_or(0, |p| p + 1);
    for c in coeffs[keep..].iter_mut() {
        *c = V::zero();
    }
}

/// d/dρ in coefficient space (length preserved, top coefficient becomes 0).
pub fn derivative_coeffs<V: Value>(c: &[V]) -> Vec<V> {
    let n = c.len();
    let mut b = vec![V::zero(); n];
    if n < 2 {
        return b;
    }
    // b_{k-1} = b_{k+1} + 2k c_k, walking down from the top.
    for k in (1..n).rev() {
        let upper = if k + 1 < n { b[k + 1] } else { V::zero() };
        b[k - 1] = upper + c[k] * V::Real::from_usize_lossy(2 * k);
    }
    b[0] = b[0] * V::Real::lit(0.5);
    // dx/dρ = 2.
    for v in b.iter_mut() {
        *v = *v * V::Real::lit(2.0);
    }
    b
}

/// `∫_0^ρ` in coefficient space. The degree-n term produced by the top
/// coefficient is dropped, so the result is exact for degree ≤ n-2.
pub fn antiderivative_coeffs<V: Value>(c: &[V]) -> Vec<V> {
    let n = c.len();
    let mut out = vec![V::zero(); n];
    if n < 2 {
        return out;
    }
    let at = |j: usize| if j < n { c[j] } else { V::zero() };
    for k in 1..n {
        let kk = V::Real::from_usize_lossy(2 * k);
        out[k] = if k == 1 {
            at(0) - at(2) * V::Real::lit(0.5)
        } else {
            (at(k - 1) - at(k + 1)) * (V::Real::one() / kk)
        };
    }
    // dρ = dx/2.
    for v in out.iter_mut() {
        *v = *v * V::Real::lit(0.5);
    }
    // Fix F(ρ=0) = F(x=-1) = 0.
    let mut at_left = V::zero();
    for (k, v) in out.iter().enumerate().skip(1) {
        if k % 2 == 0 {
            at_left += *v;
        } else {
            at_left -= *v;
        }
    }
    out[0] = -at_left;
    out
}

/// Clenshaw evaluation of `Σ c_j T_j(2ρ-1)`.
pub fn eval_coeffs<V: Value>(c: &[V], rho: V::Real) -> V {
    let x = rho * V::Real::lit(2.0) - V::Real::one();
    let two_x = x * V::Real::lit(2.0);
    let mut b1 = V::zero();
    let mut b2 = V::zero();
    for &ck in c.iter().skip(1).rev() {
        let b0 = ck + b1 * two_x - b2;
        b2 = b1;
        b1 = b0;
    }
    match c.first() {
        Some(&c0) => c0 + b1 * x - b2,
        None => V::zero(),
    }
}

/// A function sampled at the nodes of a [`ChebBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn<V: Value> {
    basis: Arc<ChebBasis<V::Real>>,
    values: Vec<V>,
}

impl<V: Value> GridFn<V> {
    pub fn new(basis: Arc<ChebBasis<V::Real>>, values: Vec<V>) -> Result<Self> {
        if values.len() != basis.n() {
            return Err(Error::LengthMismatch {
                expected: basis.n(),
                got: values.len(),
            });
        }
        Ok(Self { basis, values })
    }

    pub fn from_fn(basis: &Arc<ChebBasis<V::Real>>, f: impl Fn(V::Real) -> V) -> Self {
        let values = basis.nodes().iter().map(|&r| f(r)).collect();
        Self {
            basis: Arc::clone(basis),
            values,
        }
    }

    pub fn zeros(basis: &Arc<ChebBasis<V::Real>>) -> Self {
        Self {
            basis: Arc::clone(basis),
            values: vec![V::zero(); basis.n()],
        }
    }

    pub fn from_coeffs(basis: &Arc<ChebBasis<V::Real>>, coeffs: &[V]) -> Self {
        Self {
            basis: Arc::clone(basis),
            values: basis.from_coeffs(coeffs),
        }
    }

    pub fn basis(&self) -> &Arc<ChebBasis<V::Real>> {
        &self.basis
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[V] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [V] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<V> {
        self.values
    }

    pub fn coeffs(&self) -> Vec<V> {
        self.basis.to_coeffs(&self.values)
    }

    pub fn at(&self, rho: V::Real) -> V {
        self.basis.interpolate(&self.values, rho)
    }

    pub fn same_basis(&self, other: &Self) -> Result<()> {
        if self.n() == other.n() {
            Ok(())
        } else {
            Err(Error::BasisMismatch {
                left: self.n(),
                right: other.n(),
            })
        }
    }

    pub fn map(&self, f: impl Fn(V::Real, V) -> V) -> Self {
        let values = self
            .basis
            .nodes()
            .iter()
            .zip(&self.values)
            .map(|(&r, &v)| f(r, v))
            .collect();
        Self {
            basis: Arc::clone(&self.basis),
            values,
        }
    }

    pub fn scale(&self, s: V) -> Self {
        self.map(|_, v| v * s)
    }

    /// Multiplies pointwise by `ρ`.
    pub fn times_rho(&self) -> Self {
        self.map(|r, v| v * r)
    }

    pub fn max_abs(&self) -> V::Real {
        max_modulus(&self.values)
    }

    pub fn l2_norm(&self) -> V::Real {
        l2_inner(self, self)
            .map(|v| v.re().max(V::Real::zero()).sqrt())
            .expect("same basis")
    }

    /// CSV with header `rho,value` (real) or `rho,re,im` (complex); rows in
    /// ascending `ρ`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let complex = self.values.iter().any(|v| v.im() != V::Real::zero());
        let mut s = String::from(if complex { "rho,re,im\n" } else { "rho,value\n" });
        for (r, v) in self.basis.nodes().iter().zip(&self.values) {
            if complex {
                let _ = writeln!(
                    s,
                    "{:.16e},{:.16e},{:.16e}",
                    r.as_f64(),
                    v.re().as_f64(),
                    v.im().as_f64()
                );
            } else {
                let _ = writeln!(s, "{:.16e},{:.16e}", r.as_f64(), v.re().as_f64());
            }
        }
        s
    }

    /// Largest Chebyshev coefficient modulus.
    pub fn coeff_scale(&self) -> V::Real {
        max_modulus(&self.coeffs())
    }

    /// Drops the trailing coefficients below the round-off level of a
    /// function with coefficient scale `scale`.
    pub fn chopped_at(&self, scale: V::Real) -> Self {
        let mut c = self.coeffs();
        chop_tail_at(&mut c, scale);
        Self::from_coeffs(&self.basis, &c)
    }

    pub fn to_record(&self) -> GridFnRecord {
        let imag: Vec<f64> = self.values.iter().map(|v| v.im().as_f64()).collect();
        GridFnRecord {
            rho: self.basis.nodes().iter().map(|r| r.as_f64()).collect(),
            values: self.values.iter().map(|v| v.re().as_f64()).collect(),
            imag: if imag.iter().any(|&v| v != 0.0) {
                Some(imag)
            } else {
                None
            },
        }
    }
}

/// JSON form of a grid function: parallel arrays in ascending `ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFnRecord {
    pub rho: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imag: Option<Vec<f64>>,
}

impl<V: Value> Add for &GridFn<V> {
    type Output = GridFn<V>;

    /// Panics on basis mismatch.
    fn add(self, rhs: Self) -> GridFn<V> {
        self.same_basis(rhs).expect("GridFn + GridFn");
        let values = self.values.iter().zip(&rhs.values).map(|(a, b)| *a + *b).collect();
        GridFn {
            basis: Arc::clone(&self.basis),
            values,
        }
    }
}

impl<V: Value> Sub for &GridFn<V> {
    type Output = GridFn<V>;

    /// Panics on basis mismatch.
    fn sub(self, rhs: Self) -> GridFn<V> {
        self.same_basis(rhs).expect("GridFn - GridFn");
        let values = self.values.iter().zip(&rhs.values).map(|(a, b)| *a - *b).collect();
        GridFn {
            basis: Arc::clone(&self.basis),
            values,
        }
    }
}

impl<V: Value> Mul<V> for &GridFn<V> {
    type Output = GridFn<V>;

    fn mul(self, s: V) -> GridFn<V> {
        self.scale(s)
    }
}

/// Spectral derivative d/dρ.
pub fn differentiate<V: Value>(f: &GridFn<V>) -> GridFn<V> {
    differentiate_n(f, 1)
}

/// `order`-th spectral derivative, staying in coefficient space between
/// the repeated applications.
pub fn differentiate_n<V: Value>(f: &GridFn<V>, order: usize) -> GridFn<V> {
    let mut c = f.basis.to_coeffs_chopped(&f.values);
    for _ in 0..order {
        c = derivative_coeffs(&c);
    }
    GridFn::from_coeffs(&f.basis, &c)
}

/// `F(ρ) = ∫_0^ρ f`.
pub fn antiderivative<V: Value>(f: &GridFn<V>) -> GridFn<V> {
    let c = f.basis.to_coeffs(&f.values);
    GridFn::from_coeffs(&f.basis, &antiderivative_coeffs(&c))
}

/// Clenshaw–Curtis approximation of `∫_0^1 f · conj(g)`.
pub fn l2_inner<V: Value>(f: &GridFn<V>, g: &GridFn<V>) -> Result<V> {
    f.same_basis(g)?;
    Ok(f
        .values
        .iter()
        .zip(&g.values)
        .zip(f.basis.quad_weights())
        .map(|((a, b), w)| *a * b.conj() * *w)
        .sum())
}

/// Taylor coefficient data at `ρ = 0`: the `order`-th derivative there.
pub fn derivative_at_zero<V: Value>(f: &GridFn<V>, order: usize) -> V {
    let mut c = f.basis.to_coeffs_chopped(&f.values);
    for _ in 0..order {
        c = derivative_coeffs(&c);
    }
    // T_j(-1) = (-1)^j
    c.iter()
        .enumerate()
        .map(|(j, v)| if j % 2 == 0 { *v } else { -*v })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn basis(n: usize) -> Arc<ChebBasis<f64>> {
        make_basis(n).unwrap()
    }

    #[test]
    fn rejects_too_few_nodes() {
        assert_eq!(ChebBasis::<f64>::new(1), Err(Error::TooFewNodes(1)));
        assert_eq!(ChebBasis::<f64>::new(0), Err(Error::TooFewNodes(0)));
    }

    #[test]
    fn small_grids_have_exact_nodes() {
        assert_eq!(basis(2).nodes(), &[0.0, 1.0]);
        assert_eq!(basis(3).nodes(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn nodes_are_monotone_with_exact_endpoints() {
        for n in [2, 5, 16, 64, 257] {
            let b = basis(n);
            assert_eq!(b.nodes()[0], 0.0);
            assert_eq!(b.nodes()[n - 1], 1.0);
            assert!(b.nodes().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn quadrature_of_rho4_on_five_nodes() {
        let b = basis(5);
        let f = GridFn::from_fn(&b, |r: f64| r.powi(4));
        let q: f64 = f.values().iter().zip(b.quad_weights()).map(|(a, w)| a * w).sum();
        assert!((q - 0.2).abs() < 1e-14);
    }

    #[test]
    fn quadrature_is_exact_up_to_degree_n_minus_1() {
        for n in [4, 9, 33, 128] {
            let b = basis(n);
            for d in 0..n {
                let q: f64 = b
                    .nodes()
                    .iter()
                    .zip(b.quad_weights())
                    .map(|(r, w)| r.powi(d as i32) * w)
                    .sum();
                assert!((q - 1.0 / (d as f64 + 1.0)).abs() < 1e-14, "n={n} d={d}");
            }
        }
    }

    #[test]
    fn quadrature_weights_are_positive() {
        for n in [2, 3, 7, 64, 256, 512] {
            assert!(basis(n).quad_weights().iter().all(|&w| w > 0.0), "n={n}");
        }
    }

    #[test]
    fn derivative_of_rho_squared() {
        for n in [3, 8, 64, 128] {
            let b = basis(n);
            let d = differentiate(&GridFn::from_fn(&b, |r: f64| r * r));
            for (r, v) in b.nodes().iter().zip(d.values()) {
                assert!((v - 2.0 * r).abs() < 1e-13, "n={n}");
            }
        }
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let b = basis(64);
        let d = differentiate(&GridFn::from_fn(&b, |_| 3.5));
        assert!(d.max_abs() < 1e-13);
    }

    #[test]
    fn derivative_of_binomial_difference() {
        let b = basis(32);
        let f = GridFn::from_fn(&b, |r: f64| (1.0 - r).powi(3) - (1.0 + r).powi(3));
        let d = differentiate(&f);
        for (r, v) in b.nodes().iter().zip(d.values()) {
            assert!((v - (-6.0 - 6.0 * r * r)).abs() < 1e-12);
        }
    }

    #[test]
    fn antiderivative_examples() {
        let b = basis(16);
        let cases: [(fn(f64) -> f64, fn(f64) -> f64); 3] = [
            (|_| 1.0, |r| r),
            (|r| 2.0 * r, |r| r * r),
            (|r| -6.0 - 6.0 * r * r, |r| -6.0 * r - 2.0 * r.powi(3)),
        ];
        for (f, expected) in cases {
            let a = antiderivative(&GridFn::from_fn(&b, f));
            for (r, v) in b.nodes().iter().zip(a.values()) {
                assert!((v - expected(*r)).abs() < 1e-13);
            }
            assert!(a.values()[0].abs() < 1e-15);
        }
    }

    #[test]
    fn antiderivative_drops_only_the_top_degree() {
        // Degree n-2 is exact, degree n-1 is not.
        let n = 6;
        let b = basis(n);
        let exact = antiderivative(&GridFn::from_fn(&b, |r: f64| r.powi(4)));
        for (r, v) in b.nodes().iter().zip(exact.values()) {
            assert!((v - r.powi(5) / 5.0).abs() < 1e-14);
        }
        let lossy = antiderivative(&GridFn::from_fn(&b, |r: f64| r.powi(5)));
        let err = b
            .nodes()
            .iter()
            .zip(lossy.values())
            .map(|(r, v)| (v - r.powi(6) / 6.0).abs())
            .fold(0.0, f64::max);
        assert!(err > 1e-6);
    }

    #[test]
    fn l2_inner_examples() {
        let b = basis(8);
        let one = GridFn::from_fn(&b, |_| 1.0f64);
        let rho = GridFn::from_fn(&b, |r: f64| r);
        let rho2 = GridFn::from_fn(&b, |r: f64| r * r);
        assert!((l2_inner(&one, &one).unwrap() - 1.0).abs() < 1e-15);
        assert!((l2_inner(&rho, &rho).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((l2_inner(&rho, &rho2).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn l2_inner_conjugates_second_argument() {
        let b = basis(8);
        let i = GridFn::from_fn(&b, |_| Complex64::new(0.0, 1.0));
        let v = l2_inner(&i, &i).unwrap();
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn l2_inner_rejects_basis_mismatch() {
        let f = GridFn::from_fn(&basis(8), |r: f64| r);
        let g = GridFn::from_fn(&basis(9), |r: f64| r);
        assert_eq!(
            l2_inner(&f, &g),
            Err(Error::BasisMismatch { left: 8, right: 9 })
        );
    }

    #[test]
    fn interpolation_reproduces_polynomials_off_grid() {
        let b = basis(12);
        let f = GridFn::from_fn(&b, |r: f64| 1.0 - 3.0 * r + r.powi(7));
        for &r in &[0.013, 0.5, 0.77, 0.999] {
            assert!((f.at(r) - (1.0 - 3.0 * r + r.powi(7))).abs() < 1e-13);
        }
        // Nodes are returned verbatim.
        assert_eq!(f.at(b.nodes()[4]), f.values()[4]);
    }

    #[test]
    fn clenshaw_matches_nodal_values() {
        let b = basis(20);
        let f = GridFn::from_fn(&b, |r: f64| (3.0 * r).sin());
        let c = f.coeffs();
        for (r, v) in b.nodes().iter().zip(f.values()) {
            assert!((eval_coeffs(&c, *r) - v).abs() < 1e-14);
        }
    }

    #[test]
    fn dense_diff_matrix_agrees_with_recurrence() {
        let b = basis(24);
        let f = GridFn::from_fn(&b, |r: f64| (2.0 * r).exp());
        let dm = b.diff_matrix().matvec(f.values());
        let dr = differentiate(&f);
        for (a, c) in dm.iter().zip(dr.values()) {
            assert!((a - c).abs() < 1e-10 * (1.0 + c.abs()));
        }
        let im = b.antiderivative_matrix().matvec(f.values());
        let ir = antiderivative(&f);
        for (a, c) in im.iter().zip(ir.values()) {
            assert!((a - c).abs() < 1e-13);
        }
    }

    #[test]
    fn single_precision_basis_works() {
        let b = make_basis::<f32>(16).unwrap();
        let d = differentiate(&GridFn::from_fn(&b, |r: f32| r * r * r));
        for (r, v) in b.nodes().iter().zip(d.values()) {
            assert!((v - 3.0 * r * r).abs() < 1e-4);
        }
    }

    #[test]
    fn csv_has_header_and_ascending_rows() {
        let b = basis(4);
        let csv = GridFn::from_fn(&b, |r: f64| r).to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "rho,value");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0.0000000000000000e0,"));
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(n in 2usize..=256, seed in any::<u64>()) {
            let b = basis(n);
            let a = (seed >> 11) as f64 / (1u64 << 53) as f64;
            let f = GridFn::from_fn(&b, |r: f64| (7.0 * a * r).sin() + a * (3.0 * r).cos() + r.exp());
            let back = b.from_coeffs(&b.to_coeffs(f.values()));
            let scale = f.max_abs().max(1e-300);
            for (x, y) in f.values().iter().zip(&back) {
                prop_assert!((x - y).abs() / scale < 1e-12);
            }
        }

        #[test]
        fn derivative_inverts_antiderivative(n in 4usize..=96, coeffs in proptest::collection::vec(-1.0f64..1.0, 1..12)) {
            let b = basis(n);
            let deg = coeffs.len().min(n - 1);
            let mut c = vec![0.0; n];
            c[..deg].copy_from_slice(&coeffs[..deg]);
            let f = GridFn::from_coeffs(&b, &c);
            let back = differentiate(&antiderivative(&f));
            for (x, y) in f.values().iter().zip(back.values()) {
                prop_assert!((x - y).abs() < 1e-11);
            }
        }
    }
}
