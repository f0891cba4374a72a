//! Discrete generators of the first-order system in similarity coordinates.
//!
//! A [`Field`] is the pair `(u₁, u₂)` on one Chebyshev grid. The free
//! generator is `L₀u = (-ρu₁' + u₂', u₁' - ρu₂')`, the perturbation is
//! `L'u = (pc₀ ∫₀^ρ u₂, 0)` and the linearized focusing problem evolves with
//! `L = L₀ + L'`.

use std::fmt::Write as _;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, One, Zero};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::{Real, Value};
use crate::spectral::{
    antiderivative, derivative_at_zero, differentiate, differentiate_n, eval_coeffs, l2_inner,
    ChebBasis, GridFn,
};

/// The state `Φ = (u₁, u₂)` of the first-order system.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<V: Value> {
    pub u1: GridFn<V>,
    pub u2: GridFn<V>,
}

impl<V: Value> Field<V> {
    pub fn new(u1: GridFn<V>, u2: GridFn<V>) -> Result<Self> {
        u1.same_basis(&u2)?;
        Ok(Self { u1, u2 })
    }

    pub fn from_fns(
        basis: &Arc<ChebBasis<V::Real>>,
        f1: impl Fn(V::Real) -> V,
        f2: impl Fn(V::Real) -> V,
    ) -> Self {
        Self {
            u1: GridFn::from_fn(basis, f1),
            u2: GridFn::from_fn(basis, f2),
        }
    }

    pub fn zeros(basis: &Arc<ChebBasis<V::Real>>) -> Self {
        Self {
            u1: GridFn::zeros(basis),
            u2: GridFn::zeros(basis),
        }
    }

    pub fn basis(&self) -> &Arc<ChebBasis<V::Real>> {
        self.u1.basis()
    }

    pub fn n(&self) -> usize {
        self.u1.n()
    }

    pub fn same_basis(&self, other: &Self) -> Result<()> {
        self.u1.same_basis(&other.u1)
    }

    /// `(u|v)_H = (u₁|v₁)_{L²} + (u₂|v₂)_{L²}`.
    pub fn h_inner(&self, other: &Self) -> Result<V> {
        Ok(l2_inner(&self.u1, &other.u1)? + l2_inner(&self.u2, &other.u2)?)
    }

    pub fn h_norm(&self) -> V::Real {
        self.h_inner(self)
            .map(|v| v.re().max(V::Real::zero()).sqrt())
            .expect("field components share a basis")
    }

    pub fn max_abs(&self) -> V::Real {
        self.u1.max_abs().max(self.u2.max_abs())
    }

    pub fn scale(&self, s: V) -> Self {
        Self {
            u1: self.u1.scale(s),
            u2: self.u2.scale(s),
        }
    }

    /// Panics on basis mismatch.
    pub fn add(&self, other: &Self) -> Self {
        Self {
            u1: &self.u1 + &other.u1,
            u2: &self.u2 + &other.u2,
        }
    }

    /// Panics on basis mismatch.
    pub fn sub(&self, other: &Self) -> Self {
        Self {
            u1: &self.u1 - &other.u1,
            u2: &self.u2 - &other.u2,
        }
    }

    /// `self + s * other`. Panics on basis mismatch.
    pub fn axpy(&self, s: V, other: &Self) -> Self {
        self.add(&other.scale(s))
    }

    pub fn is_finite(&self) -> bool {
        self.u1
            .values()
            .iter()
            .chain(self.u2.values())
            .all(|v| v.all_finite())
    }

    /// `[u₁ values..., u₂ values...]`, the layout used by the generator matrix.
    pub fn to_flat(&self) -> Vec<V> {
        let mut out = Vec::with_capacity(2 * self.n());
        out.extend_from_slice(self.u1.values());
        out.extend_from_slice(self.u2.values());
        out
    }

    pub fn from_flat(basis: &Arc<ChebBasis<V::Real>>, flat: &[V]) -> Result<Self> {
        let n = basis.n();
        if flat.len() != 2 * n {
            return Err(Error::LengthMismatch {
                expected: 2 * n,
                got: flat.len(),
            });
        }
        Ok(Self {
            u1: GridFn::new(Arc::clone(basis), flat[..n].to_vec())?,
            u2: GridFn::new(Arc::clone(basis), flat[n..].to_vec())?,
        })
    }

    /// CSV with header `rho,u1,u2` (real part only), ascending `ρ`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rho,u1,u2\n");
        for ((r, a), b) in self
            .basis()
            .nodes()
            .iter()
            .zip(self.u1.values())
            .zip(self.u2.values())
        {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e}",
                r.as_f64(),
                a.re().as_f64(),
                b.re().as_f64()
            );
        }
        s
    }
}

/// Nonlinearity exponent `p` and the derived potential strength
/// `pc₀ = 2p(p+1)/(p-1)²` of the linearization around the constant-profile
/// self-similar solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams<T> {
    p: T,
    pc0: T,
    odd_p: Option<i64>,
}

impl<T: Real> ProblemParams<T> {
    /// Odd integer exponent `p ≥ 3`.
    pub fn new(p: i64) -> Result<Self> {
        if p < 3 || p % 2 == 0 {
            return Err(Error::InvalidParams(format!(
                "p must be an odd integer >= 3, got {p} (use a real exponent explicitly to go beyond)"
            )));
        }
        let pt = T::lit(p as f64);
        Ok(Self {
            p: pt,
            pc0: Self::pc0_of(pt),
            odd_p: Some(p),
        })
    }

    /// Any real `p > 1`. Exponents other than odd integers lie outside the
    /// setting of the stability result; see [`Self::is_odd_integer`].
    pub fn with_real_exponent(p: T) -> Result<Self> {
        if !(p > T::one()) || !p.is_finite() {
            return Err(Error::InvalidParams(format!("p must be a real number > 1, got {p}")));
        }
        let odd_p = if p.fract() == T::zero() {
            p.to_i64().filter(|&q| q >= 3 && q % 2 == 1)
        } else {
            None
        };
        Ok(Self {
            p,
            pc0: Self::pc0_of(p),
            odd_p,
        })
    }

    fn pc0_of(p: T) -> T {
        let pm1 = p - T::one();
        T::lit(2.0) * p * (p + T::one()) / (pm1 * pm1)
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn pc0(&self) -> T {
        self.pc0
    }

    /// `c₀ = 2(p+1)/(p-1)²`: the coefficient of the linearized potential.
    pub fn c0(&self) -> T {
        self.pc0 / self.p
    }

    pub fn is_odd_integer(&self) -> bool {
        self.odd_p.is_some()
    }

    pub fn odd_integer_p(&self) -> Option<i64> {
        self.odd_p
    }

    /// Exact `pc₀` for odd integer `p`.
    pub fn exact_pc0(&self) -> Option<BigRational> {
        self.odd_p.map(|p| {
            BigRational::new(
                BigInt::from(2 * p * (p + 1)),
                BigInt::from((p - 1) * (p - 1)),
            )
        })
    }
}

/// Which evolution problem (and hence which generator) is meant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Problem<T> {
    /// Free radial wave equation, generator `L₀`.
    Free,
    /// Linearization around the self-similar blow-up, generator `L₀ + L'`.
    Semilinear(ProblemParams<T>),
}

impl<T: Real> Problem<T> {
    pub fn pc0(&self) -> T {
        match self {
            Problem::Free => T::zero(),
            Problem::Semilinear(p) => p.pc0(),
        }
    }

    pub fn params(&self) -> Option<&ProblemParams<T>> {
        match self {
            Problem::Free => None,
            Problem::Semilinear(p) => Some(p),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Problem::Free => "free",
            Problem::Semilinear(_) => "semilinear",
        }
    }
}

/// Inner products available to [`energy_form`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerProduct {
    H,
    H2k(usize),
    /// `(D^{2k}u | D^{2k}v)_H`, the norm used on the complement of the modes.
    NPerp(usize),
}

/// `L₀u = (-ρu₁' + u₂', u₁' - ρu₂')`.
pub fn apply_l0<V: Value>(u: &Field<V>) -> Result<Field<V>> {
    u.u1.same_basis(&u.u2)?;
    let d1 = differentiate(&u.u1);
    let d2 = differentiate(&u.u2);
    Ok(Field {
        u1: &d2 - &d1.times_rho(),
        u2: &d1 - &d2.times_rho(),
    })
}

/// `L'u = (pc₀ ∫₀^ρ u₂, 0)`.
pub fn apply_lprime<V: Value>(u: &Field<V>, params: &ProblemParams<V::Real>) -> Result<Field<V>> {
    apply_lprime_pc0(u, params.pc0())
}

fn apply_lprime_pc0<V: Value>(u: &Field<V>, pc0: V::Real) -> Result<Field<V>> {
    u.u1.same_basis(&u.u2)?;
    Ok(Field {
        u1: antiderivative(&u.u2).scale(V::from_real(pc0)),
        u2: GridFn::zeros(u.basis()),
    })
}

/// `Lu = L₀u + L'u`.
pub fn apply_l<V: Value>(u: &Field<V>, params: &ProblemParams<V::Real>) -> Result<Field<V>> {
    Ok(apply_l0(u)?.add(&apply_lprime(u, params)?))
}

/// Applies the generator selected by `problem`.
pub fn apply_generator<V: Value>(u: &Field<V>, problem: &Problem<V::Real>) -> Result<Field<V>> {
    match problem {
        Problem::Free => apply_l0(u),
        Problem::Semilinear(params) => apply_l(u, params),
    }
}

/// Componentwise `2k`-th derivative. `k = 0` is the identity.
pub fn apply_d2k<V: Value>(u: &Field<V>, k: usize) -> Result<Field<V>> {
    let n = u.n();
    if 2 * k >= n {
        return Err(Error::DerivativeOrder { order: 2 * k, n });
    }
    Ok(Field {
        u1: differentiate_n(&u.u1, 2 * k),
        u2: differentiate_n(&u.u2, 2 * k),
    })
}

fn resolvent_tolerance<T: Real>() -> T {
    T::lit(1e-8).max(T::epsilon() * T::lit(1e4))
}

/// Solves `(1 - L₀)u = f` with the explicit formula
/// `F = f₁ + ρf₂ + ∫₀^ρ f₂`, `u₂ = (1-ρ²)⁻¹ ∫_ρ^1 F`, `u₁ = ρu₂ - ∫₀^ρ f₂`.
///
/// The quotient is evaluated in the mean-value form
/// `(1-ρ)⁻¹ ∫_ρ^1 F = ∫_0^1 F(ρ + (1-ρ)s) ds`, which is regular at `ρ = 1`
/// where it reduces to `u₂(1) = F(1)/2`.
pub fn resolvent_at_one<V: Value>(f: &Field<V>) -> Result<Field<V>> {
    f.u1.same_basis(&f.u2)?;
    let basis = f.basis();
    let int_f2 = antiderivative(&f.u2);
    let big_f = &(&f.u1 + &f.u2.times_rho()) + &int_f2;
    let f_coeffs = big_f.coeffs();
    let one = V::Real::one();
    let s_nodes = basis.nodes();
    let s_weights = basis.quad_weights();
    let n = basis.n();

    let u2_values: Vec<V> = basis
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &rho)| {
            if i == n - 1 {
                return big_f.values()[n - 1] * V::Real::lit(0.5);
            }
            let mean: V = s_nodes
                .iter()
                .zip(s_weights)
                .map(|(&s, &w)| eval_coeffs(&f_coeffs, rho + (one - rho) * s) * w)
                .sum();
            mean * (one / (one + rho))
        })
        .collect();
    let u2 = GridFn::new(Arc::clone(basis), u2_values)?;
    let u1 = &u2.times_rho() - &int_f2;
    let u = Field { u1, u2 };

    let residual = u.sub(&apply_l0(&u)?).sub(f).h_norm();
    let tolerance = resolvent_tolerance::<V::Real>() * f.h_norm().max(one);
    if !(residual <= tolerance) {
        return Err(Error::Residual {
            what: "resolvent at lambda = 1",
            residual: residual.as_f64(),
            tolerance: tolerance.as_f64(),
        });
    }
    Ok(u)
}

/// `Re (op u | u)` in the requested inner product.
pub fn energy_form<V: Value>(
    u: &Field<V>,
    op: &Problem<V::Real>,
    inner: InnerProduct,
) -> Result<V::Real> {
    let lu = apply_generator(u, op)?;
    let value = match inner {
        InnerProduct::H => lu.h_inner(u)?,
        InnerProduct::H2k(k) => {
            lu.h_inner(u)? + apply_d2k(&lu, k)?.h_inner(&apply_d2k(u, k)?)?
        }
        InnerProduct::NPerp(k) => apply_d2k(&lu, k)?.h_inner(&apply_d2k(u, k)?)?,
    };
    Ok(value.re())
}

/// Residuals of the `H^{2k}` boundary conditions `u₁^{(2j)}(0) = 0` and
/// `u₂^{(2j+1)}(0) = 0` for `j < k`, in that interleaved order.
pub fn boundary_residuals<V: Value>(u: &Field<V>, k: usize) -> Vec<(String, V::Real)> {
    let mut out = Vec::with_capacity(2 * k);
    for j in 0..k {
        out.push((
            format!("u1^({})(0)", 2 * j),
            derivative_at_zero(&u.u1, 2 * j).modulus(),
        ));
        out.push((
            format!("u2^({})(0)", 2 * j + 1),
            derivative_at_zero(&u.u2, 2 * j + 1).modulus(),
        ));
    }
    out
}

/// A field known to satisfy the `H^{2k}` boundary conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct H2kField<V: Value> {
    field: Field<V>,
    k: usize,
}

impl<V: Value> H2kField<V> {
    /// Checks the boundary conditions with tolerance `tol` relative to
    /// `max(1, max|u|)`.
    pub fn new(field: Field<V>, k: usize, tol: V::Real) -> Result<Self> {
        let scale = field.max_abs().max(V::Real::one());
        for (name, r) in boundary_residuals(&field, k) {
            if r > tol * scale {
                return Err(Error::InvalidParams(format!(
                    "boundary condition {name} = 0 violated (|residual| = {:.3e})",
                    r.as_f64()
                )));
            }
        }
        Ok(Self { field, k })
    }

    pub fn field(&self) -> &Field<V> {
        &self.field
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn into_field(self) -> Field<V> {
        self.field
    }
}

/// The discrete generator as a dense `2n × 2n` matrix acting on
/// `[u₁; u₂]`. The `u₁` equation at `ρ = 0` is replaced by the constraint
/// row `d/dτ u₁(0) = 0`; no condition is imposed at `ρ = 1`.
pub fn generator_matrix<T: Real>(basis: &ChebBasis<T>, pc0: T) -> DenseMatrix<T> {
    let n = basis.n();
    let d = basis.diff_matrix();
    let j = if pc0 != T::zero() {
        Some(basis.antiderivative_matrix())
    } else {
        None
    };
    let rho = basis.nodes();
    let mut a = DenseMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for c in 0..n {
            let dic = d.get(i, c);
            // u1' = -ρ u1' + u2' + pc0 ∫u2
            a.set(i, c, -rho[i] * dic);
            let jic = j.as_ref().map_or(T::zero(), |m| m.get(i, c));
            a.set(i, n + c, dic + pc0 * jic);
            // u2' = u1' - ρ u2'
            a.set(n + i, c, dic);
            a.set(n + i, n + c, -rho[i] * dic);
        }
    }
    for v in a.row_mut(0) {
        *v = T::zero();
    }
    a
}
