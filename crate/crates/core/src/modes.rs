//! Analytic eigenvalues and eigenfunctions.
//!
//! Free modes come from the closed form `u(ρ,λ) = (1-ρ)^{1-λ} - (1+ρ)^{1-λ}`,
//! semilinear modes from the terminating odd Frobenius series of
//! `-(1-ρ²)u'' + 2λρu' + [λ(λ-1) - pc₀]u = 0`. Both are lifted to the
//! first-order system by `u₁ = ρu' + (λ-1)u`, `u₂ = u'`.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{apply_generator, Field, Problem, ProblemParams};
use crate::scalar::{Real, Value};
use crate::spectral::{make_basis, ChebBasis, GridFn};

pub const DEFAULT_DEGREE_CAP: usize = 81;

/// Grid size used to check eigen-residuals of assembled modes.
pub const DEFAULT_RESIDUAL_N: usize = 64;

/// Which family a mode belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeLabel {
    /// `λ_j = 1 - j` of the free problem, `j ≥ 1`.
    Free(usize),
    /// `λ_j⁺` of the semilinear problem, `j ≥ 0`.
    Plus(usize),
    /// `λ_j⁻` of the semilinear problem, `j ≥ 0`.
    Minus(usize),
    /// A non-analytic eigenfunction of `L₀`.
    Continuum { re: f64, im: f64 },
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeLabel::Free(j) => write!(f, "free({j})"),
            ModeLabel::Plus(j) => write!(f, "plus({j})"),
            ModeLabel::Minus(j) => write!(f, "minus({j})"),
            ModeLabel::Continuum { re, im } => write!(f, "continuum({re}{im:+}i)"),
        }
    }
}

/// Profile `u(·,λ)` as monomial coefficients, `coeffs[i]` multiplying `ρ^i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ScalarProfile<T> {
    pub coeffs: Vec<T>,
    pub lambda: T,
}

impl<T: Real> ScalarProfile<T> {
    pub fn eval(&self, rho: T) -> T {
        poly_eval(&self.coeffs, rho)
    }

    /// Degree of the highest nonzero coefficient (0 for the zero polynomial).
    pub fn degree(&self) -> usize {
        poly_degree(&self.coeffs)
    }

    /// True when only odd powers appear.
    pub fn is_odd(&self) -> bool {
        self.coeffs
            .iter()
            .enumerate()
            .all(|(i, c)| i % 2 == 1 || *c == T::zero())
    }
}

/// An eigenvalue with its eigenfunction of the first-order system, stored as
/// monomial coefficients so it can be sampled on any grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ModePair<T> {
    pub label: ModeLabel,
    pub lambda: T,
    /// The profile the pair was assembled from, before normalization.
    pub profile: ScalarProfile<T>,
    pub u1: Vec<T>,
    pub u2: Vec<T>,
    /// Factor applied to the assembled field (1 for a raw pair).
    pub normalization: T,
}

impl<T: Real> ModePair<T> {
    pub fn field(&self, basis: &Arc<ChebBasis<T>>) -> Field<T> {
        Field::from_fns(basis, |r| poly_eval(&self.u1, r), |r| poly_eval(&self.u2, r))
    }

    /// Largest degree among the two components.
    pub fn degree(&self) -> usize {
        poly_degree(&self.u1).max(poly_degree(&self.u2))
    }

    /// Generator this mode is an eigenfunction of.
    pub fn problem_for(&self, params: Option<&ProblemParams<T>>) -> Result<Problem<T>> {
        match self.label {
            ModeLabel::Free(_) | ModeLabel::Continuum { .. } => Ok(Problem::Free),
            ModeLabel::Plus(_) | ModeLabel::Minus(_) => params
                .map(|p| Problem::Semilinear(*p))
                .ok_or_else(|| Error::InvalidParams(format!("{} needs p", self.label))),
        }
    }

    /// `‖G·field - λ·field‖_H` on `basis`.
    pub fn eigen_residual(&self, basis: &Arc<ChebBasis<T>>, problem: &Problem<T>) -> Result<T> {
        let f = self.field(basis);
        Ok(apply_generator(&f, problem)?.sub(&f.scale(self.lambda)).h_norm())
    }

    /// Exact `H^{2k}` norm of the polynomial pair (`k = 0` gives the `H` norm).
    pub fn h2k_norm(&self, k: usize) -> T {
        let mut sq = poly_l2_sq(&self.u1) + poly_l2_sq(&self.u2);
        if k > 0 {
            let d1 = poly_deriv_n(&self.u1, 2 * k);
            let d2 = poly_deriv_n(&self.u2, 2 * k);
            sq += poly_l2_sq(&d1) + poly_l2_sq(&d2);
        }
        sq.sqrt()
    }

    /// Scaled to unit `H^{2k}` norm with the leading coefficient of `u₂`
    /// positive.
    pub fn normalized(&self, k: usize) -> Self {
        let norm = self.h2k_norm(k);
        let lead = self.u2[poly_degree(&self.u2)];
        let s = if lead < T::zero() { -T::one() } else { T::one() } / norm;
        Self {
            label: self.label,
            lambda: self.lambda,
            profile: self.profile.clone(),
            u1: self.u1.iter().map(|c| *c * s).collect(),
            u2: self.u2.iter().map(|c| *c * s).collect(),
            normalization: self.normalization * s,
        }
    }

    pub fn to_record(&self) -> ModeRecord {
        ModeRecord {
            label: self.label.to_string(),
            lambda: self.lambda.as_f64(),
            coefficients: self.profile.coeffs.iter().map(|c| c.as_f64()).collect(),
            u1: self.u1.iter().map(|c| c.as_f64()).collect(),
            u2: self.u2.iter().map(|c| c.as_f64()).collect(),
            normalization: self.normalization.as_f64(),
        }
    }
}

/// One entry of the exported mode catalogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord {
    pub label: String,
    pub lambda: f64,
    /// Monomial coefficients of the profile `u`.
    pub coefficients: Vec<f64>,
    /// Monomial coefficients of the normalized field components.
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub normalization: f64,
}

/// JSON array of [`ModeRecord`]s.
pub fn catalogue_json<T: Real>(modes: &[ModePair<T>]) -> Result<String> {
    let records: Vec<ModeRecord> = modes.iter().map(ModePair::to_record).collect();
    Ok(serde_json::to_string_pretty(&records)?)
}

/// `λ_j = 1 - j`.
pub fn free_eigenvalue(j: usize) -> i64 {
    1 - j as i64
}

/// `u(ρ,λ) = (1-ρ)^{1-λ} - (1+ρ)^{1-λ}` for complex `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeProfile<T> {
    pub lambda: Complex<T>,
}

/// `b^s` with the convention `0^s = 0` for `Re s > 0`.
fn cpow<T: Real>(b: T, s: Complex<T>) -> Complex<T> {
    if b == T::zero() {
        if s.re > T::zero() {
            Complex::zero()
        } else if s.re == T::zero() && s.im == T::zero() {
            Complex::one()
        } else {
            Complex::new(T::infinity(), T::zero())
        }
    } else {
        Complex::new(b, T::zero()).powc(s)
    }
}

impl<T: Real> FreeProfile<T> {
    fn s(&self) -> Complex<T> {
        Complex::new(T::one(), T::zero()) - self.lambda
    }

    pub fn eval(&self, rho: T) -> Complex<T> {
        let s = self.s();
        cpow(T::one() - rho, s) - cpow(T::one() + rho, s)
    }

    /// `u'`. At `ρ = 1` the `(1-ρ)` term is dropped when it is singular.
    pub fn derivative(&self, rho: T) -> Complex<T> {
        let s = self.s();
        let sm1 = s - T::one();
        -(regular(cpow(T::one() - rho, sm1)) + cpow(T::one() + rho, sm1)) * s
    }

    pub fn second_derivative(&self, rho: T) -> Complex<T> {
        let s = self.s();
        let sm2 = s - T::lit(2.0);
        let f = s * (s - T::one());
        (regular(cpow(T::one() - rho, sm2)) - cpow(T::one() + rho, sm2)) * f
    }

    /// The free eigenvalue index `j` when `λ = 1 - j` for some `j ≥ 1`.
    pub fn analytic_index(&self) -> Option<usize> {
        let l = self.lambda;
        if l.im != T::zero() || l.re > T::zero() || l.re.fract() != T::zero() {
            return None;
        }
        (T::one() - l.re).to_usize()
    }

    /// Monomial coefficients when the profile is a polynomial:
    /// `-2 Σ_{i odd} C(j,i) ρ^i`.
    pub fn polynomial(&self) -> Option<ScalarProfile<T>> {
        let j = self.analytic_index()?;
        let mut coeffs = vec![T::zero(); j + 1];
        let mut binom = T::one();
        for (i, c) in coeffs.iter_mut().enumerate() {
            if i > 0 {
                binom = binom * T::from_usize_lossy(j + 1 - i) / T::from_usize_lossy(i);
            }
            if i % 2 == 1 {
                *c = -T::lit(2.0) * binom;
            }
        }
        Some(ScalarProfile {
            coeffs,
            lambda: self.lambda.re,
        })
    }
}

fn regular<T: Real>(z: Complex<T>) -> Complex<T> {
    if z.re.is_finite() && z.im.is_finite() {
        z
    } else {
        Complex::zero()
    }
}

pub fn free_profile<T: Real>(lambda: Complex<T>) -> FreeProfile<T> {
    FreeProfile { lambda }
}

/// Lifts a profile to the first-order system and checks the eigen-residual
/// on a [`DEFAULT_RESIDUAL_N`]-node grid, relative to the field's `H` norm.
pub fn assemble_pair<T: Real>(
    profile: ScalarProfile<T>,
    label: ModeLabel,
    problem: &Problem<T>,
) -> Result<ModePair<T>> {
    let lambda = profile.lambda;
    let du = poly_deriv(&profile.coeffs);
    let mut u1 = poly_mul_rho(&du);
    poly_axpy(&mut u1, lambda - T::one(), &profile.coeffs);
    let pair = ModePair {
        label,
        lambda,
        u1,
        u2: du,
        profile,
        normalization: T::one(),
    };
    let n = DEFAULT_RESIDUAL_N.max(pair.degree() + 8);
    let basis = make_basis::<T>(n)?;
    let residual = pair.eigen_residual(&basis, problem)?;
    let tolerance = eigen_tolerance::<T>() * pair.h2k_norm(0).max(T::one());
    if !(residual <= tolerance) {
        return Err(Error::Residual {
            what: "eigenpair",
            residual: residual.as_f64(),
            tolerance: tolerance.as_f64(),
        });
    }
    Ok(pair)
}

fn eigen_tolerance<T: Real>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(1e4))
}

/// The `j`-th free mode, unnormalized.
pub fn free_mode<T: Real>(j: usize) -> Result<ModePair<T>> {
    if j == 0 {
        return Err(Error::InvalidParams("free modes are indexed from j = 1".into()));
    }
    let lambda = Complex::new(T::lit(free_eigenvalue(j) as f64), T::zero());
    let profile = free_profile(lambda)
        .polynomial()
        .expect("integer eigenvalue gives a polynomial");
    assemble_pair(profile, ModeLabel::Free(j), &Problem::Free)
}

/// `(λ_j⁺, λ_j⁻) = (1 + 2/(p-1) - 2j, -2p/(p-1) - 2j)`.
pub fn semilinear_eigenvalues<T: Real>(params: &ProblemParams<T>, j: usize) -> (T, T) {
    let p = params.p();
    let pm1 = p - T::one();
    let two_j = T::from_usize_lossy(2 * j);
    // Single divisions keep odd-integer cases correctly rounded.
    let plus = (p + T::one() - two_j * pm1) / pm1;
    let minus = -(T::lit(2.0) * p + two_j * pm1) / pm1;
    (plus, minus)
}

/// The index `i < j` with `λ_i⁻ = λ_j⁺`, if any. This happens iff
/// `(3p+1)/(p-1) = 2(j-i)`, i.e. for `p = 5` and `j ≥ 2`; the odd analytic
/// solution at such a `λ` is the degree `2i+1` polynomial of `λ_i⁻`.
pub fn plus_minus_collision<T: Real>(params: &ProblemParams<T>, j: usize) -> Option<usize> {
    let (plus, _) = semilinear_eigenvalues(params, j);
    let tol = T::epsilon() * T::lit(64.0) * plus.abs().max(T::one());
    (0..j).find(|&i| (semilinear_eigenvalues(params, i).1 - plus).abs() <= tol)
}

/// Sign of an analytic semilinear eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct AnalyticEigenvalue<T> {
    pub j: usize,
    pub branch: Branch,
    pub lambda: T,
}

impl<T: Real> AnalyticEigenvalue<T> {
    pub fn label(&self) -> ModeLabel {
        match self.branch {
            Branch::Plus => ModeLabel::Plus(self.j),
            Branch::Minus => ModeLabel::Minus(self.j),
        }
    }
}

/// Roots of the termination condition `λ² + (4j+1)λ + 2j(2j+1) - pc₀ = 0`
/// for `j ≤ j_max`, ordered `(j, +), (j, -)`, optionally restricted to
/// `window = [lo, hi]`. Exact for odd integer `p`.
pub fn eigenvalue_scan<T: Real>(
    params: &ProblemParams<T>,
    j_max: usize,
    window: Option<(T, T)>,
) -> Vec<AnalyticEigenvalue<T>> {
    let exact_disc_root = params.exact_pc0().and_then(|pc0| {
        let disc = BigRational::one() + pc0 * BigRational::from_integer(BigInt::from(4));
        rational_sqrt(&disc)
    });
    let mut out = Vec::with_capacity(2 * j_max + 2);
    for j in 0..=j_max {
        let b = 4 * j as i64 + 1;
        let roots = match &exact_disc_root {
            Some(root) => {
                let mb = BigRational::from_integer(BigInt::from(-b));
                let half = BigRational::new(BigInt::from(1), BigInt::from(2));
                [
                    ratio_to_real::<T>(&((mb.clone() + root) * half.clone())),
                    ratio_to_real::<T>(&((mb - root) * half)),
                ]
            }
            None => {
                let bt = T::lit(b as f64);
                let c = T::lit((2 * j * (2 * j + 1)) as f64) - params.pc0();
                let root = (bt * bt - T::lit(4.0) * c).sqrt();
                [(-bt + root) / T::lit(2.0), (-bt - root) / T::lit(2.0)]
            }
        };
        for (branch, lambda) in [(Branch::Plus, roots[0]), (Branch::Minus, roots[1])] {
            if window.is_none_or(|(lo, hi)| lambda >= lo && lambda <= hi) {
                out.push(AnalyticEigenvalue { j, branch, lambda });
            }
        }
    }
    out
}

fn rational_sqrt(r: &BigRational) -> Option<BigRational> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    (&n * &n == *r.numer() && &d * &d == *r.denom()).then(|| BigRational::new(n, d))
}

pub(crate) fn ratio_to_real<T: Real>(r: &BigRational) -> T {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.abs() < 9.0e15 && d < 9.0e15 => T::lit(n) / T::lit(d),
        _ => T::lit(r.to_f64().unwrap_or(f64::NAN)),
    }
}

/// Arithmetic needed by the Frobenius recurrence: floats with a relative
/// vanishing threshold, rationals with exact zero tests.
pub trait SeriesScalar: Clone + Num + Signed + fmt::Debug {
    fn from_int(i: i64) -> Self;
    /// Whether `value` is zero at the scale `scale ≥ 0` of its summands.
    fn vanishes(value: &Self, scale: &Self) -> bool;
}

macro_rules! impl_series_float {
    ($($t:ty),*) => {$(
        impl SeriesScalar for $t {
            fn from_int(i: i64) -> Self {
                i as $t
            }
            fn vanishes(value: &Self, scale: &Self) -> bool {
                let tol = (1e-12 as $t).max(64.0 * <$t>::EPSILON);
                value.abs() <= tol * scale.max(1.0)
            }
        }
    )*};
}

impl_series_float!(f32, f64);

impl SeriesScalar for BigRational {
    fn from_int(i: i64) -> Self {
        BigRational::from_integer(BigInt::from(i))
    }
    fn vanishes(value: &Self, _scale: &Self) -> bool {
        value.is_zero()
    }
}

/// Odd series `Σ a_m ρ^{2m+1}`, `a₀ = 1`, with
/// `a_{m+1} = a_m [(2m+1)(2m+2λ) + λ(λ-1) - pc₀] / ((2m+2)(2m+3))`.
/// Returns `a₀..a_m` when the numerator vanishes at some `m` with
/// `2m+1 ≤ degree_cap`, `None` otherwise.
pub fn frobenius_series<S: SeriesScalar>(pc0: &S, lambda: &S, degree_cap: usize) -> Option<Vec<S>> {
    let shift = lambda.clone() * (lambda.clone() - S::one()) - pc0.clone();
    let shift_scale = (lambda.clone() * (lambda.clone() - S::one())).abs() + pc0.abs();
    let mut coeffs = vec![S::one()];
    let mut m = 0usize;
    while 2 * m < degree_cap {
        let a = S::from_int(2 * m as i64 + 1);
        let b = S::from_int(2 * m as i64) + lambda.clone() * S::from_int(2);
        let numerator = a.clone() * b.clone() + shift.clone();
        let scale = (a * b).abs() + shift_scale.clone();
        if S::vanishes(&numerator, &scale) {
            return Some(coeffs);
        }
        let denom = S::from_int(((2 * m + 2) * (2 * m + 3)) as i64);
        let next = coeffs[m].clone() * numerator / denom;
        coeffs.push(next);
        m += 1;
    }
    None
}

fn odd_profile<T: Real>(a: &[T], lambda: T) -> ScalarProfile<T> {
    let mut coeffs = vec![T::zero(); 2 * a.len()];
    for (m, c) in a.iter().enumerate() {
        coeffs[2 * m + 1] = *c;
    }
    ScalarProfile { coeffs, lambda }
}

/// Exact Frobenius polynomial for rational `pc₀` and `λ`.
pub fn frobenius_polynomial_exact(
    pc0: &BigRational,
    lambda: &BigRational,
    degree_cap: usize,
) -> Result<Vec<BigRational>> {
    check_cap(degree_cap)?;
    frobenius_series(pc0, lambda, degree_cap).ok_or(Error::NonTerminating {
        lambda: lambda.to_f64().unwrap_or(f64::NAN),
        cap: degree_cap,
    })
}

fn check_cap(degree_cap: usize) -> Result<()> {
    if degree_cap.is_multiple_of(2) {
        return Err(Error::InvalidParams(format!(
            "degree cap must be odd and >= 1, got {degree_cap}"
        )));
    }
    Ok(())
}

/// Odd polynomial solution of `t(λ)u = 0` with `u = ρ + ...`.
///
/// For odd integer `p` a `λ` that is a multiple of `1/(p-1)` up to
/// round-off is recognised as that rational and the recurrence runs in exact
/// arithmetic; otherwise it runs in `T` with a relative threshold.
pub fn frobenius_polynomial<T: Real>(
    params: &ProblemParams<T>,
    lambda: T,
    degree_cap: usize,
) -> Result<ScalarProfile<T>> {
    check_cap(degree_cap)?;
    let non_terminating = Error::NonTerminating {
        lambda: lambda.as_f64(),
        cap: degree_cap,
    };
    if let (Some(p), Some(pc0)) = (params.odd_integer_p(), params.exact_pc0()) {
        if let Some(exact) = snap_rational(lambda, p - 1) {
            let a = frobenius_series(&pc0, &exact, degree_cap).ok_or(non_terminating)?;
            let a: Vec<T> = a.iter().map(ratio_to_real).collect();
            return Ok(odd_profile(&a, lambda));
        }
    }
    let a = series_in_real(params.pc0(), lambda, degree_cap).ok_or(non_terminating)?;
    Ok(odd_profile(&a, lambda))
}

fn series_in_real<T: Real>(pc0: T, lambda: T, cap: usize) -> Option<Vec<T>> {
    // The recurrence runs in f64 and is rounded to T afterwards.
    frobenius_series(&pc0.as_f64(), &lambda.as_f64(), cap).map(|a| a.into_iter().map(T::lit).collect())
}

/// `λ` as `q/den` when `λ·den` is an integer up to round-off.
fn snap_rational<T: Real>(lambda: T, den: i64) -> Option<BigRational> {
    let q = lambda.as_f64() * den as f64;
    let r = q.round();
    let tol = 64.0 * T::epsilon().as_f64() * q.abs().max(1.0);
    ((q - r).abs() <= tol && r.abs() < 9.0e15)
        .then(|| BigRational::new(BigInt::from(r as i64), BigInt::from(den)))
}

/// The unnormalized semilinear mode at `λ_j^±`.
pub fn semilinear_mode<T: Real>(
    params: &ProblemParams<T>,
    j: usize,
    branch: Branch,
) -> Result<ModePair<T>> {
    let (plus, minus) = semilinear_eigenvalues(params, j);
    let (lambda, label) = match branch {
        Branch::Plus => (plus, ModeLabel::Plus(j)),
        Branch::Minus => (minus, ModeLabel::Minus(j)),
    };
    let profile = frobenius_polynomial(params, lambda, DEFAULT_DEGREE_CAP)?;
    assemble_pair(profile, label, &Problem::Semilinear(*params))
}

/// A continuum eigenfunction of `L₀` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumMode<T: Real>
where
    Complex<T>: Value<Real = T>,
{
    pub lambda: Complex<T>,
    pub label: ModeLabel,
    pub field: Field<Complex<T>>,
    /// Largest pointwise residual of `t(λ)u = 0` on the checked nodes.
    pub max_residual: T,
}

/// Nodes with `ρ` up to this value enter the pointwise residual check.
pub const CONTINUUM_CHECK_RHO: f64 = 0.9;

/// Eigenfunction of `L₀` for `Re λ < 1/2`. Nonpositive integers give the
/// analytic free mode. At `ρ = 1` the singular `(1-ρ)` term of `u'` is
/// dropped when `Re λ > 0`.
pub fn continuum_eigenfunction<T: Real>(
    basis: &Arc<ChebBasis<T>>,
    lambda: Complex<T>,
) -> Result<ContinuumMode<T>>
where
    Complex<T>: Value<Real = T>,
{
    if !(lambda.re < T::lit(0.5)) {
        return Err(Error::OutsidePointSpectrum {
            re: lambda.re.as_f64(),
            im: lambda.im.as_f64(),
        });
    }
    let profile = free_profile(lambda);
    if let Some(j) = profile.analytic_index() {
        let mode = free_mode::<T>(j)?;
        let f = mode.field(basis);
        let lift = |g: &GridFn<T>| {
            GridFn::new(
                Arc::clone(basis),
                g.values().iter().map(|v| Complex::new(*v, T::zero())).collect(),
            )
        };
        return Ok(ContinuumMode {
            lambda,
            label: mode.label,
            field: Field::new(lift(&f.u1)?, lift(&f.u2)?)?,
            max_residual: T::zero(),
        });
    }
    let one = Complex::new(T::one(), T::zero());
    let u1 = GridFn::from_fn(basis, |r| {
        profile.derivative(r) * r + profile.eval(r) * (lambda - one)
    });
    let u2 = GridFn::from_fn(basis, |r| profile.derivative(r));
    let mut max_residual = T::zero();
    for &r in basis.nodes() {
        if r > T::lit(CONTINUUM_CHECK_RHO) {
            continue;
        }
        let res = -profile.second_derivative(r) * (T::one() - r * r)
            + profile.derivative(r) * lambda * (T::lit(2.0) * r)
            + profile.eval(r) * lambda * (lambda - one);
        max_residual = max_residual.max(res.norm());
    }
    let tolerance = T::lit(1e-8).max(T::epsilon() * T::lit(1e5));
    if !(max_residual <= tolerance) {
        return Err(Error::Residual {
            what: "continuum eigenfunction",
            residual: max_residual.as_f64(),
            tolerance: tolerance.as_f64(),
        });
    }
    Ok(ContinuumMode {
        lambda,
        label: ModeLabel::Continuum {
            re: lambda.re.as_f64(),
            im: lambda.im.as_f64(),
        },
        field: Field::new(u1, u2)?,
        max_residual,
    })
}

// Monomial polynomials, `c[i]` multiplying `ρ^i`.

pub(crate) fn poly_eval<T: Real>(c: &[T], x: T) -> T {
    c.iter().rev().fold(T::zero(), |acc, &a| acc * x + a)
}

pub(crate) fn poly_degree<T: Real>(c: &[T]) -> usize {
    c.iter().rposition(|a| *a != T::zero()).unwrap_or(0)
}

pub(crate) fn poly_deriv<T: Real>(c: &[T]) -> Vec<T> {
    if c.len() <= 1 {
        return vec![T::zero()];
    }
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(i, a)| *a * T::from_usize_lossy(i))
        .collect()
}

pub(crate) fn poly_deriv_n<T: Real>(c: &[T], order: usize) -> Vec<T> {
    (0..order).fold(c.to_vec(), |acc, _| poly_deriv(&acc))
}

fn poly_mul_rho<T: Real>(c: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(c.len() + 1);
    out.push(T::zero());
    out.extend_from_slice(c);
    out
}

/// `acc += s * c`.
fn poly_axpy<T: Real>(acc: &mut Vec<T>, s: T, c: &[T]) {
    if acc.len() < c.len() {
        acc.resize(c.len(), T::zero());
    }
    for (a, b) in acc.iter_mut().zip(c) {
        *a += s * *b;
    }
}

/// `∫_0^1 c(ρ)² dρ`, evaluated by Gauss-exact Clenshaw–Curtis quadrature.
fn poly_l2_sq<T: Real>(c: &[T]) -> T {
    let n = 2 * poly_degree(c) + 4;
    let basis = ChebBasis::<T>::new(n).expect("n >= 2");
    basis
        .nodes()
        .iter()
        .zip(basis.quad_weights())
        .map(|(&r, &w)| {
            let v = poly_eval(c, r);
            v * v * w
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(p: i64) -> ProblemParams<f64> {
        ProblemParams::new(p).unwrap()
    }

    fn assert_poly(c: &[f64], expected: &[f64]) {
        let n = c.len().max(expected.len());
        for i in 0..n {
            let a = c.get(i).copied().unwrap_or(0.0);
            let b = expected.get(i).copied().unwrap_or(0.0);
            assert!((a - b).abs() < 1e-12, "coefficient {i}: {a} vs {b}");
        }
    }

    #[test]
    fn free_eigenvalues() {
        assert_eq!(free_eigenvalue(1), 0);
        assert_eq!(free_eigenvalue(2), -1);
        assert_eq!(free_eigenvalue(5), -4);
    }

    #[test]
    fn free_profile_polynomials() {
        let poly = |l: f64| {
            free_profile(Complex::new(l, 0.0))
                .polynomial()
                .unwrap()
                .coeffs
        };
        assert_poly(&poly(0.0), &[0.0, -2.0]);
        assert_poly(&poly(-1.0), &[0.0, -4.0]);
        assert_poly(&poly(-2.0), &[0.0, -6.0, 0.0, -2.0]);
        assert!(free_profile(Complex::new(0.5, 0.0)).polynomial().is_none());
        let f = free_profile(Complex::new(-2.0, 0.0));
        assert!((f.eval(0.3).re - (-6.0 * 0.3 - 2.0 * 0.027)).abs() < 1e-14);
    }

    #[test]
    fn assemble_examples() {
        let free = Problem::<f64>::Free;
        let pair = assemble_pair(
            ScalarProfile { coeffs: vec![0.0, -2.0], lambda: 0.0 },
            ModeLabel::Free(1),
            &free,
        )
        .unwrap();
        assert_poly(&pair.u1, &[0.0]);
        assert_poly(&pair.u2, &[-2.0]);
        let pair = assemble_pair(
            ScalarProfile { coeffs: vec![0.0, -4.0], lambda: -1.0 },
            ModeLabel::Free(2),
            &free,
        )
        .unwrap();
        assert_poly(&pair.u1, &[0.0, 4.0]);
        assert_poly(&pair.u2, &[-4.0]);
        let pair = assemble_pair(
            ScalarProfile { coeffs: vec![0.0, 1.0], lambda: 2.0 },
            ModeLabel::Plus(0),
            &Problem::Semilinear(p(3)),
        )
        .unwrap();
        assert_poly(&pair.u1, &[0.0, 2.0]);
        assert_poly(&pair.u2, &[1.0]);
    }

    #[test]
    fn assemble_rejects_non_eigenpair() {
        let r = assemble_pair(
            ScalarProfile { coeffs: vec![0.0, 1.0], lambda: 1.0 },
            ModeLabel::Plus(0),
            &Problem::Semilinear(p(3)),
        );
        assert!(matches!(r, Err(Error::Residual { .. })));
    }

    #[test]
    fn semilinear_eigenvalue_examples() {
        assert_eq!(semilinear_eigenvalues(&p(3), 0), (2.0, -3.0));
        assert_eq!(semilinear_eigenvalues(&p(5), 0), (1.5, -2.5));
        assert_eq!(semilinear_eigenvalues(&p(3), 1), (0.0, -5.0));
    }

    #[test]
    fn frobenius_examples() {
        let u = frobenius_polynomial(&p(3), 2.0, 81).unwrap();
        assert_poly(&u.coeffs, &[0.0, 1.0]);
        let u = frobenius_polynomial(&p(3), 0.0, 81).unwrap();
        assert_poly(&u.coeffs, &[0.0, 1.0, 0.0, -1.0]);
        assert_eq!(
            frobenius_polynomial(&p(3), 1.0, 41),
            Err(Error::NonTerminating { lambda: 1.0, cap: 41 })
        );
        assert!(frobenius_polynomial(&p(3), 2.0, 80).is_err());
    }

    #[test]
    fn frobenius_exact_matches_float() {
        let pc0 = p(7).exact_pc0().unwrap();
        let lambda = BigRational::new(BigInt::from(-7 - 12), BigInt::from(3));
        let exact = frobenius_polynomial_exact(&pc0, &lambda, 81).unwrap();
        assert_eq!(exact.len(), 3);
        let float = frobenius_polynomial(&p(7), -19.0 / 3.0, 81).unwrap();
        for (m, a) in exact.iter().enumerate() {
            let a: f64 = ratio_to_real(a);
            assert!((float.coeffs[2 * m + 1] - a).abs() < 1e-14);
        }
    }

    #[test]
    fn real_exponent_uses_float_threshold() {
        let params = ProblemParams::with_real_exponent(4.0).unwrap();
        let (plus, minus) = semilinear_eigenvalues(&params, 1);
        assert_eq!(frobenius_polynomial(&params, plus, 81).unwrap().degree(), 3);
        assert_eq!(frobenius_polynomial(&params, minus, 81).unwrap().degree(), 3);
        assert!(frobenius_polynomial(&params, plus + 1e-6, 81).is_err());
    }

    #[test]
    fn scan_examples() {
        let l: Vec<f64> = eigenvalue_scan(&p(3), 1, None).iter().map(|e| e.lambda).collect();
        assert_eq!(l, vec![2.0, -3.0, 0.0, -5.0]);
        let l: Vec<f64> = eigenvalue_scan(&p(5), 0, None).iter().map(|e| e.lambda).collect();
        assert_eq!(l, vec![1.5, -2.5]);
        let l: Vec<f64> = eigenvalue_scan(&p(7), 0, None).iter().map(|e| e.lambda).collect();
        assert_eq!(l, vec![4.0 / 3.0, -7.0 / 3.0]);
        let l = eigenvalue_scan(&p(3), 3, Some((-4.0, 1.0)));
        assert_eq!(l.len(), 4);
    }

    #[test]
    fn scan_reproduces_closed_form_exactly() {
        for pp in [3, 5, 7, 9, 11] {
            let params = p(pp);
            for e in eigenvalue_scan(&params, 5, None) {
                let (plus, minus) = semilinear_eigenvalues(&params, e.j);
                let expected = if e.branch == Branch::Plus { plus } else { minus };
                assert_eq!(e.lambda, expected, "p={pp} {:?}", e);
            }
        }
    }

    #[test]
    fn semilinear_modes_terminate_at_degree_2j_plus_1() {
        for pp in [3, 5, 7] {
            let params = p(pp);
            let basis = make_basis::<f64>(64).unwrap();
            for j in 0..=3 {
                for branch in [Branch::Plus, Branch::Minus] {
                    let mode = semilinear_mode(&params, j, branch).unwrap();
                    let expected = match (branch, plus_minus_collision(&params, j)) {
                        (Branch::Plus, Some(i)) => 2 * i + 1,
                        _ => 2 * j + 1,
                    };
                    assert_eq!(mode.profile.degree(), expected, "p={pp} j={j} {branch:?}");
                    assert!(mode.profile.is_odd());
                    let m = mode.normalized(2);
                    let r = m.eigen_residual(&basis, &Problem::Semilinear(params)).unwrap();
                    assert!(r < 1e-10, "p={pp} j={j} {branch:?}: {r:e}");
                }
            }
        }
    }

    #[test]
    fn p5_plus_branch_collides_with_minus_branch() {
        assert_eq!(plus_minus_collision(&p(5), 2), Some(0));
        assert_eq!(plus_minus_collision(&p(5), 3), Some(1));
        assert_eq!(plus_minus_collision(&p(5), 1), None);
        for pp in [3, 7, 9, 11, 13] {
            for j in 0..10 {
                assert_eq!(plus_minus_collision(&p(pp), j), None);
            }
        }
        // The odd solution is unique, so λ₂⁺ = λ₀⁻ carries only u = ρ.
        let (plus, _) = semilinear_eigenvalues(&p(5), 2);
        assert_eq!(plus, -2.5);
        assert_eq!(frobenius_polynomial(&p(5), plus, 81).unwrap().degree(), 1);
    }

    #[test]
    fn free_modes_are_eigenfunctions() {
        let basis = make_basis::<f64>(64).unwrap();
        for j in 1..=8 {
            let m = free_mode::<f64>(j).unwrap().normalized(4);
            assert!(m.degree() < 2 * 4 + 1);
            let r = m.eigen_residual(&basis, &Problem::Free).unwrap();
            assert!(r < 1e-10, "j={j}: {r:e}");
            assert!((m.h2k_norm(4) - 1.0).abs() < 1e-12);
            assert!(m.u2[poly_degree(&m.u2)] > 0.0);
        }
    }

    #[test]
    fn free_modes_below_2k_are_annihilated_by_d2k() {
        for k in 1..=4 {
            for j in 1..=2 * k {
                let m = free_mode::<f64>(j).unwrap();
                assert!(poly_deriv_n(&m.u1, 2 * k).iter().all(|c| *c == 0.0));
                assert!(poly_deriv_n(&m.u2, 2 * k).iter().all(|c| *c == 0.0));
            }
        }
    }

    #[test]
    fn continuum_examples() {
        let basis = make_basis::<f64>(48).unwrap();
        let m = continuum_eigenfunction(&basis, Complex::new(-0.5, 0.0)).unwrap();
        assert!(m.max_residual < 1e-8);
        let m = continuum_eigenfunction(&basis, Complex::new(0.25, 1.0)).unwrap();
        assert!(m.max_residual < 1e-8);
        assert!(m.field.is_finite());
        let m = continuum_eigenfunction(&basis, Complex::new(0.0, 0.0)).unwrap();
        assert_eq!(m.label, ModeLabel::Free(1));
        assert!((m.field.u2.values()[3].re + 2.0).abs() < 1e-14);
        assert!(matches!(
            continuum_eigenfunction(&basis, Complex::new(0.5, 0.0)),
            Err(Error::OutsidePointSpectrum { .. })
        ));
    }

    #[test]
    fn catalogue_round_trips() {
        let modes = vec![
            free_mode::<f64>(1).unwrap().normalized(1),
            semilinear_mode(&p(3), 0, Branch::Plus).unwrap().normalized(1),
        ];
        let json = catalogue_json(&modes).unwrap();
        let back: Vec<ModeRecord> = serde_json::from_str(&json).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].label, "free(1)");
        assert_eq!(back[1].label, "plus(0)");
        assert_eq!(back[1].lambda, 2.0);
    }

    #[test]
    fn f32_modes() {
        let params = ProblemParams::<f32>::new(5).unwrap();
        let m = semilinear_mode(&params, 1, Branch::Plus).unwrap();
        assert_eq!(m.profile.degree(), 3);
        assert_eq!(m.lambda, -0.5f32);
    }

    proptest! {
        #[test]
        fn off_spectrum_lambdas_do_not_terminate(lambda in -10.0f64..2.0, pp in prop::sample::select(vec![3i64, 5, 7])) {
            let params = p(pp);
            let analytic = eigenvalue_scan(&params, 40, None);
            prop_assume!(analytic.iter().all(|e| (e.lambda - lambda).abs() > 1e-6));
            let stops = matches!(
                frobenius_polynomial(&params, lambda, DEFAULT_DEGREE_CAP),
                Err(Error::NonTerminating { .. })
            );
            prop_assert!(stops);
        }
    }
}
