//! The split `H^{2k} = N ⊕ N^⊥` with `N = ker D^{2k} ∩ H^{2k}`.
//!
//! `N` is spanned by `2k` analytic modes. Since `D^{2k}` annihilates `N`, the
//! `H^{2k}`-orthogonal projection onto `N` coincides with the `H`-orthogonal
//! one, so the mode coefficients solve a small Gram system in `H`.
//!
//! `N^⊥` is not invariant under the evolution: a remainder orthogonal to `N`
//! at `τ = 0` picks up components along the modes later. [`spectral_project`]
//! splits along the invariant complement instead, which is what makes the
//! remainder decay at the rate of the decomposition theorems.

use std::sync::Arc;

use num_traits::{Float, One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, symmetric_condition_number};
use crate::modes::{free_mode, plus_minus_collision, semilinear_mode, Branch, ModePair};
use crate::operators::{apply_d2k, boundary_residuals, Field, Problem};
use crate::parity::{generator_matrix, left_eigenfunctional, ParitySeries};
use crate::scalar::{Real, Value};
use crate::spectral::ChebBasis;

/// Gram systems with a larger condition number are rejected.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Relative tolerance for the boundary conditions checked by [`project`].
pub const BOUNDARY_TOLERANCE: f64 = 1e-6;

/// `(u|v)_H + (D^{2k}u|D^{2k}v)_H`; `k = 0` is the plain `H` product.
pub fn h2k_inner<V: Value>(u: &Field<V>, v: &Field<V>, k: usize) -> Result<V> {
    let base = u.h_inner(v)?;
    if k == 0 {
        return Ok(base);
    }
    Ok(base + apply_d2k(u, k)?.h_inner(&apply_d2k(v, k)?)?)
}

pub fn h2k_norm<V: Value>(u: &Field<V>, k: usize) -> Result<V::Real> {
    Ok(h2k_inner(u, u, k)?.re().max(V::Real::zero()).sqrt())
}

/// The `2k` normalized modes spanning `N`: free `j = 1..2k`, or semilinear
/// `λ_j⁺, λ_j⁻` for `j < k` in that interleaved order.
pub fn analytic_basis<T: Real>(problem: &Problem<T>, k: usize) -> Result<Vec<ModePair<T>>> {
    if k == 0 {
        return Err(Error::InvalidParams("the mode basis needs k >= 1".into()));
    }
    match problem {
        Problem::Free => (1..=2 * k).map(|j| Ok(free_mode(j)?.normalized(k))).collect(),
        Problem::Semilinear(params) => {
            let mut out = Vec::with_capacity(2 * k);
            for j in 0..k {
                if let Some(i) = plus_minus_collision(params, j) {
                    return Err(Error::InvalidParams(format!(
                        "lambda_{j}^+ coincides with lambda_{i}^- for p = {}; N is not spanned by \
                         eigenfunctions when k > {j}",
                        params.p()
                    )));
                }
                out.push(semilinear_mode(params, j, Branch::Plus)?.normalized(k));
                out.push(semilinear_mode(params, j, Branch::Minus)?.normalized(k));
            }
            Ok(out)
        }
    }
}

/// Which complement of `N` the remainder lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    /// `g ∈ N^⊥`.
    Orthogonal,
    /// `g` in the invariant complement of `N`: no mode content at any time.
    Spectral,
}

/// `u = Σ c_j mode_j + g`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition<T: Real> {
    pub problem: Problem<T>,
    pub k: usize,
    pub split: Split,
    pub basis: Vec<ModePair<T>>,
    /// The basis sampled on the grid of `remainder`.
    pub basis_fields: Vec<Field<T>>,
    pub coeffs: Vec<T>,
    pub remainder: Field<T>,
    pub gram_condition_number: f64,
}

impl<T: Real> Decomposition<T> {
    /// `Pu = Σ c_j mode_j`.
    pub fn analytic_part(&self) -> Field<T> {
        self.basis_fields
            .iter()
            .zip(&self.coeffs)
            .fold(Field::zeros(self.remainder.basis()), |acc, (m, c)| acc.axpy(*c, m))
    }

    /// `Σ c_j e^{λ_j τ} mode_j`.
    pub fn analytic_part_at(&self, tau: T) -> Field<T> {
        self.basis_fields
            .iter()
            .zip(&self.coeffs)
            .zip(&self.basis)
            .fold(Field::zeros(self.remainder.basis()), |acc, ((m, c), mode)| {
                acc.axpy(*c * (mode.lambda * tau).exp(), m)
            })
    }

    pub fn reconstruct(&self) -> Field<T> {
        self.analytic_part().add(&self.remainder)
    }

    /// `‖u - Σ c_j mode_j - g‖_{H^{2k}}`.
    pub fn reconstruction_error(&self, u: &Field<T>) -> Result<T> {
        h2k_norm(&chopped_difference(u, &self.reconstruct()), self.k)
    }

    /// Largest `|(g | mode_j)_{H^{2k}}|`.
    pub fn orthogonality_defect(&self) -> Result<T> {
        self.basis_fields.iter().try_fold(T::zero(), |acc, m| {
            Ok(acc.max(h2k_inner(&self.remainder, m, self.k)?.abs()))
        })
    }

    pub fn to_record(&self, remainder_csv_path: Option<String>) -> DecompositionRecord {
        DecompositionRecord {
            k: self.k,
            split: self.split,
            problem: self.problem.name().to_string(),
            p: self.problem.params().map(|p| p.p().as_f64()),
            labels: self.basis.iter().map(|m| m.label.to_string()).collect(),
            lambdas: self.basis.iter().map(|m| m.lambda.as_f64()).collect(),
            coeffs: self.coeffs.iter().map(|c| c.as_f64()).collect(),
            remainder_norm_h2k: h2k_norm(&self.remainder, self.k)
                .map(|v| v.as_f64())
                .unwrap_or(f64::NAN),
            remainder_csv_path,
            gram_condition_number: self.gram_condition_number,
        }
    }
}

/// JSON form of a [`Decomposition`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRecord {
    pub k: usize,
    pub split: Split,
    pub problem: String,
    pub p: Option<f64>,
    pub labels: Vec<String>,
    pub lambdas: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub remainder_norm_h2k: f64,
    pub remainder_csv_path: Option<String>,
    pub gram_condition_number: f64,
}

/// Projects `u` onto the analytic modes of `problem`.
pub fn project<T: Real>(u: &Field<T>, k: usize, problem: &Problem<T>) -> Result<Decomposition<T>> {
    let basis = analytic_basis(problem, k)?;
    project_onto(u, k, problem, basis)
}

/// As [`project`] with a precomputed basis (normalized for this `k`).
pub fn project_onto<T: Real>(
    u: &Field<T>,
    k: usize,
    problem: &Problem<T>,
    basis: Vec<ModePair<T>>,
) -> Result<Decomposition<T>> {
    require_membership(u, k)?;
    let grid = u.basis();
    let fields: Vec<Field<T>> = basis.iter().map(|m| m.field(grid)).collect();
    let (gram, cond) = gram_matrix(&fields)?;
    let m = fields.len();
    let rhs = fields.iter().map(|f| u.h_inner(f)).collect::<Result<Vec<T>>>()?;
    let l = cholesky(&gram, m)?;
    let coeffs = cholesky_solve(&l, m, &rhs);
    let analytic = fields
        .iter()
        .zip(&coeffs)
        .fold(Field::zeros(grid), |acc, (f, c)| acc.axpy(*c, f));
    let dec = Decomposition {
        problem: *problem,
        k,
        split: Split::Orthogonal,
        basis,
        basis_fields: fields,
        coeffs,
        remainder: chopped_difference(u, &analytic),
        gram_condition_number: cond,
    };
    let scale = h2k_norm(u, k)?.max(T::one());
    let defect = dec.orthogonality_defect()?;
    let tolerance = orthogonality_tolerance::<T>() * scale;
    if !(defect <= tolerance) {
        return Err(Error::Residual {
            what: "remainder orthogonality",
            residual: defect.as_f64(),
            tolerance: tolerance.as_f64(),
        });
    }
    Ok(dec)
}

fn require_membership<T: Real>(u: &Field<T>, k: usize) -> Result<()> {
    let report = check_membership(u, k, T::lit(BOUNDARY_TOLERANCE));
    match report.conditions.iter().find(|c| !c.pass) {
        Some(bad) => Err(Error::InvalidParams(format!(
            "data violate the H^{} boundary condition {} = 0 (|residual| = {:.3e})",
            2 * k,
            bad.name,
            bad.residual
        ))),
        None => Ok(()),
    }
}

fn gram_matrix<T: Real>(fields: &[Field<T>]) -> Result<(Vec<T>, f64)> {
    let m = fields.len();
    let mut gram = vec![T::zero(); m * m];
    for i in 0..m {
        for j in 0..=i {
            let g = fields[i].h_inner(&fields[j])?;
            gram[i * m + j] = g;
            gram[j * m + i] = g;
        }
    }
    let cond = symmetric_condition_number(&gram, m);
    if !(cond <= MAX_GRAM_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    Ok((gram, cond))
}

/// Left eigenfunctionals of the generator for a set of modes, applied to
/// parity-extended Chebyshev series with `levels` levels.
///
/// A mode whose eigenvalue recurs further up the triangular structure sits
/// in a Jordan chain and has no such functional; its coefficient is then
/// fitted in `H` to what the resolved modes leave over.
#[derive(Debug, Clone)]
pub struct ModeFunctionals<T: Real> {
    levels: usize,
    rows: Vec<Option<Vec<T>>>,
    /// `ℓ_j(mode_j)`.
    diag: Vec<T>,
    fields: Vec<Field<T>>,
}

impl<T: Real> ModeFunctionals<T> {
    pub fn new(problem: &Problem<T>, modes: &[ModePair<T>], grid: &Arc<ChebBasis<T>>) -> Result<Self> {
        let levels = grid.n().max(modes.iter().map(|m| m.degree() / 2 + 1).max().unwrap_or(1));
        let a = generator_matrix(problem, levels);
        let mut rows = Vec::with_capacity(modes.len());
        let mut diag = Vec::with_capacity(modes.len());
        let fields: Vec<Field<T>> = modes.iter().map(|m| m.field(grid)).collect();
        for (m, f) in modes.iter().zip(&fields) {
            match left_eigenfunctional(&a, levels, m.degree() / 2, m.lambda) {
                Ok(y) => {
                    diag.push(ParitySeries::from_field(f, levels).dot(&y));
                    rows.push(Some(y));
                }
                Err(Error::InvalidParams(msg)) if msg.contains("recurs") => {
                    diag.push(T::one());
                    rows.push(None);
                }
                Err(e) => return Err(e),
            }
        }
        Ok(Self { levels, rows, diag, fields })
    }

    /// True when every mode has an exact functional.
    pub fn complete(&self) -> bool {
        self.rows.iter().all(Option::is_some)
    }

    /// Which modes have an exact functional.
    pub fn resolved(&self) -> Vec<bool> {
        self.rows.iter().map(Option::is_some).collect()
    }

    /// Spectral coefficients `c_j` of `u`.
    pub fn coefficients(&self, u: &Field<T>) -> Result<Vec<T>> {
        let s = ParitySeries::from_field(u, self.levels);
        let mut c: Vec<T> = self
            .rows
            .iter()
            .zip(&self.diag)
            .map(|(y, d)| y.as_ref().map_or(T::zero(), |y| s.dot(y) / *d))
            .collect();
        let open: Vec<usize> = (0..c.len()).filter(|&i| self.rows[i].is_none()).collect();
        if !open.is_empty() {
            let rest = self
                .fields
                .iter()
                .zip(&c)
                .fold(u.clone(), |acc, (f, ci)| acc.axpy(-*ci, f));
            let sub: Vec<Field<T>> = open.iter().map(|&i| self.fields[i].clone()).collect();
            let (gram, _) = gram_matrix(&sub)?;
            let rhs = sub.iter().map(|f| rest.h_inner(f)).collect::<Result<Vec<T>>>()?;
            let l = cholesky(&gram, sub.len())?;
            for (i, v) in open.iter().zip(cholesky_solve(&l, sub.len(), &rhs)) {
                c[*i] = v;
            }
        }
        Ok(c)
    }
}

/// Splits `u` along the invariant complement of `N`: the coefficients are
/// those of the modes in the eigen-expansion of `u`, and the remainder
/// evolves without ever exciting them (up to the Jordan-coupled modes noted
/// on [`ModeFunctionals`]).
pub fn spectral_project<T: Real>(u: &Field<T>, k: usize, problem: &Problem<T>) -> Result<Decomposition<T>> {
    let basis = analytic_basis(problem, k)?;
    let functionals = ModeFunctionals::new(problem, &basis, u.basis())?;
    spectral_project_with(u, k, problem, basis, &functionals)
}

/// As [`spectral_project`] with precomputed basis and functionals.
pub fn spectral_project_with<T: Real>(
    u: &Field<T>,
    k: usize,
    problem: &Problem<T>,
    basis: Vec<ModePair<T>>,
    functionals: &ModeFunctionals<T>,
) -> Result<Decomposition<T>> {
    require_membership(u, k)?;
    let grid = u.basis();
    let fields: Vec<Field<T>> = basis.iter().map(|m| m.field(grid)).collect();
    let (_, cond) = gram_matrix(&fields)?;
    let coeffs = functionals.coefficients(u)?;
    let analytic = fields
        .iter()
        .zip(&coeffs)
        .fold(Field::zeros(grid), |acc, (f, c)| acc.axpy(*c, f));
    let remainder = chopped_difference(u, &analytic);
    let scale = h2k_norm(u, k)?.max(T::one());
    let leftover = functionals
        .coefficients(&remainder)?
        .iter()
        .fold(T::zero(), |m, c| m.max(c.abs()));
    let tolerance = orthogonality_tolerance::<T>() * scale;
    if !(leftover <= tolerance) {
        return Err(Error::Residual {
            what: "remainder mode content",
            residual: leftover.as_f64(),
            tolerance: tolerance.as_f64(),
        });
    }
    Ok(Decomposition {
        problem: *problem,
        k,
        split: Split::Spectral,
        basis,
        basis_fields: fields,
        coeffs,
        remainder,
        gram_condition_number: cond,
    })
}

/// `u - v` with the round-off tail of the operands removed, so an exact
/// cancellation leaves an exact zero rather than noise that `D^{2k}` would
/// amplify.
pub fn chopped_difference<T: Real>(u: &Field<T>, v: &Field<T>) -> Field<T> {
    let scale = u
        .u1
        .coeff_scale()
        .max(u.u2.coeff_scale())
        .max(v.u1.coeff_scale())
        .max(v.u2.coeff_scale());
    let d = u.sub(v);
    Field {
        u1: d.u1.chopped_at(scale),
        u2: d.u2.chopped_at(scale),
    }
}

fn orthogonality_tolerance<T: Real>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(1e5))
}

/// One `H^{2k}` boundary condition at `ρ = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCheck {
    pub name: String,
    pub residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub k: usize,
    pub tolerance: f64,
    pub conditions: Vec<BoundaryCheck>,
    pub pass: bool,
}

/// Checks `u₁^{(2j)}(0) = 0` and `u₂^{(2j+1)}(0) = 0` for `j < k`, each
/// against `tol · max(1, max|u|)`.
pub fn check_membership<V: Value>(u: &Field<V>, k: usize, tol: V::Real) -> MembershipReport {
    let limit = tol * u.max_abs().max(V::Real::one());
    let conditions: Vec<BoundaryCheck> = boundary_residuals(u, k)
        .into_iter()
        .map(|(name, r)| BoundaryCheck {
            name,
            residual: r.as_f64(),
            pass: r <= limit,
        })
        .collect();
    MembershipReport {
        k,
        tolerance: limit.as_f64(),
        pass: conditions.iter().all(|c| c.pass),
        conditions,
    }
}

/// `‖D^{2k}g‖_H / ‖g‖_{H^{2k}}`, which lies in `[c₁, 1]` on `N^⊥`.
pub fn norm_equivalence_ratio<T: Real>(g: &Field<T>, k: usize) -> Result<T> {
    let top = apply_d2k(g, k)?.h_norm();
    let full = h2k_norm(g, k)?;
    Ok(if full > T::zero() { top / full } else { T::one() })
}

/// Smallest ratio over a set of `N^⊥` samples: an empirical `c₁`.
pub fn empirical_c1<T: Real>(samples: &[Field<T>], k: usize) -> Result<T> {
    samples
        .iter()
        .try_fold(T::one(), |acc, g| Ok(acc.min(norm_equivalence_ratio(g, k)?)))
}

/// Samples the basis modes on `grid`, for callers that project many fields.
pub fn sample_basis<T: Real>(basis: &[ModePair<T>], grid: &Arc<ChebBasis<T>>) -> Vec<Field<T>> {
    basis.iter().map(|m| m.field(grid)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::poly_deriv_n;
    use crate::operators::ProblemParams;
    use crate::spectral::make_basis;
    use proptest::prelude::*;

    fn grid(n: usize) -> Arc<ChebBasis<f64>> {
        make_basis(n).unwrap()
    }

    fn semi(p: i64) -> Problem<f64> {
        Problem::Semilinear(ProblemParams::new(p).unwrap())
    }

    #[test]
    fn h2k_inner_examples() {
        let b = grid(32);
        let u = Field::from_fns(&b, |r: f64| r.powi(3), |_| 0.0);
        let v = h2k_inner(&u, &u, 1).unwrap();
        assert!((v - (1.0 / 7.0 + 12.0)).abs() < 1e-10);
        assert_eq!(h2k_inner(&u, &u, 0).unwrap(), u.h_inner(&u).unwrap());
        let m = Field::from_fns(&b, |r: f64| 4.0 * r, |_| -4.0);
        let w = Field::from_fns(&b, |r: f64| r.sin(), |r: f64| r.cos());
        let a = h2k_inner(&m, &w, 1).unwrap();
        assert!((a - m.h_inner(&w).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn basis_examples() {
        let free = analytic_basis::<f64>(&Problem::Free, 1).unwrap();
        assert_eq!(free.len(), 2);
        assert_eq!(free[0].lambda, 0.0);
        assert_eq!(free[1].lambda, -1.0);
        // (0,-2) and (4ρ,-4) up to normalization.
        let s = free[1].normalization;
        assert!((free[1].u1[1] - 4.0 * s).abs() < 1e-14);
        assert!((free[1].u2[0] + 4.0 * s).abs() < 1e-14);

        let b = analytic_basis(&semi(3), 1).unwrap();
        assert_eq!(b.iter().map(|m| m.lambda).collect::<Vec<_>>(), vec![2.0, -3.0]);
        assert_eq!(b[0].profile.coeffs, vec![0.0, 1.0]);
        let b = analytic_basis(&semi(3), 2).unwrap();
        assert_eq!(
            b.iter().map(|m| m.lambda).collect::<Vec<_>>(),
            vec![2.0, -3.0, 0.0, -5.0]
        );
        assert_eq!(b[2].profile.coeffs, vec![0.0, 1.0, 0.0, -1.0]);
        assert!(analytic_basis(&semi(5), 3).is_err());
        assert!(analytic_basis(&semi(7), 4).is_ok());
    }

    #[test]
    fn basis_is_annihilated_by_d2k_and_independent() {
        for k in 1..=4 {
            for problem in [Problem::Free, semi(3), semi(7)] {
                let basis = analytic_basis(&problem, k).unwrap();
                assert_eq!(basis.len(), 2 * k);
                for m in &basis {
                    assert!(poly_deriv_n(&m.u1, 2 * k).iter().all(|c| *c == 0.0));
                    assert!(poly_deriv_n(&m.u2, 2 * k).iter().all(|c| *c == 0.0));
                }
                let b = grid(64);
                let u = poly_field(&b, &[1.0, -0.5, 0.25], &[1.0, 0.3, -0.2, 0.1]);
                let dec = project_onto(&u, k, &problem, basis).unwrap();
                assert!(dec.gram_condition_number.is_finite());
            }
        }
        // One more free mode has degree 2k and escapes N.
        let extra = free_mode::<f64>(2 + 1).unwrap();
        assert!(poly_deriv_n(&extra.u1, 2).iter().any(|c| *c != 0.0)
            || poly_deriv_n(&extra.u2, 2).iter().any(|c| *c != 0.0));
    }

    #[test]
    fn projection_of_basis_elements() {
        let b = grid(48);
        for problem in [Problem::Free, semi(5)] {
            let dec0 = project(&Field::zeros(&b), 2, &problem).unwrap();
            let fields = dec0.basis_fields.clone();
            let dec = project(&fields[1], 2, &problem).unwrap();
            for (i, c) in dec.coeffs.iter().enumerate() {
                let e = if i == 1 { 1.0 } else { 0.0 };
                assert!((c - e).abs() < 1e-10, "{i}: {c}");
            }
            assert!(dec.remainder.max_abs() < 1e-10);
            let u = fields[0].scale(3.0).axpy(-2.0, &fields[2]);
            let dec = project(&u, 2, &problem).unwrap();
            let expected = [3.0, 0.0, -2.0, 0.0];
            for (c, e) in dec.coeffs.iter().zip(expected) {
                assert!((c - e).abs() < 1e-10);
            }
            assert!(h2k_norm(&dec.remainder, 2).unwrap() < 1e-9);
        }
    }

    #[test]
    fn mode_plus_bump_has_orthogonal_remainder() {
        let b = grid(64);
        let k = 1;
        let dec0 = project(&Field::zeros(&b), k, &Problem::Free).unwrap();
        let bump = Field::from_fns(&b, |r: f64| r.powi(3) * (-r * r).exp(), |r: f64| {
            r.powi(4) * (2.0 * r).cos()
        });
        let u = dec0.basis_fields[0].add(&bump);
        let dec = project(&u, k, &Problem::Free).unwrap();
        assert!(dec.remainder.max_abs() > 1e-3);
        assert!(dec.orthogonality_defect().unwrap() < 1e-9);
        assert!(dec.reconstruction_error(&u).unwrap() < 1e-10);
    }

    #[test]
    fn membership_examples() {
        let b = grid(16);
        let r = check_membership(&Field::from_fns(&b, |r: f64| r, |_| 1.0), 1, 1e-8);
        assert!(r.pass);
        let r = check_membership(&Field::from_fns(&b, |_| 1.0, |_| 0.0), 1, 1e-8);
        assert!(!r.pass && !r.conditions[0].pass && r.conditions[1].pass);
        let r = check_membership(&Field::from_fns(&b, |r: f64| r, |r: f64| r), 1, 1e-8);
        assert!(!r.pass && r.conditions[0].pass && !r.conditions[1].pass);
        assert!(project(&Field::from_fns(&b, |_| 1.0, |_| 0.0), 1, &Problem::Free).is_err());
    }

    #[test]
    fn record_serializes() {
        let b = grid(32);
        let u = Field::from_fns(&b, |r: f64| r, |r: f64| 1.0 + r * r);
        let dec = project(&u, 1, &semi(3)).unwrap();
        let rec = dec.to_record(Some("remainder.csv".into()));
        let json = serde_json::to_string(&rec).unwrap();
        let back: DecompositionRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rec);
        assert_eq!(back.labels, vec!["plus(0)", "minus(0)"]);
    }

    #[test]
    fn spectral_projection_of_basis_elements() {
        let b = grid(48);
        for problem in [Problem::Free, semi(3), semi(7)] {
            let basis = analytic_basis(&problem, 2).unwrap();
            let fields = sample_basis(&basis, &b);
            let u = fields[0].scale(3.0).axpy(-2.0, &fields[2]);
            let dec = spectral_project(&u, 2, &problem).unwrap();
            assert_eq!(dec.split, Split::Spectral);
            for (c, e) in dec.coeffs.iter().zip([3.0, 0.0, -2.0, 0.0]) {
                assert!((c - e).abs() < 1e-10, "{c} {e}");
            }
            assert!(h2k_norm(&dec.remainder, 2).unwrap() < 1e-9);
        }
        let f5 = ModeFunctionals::new(&semi(5), &analytic_basis(&semi(5), 2).unwrap(), &b).unwrap();
        assert_eq!(f5.resolved(), vec![true, false, true, false]);
    }

    #[test]
    fn free_spectral_coefficients_are_the_jet_of_w_at_one() {
        // Free data evolve as w = u1 + u2 transported from ρ = 1, and mode j
        // has w ∝ (1-ρ)^{j-1}; so c_j comes from the (j-1)th derivative of w
        // at 1.
        let b = grid(40);
        let a = [0.3, -1.0, 0.5, 0.2];
        let c = [1.0, 0.4, -0.7, 0.1];
        let u = poly_field(&b, &a, &c);
        let mut w = vec![0.0; 8];
        for (j, x) in a.iter().enumerate() {
            w[2 * j + 1] += x;
        }
        for (j, x) in c.iter().enumerate() {
            w[2 * j] += x;
        }
        let dec = spectral_project(&u, 2, &Problem::Free).unwrap();
        for (j, mode) in dec.basis.iter().enumerate() {
            let dw: f64 = poly_deriv_n(&w, j).iter().sum();
            let mut mw = vec![0.0; 8];
            for part in [&mode.u1, &mode.u2] {
                for (i, x) in part.iter().enumerate() {
                    mw[i] += x;
                }
            }
            let dm: f64 = poly_deriv_n(&mw, j).iter().sum();
            let want = dw / dm;
            assert!((dec.coeffs[j] - want).abs() < 1e-11, "{j}: {} {want}", dec.coeffs[j]);
        }
    }

    #[test]
    fn orthogonal_and_spectral_splits_differ() {
        let b = grid(32);
        let u = Field::from_fns(&b, |_| 0.0, |r: f64| r * r - 1.0 / 3.0);
        let orth = project(&u, 1, &Problem::Free).unwrap();
        assert!(orth.coeffs.iter().all(|c| c.abs() < 1e-12));
        let spec = spectral_project(&u, 1, &Problem::Free).unwrap();
        assert!(spec.coeffs[0].abs() > 0.1);
    }

    fn poly_field(b: &Arc<ChebBasis<f64>>, a: &[f64], c: &[f64]) -> Field<f64> {
        let a = a.to_vec();
        let c = c.to_vec();
        Field::from_fns(
            b,
            move |r: f64| a.iter().enumerate().map(|(j, x)| x * r.powi(2 * j as i32 + 1)).sum(),
            move |r: f64| c.iter().enumerate().map(|(j, x)| x * r.powi(2 * j as i32)).sum(),
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn projection_is_idempotent(a in proptest::collection::vec(-1.0f64..1.0, 1..6),
                                    c in proptest::collection::vec(-1.0f64..1.0, 1..7),
                                    k in 1usize..=2,
                                    free in any::<bool>()) {
            let b = grid(48);
            let problem = if free { Problem::Free } else { semi(3) };
            let u = poly_field(&b, &a, &c);
            let dec = project(&u, k, &problem).unwrap();
            let pu = dec.analytic_part();
            let again = project(&pu, k, &problem).unwrap();
            for (x, y) in again.coeffs.iter().zip(&dec.coeffs) {
                prop_assert!((x - y).abs() < 1e-10 * (1.0 + y.abs()));
            }
            prop_assert!(h2k_norm(&again.remainder, k).unwrap() < 1e-10 * (1.0 + h2k_norm(&pu, k).unwrap()));
            prop_assert!(dec.reconstruction_error(&u).unwrap() < 1e-10);
        }

        #[test]
        fn norm_equivalence_on_complement(a in proptest::collection::vec(-1.0f64..1.0, 1..6),
                                          c in proptest::collection::vec(-1.0f64..1.0, 1..7)) {
            let b = grid(48);
            let u = poly_field(&b, &a, &c);
            let g = project(&u, 1, &Problem::Free).unwrap().remainder;
            let ratio = norm_equivalence_ratio(&g, 1).unwrap();
            prop_assert!(ratio <= 1.0 + 1e-12);
            prop_assert!(ratio > 0.0);
        }
    }
}
