//! Method-of-lines evolution `dΦ/dτ = GΦ` with classical RK4 on the dense
//! collocation generator, and the exact characteristic solution of the free
//! problem used as an oracle.

use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::decompose::{chopped_difference, h2k_norm, project, Decomposition};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::operators::{generator_matrix, Field, Problem};
use crate::scalar::Real;
use crate::spectral::{ChebBasis, GridFn};

/// Fraction of the RK4 step `2/ρ(A)` actually taken.
pub const SAFETY_FACTOR: f64 = 0.5;

/// Power iterations used to estimate the spectral radius.
pub const POWER_ITERATIONS: usize = 400;

/// Default spacing of recorded samples in `τ`.
pub const DEFAULT_SAMPLE_INTERVAL: f64 = 0.05;

/// Tolerance for `u₁(0) = 0` on the initial data, relative to `max(1, max|u|)`.
pub const ORIGIN_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions<T> {
    /// Time step; `None` picks `SAFETY_FACTOR · 2/ρ(A)`.
    pub dtau: Option<T>,
    pub sample_interval: T,
    /// Exponential filter applied to the Chebyshev coefficients after each step.
    pub filter: bool,
    /// Keep the full state at every sample (norms are always kept).
    pub keep_states: bool,
}

impl<T: Real> Default for EvolveOptions<T> {
    fn default() -> Self {
        Self {
            dtau: None,
            sample_interval: T::lit(DEFAULT_SAMPLE_INTERVAL),
            filter: false,
            keep_states: true,
        }
    }
}

/// Norms recorded at one sample time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct NormSample<T> {
    pub h: T,
    pub h2k: T,
}

/// Run parameters as recorded in manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub problem: String,
    pub p: Option<f64>,
    pub k: usize,
    pub n: usize,
    pub dtau: f64,
    pub tau_end: f64,
    pub steps: usize,
    pub sample_interval: f64,
    pub spectral_radius: f64,
    pub filter: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    pub taus: Vec<T>,
    /// Empty unless states were kept.
    pub states: Vec<Field<T>>,
    pub norms: Vec<NormSample<T>>,
    pub config: TrajectoryConfig,
}

impl<T: Real> Trajectory<T> {
    pub fn final_state(&self) -> Option<&Field<T>> {
        self.states.last()
    }

    pub fn h_norms(&self) -> Vec<T> {
        self.norms.iter().map(|n| n.h).collect()
    }

    pub fn h2k_norms(&self) -> Vec<T> {
        self.norms.iter().map(|n| n.h2k).collect()
    }

    /// CSV with header `tau,norm_H,norm_H2k`.
    pub fn norms_csv(&self) -> String {
        let mut s = String::from("tau,norm_H,norm_H2k\n");
        for (t, n) in self.taus.iter().zip(&self.norms) {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e}",
                t.as_f64(),
                n.h.as_f64(),
                n.h2k.as_f64()
            );
        }
        s
    }

    /// State at the sample closest to `tau`.
    pub fn snapshot(&self, tau: T) -> Option<(T, &Field<T>)> {
        self.taus
            .iter()
            .zip(&self.states)
            .min_by(|a, b| {
                (*a.0 - tau)
                    .abs()
                    .partial_cmp(&(*b.0 - tau).abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|(t, f)| (*t, f))
    }
}

/// The RK4 map over one sample interval, keyed by its step count and size.
type Propagator<T> = (usize, T, Arc<DenseMatrix<T>>);

/// A reusable integrator for one grid and one generator.
///
/// Long runs apply the RK4 map of a whole sample interval as one matrix,
/// built once per schedule from the single-step map.
#[derive(Debug, Clone)]
pub struct Evolver<T: Real> {
    basis: Arc<ChebBasis<T>>,
    problem: Problem<T>,
    matrix: DenseMatrix<T>,
    spectral_radius: T,
    dtau_max: T,
    options: EvolveOptions<T>,
    filter: Option<Vec<T>>,
    propagators: Arc<Mutex<Vec<Propagator<T>>>>,
}

impl<T: Real> Evolver<T> {
    pub fn new(
        basis: &Arc<ChebBasis<T>>,
        problem: &Problem<T>,
        options: EvolveOptions<T>,
    ) -> Result<Self> {
        let matrix = generator_matrix(basis, problem.pc0());
        let spectral_radius = matrix.spectral_radius_estimate(POWER_ITERATIONS);
        let auto = T::lit(SAFETY_FACTOR * 2.0) / spectral_radius;
        let dtau_max = match options.dtau {
            Some(d) if !(d > T::zero()) || !d.is_finite() => {
                return Err(Error::InvalidParams(format!("dtau must be positive, got {d}")));
            }
            Some(d) => d,
            None => auto,
        };
        if !(options.sample_interval > T::zero()) {
            return Err(Error::InvalidParams("sample interval must be positive".into()));
        }
        let filter = options.filter.then(|| exponential_filter(basis.n()));
        Ok(Self {
            basis: Arc::clone(basis),
            problem: *problem,
            matrix,
            spectral_radius,
            dtau_max,
            options,
            filter,
            propagators: Arc::new(Mutex::new(Vec::new())),
        })
    }

    pub fn basis(&self) -> &Arc<ChebBasis<T>> {
        &self.basis
    }

    pub fn problem(&self) -> &Problem<T> {
        &self.problem
    }

    pub fn spectral_radius(&self) -> T {
        self.spectral_radius
    }

    /// Sample count and steps per sample for a run to `tau_end`.
    fn schedule(&self, tau_end: T) -> (usize, usize, T) {
        let samples = (tau_end / self.options.sample_interval)
            .round()
            .to_usize()
            .unwrap_or(1)
            .max(1);
        let interval = tau_end / T::from_usize_lossy(samples);
        let per = (interval / self.dtau_max).ceil().to_usize().unwrap_or(1).max(1);
        (samples, per, interval / T::from_usize_lossy(per))
    }

    /// The time step a run to `tau_end` would use.
    pub fn dtau_for(&self, tau_end: T) -> T {
        self.schedule(tau_end).2
    }

    /// Evolves `u0` to `tau_end`, recording norms (and states) every sample.
    pub fn run(&self, u0: &Field<T>, tau_end: T, k: usize) -> Result<Trajectory<T>> {
        if self.basis.n() != u0.n() || !Arc::ptr_eq(&self.basis, u0.basis()) && **u0.basis() != *self.basis {
            return Err(Error::BasisMismatch {
                left: self.basis.n(),
                right: u0.n(),
            });
        }
        if !(tau_end > T::zero()) {
            return Err(Error::InvalidParams(format!("tau_end must be positive, got {tau_end}")));
        }
        let origin = u0.u1.values()[0].abs();
        if origin > T::lit(ORIGIN_TOLERANCE) * u0.max_abs().max(T::one()) {
            return Err(Error::InvalidParams(format!(
                "initial data violate u1(0) = 0 (|u1(0)| = {origin:.3e})"
            )));
        }
        let (samples, per, dt) = self.schedule(tau_end);
        let n = self.basis.n();
        let mut y = u0.to_flat();
        y[0] = T::zero();
        let norm0 = u0.h_norm();
        let growth = T::one() + self.problem.pc0();

        let mut taus = Vec::with_capacity(samples + 1);
        let mut states = Vec::with_capacity(if self.options.keep_states { samples + 1 } else { 0 });
        let mut norms = Vec::with_capacity(samples + 1);
        let mut record = |tau: T, y: &[T]| -> Result<()> {
            let f = Field::from_flat(&self.basis, y)?;
            let h = f.h_norm();
            let limit = (growth * tau).exp() * norm0 * T::lit(1.0 + 1e-6);
            if !f.is_finite() || h > limit && h > T::min_positive_value() {
                return Err(Error::CflViolation {
                    tau: tau.as_f64(),
                    norm: h.as_f64(),
                    limit: limit.as_f64(),
                });
            }
            norms.push(NormSample {
                h,
                h2k: h2k_norm(&f, k)?,
            });
            taus.push(tau);
            if self.options.keep_states {
                states.push(f);
            }
            Ok(())
        };
        record(T::zero(), &y)?;

        let mut work = Rk4Work::new(2 * n);
        if samples * per > 2 * n {
            let prop = self.propagator(per, dt);
            let mut next = vec![T::zero(); 2 * n];
            for s in 1..=samples {
                prop.matvec_into(&y, &mut next);
                std::mem::swap(&mut y, &mut next);
                self.apply_filter(&mut y);
                record(T::from_usize_lossy(s * per) * dt, &y)?;
            }
        } else {
            for s in 1..=samples {
                for _ in 0..per {
                    self.step(&mut y, dt, &mut work);
                }
                record(T::from_usize_lossy(s * per) * dt, &y)?;
            }
        }
        Ok(Trajectory {
            taus,
            states,
            norms,
            config: TrajectoryConfig {
                problem: self.problem.name().to_string(),
                p: self.problem.params().map(|p| p.p().as_f64()),
                k,
                n,
                dtau: dt.as_f64(),
                tau_end: tau_end.as_f64(),
                steps: samples * per,
                sample_interval: (tau_end / T::from_usize_lossy(samples)).as_f64(),
                spectral_radius: self.spectral_radius.as_f64(),
                filter: self.filter.is_some(),
            },
        })
    }

    fn propagator(&self, per: usize, dt: T) -> Arc<DenseMatrix<T>> {
        let mut cache = self.propagators.lock().unwrap_or_else(|e| e.into_inner());
        if let Some((_, _, m)) = cache.iter().find(|(p, d, _)| *p == per && *d == dt) {
            return Arc::clone(m);
        }
        let dim = 2 * self.basis.n();
        let mut one = DenseMatrix::zeros(dim, dim);
        let mut work = Rk4Work::new(dim);
        let mut e = vec![T::zero(); dim];
        for j in 0..dim {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            self.step(&mut e, dt, &mut work);
            for (i, v) in e.iter().enumerate() {
                one.set(i, j, *v);
            }
        }
        let m = Arc::new(one.pow(per));
        cache.push((per, dt, Arc::clone(&m)));
        m
    }

    /// One RK4 step; the `u₁(0)` row of the generator is zero, and the
    /// constraint value is reset on every stage.
    fn step(&self, y: &mut [T], dt: T, w: &mut Rk4Work<T>) {
        let half = dt * T::lit(0.5);
        let a = &self.matrix;
        a.matvec_into(y, &mut w.k1);
        stage(&mut w.tmp, y, half, &w.k1);
        a.matvec_into(&w.tmp, &mut w.k2);
        stage(&mut w.tmp, y, half, &w.k2);
        a.matvec_into(&w.tmp, &mut w.k3);
        stage(&mut w.tmp, y, dt, &w.k3);
        a.matvec_into(&w.tmp, &mut w.k4);
        let sixth = dt / T::lit(6.0);
        for i in 0..y.len() {
            y[i] += sixth * (w.k1[i] + T::lit(2.0) * (w.k2[i] + w.k3[i]) + w.k4[i]);
        }
        self.apply_filter(y);
    }

    /// Damps the top of each component's Chebyshev series and resets `u₁(0)`.
    fn apply_filter(&self, y: &mut [T]) {
        y[0] = T::zero();
        if let Some(sigma) = &self.filter {
            let n = self.basis.n();
            for part in [0..n, n..2 * n] {
                let mut c = self.basis.to_coeffs(&y[part.clone()]);
                for (cj, s) in c.iter_mut().zip(sigma) {
                    *cj *= *s;
                }
                y[part].copy_from_slice(&self.basis.from_coeffs(&c));
            }
            y[0] = T::zero();
        }
    }
}

struct Rk4Work<T> {
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    tmp: Vec<T>,
}

impl<T: Real> Rk4Work<T> {
    fn new(len: usize) -> Self {
        Self {
            k1: vec![T::zero(); len],
            k2: vec![T::zero(); len],
            k3: vec![T::zero(); len],
            k4: vec![T::zero(); len],
            tmp: vec![T::zero(); len],
        }
    }
}

fn stage<T: Real>(out: &mut [T], y: &[T], h: T, k: &[T]) {
    for ((o, a), b) in out.iter_mut().zip(y).zip(k) {
        *o = *a + h * *b;
    }
    out[0] = T::zero();
}

/// `σ_j = exp(-α (j/(n-1))^16)` with `α = -ln ε`.
fn exponential_filter<T: Real>(n: usize) -> Vec<T> {
    let alpha = -T::epsilon().ln();
    let top = T::from_usize_lossy((n - 1).max(1));
    (0..n)
        .map(|j| (-alpha * (T::from_usize_lossy(j) / top).powi(16)).exp())
        .collect()
}

/// One-shot [`Evolver::run`] with the default sampling.
pub fn evolve<T: Real>(
    u0: &Field<T>,
    problem: &Problem<T>,
    tau_end: T,
    dtau: Option<T>,
    k: usize,
) -> Result<Trajectory<T>> {
    let options = EvolveOptions {
        dtau,
        ..EvolveOptions::default()
    };
    Evolver::new(u0.basis(), problem, options)?.run(u0, tau_end, k)
}

/// Exact free evolution by transport of the Riemann invariants
/// `w± = u₁ ± u₂` along characteristics, with `u₁` extended oddly and `u₂`
/// evenly through `ρ = 0`. The data are evaluated by barycentric
/// interpolation of their Chebyshev interpolant.
pub fn dalembert_oracle<T: Real>(u0: &Field<T>, tau: T) -> Result<Field<T>> {
    if !(tau >= T::zero()) {
        return Err(Error::InvalidParams(format!("tau must be >= 0, got {tau}")));
    }
    let basis = u0.basis();
    let decay = (-tau).exp();
    let t = T::one() - decay;
    let eval = |f: &GridFn<T>, x: T| basis.interpolate(f.values(), x.min(T::one()));
    let mut a = Vec::with_capacity(basis.n());
    let mut b = Vec::with_capacity(basis.n());
    for &rho in basis.nodes() {
        let r = rho * decay;
        let x = r + t;
        let w_plus = eval(&u0.u1, x) + eval(&u0.u2, x);
        let y = r - t;
        let (odd, even) = (eval(&u0.u1, y.abs()), eval(&u0.u2, y.abs()));
        let u1_ext = if y < T::zero() { -odd } else { odd };
        let w_minus = u1_ext - even;
        let half = T::lit(0.5);
        a.push((w_plus + w_minus) * half);
        b.push((w_plus - w_minus) * half);
    }
    Field::new(
        GridFn::new(Arc::clone(basis), a)?,
        GridFn::new(Arc::clone(basis), b)?,
    )
}

/// The analytic part evolved exactly, the remainder numerically, and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedEvolution<T: Real> {
    pub decomposition: Decomposition<T>,
    /// `Σ c_j e^{λ_j τ} mode_j` at the sample times.
    pub analytic: Trajectory<T>,
    /// `S(τ)g`.
    pub remainder: Trajectory<T>,
    pub recombined: Trajectory<T>,
}

/// Splits `u0 = Pu0 + g`, evolves `g` with `evolver` and `Pu0` exactly.
pub fn evolve_decomposed<T: Real>(
    evolver: &Evolver<T>,
    u0: &Field<T>,
    k: usize,
    tau_end: T,
) -> Result<DecomposedEvolution<T>> {
    let decomposition = project(u0, k, evolver.problem())?;
    evolve_decomposition(evolver, decomposition, tau_end)
}

/// As [`evolve_decomposed`] for an existing decomposition.
pub fn evolve_decomposition<T: Real>(
    evolver: &Evolver<T>,
    decomposition: Decomposition<T>,
    tau_end: T,
) -> Result<DecomposedEvolution<T>> {
    let k = decomposition.k;
    let g = &decomposition.remainder;
    let remainder = if g.max_abs() == T::zero() {
        zero_trajectory(evolver, g, tau_end, k)?
    } else {
        evolver.run(g, tau_end, k)?
    };
    let mut analytic = remainder.clone();
    let mut recombined = remainder.clone();
    analytic.states.clear();
    recombined.states.clear();
    analytic.norms.clear();
    recombined.norms.clear();
    for (i, &tau) in remainder.taus.iter().enumerate() {
        let pu = decomposition.analytic_part_at(tau);
        let g_tau = match remainder.states.get(i) {
            Some(s) => s.clone(),
            None => Field::zeros(g.basis()),
        };
        let full = pu.add(&g_tau);
        analytic.norms.push(NormSample {
            h: pu.h_norm(),
            h2k: h2k_norm(&pu, k)?,
        });
        recombined.norms.push(NormSample {
            h: full.h_norm(),
            h2k: h2k_norm(&full, k)?,
        });
        analytic.states.push(pu);
        recombined.states.push(full);
    }
    Ok(DecomposedEvolution {
        decomposition,
        analytic,
        remainder,
        recombined,
    })
}

fn zero_trajectory<T: Real>(
    evolver: &Evolver<T>,
    g: &Field<T>,
    tau_end: T,
    k: usize,
) -> Result<Trajectory<T>> {
    // Run a unit-size field to get the schedule and manifest, then zero it.
    let mut probe = Field::zeros(g.basis());
    probe.u2.values_mut().iter_mut().for_each(|v| *v = T::one());
    let mut t = evolver.run(&probe, tau_end, k)?;
    for s in t.states.iter_mut() {
        *s = Field::zeros(g.basis());
    }
    for n in t.norms.iter_mut() {
        *n = NormSample {
            h: T::zero(),
            h2k: T::zero(),
        };
    }
    Ok(t)
}

/// `max_τ ‖recombined(τ) - full(τ)‖_H` over common samples.
pub fn recombination_error<T: Real>(a: &Trajectory<T>, b: &Trajectory<T>) -> T {
    a.states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| chopped_difference(x, y).h_norm())
        .fold(T::zero(), |m, v| m.max(v))
}
