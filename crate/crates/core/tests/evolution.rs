use std::sync::Arc;

use approx::assert_relative_eq;
use proptest::prelude::*;

use lightcone_core::analysis::{verify_theorem, DataGenerator, Verdict};
use lightcone_core::decompose::{analytic_basis, spectral_project, ModeFunctionals};
use lightcone_core::evolve::dalembert_oracle;
use lightcone_core::modes::{semilinear_mode, Branch};
use lightcone_core::{ChebBasis, EvolveOptions, Evolver, Field, Problem, ProblemParams};

fn grid(n: usize) -> Arc<ChebBasis<f64>> {
    Arc::new(ChebBasis::new(n).unwrap())
}

fn p(p: i64) -> Problem<f64> {
    Problem::Semilinear(ProblemParams::new(p).unwrap())
}

#[test]
fn spectral_coefficients_evolve_exponentially() {
    let b = grid(48);
    for (problem, k) in [(Problem::Free, 2), (p(3), 1), (p(7), 2)] {
        let modes = analytic_basis(&problem, k).unwrap();
        let f = ModeFunctionals::new(&problem, &modes, &b).unwrap();
        let ev = Evolver::new(&b, &problem, EvolveOptions::default()).unwrap();
        let u0 = DataGenerator::new(3).next_field(&b, k).unwrap();
        let c0 = f.coefficients(&u0).unwrap();
        let tr = ev.run(&u0, 1.0, k).unwrap();
        let c1 = f.coefficients(tr.final_state().unwrap()).unwrap();
        for ((a, b), m) in c0.iter().zip(&c1).zip(&modes) {
            assert_relative_eq!(*b, a * m.lambda.exp(), epsilon = 1e-8, max_relative = 1e-7);
        }
    }
}

#[test]
fn gauge_free_data_stay_gauge_free() {
    let b = grid(48);
    let problem = p(5);
    let params = *problem.params().unwrap();
    let gauge = semilinear_mode(&params, 0, Branch::Plus).unwrap().normalized(2);
    let f = ModeFunctionals::new(&problem, std::slice::from_ref(&gauge), &b).unwrap();
    let u0 = DataGenerator::new(9).next_field(&b, 2).unwrap();
    let c = f.coefficients(&u0).unwrap()[0];
    let u0 = u0.axpy(-c, &gauge.field(&b));
    let ev = Evolver::new(&b, &problem, EvolveOptions::default()).unwrap();
    let tr = ev.run(&u0, 2.0, 2).unwrap();
    let h = tr.final_state().unwrap().h_norm();
    let left = f.coefficients(tr.final_state().unwrap()).unwrap()[0];
    assert!(left.abs() < 1e-9 * h.max(1.0), "gauge content {left:e}");
}

#[test]
fn decomposition_theorem_on_single_samples() {
    let b = grid(64);
    let options = EvolveOptions { filter: true, ..EvolveOptions::default() };
    for (problem, k) in [(Problem::Free, 1), (p(3), 1), (p(5), 2)] {
        let ev = Evolver::new(&b, &problem, options.clone()).unwrap();
        let u0 = DataGenerator::new(21).next_field(&b, k).unwrap();
        let report = verify_theorem(&ev, &u0, k, 6.0, None).unwrap();
        assert_eq!(report.verdict, Verdict::Pass, "{report:#?}");
        let d = spectral_project(&u0, k, &problem).unwrap();
        assert!(d.reconstruction_error(&u0).unwrap() < 1e-12);
    }
}

#[test]
fn single_precision_pipeline() {
    let b: Arc<ChebBasis<f32>> = Arc::new(ChebBasis::new(24).unwrap());
    let params = ProblemParams::<f32>::new(3).unwrap();
    let problem = Problem::Semilinear(params);
    let mode = semilinear_mode(&params, 0, Branch::Plus).unwrap().normalized(1);
    assert!(mode.eigen_residual(&b, &problem).unwrap() < 1e-3);
    let ev = Evolver::new(&b, &problem, EvolveOptions::default()).unwrap();
    let tr = ev.run(&mode.field(&b), 0.5, 1).unwrap();
    let ratio = tr.norms.last().unwrap().h / tr.norms[0].h;
    assert_relative_eq!(ratio, 1.0f32.exp(), max_relative = 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn free_evolution_matches_characteristics(a in -1.0f64..1.0, c in -1.0f64..1.0, w in 1.0f64..6.0) {
        let b = grid(40);
        let u0 = Field::from_fns(&b, move |r: f64| a * (w * r).sin(), move |r: f64| c * (w * r).cos() + a);
        let ev = Evolver::new(&b, &Problem::Free, EvolveOptions::default()).unwrap();
        let tr = ev.run(&u0, 0.7, 1).unwrap();
        let exact = dalembert_oracle(&u0, tr.taus.last().copied().unwrap()).unwrap();
        prop_assert!(tr.final_state().unwrap().sub(&exact).max_abs() < 1e-8);
    }

    #[test]
    fn perturbed_growth_bound(seed in 0u64..1000, q in prop::sample::select(vec![3i64, 5, 7])) {
        let b = grid(32);
        let problem = p(q);
        let u0 = DataGenerator::new(seed).next_polynomial().field(&b);
        let ev = Evolver::new(&b, &problem, EvolveOptions::default()).unwrap();
        let tr = ev.run(&u0, 2.0, 1).unwrap();
        let rate = 0.5 + problem.pc0();
        for (t, n) in tr.taus.iter().zip(&tr.norms) {
            prop_assert!(n.h <= (rate * t).exp() * tr.norms[0].h * (1.0 + 1e-6));
        }
    }
}
