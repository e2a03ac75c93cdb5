mod common;

use common::*;
use ksched::kalman::*;
use ksched::model::{generate_instance, MeasurementGeneratorSpec, ProblemInstance, Transition};
use ksched::selection::{greedy_select, SamplingConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn scalar_instance(horizon: usize) -> ProblemInstance {
    ProblemInstance {
        m: 1,
        n: 2,
        k: 2,
        horizon,
        a: Transition::Constant(DMatrix::from_element(1, 1, 0.9)),
        q: DMatrix::from_element(1, 1, 0.2),
        r_diag: vec![0.5, 2.0],
        sigma_x: DMatrix::from_element(1, 1, 3.0),
        prior_mean: None,
        h: (0..horizon)
            .map(|t| DMatrix::from_row_slice(2, 1, &[1.0, 0.5 + 0.1 * t as f64]))
            .collect(),
        generator: None,
        seed: 0,
    }
}

#[test]
fn all_sensors_follow_scalar_riccati() {
    let inst = scalar_instance(8);
    let recs = run_filter(&inst, &Policy::AllSensors, 1).unwrap();
    let mut p = 3.0;
    for (t, rec) in recs.iter().enumerate() {
        let pp = 0.81 * p + 0.2;
        let h1 = 0.5 + 0.1 * t as f64;
        p = 1.0 / (1.0 / pp + 1.0 / 0.5 + h1 * h1 / 2.0);
        assert!(rel_err(rec.mse, p) < 1e-12, "step {t}: {} vs {p}", rec.mse);
        assert!(rel_err(rec.trace_p_pred, pp) < 1e-12);
    }
}

#[test]
fn predict_matches_triple_product() {
    let mut g = rng(2);
    let a = gaussian_matrix(4, 4, 1.0, &mut g);
    let p = random_spd(4, 0.1, &mut g);
    let q = random_spd(4, 0.05, &mut g);
    let x = DVector::from_fn(4, |i, _| i as f64);
    let st = FilterState::new(x.clone(), p.clone()).unwrap();
    let (xp, pp) = predict(&st, Some(&a), &q).unwrap();
    let direct = &a * &p * a.transpose() + &q;
    assert!((pp - direct).abs().max() < 1e-12);
    assert!((xp - &a * x).abs().max() < 1e-12);
}

#[test]
fn information_form_matches_gain_form() {
    for seed in 0..20 {
        let mut g = rng(seed);
        let (p, h, r) = random_step(3, 8, &mut g);
        let x = DVector::from_fn(3, |_, _| g.random_range(-1.0..1.0));
        let y = DVector::from_fn(8, |_, _| g.random_range(-2.0..2.0));
        let subset = [1, 3, 4, 6, 7];
        let upd = update(&x, &p, &subset, &h, &r, &y).unwrap();
        assert!(rel_frob(&upd.state.p, &oracle_posterior(&p, &h, &r, &subset)) < 1e-9);
        let (xg, pg) = gain_form_update(&x, &p, &h, &r, &subset, &y);
        assert!((&upd.state.x_hat - xg).abs().max() < 1e-9);
        assert!(rel_frob(&upd.state.p, &pg) < 1e-8);
    }
}

#[test]
fn random_with_full_budget_equals_all_sensors() {
    let inst = generate_instance(MeasurementGeneratorSpec::gaussian(4), 4, 9, 9, 5, 0.05, 0.05, 3).unwrap();
    let a = run_filter(&inst, &Policy::AllSensors, 8).unwrap();
    let b = run_filter(&inst, &Policy::Random, 8).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.selected, y.selected);
        assert_eq!(x.mse.to_bits(), y.mse.to_bits());
        assert_eq!(x.sq_error.to_bits(), y.sq_error.to_bits());
    }
}

#[test]
fn runs_are_reproducible() {
    let inst = generate_instance(MeasurementGeneratorSpec::gaussian(6), 6, 30, 5, 6, 0.05, 0.05, 4).unwrap();
    for policy in [Policy::Greedy, Policy::randomized(0.1), Policy::Random] {
        let a = run_filter(&inst, &policy, 21).unwrap();
        let b = run_filter(&inst, &policy, 21).unwrap();
        let strip = |v: &[StepRecord]| -> Vec<_> {
            v.iter()
                .map(|r| (r.selected.clone(), r.mse.to_bits(), r.sq_error.to_bits(), r.gain_evals))
                .collect()
        };
        assert_eq!(strip(&a), strip(&b));
    }
}

#[test]
fn smallest_epsilon_gives_greedy_trajectory() {
    let inst = generate_instance(MeasurementGeneratorSpec::gaussian(5), 5, 25, 4, 6, 0.05, 0.05, 5).unwrap();
    let a = run_filter(&inst, &Policy::Greedy, 2).unwrap();
    let b = run_filter(&inst, &Policy::Randomized(SamplingConfig::greedy_equivalent(4)), 2).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.selected, y.selected);
        assert_eq!(x.mse.to_bits(), y.mse.to_bits());
    }
}

#[test]
fn step_problems_reproduce_filter_covariances() {
    let inst = generate_instance(MeasurementGeneratorSpec::gaussian(4), 4, 15, 3, 5, 0.05, 0.05, 6).unwrap();
    let recs = run_filter(&inst, &Policy::Greedy, 0).unwrap();
    let steps = step_problems(&inst, &Policy::Greedy, 0).unwrap();
    for (rec, st) in recs.iter().zip(&steps) {
        assert!(rel_err(rec.trace_p_pred, st.p_pred.trace()) < 1e-12);
        let sel = greedy_select(&st.p_pred, &st.h, &st.r_diag, st.k).unwrap();
        assert_eq!(sel.selected, rec.selected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn filtering_never_increases_trace(m in 1usize..6, n in 2usize..20, seed in any::<u64>()) {
        let k = 1 + (seed as usize % n);
        let inst = generate_instance(MeasurementGeneratorSpec::gaussian(m), m, n, k, 4, 0.05, 0.05, seed).unwrap();
        for rec in run_filter(&inst, &Policy::Greedy, seed).unwrap() {
            prop_assert!(rec.mse <= rec.trace_p_pred + 1e-12);
        }
    }

    #[test]
    fn larger_budget_never_hurts(m in 1usize..6, n in 3usize..20, seed in any::<u64>()) {
        let mut g = rng(seed);
        let (p, h, r) = random_step(m, n, &mut g);
        let k = 1 + (seed as usize % (n - 1));
        let a = greedy_select(&p, &h, &r, k).unwrap();
        let b = greedy_select(&p, &h, &r, k + 1).unwrap();
        prop_assert!(b.mse <= a.mse + 1e-12);
    }
}
