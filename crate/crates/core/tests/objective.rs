mod common;

use common::*;
use ksched::linalg::eigen_extremes;
use ksched::objective::{f_direct, FisherState, SensorRows};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;

#[test]
fn f_matches_direct_inversion_on_fixed_subset() {
    let mut g = rng(3);
    let (p, h, r) = random_step(3, 5, &mut g);
    let rows = SensorRows::new(&h, &r).unwrap();
    let mut st = FisherState::new(&p, &rows).unwrap();
    st.add_sensor(0).unwrap();
    st.add_sensor(2).unwrap();
    let expected = oracle_f(&p, &h, &r, &[0, 2]);
    assert!(rel_err(st.f_value(), expected) < 1e-12);
    assert!(rel_err(f_direct(&p, &h, &r, &[0, 2]).unwrap(), expected) < 1e-12);
}

#[test]
fn gain_on_random_4x4_state_with_small_noise() {
    let mut g = rng(11);
    let p = random_spd(4, 0.1, &mut g);
    let h = gaussian_matrix(1, 4, 0.5, &mut g);
    let rows = SensorRows::new(&h, &[0.05]).unwrap();
    let st = FisherState::new(&p, &rows).unwrap();
    let direct = p.trace() - oracle_posterior(&p, &h, &[0.05], &[0]).trace();
    assert!(rel_err(st.marginal_gain(0).unwrap(), direct) < 1e-9);
}

#[test]
fn rank_one_update_on_random_m5_state() {
    let mut g = rng(5);
    let (p, h, r) = random_step(5, 6, &mut g);
    let rows = SensorRows::new(&h, &r).unwrap();
    let mut st = FisherState::new(&p, &rows).unwrap();
    for j in [4, 1, 3] {
        st.add_sensor(j).unwrap();
    }
    let before = st.f_inv().clone();
    st.add_sensor(0).unwrap();
    let hj = h.row(0).transpose();
    let expected = inverse(&(inverse(&before) + &hj * hj.transpose() / r[0]));
    assert!(rel_frob(st.f_inv(), &expected) < 1e-8);
}

#[test]
fn spd_preserved_up_to_m50() {
    let mut g = rng(50);
    let (p, h, r) = random_step(50, 120, &mut g);
    let rows = SensorRows::new(&h, &r).unwrap();
    let mut st = FisherState::new(&p, &rows).unwrap();
    let mut order: Vec<usize> = (0..120).collect();
    order.shuffle(&mut g);
    for &j in &order {
        st.add_sensor(j).unwrap();
        let (lo, _) = eigen_extremes(st.f_inv());
        assert!(lo > 0.0, "min eigenvalue {lo} after adding {j}");
        assert_eq!(st.f_inv(), &st.f_inv().transpose());
    }
}

fn step_strategy() -> impl Strategy<Value = (DMatrix<f64>, DMatrix<f64>, Vec<f64>, u64)> {
    (1usize..=6, 1usize..=10, any::<u64>()).prop_map(|(m, n, seed)| {
        let mut g = rng(seed);
        let (p, h, r) = random_step(m, n, &mut g);
        (p, h, r, seed)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gain_equals_value_difference((p, h, r, seed) in step_strategy()) {
        let rows = SensorRows::new(&h, &r).unwrap();
        let mut st = FisherState::new(&p, &rows).unwrap();
        let mut order: Vec<usize> = (0..h.nrows()).collect();
        order.shuffle(&mut rng(seed ^ 1));
        for &j in &order {
            let gain = st.marginal_gain(j).unwrap();
            let before = st.f_value();
            st.add_sensor(j).unwrap();
            let diff = st.f_value() - before;
            prop_assert!(gain >= 0.0);
            prop_assert!((gain - diff).abs() <= 1e-9 * gain.abs().max(diff.abs()).max(1e-12));
        }
    }

    #[test]
    fn values_are_monotone_along_chains((p, h, r, seed) in step_strategy()) {
        let rows = SensorRows::new(&h, &r).unwrap();
        let mut st = FisherState::new(&p, &rows).unwrap();
        prop_assert_eq!(st.f_value(), 0.0);
        let mut order: Vec<usize> = (0..h.nrows()).collect();
        order.shuffle(&mut rng(seed ^ 2));
        let mut last = 0.0;
        for &j in &order {
            st.add_sensor(j).unwrap();
            prop_assert!(st.f_value() >= last - 1e-12);
            last = st.f_value();
        }
    }

    #[test]
    fn order_of_insertion_does_not_matter((p, h, r, seed) in step_strategy()) {
        let rows = SensorRows::new(&h, &r).unwrap();
        let mut order: Vec<usize> = (0..h.nrows()).collect();
        let mut a = FisherState::new(&p, &rows).unwrap();
        for &j in &order {
            a.add_sensor(j).unwrap();
        }
        order.shuffle(&mut rng(seed ^ 3));
        let mut b = FisherState::new(&p, &rows).unwrap();
        for &j in &order {
            b.add_sensor(j).unwrap();
        }
        prop_assert!(rel_err(a.f_value(), b.f_value()) <= 1e-8);
        prop_assert!(rel_err(a.f_value(), oracle_f(&p, &h, &r, &order)) <= 1e-8);
    }

    #[test]
    fn zero_rows_contribute_nothing(m in 1usize..5, seed in any::<u64>()) {
        let mut g = rng(seed);
        let p = random_spd(m, 0.3, &mut g);
        let h = DMatrix::zeros(2, m);
        let rows = SensorRows::new(&h, &[0.1, 0.2]).unwrap();
        let mut st = FisherState::new(&p, &rows).unwrap();
        prop_assert_eq!(st.marginal_gain(1).unwrap(), 0.0);
        st.add_sensor(1).unwrap();
        prop_assert_eq!(st.f_inv(), &p);
    }

    #[test]
    fn nonzero_rows_have_positive_gain(m in 1usize..6, seed in any::<u64>()) {
        let mut g = rng(seed);
        let p = random_spd(m, 0.3, &mut g);
        let mut h = gaussian_matrix(1, m, 1.0, &mut g);
        if h.iter().all(|v| *v == 0.0) {
            h[(0, 0)] = 1.0;
        }
        let rows = SensorRows::new(&h, &[0.3]).unwrap();
        let st = FisherState::new(&p, &rows).unwrap();
        prop_assert!(st.marginal_gain(0).unwrap() > 0.0);
    }
}

#[test]
fn unit_vector_gain_for_any_dimension() {
    for m in 1..6 {
        let p = DMatrix::identity(m, m);
        let mut h = DMatrix::zeros(1, m);
        h[(0, 0)] = 1.0;
        let rows = SensorRows::new(&h, &[1.0]).unwrap();
        let st = FisherState::new(&p, &rows).unwrap();
        assert_eq!(st.marginal_gain(0).unwrap(), 0.5);
    }
}
