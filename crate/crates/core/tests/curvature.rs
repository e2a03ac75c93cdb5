mod common;

use common::*;
use ksched::curvature::*;
use ksched::linalg::eigen_extremes;
use ksched::objective::{FisherState, SensorRows};
use ksched::selection::greedy_select;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// `C_l` by explicit enumeration with inversion-based gains.
fn oracle_curvature(p: &DMatrix<f64>, h: &DMatrix<f64>, r: &[f64]) -> Vec<f64> {
    let n = h.nrows();
    let f: Vec<f64> = (0..1usize << n).map(|mask| oracle_f(p, h, r, &members(mask, n))).collect();
    let gain = |mask: usize, i: usize| f[mask | (1 << i)] - f[mask];
    let mut c = vec![0.0f64; n - 1];
    for t in 0..1usize << n {
        for s in 0..1usize << n {
            if s & t != s || s == t {
                continue;
            }
            let l = (t.count_ones() - s.count_ones()) as usize;
            for i in (0..n).filter(|i| t & (1 << i) == 0) {
                let lo = gain(s, i);
                if lo > 0.0 {
                    c[l - 1] = c[l - 1].max(gain(t, i) / lo);
                }
            }
        }
    }
    c
}

#[test]
fn bruteforce_matches_explicit_enumeration() {
    for seed in 0..8 {
        let mut g = rng(seed);
        let (p, h, r) = random_step(3, 6, &mut g);
        let rep = curvature_bruteforce(&p, &h, &r).unwrap();
        for (a, b) in rep.c_l.iter().zip(oracle_curvature(&p, &h, &r)) {
            assert!(rel_err(*a, b) < 1e-6, "{a} vs {b}");
        }
    }
}

#[test]
fn curvature_is_invariant_to_row_order() {
    let mut g = rng(8);
    let (p, h, r) = random_step(3, 8, &mut g);
    let a = curvature_bruteforce(&p, &h, &r).unwrap();
    let perm: Vec<usize> = (0..8).rev().collect();
    let hp = DMatrix::from_fn(8, 3, |i, c| h[(perm[i], c)]);
    let rp: Vec<f64> = perm.iter().map(|&j| r[j]).collect();
    let b = curvature_bruteforce(&p, &hp, &rp).unwrap();
    assert!(a.c_max.is_finite());
    for (x, y) in a.c_l.iter().zip(&b.c_l) {
        assert!(rel_err(*x, *y) < 1e-9);
    }
    assert_eq!(a, curvature_bruteforce(&p, &h, &r).unwrap());
}

#[test]
fn aggregated_curvature_never_exceeds_c() {
    for seed in 0..10 {
        let mut g = rng(40 + seed);
        let (p, h, r) = random_step(3, 7, &mut g);
        let rep = curvature_bruteforce(&p, &h, &r).unwrap();
        assert_eq!(rep.aggregated(1).unwrap(), 1.0);
        for k in 1..=rep.c_l.len() + 1 {
            assert!(rep.aggregated(k).unwrap() <= rep.c() + 1e-12);
        }
    }
}

#[test]
fn subset_gap_is_bounded_by_aggregated_curvature() {
    for seed in 0..5 {
        let mut g = rng(60 + seed);
        let (p, h, r) = random_step(3, 7, &mut g);
        let n = 7;
        let table = GainTable::build(&p, &h, &r, n).unwrap();
        let rep = curvature_from_table(&table);
        for t in 1..1usize << n {
            let mut s = t;
            loop {
                s = s.wrapping_sub(1) & t;
                let diff = t & !s;
                let k = diff.count_ones() as usize;
                let sum: f64 = members(diff, n).iter().map(|&j| table.gain(s, j)).sum();
                let lhs = table.f(t) - table.f(s);
                let rhs = rep.aggregated(k).unwrap() * sum;
                assert!(lhs <= rhs + 1e-9 * rhs.abs().max(1.0), "{lhs} > {rhs}");
                if s == 0 {
                    break;
                }
            }
        }
    }
}

#[test]
fn fisher_eigenvalues_grow_along_greedy_chain() {
    let mut g = rng(77);
    let (p, h, r) = random_step(5, 20, &mut g);
    let sel = greedy_select(&p, &h, &r, 10).unwrap();
    let rows = SensorRows::new(&h, &r).unwrap();
    let mut st = FisherState::new(&p, &rows).unwrap();
    let (_, p_max) = eigen_extremes(&p);
    let mut last = 1.0 / p_max;
    for &j in &sel.selected {
        st.add_sensor(j).unwrap();
        let (_, top) = eigen_extremes(st.f_inv());
        let lam = 1.0 / top;
        assert!(lam >= last * (1.0 - 1e-12), "{lam} < {last}");
        last = lam;
    }
}

#[test]
fn bound_holds_when_condition_holds() {
    for seed in 0..20 {
        let mut g = rng(500 + seed);
        let (p, mut h, r) = random_step(3, 8, &mut g);
        let (p_min, _) = eigen_extremes(&p);
        let phi = 0.5 * p_min;
        let budget = (1.0 / phi - 1.0 / p_min) * r.iter().copied().fold(f64::INFINITY, f64::min);
        let (_, lam) = eigen_extremes(&h.tr_mul(&h));
        h *= (0.9 * budget / lam).sqrt();
        let c_norm = h.row_iter().map(|x| x.norm_squared()).fold(0.0, f64::max);
        let b = curvature_bound(&p, &h, &r, c_norm, phi).unwrap();
        assert!(b.condition_holds);
        let rep = curvature_bruteforce(&p, &h, &r).unwrap();
        assert!(rep.c_max <= b.bound, "{} > {}", rep.c_max, b.bound);
    }
}

#[test]
fn condition_number_premise_bounds_curvature() {
    let mut g = rng(9);
    let m = 4;
    let p = DMatrix::identity(m, m) * 1.05;
    let h = gaussian_matrix(8, m, 0.05, &mut g);
    let r = vec![1.0; 8];
    let b = condition_number_bound(&p, 1.0, 8, m, 4.0, 1.2).unwrap();
    assert!(b.premise_holds);
    let rep = curvature_bruteforce(&p, &h, &r).unwrap();
    assert!(rep.c_max <= b.bound);
}

#[test]
fn bernstein_probability_is_conservative() {
    let (m, n, var, c_norm, q) = (20, 2000, 0.05, 3.0, 60.0);
    let p = DMatrix::identity(m, m);
    let (_, prob) = phi_probabilistic(n, m, var, c_norm, &vec![0.05; n], &p, q).unwrap();
    assert!(prob > 0.5);
    let mut g = rng(1);
    let draws = 10_000;
    let mut ok = 0;
    for _ in 0..draws {
        let h = gaussian_matrix(n, m, var.sqrt(), &mut g);
        let mut dev = h.tr_mul(&h);
        for i in 0..m {
            dev[(i, i)] -= n as f64 * var;
        }
        let (_, top) = eigen_extremes(&dev);
        ok += (top <= q) as usize;
    }
    assert!(ok as f64 / draws as f64 >= prob);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn factors_are_ordered(c in 1.0f64..50.0, k in 1usize..20, extra in 0usize..200, t in 0.0f64..1.0) {
        let n = k + extra;
        let lo = (-(k as f64)).exp();
        let eps = lo + (0.999 - lo) * t;
        let f = approx_factor(c, eps, n, k).unwrap();
        prop_assert!(f.alpha >= 0.0);
        prop_assert!(f.alpha <= f.alpha_greedy);
        prop_assert!(f.alpha_greedy < 1.0);
        prop_assert!(f.beta >= 1.0);
        prop_assert_eq!(f.degenerate, f.alpha == 0.0 && f.alpha_greedy - eps.powf(f.beta) / c < 0.0);
    }

    #[test]
    fn curvatures_are_positive_on_random_instances(m in 1usize..4, n in 2usize..8, seed in any::<u64>()) {
        let mut g = rng(seed);
        let (p, h, r) = random_step(m, n, &mut g);
        let rep = curvature_bruteforce(&p, &h, &r).unwrap();
        prop_assert!(rep.c_l.iter().all(|&c| c > 0.0));
        prop_assert!(rep.c_l.iter().all(|&c| c <= rep.c_max));
    }
}
