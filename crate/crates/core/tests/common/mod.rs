#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, sd: f64, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| sd * rng.sample::<f64, _>(StandardNormal))
}

/// `B Bᵀ + shift I` for a random square `B`.
pub fn random_spd<R: Rng>(m: usize, shift: f64, rng: &mut R) -> DMatrix<f64> {
    let b = gaussian_matrix(m, m, 1.0 / (m as f64).sqrt(), rng);
    let mut p = &b * b.transpose();
    for i in 0..m {
        p[(i, i)] += shift;
    }
    (&p + p.transpose()) * 0.5
}

pub fn random_noise<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.02..0.5)).collect()
}

/// Random single-step problem `(P_pred, H, R_diag)`.
pub fn random_step<R: Rng>(m: usize, n: usize, rng: &mut R) -> (DMatrix<f64>, DMatrix<f64>, Vec<f64>) {
    let p = random_spd(m, 0.2, rng);
    let h = gaussian_matrix(n, m, 1.0 / (m as f64).sqrt(), rng);
    let r = random_noise(n, rng);
    (p, h, r)
}

/// LU inverse, independent of the library's Cholesky path.
pub fn inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().lu().try_inverse().expect("singular matrix in test oracle")
}

/// `(P^-1 + sum_{j in S} h_j h_jᵀ / sigma_j²)^-1` by explicit inversion.
pub fn oracle_posterior(p: &DMatrix<f64>, h: &DMatrix<f64>, r: &[f64], subset: &[usize]) -> DMatrix<f64> {
    let mut fisher = inverse(p);
    for &j in subset {
        let hj = h.row(j).transpose();
        fisher += &hj * hj.transpose() / r[j];
    }
    inverse(&fisher)
}

pub fn oracle_f(p: &DMatrix<f64>, h: &DMatrix<f64>, r: &[f64], subset: &[usize]) -> f64 {
    p.trace() - oracle_posterior(p, h, r, subset).trace()
}

/// Every `k`-subset of `0..n` in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..n {
            cur.push(j);
            rec(j + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Best `k`-subset by explicit inversion; the first maximizer wins.
pub fn oracle_exhaustive(p: &DMatrix<f64>, h: &DMatrix<f64>, r: &[f64], k: usize) -> (Vec<usize>, f64) {
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for s in k_subsets(h.nrows(), k) {
        let v = oracle_f(p, h, r, &s);
        if v > best.1 {
            best = (s, v);
        }
    }
    best
}

pub fn members(mask: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask & (1 << i) != 0).collect()
}

/// Textbook gain-form Kalman update with the listed rows.
pub fn gain_form_update(
    x: &DVector<f64>,
    p: &DMatrix<f64>,
    h: &DMatrix<f64>,
    r: &[f64],
    subset: &[usize],
    y: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let hs = DMatrix::from_fn(subset.len(), h.ncols(), |i, c| h[(subset[i], c)]);
    let rs = DMatrix::from_diagonal(&DVector::from_iterator(subset.len(), subset.iter().map(|&j| r[j])));
    let ys = DVector::from_iterator(subset.len(), subset.iter().map(|&j| y[j]));
    let s = &hs * p * hs.transpose() + rs;
    let gain = p * hs.transpose() * inverse(&s);
    let x_new = x + &gain * (ys - &hs * x);
    let eye = DMatrix::identity(p.nrows(), p.nrows());
    let p_new = (&eye - &gain * &hs) * p;
    (x_new, p_new)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub fn rel_frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}
