//! Element-wise curvature of the MSE set function and the approximation
//! guarantees that depend on it.
//!
//! The brute-force routines enumerate every `(S, T, i)` with `S ⊊ T`,
//! `i ∉ T`, which costs `O(3^n n)` gain lookups after an `O(2^n n m^2)`
//! table build; `n` is capped at [`BRUTE_FORCE_MAX_N`].

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{eigen_extremes, lambda_max};
use crate::objective::{FisherState, SensorRows};
use crate::selection::{beta, sample_size};

/// Default cap on `n` for subset enumeration.
pub const BRUTE_FORCE_MAX_N: usize = 12;

/// `f` and all marginal gains for every subset of a small sensor set.
/// Subsets are bitmasks over `0..n`.
#[derive(Debug, Clone)]
pub struct GainTable {
    n: usize,
    f: Vec<f64>,
    /// `gain[mask * n + i]`, NaN when `i` is in `mask`.
    gain: Vec<f64>,
    min_fisher_eig: Vec<f64>,
    zero_rows: Vec<usize>,
}

impl GainTable {
    pub fn build(p_pred: &DMatrix<f64>, h: &DMatrix<f64>, r_diag: &[f64], max_n: usize) -> Result<Self> {
        let rows = SensorRows::new(h, r_diag)?;
        let n = rows.len();
        if n > max_n {
            return Err(Error::EnumerationCap {
                n,
                k: n,
                count: 3u128.pow(n as u32),
                cap: 3u128.pow(max_n as u32),
            });
        }
        let total = 1usize << n;
        let mut states: Vec<FisherState<'_>> = Vec::with_capacity(total);
        states.push(FisherState::new(p_pred, &rows)?);
        for mask in 1..total {
            let low = mask.trailing_zeros() as usize;
            let parent = mask & (mask - 1);
            let next = states[parent].with_sensor(low)?;
            states.push(next);
        }
        let mut gain = vec![f64::NAN; total * n];
        let mut f = Vec::with_capacity(total);
        let mut min_fisher_eig = Vec::with_capacity(total);
        for (mask, st) in states.iter().enumerate() {
            f.push(st.f_value());
            let (_, top) = eigen_extremes(st.f_inv());
            min_fisher_eig.push(1.0 / top);
            for i in (0..n).filter(|i| mask & (1 << i) == 0) {
                gain[mask * n + i] = st.marginal_gain(i)?;
            }
        }
        Ok(Self {
            n,
            f,
            gain,
            min_fisher_eig,
            zero_rows: rows.zero_rows(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn f(&self, mask: usize) -> f64 {
        self.f[mask]
    }

    /// `f_i(S)`; NaN if `i` is already in `mask`.
    pub fn gain(&self, mask: usize, i: usize) -> f64 {
        self.gain[mask * self.n + i]
    }

    /// `λ_min(F_S)`.
    pub fn min_fisher_eigenvalue(&self, mask: usize) -> f64 {
        self.min_fisher_eig[mask]
    }

    pub fn zero_rows(&self) -> &[usize] {
        &self.zero_rows
    }
}

/// Bitmask of a subset.
pub fn mask_of(subset: &[usize]) -> usize {
    subset.iter().fold(0, |m, &j| m | (1 << j))
}

/// Result of Theorem-1 style bound evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureBound {
    pub condition_holds: bool,
    /// `λ_max(HᵀH)`.
    pub lhs: f64,
    /// `(1/φ - 1/λ_min(P)) min_j σ_j²`.
    pub rhs: f64,
    pub bound: f64,
}

/// Approximation factors of randomized and classical greedy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproxFactor {
    pub alpha: f64,
    pub alpha_greedy: f64,
    pub beta: f64,
    pub s: usize,
    /// Set when the raw factor was negative and has been clamped to 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureReport {
    /// `C_l` for `l = 1..n-1` (index `l - 1`).
    pub c_l: Vec<f64>,
    pub c_max: f64,
    /// Rows with `h_i = 0`, excluded from the maximum.
    pub zero_rows: Vec<usize>,
    pub bound: Option<CurvatureBound>,
    pub phi: Option<f64>,
    pub p_success: Option<f64>,
    pub factor: Option<ApproxFactor>,
}

impl CurvatureReport {
    /// `c = max(C_max, 1)`.
    pub fn c(&self) -> f64 {
        self.c_max.max(1.0)
    }

    /// `C(r)` from the stored `C_l`.
    pub fn aggregated(&self, r: usize) -> Result<f64> {
        aggregated_curvature(&self.c_l, r)
    }

    pub fn with_factor(mut self, epsilon: f64, n: usize, k: usize) -> Result<Self> {
        self.factor = Some(approx_factor(self.c(), epsilon, n, k)?);
        Ok(self)
    }
}

/// Exact `C_l = max f_i(T) / f_i(S)` over `S ⊊ T`, `i ∉ T`, `|T \ S| = l`.
pub fn curvature_bruteforce(p_pred: &DMatrix<f64>, h: &DMatrix<f64>, r_diag: &[f64]) -> Result<CurvatureReport> {
    let table = GainTable::build(p_pred, h, r_diag, BRUTE_FORCE_MAX_N)?;
    Ok(curvature_from_table(&table))
}

pub fn curvature_from_table(table: &GainTable) -> CurvatureReport {
    let n = table.n();
    let len = n.saturating_sub(1);
    let fold = |mut acc: Vec<f64>, t: usize| {
        let t_size = t.count_ones();
        let outside: Vec<usize> = (0..n).filter(|i| t & (1 << i) == 0).collect();
        // walk the proper submasks of t, including the empty set
        let mut s = t;
        loop {
            s = s.wrapping_sub(1) & t;
            let l = (t_size - s.count_ones()) as usize;
            for &i in &outside {
                let lo = table.gain(s, i);
                if lo > 0.0 {
                    let ratio = table.gain(t, i) / lo;
                    if ratio > acc[l - 1] {
                        acc[l - 1] = ratio;
                    }
                }
            }
            if s == 0 {
                break;
            }
        }
        acc
    };
    let c_l: Vec<f64> = (1..(1usize << n))
        .into_par_iter()
        .fold(|| vec![f64::NEG_INFINITY; len], fold)
        .reduce(
            || vec![f64::NEG_INFINITY; len],
            |a, b| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect(),
        )
        .into_iter()
        .map(|c| if c.is_finite() { c } else { 0.0 })
        .collect();
    let c_max = c_l.iter().copied().fold(0.0, f64::max);
    CurvatureReport {
        c_l,
        c_max,
        zero_rows: table.zero_rows().to_vec(),
        bound: None,
        phi: None,
        p_success: None,
        factor: None,
    }
}

/// `C(r) = (1/r)(1 + sum_{l<r} C_l)`, for `1 <= r <= len(C_l) + 1`.
pub fn aggregated_curvature(c_l: &[f64], r: usize) -> Result<f64> {
    if r == 0 || r > c_l.len() + 1 {
        return Err(Error::param(
            "r",
            format!("must satisfy 1 <= r <= {}, got {r}", c_l.len() + 1),
        ));
    }
    Ok((1.0 + c_l[..r - 1].iter().sum::<f64>()) / r as f64)
}

/// Deterministic curvature bound for `0 < phi < λ_min(P_pred)` and a
/// row-norm bound `c_norm >= max_j ||h_j||²`.
pub fn curvature_bound(
    p_pred: &DMatrix<f64>,
    h: &DMatrix<f64>,
    r_diag: &[f64],
    c_norm: f64,
    phi: f64,
) -> Result<CurvatureBound> {
    let (p_min, p_max) = eigen_extremes(p_pred);
    if !(phi > 0.0 && phi < p_min) {
        return Err(Error::param(
            "phi",
            format!("must lie in (0, λ_min(P) = {p_min}), got {phi}"),
        ));
    }
    let max_norm = h.row_iter().map(|r| r.norm_squared()).fold(0.0, f64::max);
    if !(c_norm >= max_norm) {
        return Err(Error::param(
            "C",
            format!("must bound every squared row norm (max {max_norm}), got {c_norm}"),
        ));
    }
    if r_diag.len() != h.nrows() {
        return Err(Error::Dimension(format!(
            "R_diag has {} entries for {} rows",
            r_diag.len(),
            h.nrows()
        )));
    }
    let lhs = lambda_max(&h.tr_mul(h));
    let min_noise = r_diag.iter().copied().fold(f64::INFINITY, f64::min);
    let rhs = (1.0 / phi - 1.0 / p_min) * min_noise;
    let bound = r_diag
        .iter()
        .map(|&s2| p_max * p_max * (s2 + p_max * c_norm) / (phi * phi * (s2 + phi * c_norm)))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(CurvatureBound {
        condition_holds: lhs <= rhs,
        lhs,
        rhs,
        bound,
    })
}

/// `phi` and its success probability for i.i.d. rows with covariance
/// `sigma_h2 I`, given the deviation `q`. `p` may be non-positive for small `q`.
pub fn phi_probabilistic(
    n: usize,
    m: usize,
    sigma_h2: f64,
    c_norm: f64,
    r_diag: &[f64],
    p_pred: &DMatrix<f64>,
    q: f64,
) -> Result<(f64, f64)> {
    if !(sigma_h2 > 0.0 && sigma_h2 < c_norm) {
        return Err(Error::param(
            "sigma_h2",
            format!("must satisfy 0 < sigma_h2 < C = {c_norm}, got {sigma_h2}"),
        ));
    }
    if !(q > 0.0) {
        return Err(Error::param("q", format!("must be positive, got {q}")));
    }
    let (p_min, _) = eigen_extremes(p_pred);
    let spread = n as f64 * sigma_h2 + q;
    let phi = r_diag
        .iter()
        .map(|&s2| 1.0 / (1.0 / p_min + spread / s2))
        .fold(f64::INFINITY, f64::min);
    let expo = -(q * q / 2.0) / ((c_norm - sigma_h2) * (n as f64 * sigma_h2 + q / 3.0));
    Ok((phi, 1.0 - m as f64 * expo.exp()))
}

/// Condition-number form of the curvature bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionBound {
    pub premise_holds: bool,
    pub kappa: f64,
    pub snr: f64,
    pub bound: f64,
}

/// Premise `delta >= kappa + c1 (n/m) SNR`; bound `delta³`.
pub fn condition_number_bound(
    p_pred: &DMatrix<f64>,
    sigma2: f64,
    n: usize,
    m: usize,
    delta: f64,
    c1: f64,
) -> Result<ConditionBound> {
    if !(delta > 1.0) {
        return Err(Error::param("delta", format!("must exceed 1, got {delta}")));
    }
    if !(c1 > 1.0) {
        return Err(Error::param("c1", format!("must exceed 1, got {c1}")));
    }
    let (p_min, p_max) = eigen_extremes(p_pred);
    let kappa = p_max / p_min;
    let snr = p_max / sigma2;
    Ok(ConditionBound {
        premise_holds: delta >= kappa + c1 * (n as f64 / m as f64) * snr,
        kappa,
        snr,
        bound: delta.powi(3),
    })
}

/// `alpha = 1 - e^{-1/c} - eps^beta / c`, clamped at 0, and the greedy factor
/// `1 - e^{-1/c}`.
pub fn approx_factor(c: f64, epsilon: f64, n: usize, k: usize) -> Result<ApproxFactor> {
    if !(c >= 1.0) {
        return Err(Error::param("c", format!("must be at least 1, got {c}")));
    }
    if k == 0 || k > n {
        return Err(Error::param("K", format!("must satisfy 1 <= K <= n = {n}, got {k}")));
    }
    let lo = (-(k as f64)).exp();
    if !(epsilon >= lo && epsilon < 1.0) {
        return Err(Error::param(
            "epsilon",
            format!("must lie in [e^-K, 1), got {epsilon}"),
        ));
    }
    let s = sample_size(n, k, epsilon);
    let b = beta(n, s);
    let alpha_greedy = 1.0 - (-1.0 / c).exp();
    let raw = alpha_greedy - epsilon.powf(b) / c;
    Ok(ApproxFactor {
        alpha: raw.max(0.0),
        alpha_greedy,
        beta: b,
        s,
        degenerate: raw < 0.0,
    })
}

/// `alpha MSE_o + (1 - alpha) Tr(P_pred)`.
pub fn mse_bound(alpha: f64, mse_opt: f64, trace_p_pred: f64) -> f64 {
    alpha * mse_opt + (1.0 - alpha) * trace_p_pred
}

/// Per-run factor `1 - e^{-l_min / c}` from the smallest recorded gain ratio.
pub fn per_run_factor(l_min: f64, c: f64) -> f64 {
    1.0 - (-l_min / c).exp()
}

/// Diagnostic failure probability
/// `exp(-K (1-q)² mu² / ((1-q) mu / 3 + (1 - l)² / 4))`; reported, never asserted.
pub fn pac_failure_probability(k: usize, q: f64, mu_min: f64, l_min: f64) -> f64 {
    let a = 1.0 - q;
    let num = k as f64 * a * a * mu_min * mu_min;
    let den = a * mu_min / 3.0 + (1.0 - l_min).powi(2) / 4.0;
    (-num / den).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_rows_are_modular() {
        let p = DMatrix::identity(4, 4);
        let h = DMatrix::identity(4, 4) * 0.7;
        let rep = curvature_bruteforce(&p, &h, &[0.3; 4]).unwrap();
        assert_eq!(rep.c_l.len(), 3);
        for c in &rep.c_l {
            assert!((c - 1.0).abs() < 1e-12, "{c}");
        }
    }

    #[test]
    fn repeated_rows_have_diminishing_returns() {
        let p = DMatrix::identity(2, 2);
        let h = DMatrix::from_row_slice(3, 2, &[0.6, 0.8, 0.6, 0.8, 0.6, 0.8]);
        let rep = curvature_bruteforce(&p, &h, &[1.0; 3]).unwrap();
        assert_eq!(rep.c_l.len(), 2);
        // gains along one direction: g(k) = 1 / ((1 + k)(2 + k))
        assert!((rep.c_l[0] - (1.0 / 12.0) / (1.0 / 6.0)).abs() < 1e-12);
        assert!((rep.c_l[1] - (1.0 / 12.0) / 0.5).abs() < 1e-12);
        assert!(rep.c_l.iter().all(|&c| c < 1.0));
    }

    #[test]
    fn zero_rows_are_excluded_and_flagged() {
        let p = DMatrix::identity(2, 2);
        let h = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let rep = curvature_bruteforce(&p, &h, &[1.0; 3]).unwrap();
        assert_eq!(rep.zero_rows, vec![1]);
        assert!(rep.c_l.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn enumeration_cap() {
        let p = DMatrix::identity(1, 1);
        let h = DMatrix::from_element(13, 1, 1.0);
        assert!(matches!(
            curvature_bruteforce(&p, &h, &[1.0; 13]),
            Err(Error::EnumerationCap { n: 13, .. })
        ));
    }

    #[test]
    fn bound_arithmetic() {
        let p = DMatrix::identity(2, 2) * 2.0;
        let h = DMatrix::from_row_slice(1, 2, &[0.5, 0.0]);
        let b = curvature_bound(&p, &h, &[1.0], 1.0, 1.0).unwrap();
        assert!((b.bound - 6.0).abs() < 1e-12);
        assert!(b.condition_holds);
        assert!(matches!(
            curvature_bound(&p, &h, &[1.0], 1.0, 2.0),
            Err(Error::Parameter { name: "phi", .. })
        ));
    }

    #[test]
    fn bound_tends_to_one_at_phi_limit() {
        let p = DMatrix::identity(2, 2);
        let h = DMatrix::from_row_slice(1, 2, &[1e-6, 0.0]);
        let b = curvature_bound(&p, &h, &[1.0], 1.0, 1.0 - 1e-9).unwrap();
        assert!((b.bound - 1.0).abs() < 1e-6);
    }

    #[test]
    fn phi_arithmetic_and_tail() {
        let p = DMatrix::identity(3, 3);
        let (phi, _) = phi_probabilistic(100, 3, 0.01, 1.0, &[1.0; 100], &p, 10.0).unwrap();
        assert!((phi - 1.0 / 12.0).abs() < 1e-15);
        let (_, prob) = phi_probabilistic(100, 3, 0.01, 1.0, &[1.0; 100], &p, 1e6).unwrap();
        assert!(prob > 1.0 - 1e-12);
        assert!(phi_probabilistic(100, 3, 1.0, 1.0, &[1.0; 100], &p, 1.0).is_err());
    }

    #[test]
    fn condition_number_cases() {
        let p = DMatrix::identity(3, 3);
        let b = condition_number_bound(&p, 1.0, 3, 3, 3.0, 2.0).unwrap();
        assert!(b.premise_holds);
        assert_eq!(b.bound, 27.0);
        let skewed = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1000.0, 1.0, 1.0]));
        assert!(!condition_number_bound(&skewed, 1.0, 3, 3, 3.0, 2.0).unwrap().premise_holds);
    }

    #[test]
    fn approx_factor_cases() {
        let f = approx_factor(1.0, (-40.0f64).exp(), 400, 40).unwrap();
        assert!((f.alpha - (1.0 - (-1.0f64).exp())).abs() < 1e-12);

        let f = approx_factor(1.0, 0.5, 100, 10).unwrap();
        assert_eq!(f.s, 7);
        let beta = 1.0 + 0.035 - 1.0 / 186.0;
        assert!((f.beta - beta).abs() < 1e-15);
        let expected = 1.0 - (-1.0f64).exp() - 0.5f64.powf(beta);
        assert!((f.alpha - expected).abs() < 1e-15);
        assert!(!f.degenerate);

        let f = approx_factor(1.0, 0.9, 100, 10).unwrap();
        assert_eq!(f.alpha, 0.0);
        assert!(f.degenerate);

        let f = approx_factor(1e6, 0.5, 100, 10).unwrap();
        assert!(f.alpha > 0.0 && f.alpha < 1e-6);
        assert!(f.alpha <= f.alpha_greedy);
        assert!(approx_factor(0.5, 0.5, 100, 10).is_err());
    }

    #[test]
    fn mse_bound_endpoints() {
        assert_eq!(mse_bound(1.0, 0.3, 2.0), 0.3);
        assert_eq!(mse_bound(0.0, 0.3, 2.0), 2.0);
    }

    #[test]
    fn aggregated_curvature_cases() {
        assert_eq!(aggregated_curvature(&[3.0, 4.0], 1).unwrap(), 1.0);
        assert_eq!(aggregated_curvature(&[1.0; 5], 4).unwrap(), 1.0);
        assert_eq!(aggregated_curvature(&[3.0, 4.0], 3).unwrap(), 8.0 / 3.0);
        assert!(aggregated_curvature(&[3.0], 3).is_err());
        assert!(aggregated_curvature(&[3.0], 0).is_err());
    }
}
