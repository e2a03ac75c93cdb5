//! Sensor-selection policies under the cardinality budget `|S| = K`.
//!
//! All selectors break ties towards the lowest sensor index, which makes the
//! classical greedy deterministic and lets randomized greedy with
//! `epsilon = e^-K` reproduce it exactly.

use web_time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{f_direct, posterior_direct, FisherState, SensorRows};

/// Outcome of one selection run on one time step.
#[derive(Debug, Clone)]
pub struct SelectionResult {
    /// Indices in the order they were added.
    pub selected: Vec<usize>,
    /// `f(S)` of the final set.
    pub f_final: f64,
    /// `Tr(F_S^-1)`.
    pub mse: f64,
    /// Marginal-gain evaluations charged to the selector.
    pub gain_evals: u64,
    /// Seconds spent selecting.
    pub wall_time: f64,
    /// Gain ratios `eta` per iteration (randomized greedy with tracing on).
    pub gain_ratio_trace: Option<Vec<f64>>,
    /// `|R|` per iteration (randomized greedy only).
    pub sample_sizes: Vec<usize>,
    /// `f` after each addition.
    pub f_trace: Vec<f64>,
    /// The filtered covariance `F_S^-1`.
    pub posterior: DMatrix<f64>,
}

/// Sample-size rule of randomized greedy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub epsilon: f64,
    /// Also scan every remaining candidate to record the gain ratio
    /// `eta = gain(chosen) / gain(greedy choice)`; those scans are not
    /// counted in `gain_evals` but do cost time.
    #[serde(default)]
    pub trace_ratio: bool,
}

impl SamplingConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            trace_ratio: false,
        }
    }

    /// `epsilon = e^-K`, for which every iteration samples all candidates.
    pub fn greedy_equivalent(k: usize) -> Self {
        Self::new((-(k as f64)).exp())
    }

    pub fn with_trace(mut self) -> Self {
        self.trace_ratio = true;
        self
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        let lo = (-(k as f64)).exp();
        if !(self.epsilon >= lo && self.epsilon < 1.0) {
            return Err(Error::param(
                "epsilon",
                format!("must lie in [e^-K, 1) = [{lo:e}, 1), got {}", self.epsilon),
            ));
        }
        Ok(())
    }
}

/// `s = ceil((n / K) ln(1 / epsilon))`, clamped to `[1, n]`.
pub fn sample_size(n: usize, k: usize, epsilon: f64) -> usize {
    let raw = (n as f64 / k as f64) * (1.0 / epsilon).ln();
    (raw.ceil() as usize).clamp(1, n)
}

fn validate_budget(rows: &SensorRows, k: usize) -> Result<()> {
    if k == 0 || k > rows.len() {
        return Err(Error::param(
            "K",
            format!("must satisfy 1 <= K <= n = {}, got {k}", rows.len()),
        ));
    }
    Ok(())
}

/// Best candidate among `candidates`: maximal gain, lowest index on ties.
fn best_of<I>(state: &FisherState<'_>, candidates: I, scratch: &mut [f64]) -> Result<(usize, f64, u64)>
where
    I: IntoIterator<Item = usize>,
{
    let mut best: Option<(usize, f64)> = None;
    let mut evals = 0;
    for j in candidates {
        let g = state.gain_with(j, scratch)?;
        evals += 1;
        best = match best {
            Some((bj, bg)) if bg > g || (bg == g && bj < j) => Some((bj, bg)),
            _ => Some((j, g)),
        };
    }
    let (j, g) = best.ok_or_else(|| Error::Usage("no candidates left".into()))?;
    Ok((j, g, evals))
}

fn finish(state: FisherState<'_>, start: Instant, gain_evals: u64, f_trace: Vec<f64>) -> SelectionResult {
    let f_final = state.f_value();
    let mse = state.mse();
    let selected = state.selected().to_vec();
    SelectionResult {
        selected,
        f_final,
        mse,
        gain_evals,
        wall_time: start.elapsed().as_secs_f64(),
        gain_ratio_trace: None,
        sample_sizes: Vec::new(),
        f_trace,
        posterior: state.into_f_inv(),
    }
}

/// Classical greedy: `K` full scans, `nK - K(K-1)/2` gain evaluations.
pub fn greedy_select(p_pred: &DMatrix<f64>, h: &DMatrix<f64>, r_diag: &[f64], k: usize) -> Result<SelectionResult> {
    let rows = SensorRows::new(h, r_diag)?;
    greedy_select_rows(p_pred, &rows, k)
}

pub fn greedy_select_rows(p_pred: &DMatrix<f64>, rows: &SensorRows, k: usize) -> Result<SelectionResult> {
    validate_budget(rows, k)?;
    let start = Instant::now();
    let mut state = FisherState::new(p_pred, rows)?;
    let mut scratch = vec![0.0; rows.dim()];
    let mut evals = 0;
    let mut f_trace = Vec::with_capacity(k);
    for _ in 0..k {
        let (j, _, e) = {
            let st = &state;
            best_of(st, (0..rows.len()).filter(|&j| !st.contains(j)), &mut scratch)?
        };
        evals += e;
        state.add_sensor(j)?;
        f_trace.push(state.f_value());
    }
    Ok(finish(state, start, evals, f_trace))
}

/// Randomized greedy: each iteration samples `s` of the remaining sensors
/// uniformly without replacement (partial Fisher–Yates) and adds the best of
/// the sample.
pub fn randomized_greedy_select<R: Rng + ?Sized>(
    p_pred: &DMatrix<f64>,
    h: &DMatrix<f64>,
    r_diag: &[f64],
    k: usize,
    cfg: &SamplingConfig,
    rng: &mut R,
) -> Result<SelectionResult> {
    let rows = SensorRows::new(h, r_diag)?;
    randomized_greedy_select_rows(p_pred, &rows, k, cfg, rng)
}

pub fn randomized_greedy_select_rows<R: Rng + ?Sized>(
    p_pred: &DMatrix<f64>,
    rows: &SensorRows,
    k: usize,
    cfg: &SamplingConfig,
    rng: &mut R,
) -> Result<SelectionResult> {
    validate_budget(rows, k)?;
    cfg.validate(k)?;
    let n = rows.len();
    let s = sample_size(n, k, cfg.epsilon);
    let start = Instant::now();
    let mut state = FisherState::new(p_pred, rows)?;
    let mut scratch = vec![0.0; rows.dim()];
    let mut pool: Vec<usize> = (0..n).collect();
    let mut evals = 0;
    let mut sizes = Vec::with_capacity(k);
    let mut ratios = cfg.trace_ratio.then(|| Vec::with_capacity(k));
    let mut f_trace = Vec::with_capacity(k);
    for _ in 0..k {
        let take = s.min(pool.len());
        for t in 0..take {
            let r = rng.random_range(t..pool.len());
            pool.swap(t, r);
        }
        let (j, g, e) = best_of(&state, pool[..take].iter().copied(), &mut scratch)?;
        evals += e;
        sizes.push(take);
        if let Some(trace) = ratios.as_mut() {
            let st = &state;
            let (_, g_best, _) = best_of(st, pool.iter().copied(), &mut scratch)?;
            trace.push(if g_best > 0.0 { g / g_best } else { 1.0 });
        }
        let pos = pool[..take]
            .iter()
            .position(|&x| x == j)
            .expect("chosen index comes from the sample");
        pool.swap_remove(pos);
        state.add_sensor(j)?;
        f_trace.push(state.f_value());
    }
    let mut out = finish(state, start, evals, f_trace);
    out.sample_sizes = sizes;
    out.gain_ratio_trace = ratios;
    Ok(out)
}

/// Default cap on `C(n, K)` for exhaustive search.
pub const DEFAULT_ENUMERATION_CAP: u128 = 2_000_000;

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Exhaustive search over all `K`-subsets with direct inversion per subset.
/// Ties go to the lexicographically first subset.
pub fn exhaustive_select(
    p_pred: &DMatrix<f64>,
    h: &DMatrix<f64>,
    r_diag: &[f64],
    k: usize,
    cap: u128,
) -> Result<SelectionResult> {
    let rows = SensorRows::new(h, r_diag)?;
    validate_budget(&rows, k)?;
    let n = rows.len();
    let count = binomial(n, k);
    if count > cap {
        return Err(Error::EnumerationCap { n, k, count, cap });
    }
    let start = Instant::now();
    let mut comb: Vec<usize> = (0..k).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut evals = 0u64;
    loop {
        let f = f_direct(p_pred, h, r_diag, &comb)?;
        evals += 1;
        if best.as_ref().is_none_or(|(_, bf)| f > *bf) {
            best = Some((comb.clone(), f));
        }
        // next combination in lexicographic order
        let mut i = k;
        while i > 0 && comb[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        comb[i - 1] += 1;
        for t in i..k {
            comb[t] = comb[t - 1] + 1;
        }
    }
    let (selected, f_final) = best.expect("at least one subset");
    let posterior = posterior_direct(p_pred, h, r_diag, &selected)?;
    let mse = crate::linalg::trace(&posterior);
    Ok(SelectionResult {
        selected,
        f_final,
        mse,
        gain_evals: evals,
        wall_time: start.elapsed().as_secs_f64(),
        gain_ratio_trace: None,
        sample_sizes: Vec::new(),
        f_trace: Vec::new(),
        posterior,
    })
}

/// Uniform random `K`-subset, applied in ascending index order; `f` is
/// evaluated afterwards through the rank-1 chain. No gains are evaluated, so
/// `gain_evals` is zero.
pub fn random_select<R: Rng + ?Sized>(
    p_pred: &DMatrix<f64>,
    h: &DMatrix<f64>,
    r_diag: &[f64],
    k: usize,
    rng: &mut R,
) -> Result<SelectionResult> {
    let rows = SensorRows::new(h, r_diag)?;
    random_select_rows(p_pred, &rows, k, rng)
}

pub fn random_select_rows<R: Rng + ?Sized>(
    p_pred: &DMatrix<f64>,
    rows: &SensorRows,
    k: usize,
    rng: &mut R,
) -> Result<SelectionResult> {
    validate_budget(rows, k)?;
    let start = Instant::now();
    let mut chosen = sample_without_replacement(rows.len(), k, rng);
    chosen.sort_unstable();
    let mut state = FisherState::new(p_pred, rows)?;
    let mut f_trace = Vec::with_capacity(k);
    for j in chosen {
        state.add_sensor(j)?;
        f_trace.push(state.f_value());
    }
    Ok(finish(state, start, 0, f_trace))
}

/// Select every sensor, in index order.
pub fn select_all_rows(p_pred: &DMatrix<f64>, rows: &SensorRows) -> Result<SelectionResult> {
    let start = Instant::now();
    let mut state = FisherState::new(p_pred, rows)?;
    for j in 0..rows.len() {
        state.add_sensor(j)?;
    }
    Ok(finish(state, start, 0, Vec::new()))
}

/// First `k` entries of a partial Fisher–Yates shuffle of `0..n`.
pub fn sample_without_replacement<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    let k = k.min(n);
    for t in 0..k {
        let r = rng.random_range(t..n);
        pool.swap(t, r);
    }
    pool.truncate(k);
    pool
}

/// Closed-form gain-evaluation count of classical greedy.
pub fn greedy_eval_count(n: usize, k: usize) -> u64 {
    (n * k - k * (k - 1) / 2) as u64
}

/// Closed-form gain-evaluation count of randomized greedy: `sum_i min(s, n - i)`.
pub fn randomized_eval_count(n: usize, k: usize, epsilon: f64) -> u64 {
    let s = sample_size(n, k, epsilon);
    (0..k).map(|i| s.min(n - i) as u64).sum()
}

/// `beta = 1 + max{0, s/(2n) - 1/(2(n - s))}`, with `beta = 1` when `s >= n`.
pub fn beta(n: usize, s: usize) -> f64 {
    if s >= n {
        return 1.0;
    }
    let (n, s) = (n as f64, s as f64);
    1.0 + (s / (2.0 * n) - 1.0 / (2.0 * (n - s))).max(0.0)
}

/// Lower bound `((1 - epsilon^beta) / K) * |O \ S|` on the probability that a
/// sample of size `s` hits at least one of the remaining optimal sensors.
pub fn hit_probability_bound(n: usize, k: usize, epsilon: f64, missing_optimal: usize) -> f64 {
    let s = sample_size(n, k, epsilon);
    (1.0 - epsilon.powf(beta(n, s))) / k as f64 * missing_optimal as f64
}

/// Exact hit probability `1 - C(pool - x, s) / C(pool, s)` for a uniform
/// `s`-sample from `pool` candidates of which `x` are optimal.
pub fn hit_probability_exact(pool: usize, x: usize, s: usize) -> f64 {
    if x == 0 {
        return 0.0;
    }
    if s + x > pool {
        return 1.0;
    }
    let miss: f64 = (0..s)
        .map(|l| 1.0 - x as f64 / (pool - l) as f64)
        .product();
    1.0 - miss
}

/// Monte-Carlo estimate of `Pr{R ∩ (O \ S) != ∅}` where `R` is a uniform
/// sample of size `s` (clamped to the pool) from `[n] \ S`.
pub fn sampling_hit_rate<R: Rng + ?Sized>(
    n: usize,
    s: usize,
    optimal: &[usize],
    selected: &[usize],
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let mut in_s = vec![false; n];
    for &j in selected {
        if j >= n {
            return Err(Error::param("selected", format!("index {j} >= n")));
        }
        in_s[j] = true;
    }
    let mut is_target = vec![false; n];
    for &j in optimal {
        if j >= n {
            return Err(Error::param("optimal", format!("index {j} >= n")));
        }
        is_target[j] = !in_s[j];
    }
    let mut pool: Vec<usize> = (0..n).filter(|&j| !in_s[j]).collect();
    let take = s.clamp(1, pool.len().max(1)).min(pool.len());
    let mut hits = 0usize;
    for _ in 0..trials {
        let len = pool.len();
        let mut hit = false;
        for t in 0..take {
            let r = rng.random_range(t..len);
            pool.swap(t, r);
            hit |= is_target[pool[t]];
        }
        hits += hit as usize;
    }
    Ok(hits as f64 / trials as f64)
}
