//! Kalman filtering with a budgeted subset of scalar sensors per step.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{psd_factor, symmetrize, trace};
use crate::model::{ProblemInstance, StepProblem};
use crate::objective::{FisherState, SensorRows};
use crate::rng::substream;
use crate::selection::{
    exhaustive_select, greedy_select_rows, random_select_rows, randomized_greedy_select_rows,
    select_all_rows, SamplingConfig, SelectionResult, DEFAULT_ENUMERATION_CAP,
};

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub x_hat: DVector<f64>,
    /// `P_{k|k}`.
    pub p: DMatrix<f64>,
    pub k: usize,
}

impl FilterState {
    pub fn new(x_hat: DVector<f64>, p: DMatrix<f64>) -> Result<Self> {
        let m = x_hat.len();
        if p.shape() != (m, m) {
            return Err(Error::Dimension(format!(
                "covariance is {:?} for a state of length {m}",
                p.shape()
            )));
        }
        Ok(Self { x_hat, p, k: 0 })
    }
}

/// Time update. `a = None` means identity dynamics.
pub fn predict(
    state: &FilterState,
    a: Option<&DMatrix<f64>>,
    q: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let m = state.x_hat.len();
    if q.shape() != (m, m) {
        return Err(Error::Dimension(format!("Q is {:?}, expected {m}x{m}", q.shape())));
    }
    let (x, mut p) = match a {
        None => (state.x_hat.clone(), &state.p + q),
        Some(a) => {
            if a.shape() != (m, m) {
                return Err(Error::Dimension(format!("A is {:?}, expected {m}x{m}", a.shape())));
            }
            (a * &state.x_hat, a * &state.p * a.transpose() + q)
        }
    };
    symmetrize(&mut p);
    Ok((x, p))
}

/// Measurement update with the sensors in `selected`.
#[derive(Debug, Clone)]
pub struct Update {
    pub state: FilterState,
    /// True when `selected` was empty and only the prediction was kept.
    pub predict_only: bool,
}

/// Measurement update: the covariance comes from the rank-1 chain over
/// `selected`, the mean from the innovation form
/// `x = x_pred + P H_Sᵀ R_S⁻¹ (y_S - H_S x_pred)`. `y` holds one entry per
/// sensor; only the selected entries are read.
pub fn update(
    x_pred: &DVector<f64>,
    p_pred: &DMatrix<f64>,
    selected: &[usize],
    h: &DMatrix<f64>,
    r_diag: &[f64],
    y: &DVector<f64>,
) -> Result<Update> {
    let rows = SensorRows::new(h, r_diag)?;
    let mut fisher = FisherState::new(p_pred, &rows)?;
    for &j in selected {
        fisher.add_sensor(j)?;
    }
    update_with_posterior(x_pred, fisher.into_f_inv(), selected, &rows, y)
}

/// As [`update`], reusing a posterior covariance already produced by a
/// selector.
pub fn update_with_posterior(
    x_pred: &DVector<f64>,
    p_filt: DMatrix<f64>,
    selected: &[usize],
    rows: &SensorRows,
    y: &DVector<f64>,
) -> Result<Update> {
    let m = x_pred.len();
    if rows.dim() != m || y.len() != rows.len() || p_filt.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "update with state {m}, rows {}x{}, y {}",
            rows.len(),
            rows.dim(),
            y.len()
        )));
    }
    if selected.is_empty() {
        return Ok(Update {
            state: FilterState {
                x_hat: x_pred.clone(),
                p: p_filt,
                k: 0,
            },
            predict_only: true,
        });
    }
    let mut info = DVector::zeros(m);
    for &j in selected {
        let h = rows.row(j);
        let resid = y[j] - crate::linalg::dot(h, x_pred.as_slice());
        let w = resid / rows.noise(j);
        for (acc, hv) in info.iter_mut().zip(h) {
            *acc += w * hv;
        }
    }
    let x_hat = x_pred + &p_filt * info;
    Ok(Update {
        state: FilterState {
            x_hat,
            p: p_filt,
            k: 0,
        },
        predict_only: false,
    })
}

/// Selection policy applied at every step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum Policy {
    Greedy,
    Randomized(SamplingConfig),
    Random,
    Exhaustive,
    AllSensors,
}

impl Policy {
    pub fn randomized(epsilon: f64) -> Self {
        Policy::Randomized(SamplingConfig::new(epsilon))
    }

    /// Short name used in CSV output.
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Greedy => "greedy",
            Policy::Randomized(_) => "randomized",
            Policy::Random => "random",
            Policy::Exhaustive => "exhaustive",
            Policy::AllSensors => "all",
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match self {
            Policy::Randomized(cfg) => Some(cfg.epsilon),
            _ => None,
        }
    }

    /// Seed tag that separates selector streams of different policies.
    pub fn stream_tag(&self) -> String {
        match self.epsilon() {
            Some(e) => format!("{}:{:016x}", self.name(), e.to_bits()),
            None => self.name().to_string(),
        }
    }

    pub fn select<R: Rng + ?Sized>(
        &self,
        p_pred: &DMatrix<f64>,
        h: &DMatrix<f64>,
        rows: &SensorRows,
        k: usize,
        rng: &mut R,
    ) -> Result<SelectionResult> {
        match self {
            Policy::Greedy => greedy_select_rows(p_pred, rows, k),
            Policy::Randomized(cfg) => randomized_greedy_select_rows(p_pred, rows, k, cfg, rng),
            Policy::Random => random_select_rows(p_pred, rows, k, rng),
            Policy::Exhaustive => {
                let r: Vec<f64> = (0..rows.len()).map(|j| rows.noise(j)).collect();
                exhaustive_select(p_pred, h, &r, k, DEFAULT_ENUMERATION_CAP)
            }
            Policy::AllSensors => select_all_rows(p_pred, rows),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.epsilon() {
            Some(e) => write!(f, "{}(eps={e})", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

/// One filtered time step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub selected: Vec<usize>,
    pub f_value: f64,
    /// `Tr(P_{k|k})`.
    pub mse: f64,
    /// `Tr(P_{k|k-1})`.
    pub trace_p_pred: f64,
    /// `||x_k - x̂_{k|k}||²`.
    pub sq_error: f64,
    pub gain_evals: u64,
    pub select_time_s: f64,
    pub predict_only: bool,
}

/// Ground-truth trajectory and measurements of one trial.
#[derive(Debug, Clone)]
pub struct World {
    pub x: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
}

/// Draw `x_0 ~ N(mu, Sigma_x)`, `x_{t} = A_t x_{t-1} + w_t` for the first
/// state, and `y_t = H_t x_t + v_t` for every sensor. Streams are keyed by
/// `(trial_seed, "x0")`, `(trial_seed, "w", t)` and `(trial_seed, "v", t)`.
pub fn simulate_world(instance: &ProblemInstance, trial_seed: u64) -> Result<World> {
    instance.validate()?;
    let m = instance.m;
    let l0 = psd_factor(&instance.sigma_x);
    let lq = psd_factor(&instance.q);
    let sd: Vec<f64> = instance.r_diag.iter().map(|v| v.sqrt()).collect();
    let mut prev = {
        let mut rng = substream(trial_seed, &["x0".into()]);
        instance.prior_mean() + &l0 * gaussian_vector(m, &mut rng)
    };
    let mut xs = Vec::with_capacity(instance.horizon);
    let mut ys = Vec::with_capacity(instance.horizon);
    for t in 0..instance.horizon {
        let mut rw = substream(trial_seed, &["w".into(), t.into()]);
        let w = &lq * gaussian_vector(m, &mut rw);
        let x = match instance.a.at(t) {
            Some(a) => a * &prev + w,
            None => &prev + w,
        };
        let mut rv = substream(trial_seed, &["v".into(), t.into()]);
        let mut y = &instance.h[t] * &x;
        for (yj, s) in y.iter_mut().zip(&sd) {
            let z: f64 = rv.sample(StandardNormal);
            *yj += s * z;
        }
        xs.push(x.clone());
        ys.push(y);
        prev = x;
    }
    Ok(World { x: xs, y: ys })
}

fn gaussian_vector<R: Rng + ?Sized>(m: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(m, |_, _| rng.sample(StandardNormal))
}

/// Run the filter over the horizon with `policy` choosing `K` sensors per step.
pub fn run_filter(instance: &ProblemInstance, policy: &Policy, trial_seed: u64) -> Result<Vec<StepRecord>> {
    let world = simulate_world(instance, trial_seed)?;
    run_filter_on(instance, policy, trial_seed, &world)
}

/// As [`run_filter`] on a pre-simulated world, so several policies can share
/// one trajectory.
pub fn run_filter_on(
    instance: &ProblemInstance,
    policy: &Policy,
    trial_seed: u64,
    world: &World,
) -> Result<Vec<StepRecord>> {
    let tag = policy.stream_tag();
    let mut state = FilterState::new(instance.prior_mean(), instance.sigma_x.clone())?;
    let mut out = Vec::with_capacity(instance.horizon);
    for t in 0..instance.horizon {
        let (x_pred, p_pred) = predict(&state, instance.a.at(t), &instance.q)?;
        let h = &instance.h[t];
        let rows = SensorRows::new(h, &instance.r_diag)?;
        let mut rng = substream(trial_seed, &["select".into(), tag.as_str().into(), t.into()]);
        let sel = policy.select(&p_pred, h, &rows, instance.k, &mut rng)?;
        let upd = update_with_posterior(&x_pred, sel.posterior, &sel.selected, &rows, &world.y[t])?;
        let err = &world.x[t] - &upd.state.x_hat;
        out.push(StepRecord {
            step: t,
            selected: sel.selected,
            f_value: sel.f_final,
            mse: trace(&upd.state.p),
            trace_p_pred: trace(&p_pred),
            sq_error: err.norm_squared(),
            gain_evals: sel.gain_evals,
            select_time_s: sel.wall_time,
            predict_only: upd.predict_only,
        });
        state = FilterState {
            k: t + 1,
            ..upd.state
        };
    }
    Ok(out)
}

/// The selection problem met at every step when `policy` drives the filter.
/// Covariances do not depend on measurements, so no world is simulated.
pub fn step_problems(instance: &ProblemInstance, policy: &Policy, trial_seed: u64) -> Result<Vec<StepProblem>> {
    instance.validate()?;
    let tag = policy.stream_tag();
    let mut p = instance.sigma_x.clone();
    let mut out = Vec::with_capacity(instance.horizon);
    for t in 0..instance.horizon {
        let mut p_pred = match instance.a.at(t) {
            Some(a) => a * &p * a.transpose() + &instance.q,
            None => &p + &instance.q,
        };
        symmetrize(&mut p_pred);
        let h = &instance.h[t];
        let rows = SensorRows::new(h, &instance.r_diag)?;
        let mut rng = substream(trial_seed, &["select".into(), tag.as_str().into(), t.into()]);
        let sel = policy.select(&p_pred, h, &rows, instance.k, &mut rng)?;
        out.push(StepProblem {
            step: t,
            k: instance.k,
            p_pred,
            h: h.clone(),
            r_diag: instance.r_diag.clone(),
        });
        p = sel.posterior;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predict_identity_and_zero_dynamics() {
        let st = FilterState::new(DVector::zeros(3), DMatrix::identity(3, 3)).unwrap();
        let q = DMatrix::identity(3, 3) * 0.05;
        let (_, p) = predict(&st, None, &q).unwrap();
        assert_eq!(p, DMatrix::identity(3, 3) * 1.05);
        let zero = DMatrix::zeros(3, 3);
        let (x, p) = predict(&st, Some(&zero), &q).unwrap();
        assert_eq!(p, q);
        assert_eq!(x, DVector::zeros(3));
        assert!(predict(&st, Some(&DMatrix::zeros(2, 2)), &q).is_err());
    }

    #[test]
    fn scalar_update() {
        let x = DVector::from_vec(vec![0.0]);
        let p = DMatrix::from_element(1, 1, 1.0);
        let h = DMatrix::from_element(1, 1, 1.0);
        let y = DVector::from_vec(vec![0.0]);
        let u = update(&x, &p, &[0], &h, &[1.0], &y).unwrap();
        assert_eq!(u.state.p[(0, 0)], 0.5);
        assert_eq!(u.state.x_hat[0], 0.0);
        assert!(!u.predict_only);
    }

    #[test]
    fn zero_rows_leave_prior_untouched() {
        let x = DVector::from_vec(vec![0.3, -1.0]);
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 1.0]);
        let h = DMatrix::zeros(3, 2);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let u = update(&x, &p, &[0, 2], &h, &[1.0; 3], &y).unwrap();
        assert_eq!(u.state.p, p);
        assert_eq!(u.state.x_hat, x);
    }

    #[test]
    fn empty_selection_is_predict_only() {
        let x = DVector::from_vec(vec![1.0]);
        let p = DMatrix::from_element(1, 1, 2.0);
        let h = DMatrix::from_element(1, 1, 1.0);
        let u = update(&x, &p, &[], &h, &[1.0], &DVector::from_vec(vec![5.0])).unwrap();
        assert!(u.predict_only);
        assert_eq!(u.state.x_hat, x);
    }

    #[test]
    fn policy_names() {
        assert_eq!(Policy::randomized(0.1).to_string(), "randomized(eps=0.1)");
        assert_eq!(Policy::AllSensors.name(), "all");
        assert_ne!(Policy::randomized(0.1).stream_tag(), Policy::randomized(0.01).stream_tag());
    }
}
