//! Browser bindings for the ksched demo page.

use ksched::curvature::approx_factor;
use ksched::kalman::Policy;
use ksched::model::{generate_instance, MeasurementGeneratorSpec};
use ksched::objective::SensorRows;
use ksched::rng::substream;
use ksched::selection::{greedy_select_rows, random_select_rows, randomized_greedy_select_rows, select_all_rows, SamplingConfig};
use ksched::uav::{Channel, Scenario, UavConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(js_err)
}

#[derive(Serialize)]
struct FactorPoint {
    eps: f64,
    alpha: f64,
    s: usize,
}

#[derive(Serialize)]
struct FactorCurve {
    alpha_greedy: f64,
    points: Vec<FactorPoint>,
}

/// Approximation factor of randomized greedy over a log grid of epsilon,
/// from `e^-K` up to 0.99. Returns JSON.
#[wasm_bindgen]
pub fn approx_factor_curve(c: f64, n: usize, k: usize) -> Result<String, JsError> {
    let lo = (-(k as f64)).exp().max(1e-12);
    let hi: f64 = 0.99;
    let steps = 60;
    let mut points = Vec::with_capacity(steps + 1);
    let mut alpha_greedy = 0.0;
    for i in 0..=steps {
        let eps = (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / steps as f64).exp().max(lo);
        let f = approx_factor(c, eps, n, k).map_err(js_err)?;
        alpha_greedy = f.alpha_greedy;
        points.push(FactorPoint { eps, alpha: f.alpha, s: f.s });
    }
    to_json(&FactorCurve { alpha_greedy, points })
}

#[derive(Serialize)]
struct Outcome {
    policy: &'static str,
    mse: f64,
    gain_evals: u64,
    selected: Vec<usize>,
}

#[derive(Serialize)]
struct Comparison {
    trace_p_pred: f64,
    outcomes: Vec<Outcome>,
}

/// One selection step on a random Gaussian instance: greedy, randomized
/// greedy, uniform random and all sensors. Returns JSON.
#[wasm_bindgen]
pub fn compare_selection(m: usize, n: usize, k: usize, eps: f64, seed: u64) -> Result<String, JsError> {
    let inst = generate_instance(MeasurementGeneratorSpec::gaussian(m), m, n, k, 1, 0.05, 0.05, seed).map_err(js_err)?;
    let p_pred = &inst.sigma_x + &inst.q;
    let rows = SensorRows::new(&inst.h[0], &inst.r_diag).map_err(js_err)?;
    let mut rng = substream(seed, &["demo".into()]);
    let greedy = greedy_select_rows(&p_pred, &rows, k).map_err(js_err)?;
    let randomized =
        randomized_greedy_select_rows(&p_pred, &rows, k, &SamplingConfig::new(eps), &mut rng).map_err(js_err)?;
    let random = random_select_rows(&p_pred, &rows, k, &mut rng).map_err(js_err)?;
    let all = select_all_rows(&p_pred, &rows).map_err(js_err)?;
    let outcome = |policy, r: ksched::selection::SelectionResult| Outcome {
        policy,
        mse: r.mse,
        gain_evals: r.gain_evals,
        selected: r.selected,
    };
    to_json(&Comparison {
        trace_p_pred: p_pred.trace(),
        outcomes: vec![
            outcome("greedy", greedy),
            outcome("randomized", randomized),
            outcome("random", random),
            outcome("all", all),
        ],
    })
}

#[derive(Serialize)]
struct Link {
    uav: usize,
    object: usize,
    range: bool,
}

#[derive(Serialize)]
struct Frame {
    step: usize,
    width: f64,
    height: f64,
    radius: f64,
    uavs: Vec<[f64; 2]>,
    truth: Vec<[f64; 2]>,
    estimate: Vec<[f64; 2]>,
    links: Vec<Link>,
    candidates: usize,
    mse: f64,
    mean_trace: f64,
}

/// The UAV tracking scenario, stepped from the page.
#[wasm_bindgen]
pub struct UavDemo {
    scenario: Scenario,
    mse: f64,
    mean_trace: f64,
    candidates: usize,
}

#[wasm_bindgen]
impl UavDemo {
    /// `policy` is one of `greedy`, `randomized`, `random`, `all`.
    #[wasm_bindgen(constructor)]
    pub fn new(policy: &str, eps: f64, budget: usize, seed: u64) -> Result<UavDemo, JsError> {
        let policy = match policy {
            "greedy" => Policy::Greedy,
            "randomized" => Policy::randomized(eps),
            "random" => Policy::Random,
            "all" => Policy::AllSensors,
            other => return Err(JsError::new(&format!("unknown policy {other}"))),
        };
        let cfg = UavConfig { budget, ..UavConfig::default() };
        let scenario = Scenario::new(cfg, policy, seed).map_err(js_err)?;
        let mean_trace = scenario.cfg.init_var * 2.0;
        Ok(UavDemo { scenario, mse: f64::NAN, mean_trace, candidates: 0 })
    }

    /// Advance one step and return the frame as JSON.
    pub fn step(&mut self) -> Result<String, JsError> {
        let rec = self.scenario.step().map_err(js_err)?;
        self.mse = rec.mse;
        self.mean_trace = rec.mean_trace;
        self.candidates = rec.candidates;
        self.frame()
    }

    /// Current frame as JSON, without stepping.
    pub fn frame(&self) -> Result<String, JsError> {
        let sc = &self.scenario;
        let links = sc
            .last_selected
            .iter()
            .map(|&i| {
                let c = &sc.last_candidates[i];
                Link { uav: c.uav, object: c.object, range: c.channel == Channel::Range }
            })
            .collect();
        let points = sc.track_points();
        to_json(&Frame {
            step: sc.world.t,
            width: sc.cfg.width,
            height: sc.cfg.height,
            radius: sc.cfg.radius,
            uavs: sc.world.uavs.clone(),
            truth: points.iter().map(|p| p.true_pos).collect(),
            estimate: points.iter().map(|p| p.est_pos).collect(),
            links,
            candidates: self.candidates,
            mse: self.mse,
            mean_trace: self.mean_trace,
        })
    }
}
