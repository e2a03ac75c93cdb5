//! Multi-object tracking by a UAV swarm with range/bearing radars.
//!
//! Objects random-walk at constant speed inside a rectangle; UAVs sweep
//! parallel lanes. Each step every UAV measures range and bearing to the
//! objects within the detection radius, a selector keeps `K` of the scalar
//! measurements, and an extended Kalman filter updates the joint position
//! estimate of all objects.

use std::f64::consts::PI;
use web_time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kalman::Policy;
use crate::linalg::{lambda_min, symmetrize, trace};
use crate::objective::SensorRows;
use crate::rng::substream;

/// Linearizations closer than this to the radar are rejected.
pub const MIN_RANGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UavConfig {
    pub n_objects: usize,
    pub n_uavs: usize,
    pub width: f64,
    pub height: f64,
    pub object_speed: f64,
    /// Distance a UAV covers along its lane per step.
    pub uav_speed: f64,
    pub sigma_r2: f64,
    pub sigma_theta2: f64,
    /// Random-walk variance of the filter's motion model, per axis.
    pub q_var: f64,
    /// Variance of the initial position belief, per axis.
    pub init_var: f64,
    pub radius: f64,
    pub budget: usize,
    pub horizon: usize,
}

impl Default for UavConfig {
    fn default() -> Self {
        Self {
            n_objects: 20,
            n_uavs: 20,
            width: 10.0,
            height: 5.0,
            object_speed: 0.2,
            uav_speed: 0.25,
            sigma_r2: 0.05,
            sigma_theta2: 0.05,
            q_var: 0.05,
            init_var: 1.0,
            radius: DEFAULT_RADIUS,
            budget: 100,
            horizon: 30,
        }
    }
}

/// Output of [`calibrate_radius`] for the default geometry with a target of
/// 600 scalar measurements per step.
pub const DEFAULT_RADIUS: f64 = 5.43;

impl UavConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_objects == 0 || self.n_uavs == 0 {
            return Err(Error::param("n_objects", "object and UAV counts must be positive"));
        }
        for (name, v) in [
            ("width", self.width),
            ("height", self.height),
            ("sigma_r2", self.sigma_r2),
            ("sigma_theta2", self.sigma_theta2),
            ("q_var", self.q_var),
            ("init_var", self.init_var),
            ("radius", self.radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if self.budget == 0 {
            return Err(Error::param("budget", "must be at least 1"));
        }
        Ok(())
    }

    pub fn lane_spacing(&self) -> f64 {
        self.width / self.n_uavs as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MovingObject {
    pub pos: [f64; 2],
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorldState {
    pub objects: Vec<MovingObject>,
    /// Lane phase of each UAV, in `[0, 2 height)`.
    pub uav_phase: Vec<f64>,
    pub uavs: Vec<[f64; 2]>,
    pub t: usize,
}

/// Position of UAV `i` at time `t`: lane `x = (i + 1/2) spacing`, `y` a
/// triangle wave between 0 and `height`.
pub fn uav_position(cfg: &UavConfig, i: usize, phase: f64, t: usize) -> [f64; 2] {
    let period = 2.0 * cfg.height;
    let u = (phase + cfg.uav_speed * t as f64).rem_euclid(period);
    let y = if u <= cfg.height { u } else { period - u };
    [(i as f64 + 0.5) * cfg.lane_spacing(), y]
}

pub fn init_world<R: Rng + ?Sized>(cfg: &UavConfig, rng: &mut R) -> WorldState {
    let objects = (0..cfg.n_objects)
        .map(|_| MovingObject {
            pos: [rng.random_range(0.0..cfg.width), rng.random_range(0.0..cfg.height)],
            heading: rng.random_range(0.0..2.0 * PI),
        })
        .collect();
    let uav_phase: Vec<f64> = (0..cfg.n_uavs)
        .map(|_| rng.random_range(0.0..2.0 * cfg.height))
        .collect();
    let uavs = uav_phase
        .iter()
        .enumerate()
        .map(|(i, &p)| uav_position(cfg, i, p, 0))
        .collect();
    WorldState {
        objects,
        uav_phase,
        uavs,
        t: 0,
    }
}

fn reflect(v: f64, hi: f64) -> f64 {
    let period = 2.0 * hi;
    let u = v.rem_euclid(period);
    if u <= hi { u } else { period - u }
}

/// Advance objects along their headings (reflecting off the walls), redraw
/// every heading, and move the UAVs one step along their lanes.
pub fn step_world<R: Rng + ?Sized>(cfg: &UavConfig, world: &mut WorldState, rng: &mut R) {
    for obj in &mut world.objects {
        let x = obj.pos[0] + cfg.object_speed * obj.heading.cos();
        let y = obj.pos[1] + cfg.object_speed * obj.heading.sin();
        obj.pos = [reflect(x, cfg.width), reflect(y, cfg.height)];
        obj.heading = rng.random_range(0.0..2.0 * PI);
    }
    world.t += 1;
    let t = world.t;
    for (i, (u, &p)) in world.uavs.iter_mut().zip(&world.uav_phase).enumerate() {
        *u = uav_position(cfg, i, p, t);
    }
}

/// Range and bearing of `target` seen from `radar`; bearing is 0 when they
/// coincide.
pub fn range_bearing(target: [f64; 2], radar: [f64; 2]) -> (f64, f64) {
    let dx = target[0] - radar[0];
    let dy = target[1] - radar[1];
    (dx.hypot(dy), dy.atan2(dx))
}

/// `∂r/∂(x, y)`; `None` below [`MIN_RANGE`].
pub fn range_jacobian(target: [f64; 2], radar: [f64; 2]) -> Option<[f64; 2]> {
    let dx = target[0] - radar[0];
    let dy = target[1] - radar[1];
    let r = dx.hypot(dy);
    (r >= MIN_RANGE).then(|| [dx / r, dy / r])
}

/// `∂θ/∂(x, y)`; `None` below [`MIN_RANGE`].
pub fn bearing_jacobian(target: [f64; 2], radar: [f64; 2]) -> Option<[f64; 2]> {
    let dx = target[0] - radar[0];
    let dy = target[1] - radar[1];
    let r2 = dx * dx + dy * dy;
    (r2.sqrt() >= MIN_RANGE).then(|| [-dy / r2, dx / r2])
}

/// Wrap an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI { PI } else { w }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadarMeasurement {
    pub uav: usize,
    pub object: usize,
    pub range: f64,
    pub bearing: f64,
    pub var_r: f64,
    pub var_theta: f64,
}

/// Noisy range/bearing pairs for every UAV-object pair within the radius.
pub fn sense<R: Rng + ?Sized>(cfg: &UavConfig, world: &WorldState, rng: &mut R) -> Vec<RadarMeasurement> {
    let (sr, st) = (cfg.sigma_r2.sqrt(), cfg.sigma_theta2.sqrt());
    let mut out = Vec::new();
    for (u, &radar) in world.uavs.iter().enumerate() {
        for (o, obj) in world.objects.iter().enumerate() {
            let (r, th) = range_bearing(obj.pos, radar);
            if r <= cfg.radius {
                let nr: f64 = rng.sample(StandardNormal);
                let nt: f64 = rng.sample(StandardNormal);
                out.push(RadarMeasurement {
                    uav: u,
                    object: o,
                    range: r + sr * nr,
                    bearing: wrap_angle(th + st * nt),
                    var_r: cfg.sigma_r2,
                    var_theta: cfg.sigma_theta2,
                });
            }
        }
    }
    out
}

/// Radius at which the expected number of scalar measurements per step
/// equals `target`, estimated from `steps` simulated steps.
pub fn calibrate_radius(cfg: &UavConfig, target: f64, steps: usize, seed: u64) -> Result<f64> {
    let pairs = cfg.n_objects * cfg.n_uavs;
    let frac = target / (2.0 * pairs as f64);
    if !(frac > 0.0 && frac <= 1.0) || steps == 0 {
        return Err(Error::param(
            "target",
            format!("must be within (0, {}] with steps >= 1", 2 * pairs),
        ));
    }
    let mut rng = substream(seed, &["calibrate".into()]);
    let mut world = init_world(cfg, &mut rng);
    let mut dists = Vec::with_capacity(steps * pairs);
    for _ in 0..steps {
        step_world(cfg, &mut world, &mut rng);
        for radar in &world.uavs {
            for obj in &world.objects {
                dists.push(range_bearing(obj.pos, *radar).0);
            }
        }
    }
    dists.sort_by(|a, b| a.total_cmp(b));
    let idx = ((frac * dists.len() as f64).ceil() as usize).clamp(1, dists.len()) - 1;
    Ok(dists[idx])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Channel {
    Range,
    Bearing,
}

/// One linearized scalar measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate {
    pub uav: usize,
    pub object: usize,
    pub channel: Channel,
    pub jacobian: [f64; 2],
    pub innovation: f64,
    pub variance: f64,
}

/// Linearize every measurement about the predicted object positions.
pub fn linearize(measurements: &[RadarMeasurement], uavs: &[[f64; 2]], x_pred: &DVector<f64>) -> Vec<Candidate> {
    let mut out = Vec::with_capacity(2 * measurements.len());
    for m in measurements {
        let p = [x_pred[2 * m.object], x_pred[2 * m.object + 1]];
        let radar = uavs[m.uav];
        let (r_hat, th_hat) = range_bearing(p, radar);
        if let Some(jac) = range_jacobian(p, radar) {
            out.push(Candidate {
                uav: m.uav,
                object: m.object,
                channel: Channel::Range,
                jacobian: jac,
                innovation: m.range - r_hat,
                variance: m.var_r,
            });
        }
        if let Some(jac) = bearing_jacobian(p, radar) {
            out.push(Candidate {
                uav: m.uav,
                object: m.object,
                channel: Channel::Bearing,
                jacobian: jac,
                innovation: wrap_angle(m.bearing - th_hat),
                variance: m.var_theta,
            });
        }
    }
    out
}

/// Dense rows of the candidates over the joint state of `n_objects`.
pub fn candidate_matrix(cands: &[Candidate], n_objects: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(cands.len(), 2 * n_objects);
    for (i, c) in cands.iter().enumerate() {
        h[(i, 2 * c.object)] = c.jacobian[0];
        h[(i, 2 * c.object + 1)] = c.jacobian[1];
    }
    h
}

/// Joint belief over all object positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Beliefs {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl Beliefs {
    pub fn position(&self, o: usize) -> [f64; 2] {
        [self.mean[2 * o], self.mean[2 * o + 1]]
    }
}

/// EKF measurement update in gain form with the rows in `selected`:
/// `S = H P Hᵀ + R`, `x += P Hᵀ S⁻¹ ν`, `P -= P Hᵀ S⁻¹ H P`.
pub fn ekf_update(beliefs: &mut Beliefs, cands: &[Candidate], selected: &[usize], n_objects: usize) -> Result<()> {
    if selected.is_empty() {
        return Ok(());
    }
    let sub: Vec<Candidate> = selected.iter().map(|&i| cands[i]).collect();
    let h = candidate_matrix(&sub, n_objects);
    let hp = &h * &beliefs.cov;
    let mut s = &hp * h.transpose();
    for (i, c) in sub.iter().enumerate() {
        s[(i, i)] += c.variance;
    }
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("EKF innovation covariance".into()))?;
    let x = chol.solve(&hp);
    let nu = DVector::from_iterator(sub.len(), sub.iter().map(|c| c.innovation));
    beliefs.mean += x.tr_mul(&nu);
    beliefs.cov -= hp.tr_mul(&x);
    symmetrize(&mut beliefs.cov);
    Ok(())
}

/// Per-step outcome of one scenario run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UavStepRecord {
    pub step: usize,
    pub candidates: usize,
    pub selected: usize,
    /// Mean squared position error over objects.
    pub mse: f64,
    /// Trace of the joint covariance divided by the object count.
    pub mean_trace: f64,
    pub f_value: f64,
    pub gain_evals: u64,
    pub select_time_s: f64,
    pub filter_time_s: f64,
    pub min_cov_eigenvalue: f64,
}

/// Per-object truth and estimate at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackPoint {
    pub step: usize,
    pub object: usize,
    pub true_pos: [f64; 2],
    pub est_pos: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UavRun {
    pub records: Vec<UavStepRecord>,
    pub track: Vec<TrackPoint>,
}

/// Incremental scenario driver, shared by [`run_scenario`] and the browser demo.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub cfg: UavConfig,
    pub world: WorldState,
    pub beliefs: Beliefs,
    pub policy: Policy,
    seed: u64,
    world_rng: crate::rng::StreamRng,
    /// Indices into `last_candidates` picked at the latest step.
    pub last_selected: Vec<usize>,
    pub last_candidates: Vec<Candidate>,
}

impl Scenario {
    /// The world and its noise depend only on `seed`, so different policies
    /// with equal seeds face the same trajectories and measurements.
    pub fn new(cfg: UavConfig, policy: Policy, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut init_rng = substream(seed, &["uav-init".into()]);
        let world = init_world(&cfg, &mut init_rng);
        let mut belief_rng = substream(seed, &["belief0".into()]);
        let sd = cfg.init_var.sqrt();
        let mean = DVector::from_fn(2 * cfg.n_objects, |i, _| {
            let z: f64 = belief_rng.sample(StandardNormal);
            world.objects[i / 2].pos[i % 2] + sd * z
        });
        let cov = DMatrix::identity(2 * cfg.n_objects, 2 * cfg.n_objects) * cfg.init_var;
        Ok(Self {
            world,
            beliefs: Beliefs { mean, cov },
            policy,
            seed,
            world_rng: substream(seed, &["uav-world".into()]),
            last_selected: Vec::new(),
            last_candidates: Vec::new(),
            cfg,
        })
    }

    pub fn step(&mut self) -> Result<UavStepRecord> {
        let cfg = &self.cfg;
        step_world(cfg, &mut self.world, &mut self.world_rng);
        let t = self.world.t;
        for i in 0..2 * cfg.n_objects {
            self.beliefs.cov[(i, i)] += cfg.q_var;
        }
        let mut radar_rng = substream(self.seed, &["radar".into(), t.into()]);
        let meas = sense(cfg, &self.world, &mut radar_rng);
        let cands = linearize(&meas, &self.world.uavs, &self.beliefs.mean);
        let n = cands.len();

        let (selected, f_value, gain_evals, select_time) = if n == 0 {
            (Vec::new(), 0.0, 0, 0.0)
        } else if matches!(self.policy, Policy::AllSensors) || cfg.budget >= n {
            ((0..n).collect(), f64::NAN, 0, 0.0)
        } else {
            let h = candidate_matrix(&cands, cfg.n_objects);
            let r: Vec<f64> = cands.iter().map(|c| c.variance).collect();
            let rows = SensorRows::new(&h, &r)?;
            let tag = self.policy.stream_tag();
            let mut rng = substream(self.seed, &["select".into(), tag.as_str().into(), t.into()]);
            let sel = self.policy.select(&self.beliefs.cov, &h, &rows, cfg.budget, &mut rng)?;
            (sel.selected, sel.f_final, sel.gain_evals, sel.wall_time)
        };

        let start = Instant::now();
        ekf_update(&mut self.beliefs, &cands, &selected, cfg.n_objects)?;
        let filter_time = start.elapsed().as_secs_f64();

        let mse = self
            .world
            .objects
            .iter()
            .enumerate()
            .map(|(o, obj)| {
                let e = self.beliefs.position(o);
                (obj.pos[0] - e[0]).powi(2) + (obj.pos[1] - e[1]).powi(2)
            })
            .sum::<f64>()
            / cfg.n_objects as f64;
        let record = UavStepRecord {
            step: t,
            candidates: n,
            selected: selected.len(),
            mse,
            mean_trace: trace(&self.beliefs.cov) / cfg.n_objects as f64,
            f_value,
            gain_evals,
            select_time_s: select_time,
            filter_time_s: filter_time,
            min_cov_eigenvalue: lambda_min(&self.beliefs.cov),
        };
        self.last_selected = selected;
        self.last_candidates = cands;
        Ok(record)
    }

    pub fn track_points(&self) -> Vec<TrackPoint> {
        self.world
            .objects
            .iter()
            .enumerate()
            .map(|(o, obj)| TrackPoint {
                step: self.world.t,
                object: o,
                true_pos: obj.pos,
                est_pos: self.beliefs.position(o),
            })
            .collect()
    }
}

/// Run one scenario for `cfg.horizon` steps.
pub fn run_scenario(cfg: &UavConfig, policy: Policy, seed: u64) -> Result<UavRun> {
    let mut sc = Scenario::new(cfg.clone(), policy, seed)?;
    let mut records = Vec::with_capacity(cfg.horizon);
    let mut track = Vec::with_capacity(cfg.horizon * cfg.n_objects);
    for _ in 0..cfg.horizon {
        records.push(sc.step()?);
        track.extend(sc.track_points());
    }
    Ok(UavRun { records, track })
}
