//! Problem instances of the linear time-varying state-space model
//!
//! ```text
//! x_{t+1} = A_t x_t + w_t,   w_t ~ N(0, Q)
//! y_t     = H_t x_t + v_t,   v_t ~ N(0, diag(R_diag))
//! x_0 ~ N(mu_0, Sigma_x)
//! ```
//!
//! together with the selection budget `K`, random measurement-matrix
//! generators and the JSON file formats shared with external tools.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_symmetric_psd, from_rows, to_rows};
use crate::rng::substream;

pub const INSTANCE_VERSION: &str = "ksched-instance-v1";
pub const STEP_VERSION: &str = "ksched-step-v1";
pub const SELECTION_VERSION: &str = "ksched-selection-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementKind {
    /// Rows drawn i.i.d. from `N(0, variance * I_m)`.
    GaussianIid,
    /// Entries `±sqrt(variance)` with equal probability.
    BernoulliCentered,
    /// Rows supplied by the caller.
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementGeneratorSpec {
    pub kind: MeasurementKind,
    /// Per-entry variance `sigma_h^2`; `1/m` gives `E||h||^2 = 1`.
    pub variance: f64,
}

impl MeasurementGeneratorSpec {
    pub fn gaussian(m: usize) -> Self {
        Self {
            kind: MeasurementKind::GaussianIid,
            variance: 1.0 / m as f64,
        }
    }

    pub fn bernoulli(m: usize) -> Self {
        Self {
            kind: MeasurementKind::BernoulliCentered,
            variance: 1.0 / m as f64,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            return Err(Error::param(
                "variance",
                format!("must be positive, got {}", self.variance),
            ));
        }
        if self.kind == MeasurementKind::Explicit {
            return Err(Error::param(
                "kind",
                "explicit measurements cannot be generated",
            ));
        }
        Ok(())
    }

    /// Draw one `n x m` measurement matrix, filled row-major.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, m: usize, rng: &mut R) -> DMatrix<f64> {
        let sd = self.variance.sqrt();
        let mut h = DMatrix::zeros(n, m);
        for i in 0..n {
            for j in 0..m {
                h[(i, j)] = match self.kind {
                    MeasurementKind::GaussianIid => sd * rng.sample::<f64, _>(StandardNormal),
                    MeasurementKind::BernoulliCentered => {
                        if rng.random::<bool>() {
                            sd
                        } else {
                            -sd
                        }
                    }
                    MeasurementKind::Explicit => unreachable!("validated"),
                };
            }
        }
        h
    }
}

/// State-transition matrices `A_t`.
#[derive(Debug, Clone, PartialEq)]
pub enum Transition {
    Identity,
    Constant(DMatrix<f64>),
    PerStep(Vec<DMatrix<f64>>),
}

impl Transition {
    /// `None` means identity.
    pub fn at(&self, t: usize) -> Option<&DMatrix<f64>> {
        match self {
            Transition::Identity => None,
            Transition::Constant(a) => Some(a),
            Transition::PerStep(v) => Some(&v[t]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub horizon: usize,
    pub a: Transition,
    pub q: DMatrix<f64>,
    pub r_diag: Vec<f64>,
    pub sigma_x: DMatrix<f64>,
    /// Prior mean of `x_0`; zero when absent.
    pub prior_mean: Option<DVector<f64>>,
    /// One `n x m` matrix per time step.
    pub h: Vec<DMatrix<f64>>,
    /// How `h` was produced, when it came from a generator.
    pub generator: Option<MeasurementGeneratorSpec>,
    pub seed: u64,
}

impl ProblemInstance {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::field("m", "must be at least 1"));
        }
        if self.n == 0 {
            return Err(Error::field("n", "must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(Error::field("horizon", "must be at least 1"));
        }
        if self.k == 0 || self.k > self.n {
            return Err(Error::field(
                "K",
                format!("must satisfy 1 <= K <= n = {}, got {}", self.n, self.k),
            ));
        }
        if self.r_diag.len() != self.n {
            return Err(Error::field(
                "R_diag",
                format!("expected {} entries, got {}", self.n, self.r_diag.len()),
            ));
        }
        if let Some((j, v)) = self
            .r_diag
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
        {
            return Err(Error::field(
                "R_diag",
                format!("non-positive variance {v} at index {j}"),
            ));
        }
        let square = |field: &str, a: &DMatrix<f64>| -> Result<()> {
            if a.nrows() != self.m || a.ncols() != self.m {
                return Err(Error::field(
                    field,
                    format!("expected {0}x{0}, got {1}x{2}", self.m, a.nrows(), a.ncols()),
                ));
            }
            Ok(())
        };
        square("Q", &self.q)?;
        check_symmetric_psd("Q", &self.q)?;
        square("Sigma_x", &self.sigma_x)?;
        check_symmetric_psd("Sigma_x", &self.sigma_x)?;
        match &self.a {
            Transition::Identity => {}
            Transition::Constant(a) => square("A", a)?,
            Transition::PerStep(v) => {
                if v.len() != self.horizon {
                    return Err(Error::field(
                        "A",
                        format!("expected {} matrices, got {}", self.horizon, v.len()),
                    ));
                }
                for a in v {
                    square("A", a)?;
                }
            }
        }
        if let Some(mu) = &self.prior_mean {
            if mu.len() != self.m {
                return Err(Error::field(
                    "prior_mean",
                    format!("expected {} entries, got {}", self.m, mu.len()),
                ));
            }
        }
        if self.h.len() != self.horizon {
            return Err(Error::field(
                "H",
                format!("expected {} time steps, got {}", self.horizon, self.h.len()),
            ));
        }
        for (t, h) in self.h.iter().enumerate() {
            if h.nrows() != self.n || h.ncols() != self.m {
                return Err(Error::field(
                    "H",
                    format!(
                        "step {t}: expected {}x{}, got {}x{}",
                        self.n,
                        self.m,
                        h.nrows(),
                        h.ncols()
                    ),
                ));
            }
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::field("H", format!("step {t}: non-finite entry")));
            }
        }
        Ok(())
    }

    pub fn prior_mean(&self) -> DVector<f64> {
        self.prior_mean
            .clone()
            .unwrap_or_else(|| DVector::zeros(self.m))
    }

    /// Copy of the instance with a different budget.
    pub fn with_budget(&self, k: usize) -> Result<Self> {
        let mut out = self.clone();
        out.k = k;
        out.validate()?;
        Ok(out)
    }
}

/// Generate an instance with `A = I`, `Q = q_var I`, `R = r_var I`,
/// `Sigma_x = I` and fresh random measurement rows at every step.
///
/// Step `t` draws its matrix from the stream `(seed, "H", t)`, so the first
/// steps do not depend on `horizon`.
#[allow(clippy::too_many_arguments)]
pub fn generate_instance(
    spec: MeasurementGeneratorSpec,
    m: usize,
    n: usize,
    k: usize,
    horizon: usize,
    q_var: f64,
    r_var: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    spec.validate()?;
    if m == 0 {
        return Err(Error::param("m", "must be at least 1"));
    }
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    if horizon == 0 {
        return Err(Error::param("horizon", "must be at least 1"));
    }
    if k == 0 || k > n {
        return Err(Error::param("K", format!("must satisfy 1 <= K <= n, got {k}")));
    }
    if !(q_var > 0.0 && q_var.is_finite()) {
        return Err(Error::param("q_var", "non-positive variance"));
    }
    if !(r_var > 0.0 && r_var.is_finite()) {
        return Err(Error::param("r_var", "non-positive variance"));
    }
    let h = (0..horizon)
        .map(|t| {
            let mut rng = substream(seed, &["H".into(), t.into()]);
            spec.sample(n, m, &mut rng)
        })
        .collect();
    let inst = ProblemInstance {
        m,
        n,
        k,
        horizon,
        a: Transition::Identity,
        q: DMatrix::identity(m, m) * q_var,
        r_diag: vec![r_var; n],
        sigma_x: DMatrix::identity(m, m),
        prior_mean: None,
        h,
        generator: Some(spec),
        seed,
    };
    inst.validate()?;
    Ok(inst)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum TransitionRepr {
    Symbol(String),
    Constant(Vec<Vec<f64>>),
    PerStep(Vec<Vec<Vec<f64>>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    version: String,
    m: usize,
    n: usize,
    #[serde(rename = "K")]
    k: usize,
    horizon: usize,
    #[serde(rename = "A")]
    a: TransitionRepr,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "R_diag")]
    r_diag: Vec<f64>,
    #[serde(rename = "Sigma_x")]
    sigma_x: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prior_mean: Option<Vec<f64>>,
    #[serde(rename = "H")]
    h: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generator: Option<MeasurementGeneratorSpec>,
    seed: u64,
}

impl From<&ProblemInstance> for InstanceFile {
    fn from(x: &ProblemInstance) -> Self {
        let a = match &x.a {
            Transition::Identity => TransitionRepr::Symbol("identity".into()),
            Transition::Constant(a) => TransitionRepr::Constant(to_rows(a)),
            Transition::PerStep(v) => TransitionRepr::PerStep(v.iter().map(to_rows).collect()),
        };
        InstanceFile {
            version: INSTANCE_VERSION.into(),
            m: x.m,
            n: x.n,
            k: x.k,
            horizon: x.horizon,
            a,
            q: to_rows(&x.q),
            r_diag: x.r_diag.clone(),
            sigma_x: to_rows(&x.sigma_x),
            prior_mean: x.prior_mean.as_ref().map(|v| v.iter().copied().collect()),
            h: x.h.iter().map(to_rows).collect(),
            generator: x.generator,
            seed: x.seed,
        }
    }
}

impl TryFrom<InstanceFile> for ProblemInstance {
    type Error = Error;

    fn try_from(f: InstanceFile) -> Result<Self> {
        if f.version != INSTANCE_VERSION {
            return Err(Error::field(
                "version",
                format!("expected {INSTANCE_VERSION:?}, got {:?}", f.version),
            ));
        }
        let a = match f.a {
            TransitionRepr::Symbol(s) if s == "identity" => Transition::Identity,
            TransitionRepr::Symbol(s) => {
                return Err(Error::field("A", format!("unknown symbol {s:?}")))
            }
            TransitionRepr::Constant(rows) => Transition::Constant(from_rows("A", &rows)?),
            TransitionRepr::PerStep(steps) => Transition::PerStep(
                steps
                    .iter()
                    .map(|rows| from_rows("A", rows))
                    .collect::<Result<_>>()?,
            ),
        };
        let inst = ProblemInstance {
            m: f.m,
            n: f.n,
            k: f.k,
            horizon: f.horizon,
            a,
            q: from_rows("Q", &f.q)?,
            r_diag: f.r_diag,
            sigma_x: from_rows("Sigma_x", &f.sigma_x)?,
            prior_mean: f.prior_mean.map(DVector::from_vec),
            h: f
                .h
                .iter()
                .map(|rows| from_rows("H", rows))
                .collect::<Result<_>>()?,
            generator: f.generator,
            seed: f.seed,
        };
        inst.validate()?;
        Ok(inst)
    }
}

pub fn instance_to_json(instance: &ProblemInstance) -> Result<String> {
    Ok(serde_json::to_string(&InstanceFile::from(instance))?)
}

pub fn instance_from_json(text: &str) -> Result<ProblemInstance> {
    let file: InstanceFile = serde_json::from_str(text)?;
    file.try_into()
}

pub fn save_instance(instance: &ProblemInstance, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, instance_to_json(instance)?)?;
    Ok(())
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<ProblemInstance> {
    instance_from_json(&fs::read_to_string(path)?)
}

/// One time step's selection problem: the predicted covariance, candidate
/// rows and their noise variances. Exchanged with external solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct StepProblem {
    pub step: usize,
    pub k: usize,
    pub p_pred: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub r_diag: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepFile {
    version: String,
    step: usize,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "P_pred")]
    p_pred: Vec<Vec<f64>>,
    #[serde(rename = "H")]
    h: Vec<Vec<f64>>,
    #[serde(rename = "R_diag")]
    r_diag: Vec<f64>,
}

impl StepProblem {
    pub fn validate(&self) -> Result<()> {
        let (n, m) = self.h.shape();
        if self.p_pred.shape() != (m, m) {
            return Err(Error::field("P_pred", format!("expected {m}x{m}")));
        }
        check_symmetric_psd("P_pred", &self.p_pred)?;
        if self.r_diag.len() != n {
            return Err(Error::field("R_diag", format!("expected {n} entries")));
        }
        if self.r_diag.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::field("R_diag", "non-positive variance"));
        }
        if self.k == 0 || self.k > n {
            return Err(Error::field("K", format!("must satisfy 1 <= K <= {n}")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&StepFile {
            version: STEP_VERSION.into(),
            step: self.step,
            k: self.k,
            p_pred: to_rows(&self.p_pred),
            h: to_rows(&self.h),
            r_diag: self.r_diag.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: StepFile = serde_json::from_str(text)?;
        if f.version != STEP_VERSION {
            return Err(Error::field("version", format!("expected {STEP_VERSION:?}")));
        }
        let out = StepProblem {
            step: f.step,
            k: f.k,
            p_pred: from_rows("P_pred", &f.p_pred)?,
            h: from_rows("H", &f.h)?,
            r_diag: f.r_diag,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// A chosen subset for one step, as written by any selector (including
/// external ones) and scored by `ksched score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionFile {
    pub version: String,
    pub step: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub selected: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl SelectionFile {
    pub fn new(step: usize, selected: Vec<usize>, source: impl Into<String>) -> Self {
        Self {
            version: SELECTION_VERSION.into(),
            step,
            k: selected.len(),
            selected,
            source: Some(source.into()),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f: SelectionFile = serde_json::from_str(&fs::read_to_string(path)?)?;
        if f.version != SELECTION_VERSION {
            return Err(Error::field(
                "version",
                format!("expected {SELECTION_VERSION:?}"),
            ));
        }
        if f.selected.len() != f.k {
            return Err(Error::field(
                "selected",
                format!("has {} entries but K = {}", f.selected.len(), f.k),
            ));
        }
        Ok(f)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ProblemInstance {
        generate_instance(MeasurementGeneratorSpec::gaussian(2), 2, 3, 2, 2, 0.05, 0.05, 11)
            .unwrap()
    }

    #[test]
    fn generated_instance_shape() {
        let inst = generate_instance(
            MeasurementGeneratorSpec::gaussian(50),
            50,
            400,
            55,
            10,
            0.05,
            0.05,
            7,
        )
        .unwrap();
        assert_eq!(inst.a, Transition::Identity);
        assert_eq!(inst.h.len(), 10);
        assert_eq!(inst.h[0].shape(), (400, 50));
        assert_eq!(inst.q, DMatrix::identity(50, 50) * 0.05);
    }

    #[test]
    fn bernoulli_rows_have_unit_norm() {
        let inst = generate_instance(
            MeasurementGeneratorSpec::bernoulli(4),
            4,
            3,
            1,
            5,
            0.05,
            0.05,
            3,
        )
        .unwrap();
        for h in &inst.h {
            for i in 0..3 {
                assert_eq!(h.row(i).norm_squared(), 1.0);
                assert!(h.row(i).iter().all(|v| v.abs() == 0.5));
            }
        }
    }

    #[test]
    fn generation_is_deterministic_and_horizon_invariant() {
        let spec = MeasurementGeneratorSpec::gaussian(3);
        let a = generate_instance(spec, 3, 5, 2, 4, 0.05, 0.05, 99).unwrap();
        let b = generate_instance(spec, 3, 5, 2, 4, 0.05, 0.05, 99).unwrap();
        assert_eq!(a, b);
        let longer = generate_instance(spec, 3, 5, 2, 9, 0.05, 0.05, 99).unwrap();
        assert_eq!(&longer.h[..4], &a.h[..]);
        let other = generate_instance(spec, 3, 5, 2, 4, 0.05, 0.05, 100).unwrap();
        assert_ne!(a.h, other.h);
    }

    #[test]
    fn rejects_bad_parameters() {
        let spec = MeasurementGeneratorSpec::gaussian(2);
        assert!(generate_instance(spec, 0, 3, 1, 1, 0.05, 0.05, 0).is_err());
        assert!(generate_instance(spec, 2, 3, 4, 1, 0.05, 0.05, 0).is_err());
        assert!(generate_instance(spec, 2, 3, 1, 1, 0.0, 0.05, 0).is_err());
        assert!(generate_instance(spec, 2, 3, 1, 1, 0.05, -1.0, 0).is_err());
        let bad = MeasurementGeneratorSpec {
            kind: MeasurementKind::GaussianIid,
            variance: 0.0,
        };
        assert!(generate_instance(bad, 2, 3, 1, 1, 0.05, 0.05, 0).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut inst = tiny();
        inst.prior_mean = Some(DVector::from_vec(vec![0.1, 1.0 / 3.0]));
        let back = instance_from_json(&instance_to_json(&inst).unwrap()).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn zero_variance_is_rejected_by_name() {
        let mut inst = tiny();
        inst.r_diag[1] = 0.0;
        let text = instance_to_json(&inst).unwrap();
        let err = instance_from_json(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("R_diag"), "{msg}");
        assert!(msg.contains("non-positive variance"), "{msg}");
    }

    #[test]
    fn explicit_h_shape_preserved() {
        let text = r#"{
            "version": "ksched-instance-v1",
            "m": 2, "n": 3, "K": 1, "horizon": 2,
            "A": "identity",
            "Q": [[0.05, 0.0], [0.0, 0.05]],
            "R_diag": [1.0, 1.0, 2.0],
            "Sigma_x": [[1.0, 0.0], [0.0, 1.0]],
            "H": [[[1, 0], [0, 1], [1, 1]], [[2, 0], [0, 2], [1, -1]]],
            "seed": 0
        }"#;
        let inst = instance_from_json(text).unwrap();
        assert_eq!(inst.h.len(), 2);
        assert_eq!(inst.h[1].shape(), (3, 2));
        assert_eq!(inst.h[1][(2, 1)], -1.0);
        assert!(inst.generator.is_none());
    }

    #[test]
    fn malformed_files_name_the_field() {
        let missing = r#"{"version": "ksched-instance-v1", "m": 1}"#;
        let msg = instance_from_json(missing).unwrap_err().to_string();
        assert!(msg.contains("missing field"), "{msg}");

        let ragged = r#"{
            "version": "ksched-instance-v1", "m": 2, "n": 1, "K": 1, "horizon": 1,
            "A": "identity", "Q": [[1, 0], [0]], "R_diag": [1],
            "Sigma_x": [[1, 0], [0, 1]], "H": [[[1, 0]]], "seed": 0
        }"#;
        let msg = instance_from_json(ragged).unwrap_err().to_string();
        assert!(msg.contains("`Q`"), "{msg}");

        let bad_a = r#"{
            "version": "ksched-instance-v1", "m": 1, "n": 1, "K": 1, "horizon": 1,
            "A": "rotation", "Q": [[1]], "R_diag": [1],
            "Sigma_x": [[1]], "H": [[[1]]], "seed": 0
        }"#;
        let msg = instance_from_json(bad_a).unwrap_err().to_string();
        assert!(msg.contains("`A`"), "{msg}");
    }

    #[test]
    fn step_file_round_trip() {
        let inst = tiny();
        let step = StepProblem {
            step: 0,
            k: 2,
            p_pred: &inst.sigma_x + &inst.q,
            h: inst.h[0].clone(),
            r_diag: inst.r_diag.clone(),
        };
        let back = StepProblem::from_json(&step.to_json().unwrap()).unwrap();
        assert_eq!(back, step);
    }
}
