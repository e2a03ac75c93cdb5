//! The MSE set function `f(S) = Tr(P_pred) - Tr(F_S^-1)` and its rank-1
//! machinery.
//!
//! With `F_S = P_pred^-1 + sum_{j in S} h_j h_jᵀ / sigma_j^2`, adding sensor `j`
//! changes the inverse by a Sherman–Morrison step
//!
//! ```text
//! F_{S+j}^-1 = F_S^-1 - (F_S^-1 h_j)(F_S^-1 h_j)ᵀ / (sigma_j^2 + h_jᵀ F_S^-1 h_j)
//! ```
//!
//! so the marginal gain is `|F_S^-1 h_j|^2 / (sigma_j^2 + h_jᵀ F_S^-1 h_j)`,
//! one `O(m^2)` matrix-vector product per candidate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{dot, matvec_into, symmetrize, trace};

/// Candidate measurement rows of one time step, stored column-wise so that
/// `h_j` is a contiguous slice.
#[derive(Debug, Clone)]
pub struct SensorRows {
    cols: DMatrix<f64>,
    noise: Vec<f64>,
    zero: Vec<bool>,
}

impl SensorRows {
    /// `h` is `n x m` (one row per sensor), `r_diag` the `n` noise variances.
    pub fn new(h: &DMatrix<f64>, r_diag: &[f64]) -> Result<Self> {
        let (n, _) = h.shape();
        if r_diag.len() != n {
            return Err(Error::Dimension(format!(
                "H has {n} rows but R_diag has {} entries",
                r_diag.len()
            )));
        }
        if let Some(v) = r_diag.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::param("R_diag", format!("non-positive variance {v}")));
        }
        let cols = h.transpose();
        let zero = (0..n)
            .map(|j| cols.column(j).iter().all(|v| *v == 0.0))
            .collect();
        Ok(Self {
            cols,
            noise: r_diag.to_vec(),
            zero,
        })
    }

    pub fn len(&self) -> usize {
        self.cols.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.cols.nrows()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let m = self.dim();
        &self.cols.as_slice()[j * m..(j + 1) * m]
    }

    pub fn noise(&self, j: usize) -> f64 {
        self.noise[j]
    }

    pub fn is_zero_row(&self, j: usize) -> bool {
        self.zero[j]
    }

    pub fn zero_rows(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.zero[j]).collect()
    }
}

/// A selected set together with its maintained inverse Fisher matrix.
///
/// Cloning gives an independent state; read-only gain queries can be shared
/// across threads.
#[derive(Debug, Clone)]
pub struct FisherState<'a> {
    rows: &'a SensorRows,
    p_pred: DMatrix<f64>,
    trace_p: f64,
    f_inv: DMatrix<f64>,
    selected: Vec<usize>,
    member: Vec<bool>,
}

impl<'a> FisherState<'a> {
    /// Empty selection: `F_inv == P_pred`.
    pub fn new(p_pred: &DMatrix<f64>, rows: &'a SensorRows) -> Result<Self> {
        let m = rows.dim();
        if p_pred.shape() != (m, m) {
            return Err(Error::Dimension(format!(
                "P_pred is {}x{}, rows have dimension {m}",
                p_pred.nrows(),
                p_pred.ncols()
            )));
        }
        Ok(Self {
            rows,
            p_pred: p_pred.clone(),
            trace_p: trace(p_pred),
            f_inv: p_pred.clone(),
            selected: Vec::new(),
            member: vec![false; rows.len()],
        })
    }

    pub fn rows(&self) -> &'a SensorRows {
        self.rows
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn contains(&self, j: usize) -> bool {
        self.member[j]
    }

    pub fn f_inv(&self) -> &DMatrix<f64> {
        &self.f_inv
    }

    pub fn into_f_inv(self) -> DMatrix<f64> {
        self.f_inv
    }

    pub fn p_pred(&self) -> &DMatrix<f64> {
        &self.p_pred
    }

    /// `Tr(F_S^-1)`, the MSE of the filtered estimate.
    pub fn mse(&self) -> f64 {
        trace(&self.f_inv)
    }

    /// `f(S) = Tr(P_pred) - Tr(F_S^-1)`; exactly zero for the empty set.
    pub fn f_value(&self) -> f64 {
        if self.selected.is_empty() {
            return 0.0;
        }
        self.trace_p - self.mse()
    }

    fn check_candidate(&self, j: usize) -> Result<()> {
        if j >= self.rows.len() {
            return Err(Error::Usage(format!(
                "sensor index {j} out of range (n = {})",
                self.rows.len()
            )));
        }
        if self.member[j] {
            return Err(Error::Usage(format!("sensor {j} is already selected")));
        }
        Ok(())
    }

    /// Marginal gain `f(S + j) - f(S)`.
    pub fn marginal_gain(&self, j: usize) -> Result<f64> {
        self.check_candidate(j)?;
        let mut v = vec![0.0; self.rows.dim()];
        self.gain_with(j, &mut v)
    }

    /// Gain of an unselected candidate, using `scratch` (length `m`) for
    /// `F_inv h_j`. Does not check membership.
    #[inline]
    pub(crate) fn gain_with(&self, j: usize, scratch: &mut [f64]) -> Result<f64> {
        if self.rows.is_zero_row(j) {
            return Ok(0.0);
        }
        let h = self.rows.row(j);
        matvec_into(&self.f_inv, h, scratch);
        let denom = self.rows.noise(j) + dot(h, scratch);
        if !(denom > 0.0) {
            return Err(Error::Numerical(format!(
                "non-positive Sherman-Morrison denominator {denom} for sensor {j}"
            )));
        }
        Ok(dot(scratch, scratch) / denom)
    }

    /// Add sensor `j`, applying the rank-1 update and re-symmetrizing.
    pub fn add_sensor(&mut self, j: usize) -> Result<()> {
        self.check_candidate(j)?;
        self.member[j] = true;
        self.selected.push(j);
        if self.rows.is_zero_row(j) {
            return Ok(());
        }
        let h = self.rows.row(j);
        let m = h.len();
        let mut v = vec![0.0; m];
        matvec_into(&self.f_inv, h, &mut v);
        let denom = self.rows.noise(j) + dot(h, &v);
        if !(denom > 0.0) {
            return Err(Error::Numerical(format!(
                "non-positive Sherman-Morrison denominator {denom} for sensor {j}"
            )));
        }
        let v = DVector::from_vec(v);
        self.f_inv.ger(-1.0 / denom, &v, &v, 1.0);
        symmetrize(&mut self.f_inv);
        Ok(())
    }

    /// Value-style variant of [`add_sensor`](Self::add_sensor).
    pub fn with_sensor(&self, j: usize) -> Result<Self> {
        let mut next = self.clone();
        next.add_sensor(j)?;
        Ok(next)
    }
}

/// `Tr(P_pred) - Tr((P_pred^-1 + sum_{j in S} h_j h_jᵀ / sigma_j^2)^-1)`
/// by direct dense inversion. Used by exhaustive search and as a test
/// reference.
pub fn f_direct(p_pred: &DMatrix<f64>, h: &DMatrix<f64>, r_diag: &[f64], subset: &[usize]) -> Result<f64> {
    let inv = posterior_direct(p_pred, h, r_diag, subset)?;
    Ok(trace(p_pred) - trace(&inv))
}

/// `(P_pred^-1 + H_Sᵀ diag(1/sigma^2) H_S)^-1` by Cholesky inversion.
pub fn posterior_direct(
    p_pred: &DMatrix<f64>,
    h: &DMatrix<f64>,
    r_diag: &[f64],
    subset: &[usize],
) -> Result<DMatrix<f64>> {
    let mut fisher = crate::linalg::spd_inverse(p_pred, "P_pred")?;
    for &j in subset {
        let row = h.row(j).transpose();
        fisher.ger(1.0 / r_diag[j], &row, &row, 1.0);
    }
    crate::linalg::spd_inverse(&fisher, "Fisher information")
}
