//! Budgeted sensor scheduling for Kalman filtering.
//!
//! The crate selects `K` of `n` scalar sensors per time step so that the
//! filtered error covariance trace (the MSE) is as small as possible. The
//! objective `f(S) = Tr(P_pred) - Tr(F_S^-1)` is monotone but not submodular;
//! it is maximized with classical greedy, randomized greedy (sampled
//! candidates per iteration) or exhaustive search, and the [`curvature`]
//! module quantifies how far `f` is from submodular along with the resulting
//! approximation guarantees.
//!
//! Module map:
//!
//! * [`model`]: problem instances, random generators, the instance file format.
//! * [`objective`]: `f(S)`, closed-form marginal gains, rank-1 inverse-Fisher updates.
//! * [`kalman`]: predict/update restricted to a selected subset, full-horizon runs.
//! * [`selection`]: greedy, randomized greedy, exhaustive and random selectors.
//! * [`curvature`]: element-wise curvature, curvature bounds, approximation factors.
//! * [`experiments`]: Monte-Carlo harness and CSV/JSON reports.
//! * [`uav`]: multi-object radar tracking with an extended Kalman filter.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curvature;
pub mod error;
pub mod experiments;
pub mod kalman;
pub mod linalg;
pub mod model;
pub mod objective;
pub mod rng;
pub mod selection;
pub mod uav;

pub use error::{Error, Result};
