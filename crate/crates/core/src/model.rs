//! Stochastic PETC system definition, triggering rule, initial laws and rewards.
//!
//! The plant is the sample-and-hold linear SDE
//! `dζ = Aζ dt + B K ζ(t_i) dt + B_w dW` on `[t_i, t_{i+1})`, monitored every
//! sampling period (fixed to 1). An event fires at the first monitored instant
//! where `|ζ - ζ(t_i)|_∞ > ε`, or unconditionally after `k_max` periods.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Partition;

/// Sampling period; every integer time in this crate is a multiple of it.
pub const SAMPLING_PERIOD: f64 = 1.0;

/// Relative singular-value threshold for the Kalman rank test.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PetcSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub b_w: DMatrix<f64>,
    pub epsilon: f64,
    pub k_max: usize,
}

impl PetcSystem {
    /// Builds a system and refuses it unless every check of [`validate_system`] passes.
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        k: DMatrix<f64>,
        b_w: DMatrix<f64>,
        epsilon: f64,
        k_max: usize,
    ) -> Result<Self> {
        let sys = PetcSystem {
            a,
            b,
            k,
            b_w,
            epsilon,
            k_max,
        };
        validate_system(&sys)?.into_result()?;
        Ok(sys)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Closed-loop hold term `B·K`.
    pub fn bk(&self) -> DMatrix<f64> {
        &self.b * &self.k
    }

    /// Noise intensity `B_w B_wᵀ`.
    pub fn noise_intensity(&self) -> DMatrix<f64> {
        &self.b_w * self.b_w.transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub kalman_rank: usize,
    /// Ratio of largest to smallest singular value of the Kalman matrix.
    pub kalman_condition: f64,
    /// Informational only; the moment formulas do not need `A⁻¹`.
    pub a_invertible: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn into_result(self) -> Result<Self> {
        if let Some(bad) = self.failures().next() {
            return Err(Error::Assumption(format!("{}: {}", bad.name, bad.message)));
        }
        Ok(self)
    }
}

/// Checks dimensions, the triggering parameters and controllability of `(A, B_w)`.
///
/// Structural problems (shapes, `ε ≤ 0`, `k_max = 0`) are returned as errors;
/// a rank-deficient Kalman matrix is reported as a failed check.
pub fn validate_system(sys: &PetcSystem) -> Result<ValidationReport> {
    validate_system_with_tol(sys, DEFAULT_RANK_TOL)
}

pub fn validate_system_with_tol(sys: &PetcSystem, rank_tol: f64) -> Result<ValidationReport> {
    let n = sys.a.nrows();
    if n == 0 || sys.a.ncols() != n {
        return Err(Error::Dimension(format!(
            "A must be square and non-empty, got {}x{}",
            sys.a.nrows(),
            sys.a.ncols()
        )));
    }
    if sys.b.nrows() != n {
        return Err(Error::Dimension(format!("B has {} rows, expected {n}", sys.b.nrows())));
    }
    if sys.k.nrows() != sys.b.ncols() || sys.k.ncols() != n {
        return Err(Error::Dimension(format!(
            "K must be {}x{n}, got {}x{}",
            sys.b.ncols(),
            sys.k.nrows(),
            sys.k.ncols()
        )));
    }
    if sys.b_w.nrows() != n || sys.b_w.ncols() == 0 {
        return Err(Error::Dimension(format!(
            "B_w must have {n} rows and at least one column, got {}x{}",
            sys.b_w.nrows(),
            sys.b_w.ncols()
        )));
    }
    let all_finite = [&sys.a, &sys.b, &sys.k, &sys.b_w]
        .iter()
        .all(|m| m.iter().all(|v| v.is_finite()));
    if !all_finite {
        return Err(Error::Dimension("matrices contain non-finite entries".into()));
    }
    if !(sys.epsilon > 0.0) || !sys.epsilon.is_finite() {
        return Err(Error::Assumption(format!(
            "triggering threshold epsilon must be a finite value > 0, got {}",
            sys.epsilon
        )));
    }
    if sys.k_max < 1 {
        return Err(Error::Assumption("k_max must be at least 1".into()));
    }

    let kalman = kalman_matrix(&sys.a, &sys.b_w);
    let sv = kalman.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let thresh = rank_tol * smax;
    let rank = sv.iter().filter(|&&s| s > thresh).count();
    let smin = sv.iter().cloned().take(n).fold(f64::INFINITY, f64::min);
    let kalman_condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };

    let a_sv = sys.a.clone().svd(false, false).singular_values;
    let a_max = a_sv.iter().cloned().fold(0.0, f64::max);
    let a_min = a_sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let a_invertible = a_max > 0.0 && a_min > rank_tol * a_max;

    let checks = vec![
        Check {
            name: "dimensions".into(),
            passed: true,
            message: format!(
                "n={n}, inputs={}, noise channels={}",
                sys.b.ncols(),
                sys.b_w.ncols()
            ),
        },
        Check {
            name: "epsilon".into(),
            passed: true,
            message: format!("epsilon={} > 0", sys.epsilon),
        },
        Check {
            name: "k_max".into(),
            passed: true,
            message: format!("k_max={} >= 1", sys.k_max),
        },
        Check {
            name: "controllability".into(),
            passed: rank == n,
            message: format!(
                "(A, B_w) Kalman matrix rank {rank} of {n} (condition number {kalman_condition:.3e})"
            ),
        },
        Check {
            name: "a_invertible".into(),
            passed: true,
            message: if a_invertible {
                "A is invertible".into()
            } else {
                "A is singular; integral form of the mean is used".into()
            },
        },
    ];
    Ok(ValidationReport {
        checks,
        kalman_rank: rank,
        kalman_condition,
        a_invertible,
    })
}

/// `[B_w, A B_w, …, A^{n-1} B_w]`.
pub fn kalman_matrix(a: &DMatrix<f64>, b_w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = b_w.ncols();
    let mut out = DMatrix::zeros(n, n * m);
    let mut block = b_w.clone();
    for i in 0..n {
        out.view_mut((0, i * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    out
}

/// True iff sampling `y` after last sample `x` fires an event (`|y - x|_∞ > ε`).
///
/// The triggering set `{y : |y - x|_∞ ≤ ε}` is closed, so the boundary does not fire.
pub fn trigger_violated(x: &[f64], y: &[f64], epsilon: f64) -> bool {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).any(|(a, b)| (b - a).abs() > epsilon)
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialDistribution {
    /// Uniform over the analysis region X.
    Uniform,
    PointMass(DVector<f64>),
    Gaussian { mean: DVector<f64>, cov: DMatrix<f64> },
}

impl InitialDistribution {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            InitialDistribution::Uniform => Ok(()),
            InitialDistribution::PointMass(x) => {
                if x.len() != n {
                    return Err(Error::Dimension(format!("point mass has length {}, expected {n}", x.len())));
                }
                Ok(())
            }
            InitialDistribution::Gaussian { mean, cov } => {
                if mean.len() != n || cov.nrows() != n || cov.ncols() != n {
                    return Err(Error::Dimension(format!("gaussian initial law must be {n}-dimensional")));
                }
                if (cov - cov.transpose()).amax() > 1e-12 * (1.0 + cov.amax()) {
                    return Err(Error::config("initial_distribution.cov", "covariance must be symmetric"));
                }
                let min_eig = cov.clone().symmetric_eigenvalues().min();
                if min_eig < -1e-12 * (1.0 + cov.amax()) {
                    return Err(Error::Degenerate {
                        what: "initial covariance is not positive semidefinite".into(),
                        min_eigenvalue: min_eig,
                    });
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RewardKind {
    /// `R((x, s)) = s`.
    IntereventTime,
    /// `R((x, s)) = min(α / (|x|₂ + ε̃) + β s, R_max)`.
    OvershootPenalty {
        alpha: f64,
        beta: f64,
        eps_tilde: f64,
        r_max: f64,
    },
    /// Per-(region, s) reward ranges plus a global row for the unsafe state.
    Table {
        entries: BTreeMap<(usize, usize), (f64, f64)>,
        default: Option<(f64, f64)>,
        unsafe_row: Option<(f64, f64)>,
        r_max: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardSpec {
    pub kind: RewardKind,
    pub gamma: f64,
}

impl RewardSpec {
    pub fn interevent_time(gamma: f64) -> Self {
        RewardSpec {
            kind: RewardKind::IntereventTime,
            gamma,
        }
    }

    /// Upper bound on the reward over the whole state space.
    pub fn r_max(&self, k_max: usize) -> f64 {
        match &self.kind {
            RewardKind::IntereventTime => k_max as f64,
            RewardKind::OvershootPenalty { r_max, .. } => *r_max,
            RewardKind::Table { r_max, .. } => *r_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("solver.gamma", format!("discount must lie in [0, 1), got {}", self.gamma)));
        }
        match &self.kind {
            RewardKind::IntereventTime => Ok(()),
            RewardKind::OvershootPenalty {
                alpha,
                beta,
                eps_tilde,
                r_max,
            } => {
                if !(*alpha > 0.0 && *beta >= 0.0 && *eps_tilde > 0.0 && *r_max > 0.0) {
                    return Err(Error::config(
                        "reward",
                        "overshoot penalty needs alpha > 0, beta >= 0, eps_tilde > 0, r_max > 0",
                    ));
                }
                Ok(())
            }
            RewardKind::Table {
                entries,
                default,
                unsafe_row,
                r_max,
            } => {
                let ok = |(lo, hi): (f64, f64)| 0.0 <= lo && lo <= hi && hi <= *r_max;
                for (&(region, s), &range) in entries {
                    if !ok(range) {
                        return Err(Error::config(
                            "reward.entries",
                            format!("entry (region {region}, s {s}) must satisfy 0 <= min <= max <= r_max"),
                        ));
                    }
                }
                if let Some(d) = default {
                    if !ok(*d) {
                        return Err(Error::config("reward.default", "must satisfy 0 <= min <= max <= r_max"));
                    }
                }
                match unsafe_row {
                    None => Err(Error::config("reward.unsafe", "table rewards require an unsafe row")),
                    Some(u) if !ok(*u) => {
                        Err(Error::config("reward.unsafe", "must satisfy 0 <= min <= max <= r_max"))
                    }
                    Some(_) => Ok(()),
                }
            }
        }
    }

    /// Pointwise reward `R((x, s))` used by the simulator.
    ///
    /// Table rewards have no pointwise law; the midpoint of the governing entry
    /// is used (the unsafe row outside X).
    pub fn value(&self, x: &[f64], s: usize, partition: &Partition) -> f64 {
        match &self.kind {
            RewardKind::IntereventTime => s as f64,
            RewardKind::OvershootPenalty {
                alpha,
                beta,
                eps_tilde,
                r_max,
            } => {
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                (alpha / (norm + eps_tilde) + beta * s as f64).min(*r_max)
            }
            RewardKind::Table {
                entries,
                default,
                unsafe_row,
                ..
            } => {
                let range = match partition.locate(x) {
                    Some(cell) => entries.get(&(cell, s)).copied().or(*default),
                    None => *unsafe_row,
                };
                range.map(|(lo, hi)| 0.5 * (lo + hi)).unwrap_or(0.0)
            }
        }
    }
}
