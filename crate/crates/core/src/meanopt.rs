//! Extremes of a Gaussian rectangle probability as its mean ranges over a set.
//!
//! `y ↦ P(Z + y ∈ rect)` is log-concave, so its minimum over a polytope sits at
//! a vertex and any stationary point of the logarithm over a convex box is a
//! global maximum.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussint::{
    default_fd_step, mvn_rect_prob, prob_and_log_grad, std_normal_cdf, IntegratorSettings, ProbEstimate,
};
use crate::geometry::{extreme_candidates, HyperRect};

pub const DEFAULT_OPT_SLACK: f64 = 1e-4;
pub const DEFAULT_OPT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 500;
const ARMIJO: f64 = 1e-4;
const SHRINK: f64 = 0.5;
/// Number of best-valued starting points that are actually ascended.
const ASCENTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptSettings {
    pub opt_tol: f64,
    pub opt_slack: f64,
    pub max_iter: usize,
}

impl Default for OptSettings {
    fn default() -> Self {
        OptSettings {
            opt_tol: DEFAULT_OPT_TOL,
            opt_slack: DEFAULT_OPT_SLACK,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// A set of candidate means: the hull of a vertex list, or a box.
#[derive(Debug, Clone, Copy)]
pub enum MeanSet<'a> {
    Vertices(&'a [Vec<f64>]),
    Box(&'a HyperRect),
}

fn prob_at(y: &[f64], cov: &DMatrix<f64>, rect: &HyperRect, int: &IntegratorSettings) -> Result<ProbEstimate> {
    mvn_rect_prob(&DVector::from_column_slice(y), cov, rect, int)
}

/// Sound lower bound on `min_y P(Z + y ∈ rect)` over the hull of `mean_set`, clamped at 0.
pub fn min_integral_over_means(
    cov: &DMatrix<f64>,
    rect: &HyperRect,
    mean_set: MeanSet<'_>,
    int: &IntegratorSettings,
) -> Result<f64> {
    let candidates = match mean_set {
        MeanSet::Vertices(v) => {
            if v.is_empty() {
                return Err(Error::Empty("mean set has no vertices".into()));
            }
            extreme_candidates(v)
        }
        MeanSet::Box(b) => b.vertices(),
    };
    let mut best = f64::INFINITY;
    for y in &candidates {
        let p = prob_at(y, cov, rect, int)?;
        best = best.min(p.value - p.err);
        if best <= 0.0 {
            return Ok(0.0);
        }
    }
    Ok(best.min(1.0))
}

/// Sound upper bound on `max_y P(Z + y ∈ rect)` over `mean_box`, capped at 1.
pub fn max_integral_over_means(
    cov: &DMatrix<f64>,
    rect: &HyperRect,
    mean_box: &HyperRect,
    int: &IntegratorSettings,
    opt: &OptSettings,
) -> Result<f64> {
    let d = mean_box.dim();
    if cov.nrows() != d || rect.dim() != d {
        return Err(Error::Dimension(format!(
            "mean box of dimension {d} against a {}-dimensional problem",
            rect.dim()
        )));
    }
    let centre = rect.center();
    let closest = mean_box.clamp(&centre);

    // A centred symmetric unimodal law puts the most mass on a box when the
    // mean sits at the box centre.
    if mean_box.contains(&centre) {
        let p = prob_at(&centre, cov, rect, int)?;
        return Ok((p.value + p.err + opt.opt_slack).min(1.0));
    }
    if d == 1 || is_diagonal(cov) {
        // separable: each factor is unimodal in its own coordinate
        let mut value = 1.0;
        for i in 0..d {
            let sd = cov[(i, i)].sqrt();
            let m = closest[i];
            let (a, b) = ((rect.lower[i] - m) / sd, (rect.upper[i] - m) / sd);
            value *= if a > 0.0 {
                std_normal_cdf(-a) - std_normal_cdf(-b)
            } else {
                std_normal_cdf(b) - std_normal_cdf(a)
            };
        }
        return Ok((value + 1e-15 * d as f64 + opt.opt_slack).min(1.0));
    }

    let mut starts = vec![closest, mean_box.center()];
    if d <= 12 {
        starts.extend(mean_box.vertices());
    }
    let mut scored: Vec<(f64, Vec<f64>)> = Vec::with_capacity(starts.len());
    for y in starts {
        let p = prob_at(&y, cov, rect, int)?;
        scored.push((p.value, y));
    }
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite probabilities"));

    let mut bound = f64::INFINITY;
    for (_, y) in scored.into_iter().take(ASCENTS) {
        match ascend(cov, rect, mean_box, y, int, opt) {
            Ok(b) => bound = bound.min(b),
            Err(Error::Underflow(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if !bound.is_finite() {
        // every start underflowed
        return Ok(int.tol.max(1e-15) + opt.opt_slack);
    }
    Ok((bound + opt.opt_slack).min(1.0))
}

fn is_diagonal(cov: &DMatrix<f64>) -> bool {
    let d = cov.nrows();
    (0..d).all(|i| (0..d).all(|j| i == j || cov[(i, j)] == 0.0))
}

/// Projected gradient ascent on `log P` with Armijo backtracking.
///
/// Returns the first-order concavity bound at the final iterate,
/// `P(y) · exp(max_{z ∈ box} g·(z − y)) + err`, which stays an upper bound
/// on the maximum even when the iteration stops short.
fn ascend(
    cov: &DMatrix<f64>,
    rect: &HyperRect,
    mean_box: &HyperRect,
    start: Vec<f64>,
    int: &IntegratorSettings,
    opt: &OptSettings,
) -> Result<f64> {
    let d = start.len();
    let mut y = DVector::from_vec(start);
    let grad_at = |y: &DVector<f64>| prob_and_log_grad(y, cov, rect, default_fd_step(y), int);
    let (mut p, mut g) = grad_at(&y)?;
    let mut step = 1.0;
    for _ in 0..opt.max_iter {
        let projected = DVector::from_vec(mean_box.clamp((&y + &g).as_slice()));
        if (&projected - &y).norm() <= opt.opt_tol {
            break;
        }
        let f0 = p.value.ln();
        let mut accepted = None;
        let mut t = step;
        while t > 1e-12 {
            let cand = DVector::from_vec(mean_box.clamp((&y + &g * t).as_slice()));
            let moved = &cand - &y;
            if moved.norm() == 0.0 {
                break;
            }
            let pc = mvn_rect_prob(&cand, cov, rect, int)?;
            if pc.value > 0.0 && pc.value.ln() >= f0 + ARMIJO * g.dot(&moved) {
                accepted = Some(cand);
                break;
            }
            t *= SHRINK;
        }
        let Some(next) = accepted else { break };
        y = next;
        (p, g) = grad_at(&y)?;
        step = (t * 2.0).min(1e6);
    }
    let mut rise = 0.0;
    for i in 0..d {
        let reach = if g[i] > 0.0 {
            mean_box.upper[i] - y[i]
        } else {
            mean_box.lower[i] - y[i]
        };
        rise += g[i] * reach;
    }
    let bound = if rise > 700.0 {
        1.0
    } else {
        (p.value * rise.exp()).min(1.0)
    };
    Ok(bound + p.err)
}
