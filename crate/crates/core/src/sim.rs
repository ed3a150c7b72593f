//! Exact sampling of the event-triggered loop at the sampling instants and a
//! Monte Carlo estimate of the expected discounted reward.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Partition;
use crate::imc::default_iterations;
use crate::model::{trigger_violated, InitialDistribution, PetcSystem, RewardSpec};
use crate::moments::Moments;

pub const DEFAULT_PATHS: usize = 10_000;
/// Truncation target for the discounted tail.
pub const TRUNCATION_TARGET: f64 = 1e-6;

/// Joint law of the `k_max` samples following an event.
#[derive(Debug, Clone)]
pub struct Sampler {
    n: usize,
    k_max: usize,
    epsilon: f64,
    mean_map: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl Sampler {
    pub fn new(sys: &PetcSystem) -> Result<Self> {
        let moments = Moments::new(sys, sys.k_max);
        let joint = moments.joint_moments(sys.k_max)?;
        Ok(Sampler {
            n: sys.dim(),
            k_max: sys.k_max,
            epsilon: sys.epsilon,
            mean_map: joint.mean_map,
            chol: joint.chol.l(),
        })
    }

    /// Draws all `k_max` samples at once, then returns the first one outside
    /// `Φ(x)` together with its index (or the last sample and `k_max`).
    pub fn sample_step<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> (Vec<f64>, usize) {
        let n = self.n;
        let z = DVector::<f64>::from_fn(self.k_max * n, |_, _| rng.sample(StandardNormal));
        let draw = &self.mean_map * DVector::from_column_slice(x) + &self.chol * z;
        for s in 1..=self.k_max {
            let y = &draw.as_slice()[(s - 1) * n..s * n];
            if s == self.k_max || trigger_violated(x, y, self.epsilon) {
                return (y.to_vec(), s);
            }
        }
        unreachable!("k_max >= 1")
    }
}

pub fn sample_step<R: Rng + ?Sized>(sys: &PetcSystem, x: &[f64], rng: &mut R) -> Result<(Vec<f64>, usize)> {
    if x.len() != sys.dim() {
        return Err(Error::Dimension(format!("state of length {} for a {}-dimensional system", x.len(), sys.dim())));
    }
    Ok(Sampler::new(sys)?.sample_step(x, rng))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub estimate: f64,
    pub std_error: f64,
    /// Deterministic bound on the discarded tail of the discounted sum.
    pub truncation: f64,
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Symmetric square root of a covariance, tolerating semidefinite input.
fn psd_root(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = cov.clone().symmetric_eigen();
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals)
}

fn initial_sampler(p0: &InitialDistribution, partition: &Partition) -> Box<dyn Fn(&mut ChaCha8Rng) -> Vec<f64> + Sync> {
    match p0 {
        InitialDistribution::Uniform => {
            let d = partition.domain.clone();
            Box::new(move |rng| (0..d.dim()).map(|i| rng.random_range(d.lower[i]..=d.upper[i])).collect())
        }
        InitialDistribution::PointMass(x) => {
            let x = x.as_slice().to_vec();
            Box::new(move |_| x.clone())
        }
        InitialDistribution::Gaussian { mean, cov } => {
            let root = psd_root(cov);
            let mean = mean.clone();
            Box::new(move |rng| {
                let z = DVector::<f64>::from_fn(mean.len(), |_, _| rng.sample(StandardNormal));
                (&mean + &root * z).as_slice().to_vec()
            })
        }
    }
}

/// Pairwise summation, deterministic for a given input order.
fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Monte Carlo estimate of `E[Σ_{i=0}^{N} γ^i R(ω(i))]` with `ω(0) = (x₀, 0)`.
///
/// `steps` defaults to the smallest `N` whose discounted tail is below
/// [`TRUNCATION_TARGET`]. The reported truncation is `γ^{N+1} R_max / (1 − γ)`.
pub fn mc_expectation(
    sys: &PetcSystem,
    rw: &RewardSpec,
    p0: &InitialDistribution,
    partition: &Partition,
    steps: Option<usize>,
    paths: usize,
    seed: u64,
) -> Result<McResult> {
    rw.validate()?;
    p0.validate(sys.dim())?;
    if paths < 2 {
        return Err(Error::config("solver.paths", "at least two paths are needed for a standard error"));
    }
    let gamma = rw.gamma;
    let r_max = rw.r_max(sys.k_max);
    let steps = steps.unwrap_or_else(|| default_iterations(gamma, r_max, TRUNCATION_TARGET));
    let sampler = Sampler::new(sys)?;
    let draw_x0 = initial_sampler(p0, partition);
    let totals: Vec<f64> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let mut x = draw_x0(&mut rng);
            let mut total = rw.value(&x, 0, partition);
            let mut discount = 1.0;
            for _ in 0..steps {
                discount *= gamma;
                if discount == 0.0 {
                    break;
                }
                let (next, s) = sampler.sample_step(&x, &mut rng);
                x = next;
                total += discount * rw.value(&x, s, partition);
            }
            total
        })
        .collect();
    let m = paths as f64;
    let estimate = pairwise_sum(&totals) / m;
    let sq: Vec<f64> = totals.iter().map(|t| (t - estimate).powi(2)).collect();
    let var = pairwise_sum(&sq) / (m - 1.0);
    let truncation = if gamma == 0.0 {
        0.0
    } else {
        gamma.powi(steps as i32 + 1) * r_max / (1.0 - gamma)
    };
    Ok(McResult {
        estimate,
        std_error: (var / m).sqrt(),
        truncation,
        paths,
        steps,
        seed,
    })
}
