#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::DMatrix;
use petc_imc::geometry::Partition;
use petc_imc::imc::{AbstractState, IntervalMarkovChain};
use petc_imc::model::PetcSystem;
use petc_imc::sim::Sampler;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub fn scalar(a: f64, bk: f64, bw: f64, eps: f64, k_max: usize) -> PetcSystem {
    let m = |v: f64| DMatrix::from_element(1, 1, v);
    PetcSystem::new(m(a), m(1.0), m(bk), m(bw), eps, k_max).unwrap()
}

pub fn wiener(eps: f64, k_max: usize) -> PetcSystem {
    scalar(0.0, 0.0, 1.0, eps, k_max)
}

/// Stable closed loop with eigenvalues of `A + BK` at −1 ± i.
pub fn stable_2d(eps: f64, k_max: usize) -> PetcSystem {
    PetcSystem::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]),
        DMatrix::identity(2, 2),
        -DMatrix::identity(2, 2),
        DMatrix::identity(2, 2) * 0.5,
        eps,
        k_max,
    )
    .unwrap()
}

pub const STABLE_2D_CONFIG: &str = r#"{
  "system": {
    "A": [[0.0, 1.0], [-2.0, -3.0]],
    "B": [[1.0, 0.0], [0.0, 1.0]],
    "K": [[-1.0, 0.0], [0.0, -1.0]],
    "B_w": [[0.5, 0.0], [0.0, 0.5]],
    "epsilon": 0.3,
    "k_max": 3
  },
  "initial_distribution": {"kind": "uniform"},
  "reward": {"kind": "interevent_time"},
  "region": {"x_lower": [-1.0, -1.0], "x_upper": [1.0, 1.0], "grid": [8, 8]},
  "solver": {"gamma": 0.9, "paths": 10000, "seed": 1}
}"#;

pub const WIENER_CONFIG: &str = r#"{
  "system": {"A": [[0.0]], "B": [[1.0]], "K": [[0.0]], "B_w": [[1.0]], "epsilon": 1.0, "k_max": 2},
  "initial_distribution": {"kind": "uniform"},
  "reward": {"kind": "interevent_time"},
  "region": {"x_lower": [-2.0], "x_upper": [2.0], "grid": [4]},
  "solver": {"gamma": 0.9, "paths": 4000, "seed": 3}
}"#;

pub const LARGE_EPS_CONFIG: &str = r#"{
  "system": {"A": [[0.0]], "B": [[1.0]], "K": [[0.0]], "B_w": [[1.0]], "epsilon": 10.0, "k_max": 2},
  "initial_distribution": {"kind": "uniform"},
  "reward": {"kind": "interevent_time"},
  "region": {"x_lower": [-40.0], "x_upper": [40.0], "grid": [16]},
  "solver": {"gamma": 0.5, "paths": 10000, "seed": 1}
}"#;

#[derive(Debug, Default)]
pub struct BracketReport {
    pub comparisons: usize,
    pub violations: Vec<String>,
    /// Largest distance of an empirical frequency outside `[check, hat]`, in units of σ̂.
    pub worst_z: f64,
}

/// Simulates `steps` transitions from `points` uniform draws in every cell and
/// compares each landing frequency with the chain's interval for that cell.
pub fn bracketing_audit(
    sys: &PetcSystem,
    partition: &Partition,
    imc: &IntervalMarkovChain,
    points: usize,
    steps: usize,
    seed: u64,
) -> BracketReport {
    let sampler = Sampler::new(sys).unwrap();
    let index: HashMap<AbstractState, usize> = imc.states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let unsafe_id = imc.unsafe_index().unwrap();
    let n_states = imc.len();

    let per_cell: Vec<BracketReport> = (0..partition.len())
        .into_par_iter()
        .map(|cell| {
            let row = &imc.rows[index[&AbstractState::Region { region_id: cell, s: 0 }]];
            let mut check = vec![0.0; n_states];
            let mut hat = vec![0.0; n_states];
            for e in row {
                check[e.col] = e.check;
                hat[e.col] = e.hat;
            }
            let rect = &partition.cells[cell];
            let mut report = BracketReport::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(cell as u64);
            for p in 0..points {
                let x: Vec<f64> = (0..rect.dim())
                    .map(|i| rng.random_range(rect.lower[i]..rect.upper[i]))
                    .collect();
                let mut counts = vec![0usize; n_states];
                for _ in 0..steps {
                    let (y, s) = sampler.sample_step(&x, &mut rng);
                    let j = match partition.locate(&y) {
                        Some(r) => index[&AbstractState::Region { region_id: r, s }],
                        None => unsafe_id,
                    };
                    counts[j] += 1;
                }
                let m = steps as f64;
                for j in 0..n_states {
                    let f = counts[j] as f64 / m;
                    // score test: the spread is taken at the endpoint being tested
                    let bound = if f < check[j] { check[j] } else { hat[j] };
                    let sigma = ((bound * (1.0 - bound) + 1.0 / m) / m).sqrt();
                    report.comparisons += 1;
                    let excess = (check[j] - f).max(f - hat[j]).max(0.0) / sigma;
                    report.worst_z = report.worst_z.max(excess);
                    if excess > 3.0 {
                        report.violations.push(format!(
                            "cell {cell} point {p} x={x:?} -> {:?}: freq {f:.5} outside [{:.5}, {:.5}] (3 sigma {:.2e})",
                            imc.states[j],
                            check[j],
                            hat[j],
                            3.0 * sigma
                        ));
                    }
                }
            }
            report
        })
        .collect();

    let mut total = BracketReport::default();
    for r in per_cell {
        total.comparisons += r.comparisons;
        total.violations.extend(r.violations);
        total.worst_z = total.worst_z.max(r.worst_z);
    }
    total
}
