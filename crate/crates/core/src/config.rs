//! JSON run configuration.
//!
//! ```json
//! {
//!   "system": {"A": [[0.0]], "B": [[1.0]], "K": [[0.0]], "B_w": [[1.0]], "epsilon": 1.0, "k_max": 2},
//!   "initial_distribution": {"kind": "uniform"},
//!   "reward": {"kind": "interevent_time"},
//!   "region": {"x_lower": [-2.0], "x_upper": [2.0], "grid": [4]},
//!   "solver": {"gamma": 0.9}
//! }
//! ```
//!
//! Every error names the offending key.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde_json::{Map, Value};

use crate::abstraction::{AbstractionSettings, DEFAULT_DEN_FLOOR, DEFAULT_ENVELOPE_SIGMAS, DEFAULT_REPAIR_BUDGET};
use crate::error::{Error, Result};
use crate::gaussint::{IntegratorSettings, DEFAULT_INT_TOL, DEFAULT_MAX_POINTS, DEFAULT_SHIFTS};
use crate::geometry::{grid_partition, HyperRect, Partition, DEFAULT_VERTEX_CAP};
use crate::meanopt::{OptSettings, DEFAULT_MAX_ITER, DEFAULT_OPT_SLACK, DEFAULT_OPT_TOL};
use crate::model::{validate_system, InitialDistribution, PetcSystem, RewardKind, RewardSpec, ValidationReport};
use crate::sim::DEFAULT_PATHS;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub gamma: f64,
    /// Value-iteration steps; derived from the tail rule when absent.
    pub iterations: Option<usize>,
    pub int_tol: f64,
    pub int_seed: u64,
    pub int_max_points: usize,
    pub opt_tol: f64,
    pub opt_slack: f64,
    /// Monte Carlo seed.
    pub seed: u64,
    pub paths: usize,
    /// Monte Carlo horizon; derived from the tail rule when absent.
    pub steps: Option<usize>,
    pub vertex_cap: usize,
    pub repair_budget: f64,
    pub den_floor: f64,
    pub envelope_sigmas: f64,
}

impl SolverConfig {
    pub fn abstraction_settings(&self) -> AbstractionSettings {
        AbstractionSettings {
            int: IntegratorSettings {
                tol: self.int_tol,
                seed: self.int_seed,
                max_points: self.int_max_points,
                shifts: DEFAULT_SHIFTS,
            },
            opt: OptSettings {
                opt_tol: self.opt_tol,
                opt_slack: self.opt_slack,
                max_iter: DEFAULT_MAX_ITER,
            },
            vertex_cap: self.vertex_cap,
            den_floor: self.den_floor,
            repair_budget: self.repair_budget,
            envelope_sigmas: self.envelope_sigmas,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Built without the assumption checks; see [`Config::check_assumptions`].
    pub system: PetcSystem,
    pub initial_distribution: InitialDistribution,
    pub reward: RewardSpec,
    pub partition: Partition,
    pub solver: SolverConfig,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let root: Value =
            serde_json::from_str(text).map_err(|e| Error::config("<document>", format!("malformed JSON: {e}")))?;
        let root = object(&root, "<document>")?;
        allow_keys(root, "", &["system", "initial_distribution", "reward", "region", "solver"])?;

        let sys = object(required(root, "", "system")?, "system")?;
        allow_keys(sys, "system", &["A", "B", "K", "B_w", "epsilon", "k_max"])?;
        let system = PetcSystem {
            a: matrix(required(sys, "system", "A")?, "system.A")?,
            b: matrix(required(sys, "system", "B")?, "system.B")?,
            k: matrix(required(sys, "system", "K")?, "system.K")?,
            b_w: matrix(required(sys, "system", "B_w")?, "system.B_w")?,
            epsilon: number(required(sys, "system", "epsilon")?, "system.epsilon")?,
            k_max: integer(required(sys, "system", "k_max")?, "system.k_max")?,
        };
        let n = system.a.nrows();

        let region = object(required(root, "", "region")?, "region")?;
        allow_keys(region, "region", &["x_lower", "x_upper", "grid"])?;
        let lower = vector(required(region, "region", "x_lower")?, "region.x_lower")?;
        let upper = vector(required(region, "region", "x_upper")?, "region.x_upper")?;
        let grid = required(region, "region", "grid")?
            .as_array()
            .ok_or_else(|| Error::config("region.grid", "expected an array of positive integers"))?
            .iter()
            .map(|v| integer(v, "region.grid"))
            .collect::<Result<Vec<usize>>>()?;
        if lower.len() != n || upper.len() != n || grid.len() != n {
            return Err(Error::config(
                "region",
                format!("x_lower, x_upper and grid must all have length {n} (the state dimension)"),
            ));
        }
        let domain = HyperRect::new(lower.as_slice().to_vec(), upper.as_slice().to_vec())
            .map_err(|e| Error::config("region", e.to_string()))?;
        let partition = grid_partition(&domain, &grid)?;

        let initial_distribution = parse_initial(required(root, "", "initial_distribution")?, n)?;

        let solver_obj = object(required(root, "", "solver")?, "solver")?;
        let solver = parse_solver(solver_obj)?;

        let reward = RewardSpec {
            kind: parse_reward(required(root, "", "reward")?)?,
            gamma: solver.gamma,
        };
        reward.validate()?;

        Ok(Config {
            system,
            initial_distribution,
            reward,
            partition,
            solver,
        })
    }

    /// Runs the system checks; structural errors and failed assumptions are errors.
    pub fn check_assumptions(&self) -> Result<ValidationReport> {
        let report = validate_system(&self.system)?;
        if let Some(bad) = report.failures().next() {
            return Err(Error::Assumption(format!("{}: {}", bad.name, bad.message)));
        }
        Ok(report)
    }
}

fn object<'v>(v: &'v Value, key: &str) -> Result<&'v Map<String, Value>> {
    v.as_object().ok_or_else(|| Error::config(key, "expected an object"))
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn required<'v>(obj: &'v Map<String, Value>, prefix: &str, key: &str) -> Result<&'v Value> {
    obj.get(key).ok_or_else(|| Error::config(join(prefix, key), "missing required key"))
}

fn allow_keys(obj: &Map<String, Value>, prefix: &str, allowed: &[&str]) -> Result<()> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::config(join(prefix, k), "unknown key")),
        None => Ok(()),
    }
}

fn number(v: &Value, key: &str) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::config(key, "expected a finite number"))
}

fn integer(v: &Value, key: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::config(key, "expected a non-negative integer"))
}

fn vector(v: &Value, key: &str) -> Result<DVector<f64>> {
    let items = v.as_array().ok_or_else(|| Error::config(key, "expected an array of numbers"))?;
    let xs = items.iter().map(|x| number(x, key)).collect::<Result<Vec<f64>>>()?;
    if xs.is_empty() {
        return Err(Error::config(key, "must not be empty"));
    }
    Ok(DVector::from_vec(xs))
}

/// Row-major array of arrays.
fn matrix(v: &Value, key: &str) -> Result<DMatrix<f64>> {
    let rows = v.as_array().ok_or_else(|| Error::config(key, "expected an array of rows"))?;
    if rows.is_empty() {
        return Err(Error::config(key, "must have at least one row"));
    }
    let parsed = rows.iter().map(|r| vector(r, key)).collect::<Result<Vec<_>>>()?;
    let cols = parsed[0].len();
    if parsed.iter().any(|r| r.len() != cols) {
        return Err(Error::config(key, "rows have different lengths"));
    }
    Ok(DMatrix::from_fn(parsed.len(), cols, |i, j| parsed[i][j]))
}

fn kind<'v>(obj: &'v Map<String, Value>, prefix: &str) -> Result<&'v str> {
    required(obj, prefix, "kind")?
        .as_str()
        .ok_or_else(|| Error::config(join(prefix, "kind"), "expected a string"))
}

fn parse_initial(v: &Value, n: usize) -> Result<InitialDistribution> {
    let key = "initial_distribution";
    let obj = object(v, key)?;
    let p0 = match kind(obj, key)? {
        "uniform" => {
            allow_keys(obj, key, &["kind"])?;
            InitialDistribution::Uniform
        }
        "point_mass" => {
            allow_keys(obj, key, &["kind", "x0"])?;
            InitialDistribution::PointMass(vector(required(obj, key, "x0")?, "initial_distribution.x0")?)
        }
        "gaussian" => {
            allow_keys(obj, key, &["kind", "mean", "cov"])?;
            InitialDistribution::Gaussian {
                mean: vector(required(obj, key, "mean")?, "initial_distribution.mean")?,
                cov: matrix(required(obj, key, "cov")?, "initial_distribution.cov")?,
            }
        }
        other => {
            return Err(Error::config(
                "initial_distribution.kind",
                format!("unknown kind `{other}` (expected uniform, point_mass or gaussian)"),
            ))
        }
    };
    p0.validate(n).map_err(|e| match e {
        Error::Dimension(m) => Error::config(key, m),
        e => e,
    })?;
    Ok(p0)
}

fn pair(v: &Value, key: &str) -> Result<(f64, f64)> {
    let items = v.as_array().filter(|a| a.len() == 2).ok_or_else(|| Error::config(key, "expected [min, max]"))?;
    Ok((number(&items[0], key)?, number(&items[1], key)?))
}

fn parse_reward(v: &Value) -> Result<RewardKind> {
    let key = "reward";
    let obj = object(v, key)?;
    let num = |name: &str| number(required(obj, key, name)?, &join(key, name));
    match kind(obj, key)? {
        "interevent_time" => {
            allow_keys(obj, key, &["kind"])?;
            Ok(RewardKind::IntereventTime)
        }
        "overshoot_penalty" => {
            allow_keys(obj, key, &["kind", "alpha", "beta", "eps_tilde", "r_max"])?;
            Ok(RewardKind::OvershootPenalty {
                alpha: num("alpha")?,
                beta: num("beta")?,
                eps_tilde: num("eps_tilde")?,
                r_max: num("r_max")?,
            })
        }
        "table" => {
            allow_keys(obj, key, &["kind", "entries", "default", "unsafe", "r_max"])?;
            let mut entries = BTreeMap::new();
            if let Some(list) = obj.get("entries") {
                let list = list
                    .as_array()
                    .ok_or_else(|| Error::config("reward.entries", "expected an array"))?;
                for item in list {
                    let e = object(item, "reward.entries")?;
                    allow_keys(e, "reward.entries", &["region", "s", "min", "max"])?;
                    let region = integer(required(e, "reward.entries", "region")?, "reward.entries.region")?;
                    let s = integer(required(e, "reward.entries", "s")?, "reward.entries.s")?;
                    let lo = number(required(e, "reward.entries", "min")?, "reward.entries.min")?;
                    let hi = number(required(e, "reward.entries", "max")?, "reward.entries.max")?;
                    if entries.insert((region, s), (lo, hi)).is_some() {
                        return Err(Error::config(
                            "reward.entries",
                            format!("duplicate entry for region {region}, s {s}"),
                        ));
                    }
                }
            }
            Ok(RewardKind::Table {
                entries,
                default: obj.get("default").map(|d| pair(d, "reward.default")).transpose()?,
                unsafe_row: obj.get("unsafe").map(|d| pair(d, "reward.unsafe")).transpose()?,
                r_max: num("r_max")?,
            })
        }
        other => Err(Error::config(
            "reward.kind",
            format!("unknown kind `{other}` (expected interevent_time, overshoot_penalty or table)"),
        )),
    }
}

fn parse_solver(obj: &Map<String, Value>) -> Result<SolverConfig> {
    let key = "solver";
    allow_keys(
        obj,
        key,
        &[
            "gamma",
            "iterations",
            "int_tol",
            "int_seed",
            "int_max_points",
            "opt_tol",
            "opt_slack",
            "seed",
            "paths",
            "steps",
            "vertex_cap",
            "repair_budget",
            "den_floor",
            "envelope_sigmas",
        ],
    )?;
    let num_or = |name: &str, default: f64| -> Result<f64> {
        obj.get(name).map(|v| number(v, &join(key, name))).unwrap_or(Ok(default))
    };
    let int_opt = |name: &str| -> Result<Option<usize>> {
        obj.get(name).filter(|v| !v.is_null()).map(|v| integer(v, &join(key, name))).transpose()
    };
    let seed = |name: &str| -> Result<u64> {
        obj.get(name)
            .map(|v| v.as_u64().ok_or_else(|| Error::config(join(key, name), "expected an unsigned integer")))
            .unwrap_or(Ok(0))
    };
    let positive = |name: &str, x: f64| -> Result<f64> {
        if x > 0.0 {
            Ok(x)
        } else {
            Err(Error::config(join(key, name), "must be positive"))
        }
    };
    let gamma = number(required(obj, key, "gamma")?, "solver.gamma")?;
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::config("solver.gamma", format!("discount must lie in [0, 1), got {gamma}")));
    }
    let solver = SolverConfig {
        gamma,
        iterations: int_opt("iterations")?,
        int_tol: positive("int_tol", num_or("int_tol", DEFAULT_INT_TOL)?)?,
        int_seed: seed("int_seed")?,
        int_max_points: int_opt("int_max_points")?.unwrap_or(DEFAULT_MAX_POINTS),
        opt_tol: positive("opt_tol", num_or("opt_tol", DEFAULT_OPT_TOL)?)?,
        opt_slack: num_or("opt_slack", DEFAULT_OPT_SLACK)?,
        seed: seed("seed")?,
        paths: int_opt("paths")?.unwrap_or(DEFAULT_PATHS),
        steps: int_opt("steps")?,
        vertex_cap: int_opt("vertex_cap")?.unwrap_or(DEFAULT_VERTEX_CAP),
        repair_budget: num_or("repair_budget", DEFAULT_REPAIR_BUDGET)?,
        den_floor: positive("den_floor", num_or("den_floor", DEFAULT_DEN_FLOOR)?)?,
        envelope_sigmas: positive("envelope_sigmas", num_or("envelope_sigmas", DEFAULT_ENVELOPE_SIGMAS)?)?,
    };
    if solver.opt_slack < 0.0 || solver.repair_budget < 0.0 {
        return Err(Error::config("solver", "opt_slack and repair_budget must be non-negative"));
    }
    if solver.paths < 2 {
        return Err(Error::config("solver.paths", "at least two paths are needed"));
    }
    Ok(solver)
}
