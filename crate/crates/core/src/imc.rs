//! Interval Markov chains and interval value iteration for discounted rewards.

use std::path::Path;

use serde::de::{self, Deserializer};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed in the row-sum feasibility test.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AbstractState {
    /// A partition cell together with the interevent time that led into it.
    Region { region_id: usize, s: usize },
    Unsafe,
}

impl Serialize for AbstractState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            AbstractState::Region { region_id, s } => {
                let mut map = serializer.serialize_map(Some(2))?;
                map.serialize_entry("region_id", region_id)?;
                map.serialize_entry("s", s)?;
                map.end()
            }
            AbstractState::Unsafe => serializer.serialize_str("unsafe"),
        }
    }
}

impl<'de> Deserialize<'de> for AbstractState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Region { region_id: usize, s: usize },
            Tag(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Region { region_id, s } => Ok(AbstractState::Region { region_id, s }),
            Raw::Tag(t) if t == "unsafe" => Ok(AbstractState::Unsafe),
            Raw::Tag(t) => Err(de::Error::custom(format!("unknown state `{t}`"))),
        }
    }
}

/// One non-zero interval of a transition row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub col: usize,
    pub check: f64,
    pub hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Repair {
    pub row: usize,
    /// `inflate_hat` or `deflate_check`.
    pub kind: String,
    pub amount: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImcMeta {
    pub k_max: usize,
    pub cells: usize,
    pub int_tol: f64,
    pub int_seed: u64,
    pub opt_tol: f64,
    pub opt_slack: f64,
    pub vertex_cap: usize,
    pub den_floor: f64,
    pub repair_budget: f64,
    pub envelope_sigmas: f64,
    pub repairs: Vec<Repair>,
    pub soundness: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMarkovChain {
    pub states: Vec<AbstractState>,
    pub p0: Vec<f64>,
    /// Per-row intervals sorted by column; missing columns are `[0, 0]`.
    pub rows: Vec<Vec<Entry>>,
    pub meta: ImcMeta,
}

#[derive(Serialize, Deserialize)]
struct ImcFile {
    states: Vec<AbstractState>,
    p0: Vec<f64>,
    check: Vec<(usize, usize, f64)>,
    hat: Vec<(usize, usize, f64)>,
    meta: ImcMeta,
}

impl IntervalMarkovChain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    pub fn unsafe_index(&self) -> Option<usize> {
        self.states.iter().position(|s| *s == AbstractState::Unsafe)
    }

    /// Checks every structural invariant: shapes, `0 ≤ check ≤ hat ≤ 1`,
    /// row sums, `p0` summing to one and the unsafe self-loop.
    pub fn validate(&self) -> Result<()> {
        let n = self.states.len();
        if n == 0 {
            return Err(Error::Empty("interval Markov chain without states".into()));
        }
        if self.p0.len() != n || self.rows.len() != n {
            return Err(Error::Dimension(format!(
                "{n} states but {} initial probabilities and {} rows",
                self.p0.len(),
                self.rows.len()
            )));
        }
        if self.p0.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::config("p0", "initial probabilities must lie in [0, 1]"));
        }
        let total: f64 = self.p0.iter().sum();
        if (total - 1.0).abs() > FEASIBILITY_TOL {
            return Err(Error::config("p0", format!("initial probabilities sum to {total}")));
        }
        if self.states.iter().filter(|s| **s == AbstractState::Unsafe).count() != 1 {
            return Err(Error::config("states", "exactly one unsafe state is required"));
        }
        for (i, row) in self.rows.iter().enumerate() {
            for w in row.windows(2) {
                if w[0].col >= w[1].col {
                    return Err(Error::InfeasibleRow {
                        row: i,
                        reason: format!("column {} listed out of order or twice", w[1].col),
                    });
                }
            }
            for e in row {
                if e.col >= n {
                    return Err(Error::InfeasibleRow {
                        row: i,
                        reason: format!("column {} out of range", e.col),
                    });
                }
                if !(0.0 <= e.check && e.check <= e.hat && e.hat <= 1.0) {
                    return Err(Error::InfeasibleRow {
                        row: i,
                        reason: format!("entry ({i}, {}) has check {} and hat {}", e.col, e.check, e.hat),
                    });
                }
            }
            row_feasible(row, i)?;
        }
        let u = self.unsafe_index().expect("checked above");
        if self.rows[u]
            != [Entry {
                col: u,
                check: 1.0,
                hat: 1.0,
            }]
        {
            return Err(Error::InfeasibleRow {
                row: u,
                reason: "unsafe state must be an exact self-loop".into(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut check = Vec::with_capacity(self.edge_count());
        let mut hat = Vec::with_capacity(self.edge_count());
        for (i, row) in self.rows.iter().enumerate() {
            for e in row {
                if e.check != 0.0 {
                    check.push((i, e.col, e.check));
                }
                hat.push((i, e.col, e.hat));
            }
        }
        let file = ImcFile {
            states: self.states.clone(),
            p0: self.p0.clone(),
            check,
            hat,
            meta: self.meta.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Parses and validates; malformed entries are reported by row and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ImcFile = serde_json::from_str(text)?;
        let n = file.states.len();
        let mut rows: Vec<Vec<Entry>> = vec![Vec::new(); n];
        for &(r, c, v) in &file.hat {
            if r >= n || c >= n {
                return Err(Error::config("hat", format!("entry ({r}, {c}) is out of range")));
            }
            if rows[r].iter().any(|e| e.col == c) {
                return Err(Error::config("hat", format!("entry ({r}, {c}) appears twice")));
            }
            rows[r].push(Entry {
                col: c,
                check: 0.0,
                hat: v,
            });
        }
        for &(r, c, v) in &file.check {
            if r >= n || c >= n {
                return Err(Error::config("check", format!("entry ({r}, {c}) is out of range")));
            }
            match rows[r].iter_mut().find(|e| e.col == c) {
                Some(e) if e.check == 0.0 => e.check = v,
                Some(_) => return Err(Error::config("check", format!("entry ({r}, {c}) appears twice"))),
                None => {
                    return Err(Error::config(
                        "check",
                        format!("entry ({r}, {c}) has check {v} but no hat (hat is 0)"),
                    ))
                }
            }
        }
        for (r, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|e| e.col);
            for e in row.iter() {
                if !(0.0 <= e.check && e.check <= e.hat && e.hat <= 1.0) {
                    return Err(Error::config(
                        "check",
                        format!("entry ({r}, {}) violates 0 <= check <= hat <= 1 ({} vs {})", e.col, e.check, e.hat),
                    ));
                }
            }
        }
        let imc = IntervalMarkovChain {
            states: file.states,
            p0: file.p0,
            rows,
            meta: file.meta,
        };
        imc.validate()?;
        Ok(imc)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn row_feasible(row: &[Entry], index: usize) -> Result<()> {
    let lo: f64 = row.iter().map(|e| e.check).sum();
    let hi: f64 = row.iter().map(|e| e.hat).sum();
    if lo > 1.0 + FEASIBILITY_TOL || hi < 1.0 - FEASIBILITY_TOL {
        return Err(Error::InfeasibleRow {
            row: index,
            reason: format!("sum of lower bounds {lo}, sum of upper bounds {hi}"),
        });
    }
    Ok(())
}

/// Extreme feasible distribution of a dense row: every state gets its lower
/// bound, then the remaining mass goes to states in `ordering` order up to
/// their upper bounds.
pub fn greedy_feasible(check: &[f64], hat: &[f64], ordering: &[usize]) -> Result<Vec<f64>> {
    if check.len() != hat.len() || ordering.len() != check.len() {
        return Err(Error::Dimension("row bounds and ordering differ in length".into()));
    }
    let mut seen = vec![false; check.len()];
    for &q in ordering {
        if q >= check.len() || std::mem::replace(&mut seen[q], true) {
            return Err(Error::Dimension("ordering is not a permutation".into()));
        }
    }
    let row: Vec<Entry> = (0..check.len())
        .map(|col| Entry {
            col,
            check: check[col],
            hat: hat[col],
        })
        .collect();
    row_feasible(&row, 0)?;
    let mut p = check.to_vec();
    let mut rest = 1.0 - check.iter().sum::<f64>();
    for &q in ordering {
        if rest <= 0.0 {
            break;
        }
        let add = (hat[q] - check[q]).min(rest);
        p[q] += add;
        rest -= add;
    }
    Ok(p)
}

/// `Σ p(q) V(q)` for the greedy distribution of a sparse row, filling states
/// in ascending `rank` order.
fn greedy_value(row: &[Entry], rank: &[usize], values: &[f64], scratch: &mut Vec<usize>) -> f64 {
    scratch.clear();
    scratch.extend(0..row.len());
    scratch.sort_unstable_by_key(|&k| rank[row[k].col]);
    let mut rest = 1.0 - row.iter().map(|e| e.check).sum::<f64>();
    let mut total: f64 = row.iter().map(|e| e.check * values[e.col]).sum();
    for &k in scratch.iter() {
        if rest <= 0.0 {
            break;
        }
        let e = row[k];
        let add = (e.hat - e.check).min(rest);
        total += add * values[e.col];
        rest -= add;
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub expectation: (f64, f64),
    pub iterations: usize,
    pub tail_bound: f64,
}

/// Smallest `N ≥ 1` with `γ^N · R_max / (1 − γ) ≤ target`.
pub fn default_iterations(gamma: f64, r_max: f64, target: f64) -> usize {
    if gamma == 0.0 || r_max <= 0.0 {
        return 1;
    }
    let scale = r_max / (1.0 - gamma);
    if scale <= target {
        return 1;
    }
    ((target / scale).ln() / gamma.ln()).ceil().max(1.0) as usize
}

fn ranks(values: &[f64], descending: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let c = values[a].partial_cmp(&values[b]).expect("finite values");
        let c = if descending { c.reverse() } else { c };
        c.then(a.cmp(&b))
    });
    let mut rank = vec![0; values.len()];
    for (r, q) in order.into_iter().enumerate() {
        rank[q] = r;
    }
    rank
}

/// Lower and upper discounted values over all feasible Markovian resolutions.
///
/// The lower pass starts at `r_lo` and uses the minimising distribution of
/// each row; the upper pass mirrors it. After `iterations` steps the upper
/// vector is raised by `γ^N · R_max / (1 − γ)` so it bounds the infinite sum.
pub fn interval_value_iteration(
    imc: &IntervalMarkovChain,
    r_lo: &[f64],
    r_hi: &[f64],
    gamma: f64,
    iterations: usize,
) -> Result<ValueBounds> {
    let n = imc.len();
    if r_lo.len() != n || r_hi.len() != n {
        return Err(Error::Dimension(format!("{n} states but {} / {} rewards", r_lo.len(), r_hi.len())));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::config("solver.gamma", "discount must lie in [0, 1)"));
    }
    if r_lo.iter().zip(r_hi).any(|(l, h)| !(0.0 <= *l && l <= h)) {
        return Err(Error::config("reward", "reward bounds must satisfy 0 <= lo <= hi"));
    }
    for (i, row) in imc.rows.iter().enumerate() {
        row_feasible(row, i)?;
    }
    let r_max = r_hi.iter().cloned().fold(0.0, f64::max);
    let mut lower = r_lo.to_vec();
    let mut upper = r_hi.to_vec();
    let mut scratch = Vec::new();
    for _ in 0..iterations {
        let rank_lo = ranks(&lower, false);
        let rank_hi = ranks(&upper, true);
        let next_lo: Vec<f64> = (0..n)
            .map(|q| r_lo[q] + gamma * greedy_value(&imc.rows[q], &rank_lo, &lower, &mut scratch))
            .collect();
        let next_hi: Vec<f64> = (0..n)
            .map(|q| r_hi[q] + gamma * greedy_value(&imc.rows[q], &rank_hi, &upper, &mut scratch))
            .collect();
        lower = next_lo;
        upper = next_hi;
    }
    let cap = r_max / (1.0 - gamma);
    let tail_bound = gamma.powi(iterations as i32) * cap;
    for (u, l) in upper.iter_mut().zip(&lower) {
        *u = (*u + tail_bound).min(cap).max(*l);
    }
    let expectation = aggregate_expectation(imc, &lower, &upper);
    Ok(ValueBounds {
        lower,
        upper,
        expectation,
        iterations,
        tail_bound,
    })
}

/// `(Σ p0·V̲, Σ p0·V̄)`.
pub fn aggregate_expectation(imc: &IntervalMarkovChain, lower: &[f64], upper: &[f64]) -> (f64, f64) {
    let lo = imc.p0.iter().zip(lower).map(|(p, v)| p * v).sum();
    let hi = imc.p0.iter().zip(upper).map(|(p, v)| p * v).sum();
    (lo, hi)
}

#[derive(Serialize, Deserialize)]
struct StateValue {
    state: AbstractState,
    v_lo: f64,
    v_hi: f64,
}

#[derive(Serialize, Deserialize)]
struct Interval {
    lo: f64,
    hi: f64,
}

#[derive(Serialize, Deserialize)]
struct ResultsFile {
    per_state: Vec<StateValue>,
    expectation: Interval,
    gamma: f64,
    iterations: usize,
    tail_bound: f64,
}

/// Results document: per-state bounds, the aggregated interval and solver data.
pub fn results_json(imc: &IntervalMarkovChain, vb: &ValueBounds, gamma: f64) -> Result<String> {
    let file = ResultsFile {
        per_state: imc
            .states
            .iter()
            .zip(vb.lower.iter().zip(&vb.upper))
            .map(|(s, (l, u))| StateValue {
                state: *s,
                v_lo: *l,
                v_hi: *u,
            })
            .collect(),
        expectation: Interval {
            lo: vb.expectation.0,
            hi: vb.expectation.1,
        },
        gamma,
        iterations: vb.iterations,
        tail_bound: vb.tail_bound,
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Inverse of [`results_json`]: states, value bounds and the discount.
pub fn parse_results(text: &str) -> Result<(Vec<AbstractState>, ValueBounds, f64)> {
    let file: ResultsFile = serde_json::from_str(text)?;
    let states = file.per_state.iter().map(|v| v.state).collect();
    let vb = ValueBounds {
        lower: file.per_state.iter().map(|v| v.v_lo).collect(),
        upper: file.per_state.iter().map(|v| v.v_hi).collect(),
        expectation: (file.expectation.lo, file.expectation.hi),
        iterations: file.iterations,
        tail_bound: file.tail_bound,
    };
    Ok((states, vb, file.gamma))
}
