//! Construction of the interval Markov chain over (cell, interevent time) states.
//!
//! Every transition interval is a product of a bound on `Pr(τ(x) = s')` and a
//! bound on `Pr(ζ_{s'} ∈ R' | τ(x) = s')`, each valid uniformly over the source
//! cell. Neither depends on the interevent time of the source state, so all
//! `k_max + 1` rows of a cell are identical.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussint::{mvn_rect_prob, std_normal_inv_cdf, IntegratorSettings};
use crate::geometry::{
    exact_p_vertices, extreme_candidates, linear_box, p1_p2_boxes, phi_cube, HyperRect, Partition,
    DEFAULT_VERTEX_CAP,
};
use crate::imc::{AbstractState, Entry, ImcMeta, IntervalMarkovChain, Repair};
use crate::meanopt::{max_integral_over_means, min_integral_over_means, MeanSet, OptSettings};
use crate::model::{InitialDistribution, PetcSystem, RewardKind, RewardSpec};
use crate::moments::{ConditionalGaussian, JointMoments, Moments};

pub const DEFAULT_DEN_FLOOR: f64 = 1e-9;
pub const DEFAULT_REPAIR_BUDGET: f64 = 0.05;
pub const DEFAULT_ENVELOPE_SIGMAS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbstractionSettings {
    pub int: IntegratorSettings,
    pub opt: OptSettings,
    pub vertex_cap: usize,
    pub den_floor: f64,
    pub repair_budget: f64,
    pub envelope_sigmas: f64,
}

impl Default for AbstractionSettings {
    fn default() -> Self {
        AbstractionSettings {
            int: IntegratorSettings::default(),
            opt: OptSettings::default(),
            vertex_cap: DEFAULT_VERTEX_CAP,
            den_floor: DEFAULT_DEN_FLOOR,
            repair_budget: DEFAULT_REPAIR_BUDGET,
            envelope_sigmas: DEFAULT_ENVELOPE_SIGMAS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionInterval {
    pub check: f64,
    pub hat: f64,
}

/// What a conditional probability is taken of: a fixed box, or the moving
/// no-event set `Φ(x)` of the source state.
#[derive(Debug, Clone, Copy)]
pub enum Target<'r> {
    Rect(&'r HyperRect),
    Phi,
}

#[derive(Debug, Clone, Copy)]
pub enum Destination<'r> {
    Cell { region: &'r HyperRect, s: usize },
    Unsafe,
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Candidate means: exact vertex images when affordable, and their outer box.
struct MeanSets {
    points: Option<Vec<Vec<f64>>>,
    outer: HyperRect,
}

impl MeanSets {
    fn min_set(&self) -> MeanSet<'_> {
        match &self.points {
            Some(p) => MeanSet::Vertices(p),
            None => MeanSet::Box(&self.outer),
        }
    }
}

/// Conditional law of `ζ_s` given the first `l` samples stayed in `Φ`, with
/// the `P1` (fixed target) and `P2` (moving target) mean sets of a cell.
struct CondContext<'c> {
    cond: &'c ConditionalGaussian,
    p1: MeanSets,
    p2: MeanSets,
}

pub struct Abstractor<'a> {
    sys: &'a PetcSystem,
    settings: AbstractionSettings,
    moments: Moments,
    /// Joint moments of `s` samples, `s = 1..k_max` (index `s - 1`).
    joint: Vec<JointMoments>,
    /// Conditional law of `ζ_s` given `s - 1` earlier samples (index `s - 1`).
    cond: Vec<ConditionalGaussian>,
}

impl<'a> Abstractor<'a> {
    pub fn new(sys: &'a PetcSystem, settings: AbstractionSettings) -> Result<Self> {
        let moments = Moments::new(sys, sys.k_max);
        let joint = (1..sys.k_max).map(|s| moments.joint_moments(s)).collect::<Result<Vec<_>>>()?;
        let cond = (1..=sys.k_max)
            .map(|s| moments.conditional_gaussian(s, s - 1))
            .collect::<Result<Vec<_>>>()?;
        Ok(Abstractor {
            sys,
            settings,
            moments,
            joint,
            cond,
        })
    }

    pub fn settings(&self) -> &AbstractionSettings {
        &self.settings
    }

    pub fn moments(&self) -> &Moments {
        &self.moments
    }

    fn joint(&self, s: usize) -> Result<std::borrow::Cow<'_, JointMoments>> {
        match self.joint.get(s.wrapping_sub(1)) {
            Some(j) => Ok(std::borrow::Cow::Borrowed(j)),
            None => Ok(std::borrow::Cow::Owned(self.moments.joint_moments(s)?)),
        }
    }

    /// Bounds on `Pr(ζ̃_s ∈ Φ^s(x))` uniformly over `x ∈ region`; `s = 0` is the certain event.
    pub fn phi_prob_bounds(&self, region: &HyperRect, s: usize) -> Result<(f64, f64)> {
        if s == 0 {
            return Ok((1.0, 1.0));
        }
        let joint = self.joint(s)?;
        let mu = self.moments.mu1_map(s);
        let points = mean_images(&mu, region);
        let outer = HyperRect::bounding(&points)?;
        let rect = phi_cube(self.sys.epsilon, s, self.sys.dim());
        let int = &self.settings.int;
        let lo = min_integral_over_means(&joint.covariance, &rect, MeanSet::Vertices(&points), int)?;
        let hi = max_integral_over_means(&joint.covariance, &rect, &outer, int, &self.settings.opt)?;
        Ok((clamp01(lo), clamp01(hi.max(lo))))
    }

    /// Bounds on `Pr(τ(x) = s)` for `s = 1..=k_max` (index `s - 1`).
    pub fn tau_bounds_all(&self, region: &HyperRect) -> Result<Vec<(f64, f64)>> {
        let k_max = self.sys.k_max;
        let phi = (0..k_max)
            .map(|s| self.phi_prob_bounds(region, s))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::with_capacity(k_max);
        for s in 1..k_max {
            out.push((clamp01(phi[s - 1].0 - phi[s].1), clamp01(phi[s - 1].1 - phi[s].0)));
        }
        out.push(phi[k_max - 1]);
        Ok(out)
    }

    /// Bounds on `Pr(τ(x) = s)` uniformly over `x ∈ region`.
    pub fn tau_prob_bounds(&self, region: &HyperRect, s: usize) -> Result<(f64, f64)> {
        let k_max = self.sys.k_max;
        if s == 0 || s > k_max {
            return Err(Error::Dimension(format!("interevent time {s} outside 1..={k_max}")));
        }
        if s == k_max {
            return self.phi_prob_bounds(region, k_max - 1);
        }
        let prev = self.phi_prob_bounds(region, s - 1)?;
        let cur = self.phi_prob_bounds(region, s)?;
        Ok((clamp01(prev.0 - cur.1), clamp01(prev.1 - cur.0)))
    }

    fn context<'c>(&self, cond: &'c ConditionalGaussian, region: &HyperRect) -> CondContext<'c> {
        let eps = self.sys.epsilon;
        let (b1, b2) = p1_p2_boxes(cond, region, eps);
        let (v1, v2) = match exact_p_vertices(cond, region, eps, self.settings.vertex_cap) {
            Some((p1, p2)) => (Some(extreme_candidates(&p1)), Some(extreme_candidates(&p2))),
            None => (None, None),
        };
        CondContext {
            cond,
            p1: MeanSets {
                points: v1,
                outer: b1,
            },
            p2: MeanSets {
                points: v2,
                outer: b2,
            },
        }
    }

    fn bounds_in_context(&self, ctx: &CondContext<'_>, target: Target<'_>) -> Result<(f64, f64)> {
        let phi0;
        let (sets, rect) = match target {
            Target::Rect(r) => (&ctx.p1, r),
            Target::Phi => {
                phi0 = phi_cube(self.sys.epsilon, 1, self.sys.dim());
                (&ctx.p2, &phi0)
            }
        };
        let cov = &ctx.cond.sigma_xi;
        let int = &self.settings.int;
        let lo = min_integral_over_means(cov, rect, sets.min_set(), int)?;
        let hi = max_integral_over_means(cov, rect, &sets.outer, int, &self.settings.opt)?;
        Ok((clamp01(lo), clamp01(hi.max(lo))))
    }

    /// Bounds on `Pr(ζ_s ∈ target | ζ̃_l ∈ Φ^l(x))` uniformly over `x ∈ region`, for `l < s`.
    pub fn cond_prob_bounds(&self, region: &HyperRect, s: usize, l: usize, target: Target<'_>) -> Result<(f64, f64)> {
        let owned;
        let cond = if l + 1 == s && s <= self.sys.k_max {
            &self.cond[s - 1]
        } else {
            owned = self.moments.conditional_gaussian(s, l)?;
            &owned
        };
        let ctx = self.context(cond, region);
        self.bounds_in_context(&ctx, target)
    }

    /// Bounds on `Pr(ζ_s ∈ dest | τ(x) = s)` uniformly over `x ∈ region`.
    pub fn conditional_dest_bounds(&self, region: &HyperRect, s: usize, dest: &HyperRect) -> Result<(f64, f64)> {
        if s == 0 || s > self.sys.k_max {
            return Err(Error::Dimension(format!("interevent time {s} outside 1..={}", self.sys.k_max)));
        }
        let ctx = self.context(&self.cond[s - 1], region);
        let f = if s < self.sys.k_max {
            Some(self.bounds_in_context(&ctx, Target::Phi)?)
        } else {
            None
        };
        self.dest_bounds_in_context(&ctx, region, f, dest)
    }

    /// `f` holds the bounds on `Pr(Φ(x) | Φ^{s-1})`, absent at `s = k_max`.
    fn dest_bounds_in_context(
        &self,
        ctx: &CondContext<'_>,
        region: &HyperRect,
        f: Option<(f64, f64)>,
        dest: &HyperRect,
    ) -> Result<(f64, f64)> {
        let a = self.bounds_in_context(ctx, Target::Rect(dest))?;
        let Some((f_lo, f_hi)) = f else {
            return Ok(a);
        };
        // J = Pr(ζ_s ∈ dest ∩ Φ(x) | Φ^{s-1}) = Pr(dest | Φ^s) · Pr(Φ(x) | Φ^{s-1})
        let eps = self.sys.epsilon;
        let (deg_lo, deg_hi) = degenerate_cond_bounds(region, dest, eps);
        let mut j_hi = deg_hi * f_hi;
        if j_hi > 0.0 {
            // dest ∩ Φ(x) ⊆ dest ∩ (region ⊕ Φ(0)) for every x in the region
            let reach = region.minkowski_sum(&HyperRect::symmetric(eps, region.dim()));
            j_hi = match dest.intersect(&reach) {
                Some(cap) => j_hi.min(self.bounds_in_context(ctx, Target::Rect(&cap))?.1),
                None => 0.0,
            };
        }
        let mut j_lo = deg_lo * f_lo;
        // dest ∩ ⋂_x Φ(x) ⊆ dest ∩ Φ(x)
        let common = HyperRect {
            lower: region.upper.iter().map(|u| u - eps).collect(),
            upper: region.lower.iter().map(|l| l + eps).collect(),
        };
        if common.lower.iter().zip(&common.upper).all(|(l, u)| l <= u) {
            if let Some(core) = dest.intersect(&common) {
                if !core.is_degenerate() {
                    j_lo = j_lo.max(self.bounds_in_context(ctx, Target::Rect(&core))?.0);
                }
            }
        }
        let floor = self.settings.den_floor;
        let lo = clamp01((a.0 - j_hi) / (1.0 - f_lo).max(floor));
        let hi = if 1.0 - f_hi <= floor {
            1.0
        } else {
            clamp01((a.1 - j_lo) / (1.0 - f_hi))
        };
        Ok((lo, hi.max(lo)))
    }

    /// Interval on the joint probability of jumping from `region` to `dest`.
    pub fn transition_interval(
        &self,
        region: &HyperRect,
        dest: Destination<'_>,
        domain: &HyperRect,
    ) -> Result<TransitionInterval> {
        let tau = self.tau_bounds_all(region)?;
        match dest {
            Destination::Cell { region: target, s } => {
                if s == 0 || s > self.sys.k_max {
                    return Err(Error::Dimension(format!("interevent time {s} outside 1..={}", self.sys.k_max)));
                }
                let (t_lo, t_hi) = tau[s - 1];
                if self.outside_envelope(region, target, s) {
                    return Ok(TransitionInterval {
                        check: 0.0,
                        hat: self.settings.int.tol.min(t_hi),
                    });
                }
                let (c_lo, c_hi) = self.conditional_dest_bounds(region, s, target)?;
                Ok(TransitionInterval {
                    check: c_lo * t_lo,
                    hat: c_hi * t_hi,
                })
            }
            Destination::Unsafe => {
                let (mut check, mut hat) = (0.0, 0.0);
                for (s, &(t_lo, t_hi)) in (1..=self.sys.k_max).zip(&tau) {
                    let (x_lo, x_hi) = self.conditional_dest_bounds(region, s, domain)?;
                    check += (1.0 - x_hi) * t_lo;
                    hat += (1.0 - x_lo) * t_hi;
                }
                Ok(TransitionInterval {
                    check: clamp01(check),
                    hat: clamp01(hat),
                })
            }
        }
    }

    /// True when, in some coordinate, `target` lies more than the envelope
    /// width of standard deviations away from every mean of `ζ_s` over `region`.
    fn outside_envelope(&self, region: &HyperRect, target: &HyperRect, s: usize) -> bool {
        let k = self
            .settings
            .envelope_sigmas
            .max(-std_normal_inv_cdf(self.settings.int.tol.max(1e-300)));
        let means = linear_box(self.moments.mean_matrix(s), region);
        let cov = self.moments.marginal_cov(s);
        (0..region.dim()).any(|i| {
            let sd = cov[(i, i)].sqrt();
            target.lower[i] > means.upper[i] + k * sd || target.upper[i] < means.lower[i] - k * sd
        })
    }

    /// One outgoing row of a cell: `(destination cell, s', interval)` plus the unsafe interval.
    fn cell_row(&self, region: &HyperRect, partition: &Partition) -> Result<CellRow> {
        let k_max = self.sys.k_max;
        let tau = self.tau_bounds_all(region)?;
        let mut entries = Vec::new();
        let (mut u_check, mut u_hat) = (0.0, 0.0);
        for s in 1..=k_max {
            let (t_lo, t_hi) = tau[s - 1];
            if t_hi <= 0.0 {
                continue;
            }
            let ctx = self.context(&self.cond[s - 1], region);
            let f = if s < k_max {
                Some(self.bounds_in_context(&ctx, Target::Phi)?)
            } else {
                None
            };
            for (j, target) in partition.cells.iter().enumerate() {
                let (check, hat) = if self.outside_envelope(region, target, s) {
                    (0.0, self.settings.int.tol.min(t_hi))
                } else {
                    let (c_lo, c_hi) = self.dest_bounds_in_context(&ctx, region, f, target)?;
                    (c_lo * t_lo, c_hi * t_hi)
                };
                if hat > 0.0 {
                    entries.push((j, s, check, hat));
                }
            }
            let (x_lo, x_hi) = self.dest_bounds_in_context(&ctx, region, f, &partition.domain)?;
            u_check += (1.0 - x_hi) * t_lo;
            u_hat += (1.0 - x_lo) * t_hi;
        }
        Ok(CellRow {
            entries,
            unsafe_interval: (clamp01(u_check), clamp01(u_hat)),
        })
    }

    /// Assembles the full chain: states, shared rows, repairs, unsafe self-loop and `p0`.
    pub fn build_imc(&self, partition: &Partition, p0: &InitialDistribution) -> Result<IntervalMarkovChain> {
        let n = self.sys.dim();
        if partition.dim() != n {
            return Err(Error::Dimension(format!(
                "partition of dimension {} for a {n}-dimensional system",
                partition.dim()
            )));
        }
        p0.validate(n)?;
        let k_max = self.sys.k_max;
        let m = partition.len();
        let per_cell = k_max + 1;
        let unsafe_id = m * per_cell;

        let rows: Vec<CellRow> = partition
            .cells
            .par_iter()
            .map(|cell| self.cell_row(cell, partition))
            .collect::<Result<Vec<_>>>()?;

        let mut states = Vec::with_capacity(unsafe_id + 1);
        for region_id in 0..m {
            for s in 0..=k_max {
                states.push(AbstractState::Region { region_id, s });
            }
        }
        states.push(AbstractState::Unsafe);

        let mut repairs = Vec::new();
        let mut all_rows = Vec::with_capacity(unsafe_id + 1);
        for (i, row) in rows.into_iter().enumerate() {
            let mut entries: Vec<Entry> = row
                .entries
                .iter()
                .map(|&(j, s, check, hat)| Entry {
                    col: j * per_cell + s,
                    check,
                    hat,
                })
                .collect();
            let (u_check, u_hat) = row.unsafe_interval;
            if u_hat > 0.0 {
                entries.push(Entry {
                    col: unsafe_id,
                    check: u_check,
                    hat: u_hat,
                });
            }
            entries.sort_by_key(|e| e.col);
            let first = i * per_cell;
            let fixes = repair_row(&mut entries, first, self.settings.repair_budget)?;
            for s in 0..per_cell {
                for r in &fixes {
                    repairs.push(Repair {
                        row: first + s,
                        kind: r.kind.clone(),
                        amount: r.amount,
                    });
                }
                all_rows.push(entries.clone());
            }
        }
        all_rows.push(vec![Entry {
            col: unsafe_id,
            check: 1.0,
            hat: 1.0,
        }]);

        let (cell_mass, unsafe_mass) = initial_masses(partition, p0, &self.settings.int)?;
        let mut p = vec![0.0; unsafe_id + 1];
        for (i, w) in cell_mass.into_iter().enumerate() {
            p[i * per_cell] = w;
        }
        p[unsafe_id] = unsafe_mass;

        let s = &self.settings;
        let imc = IntervalMarkovChain {
            states,
            p0: p,
            rows: all_rows,
            meta: ImcMeta {
                k_max,
                cells: m,
                int_tol: s.int.tol,
                int_seed: s.int.seed,
                opt_tol: s.opt.opt_tol,
                opt_slack: s.opt.opt_slack,
                vertex_cap: s.vertex_cap,
                den_floor: s.den_floor,
                repair_budget: s.repair_budget,
                envelope_sigmas: s.envelope_sigmas,
                repairs,
                soundness: "interval endpoints hold up to the quasi-Monte Carlo error radius \
                            (three standard errors across randomized shifts)"
                    .into(),
            },
        };
        imc.validate()?;
        Ok(imc)
    }
}

struct CellRow {
    entries: Vec<(usize, usize, f64, f64)>,
    unsafe_interval: (f64, f64),
}

/// Images of the corners of `region` under a linear map, as plain vectors.
fn mean_images(map: &DMatrix<f64>, region: &HyperRect) -> Vec<Vec<f64>> {
    region
        .vertices()
        .iter()
        .map(|v| (map * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec())
        .collect()
}

/// `Pr(ζ_s ∈ dest | ζ̃_s ∈ Φ^s(x))`: the last sample is confined to
/// `x + Φ(0) ⊆ region ⊕ Φ(0)`, so only containment and overlap can be decided.
pub fn degenerate_cond_bounds(region: &HyperRect, dest: &HyperRect, epsilon: f64) -> (f64, f64) {
    let reach = region.minkowski_sum(&HyperRect::symmetric(epsilon, region.dim()));
    let lo = if dest.contains_rect(&reach) { 1.0 } else { 0.0 };
    let hi = if dest.interiors_overlap(&reach) { 1.0 } else { 0.0 };
    (lo, hi)
}

struct RowFix {
    kind: String,
    amount: f64,
}

/// Restores `Σ check ≤ 1 ≤ Σ hat` within `budget`, otherwise fails with the row id.
fn repair_row(row: &mut [Entry], row_id: usize, budget: f64) -> Result<Vec<RowFix>> {
    let mut fixes = Vec::new();
    let hat_sum: f64 = row.iter().map(|e| e.hat).sum();
    if hat_sum < 1.0 {
        let deficit = 1.0 - hat_sum;
        if deficit > budget || row.is_empty() {
            return Err(Error::InfeasibleRow {
                row: row_id,
                reason: format!("upper bounds sum to {hat_sum}, deficit exceeds repair budget {budget}"),
            });
        }
        let mut rest = deficit;
        while rest > 1e-15 {
            let open: Vec<usize> = (0..row.len()).filter(|&k| row[k].hat < 1.0).collect();
            if open.is_empty() {
                break;
            }
            let share = rest / open.len() as f64;
            for k in open {
                let add = share.min(1.0 - row[k].hat);
                row[k].hat += add;
                rest -= add;
            }
        }
        fixes.push(RowFix {
            kind: "inflate_hat".into(),
            amount: deficit,
        });
    }
    let check_sum: f64 = row.iter().map(|e| e.check).sum();
    if check_sum > 1.0 {
        let excess = check_sum - 1.0;
        if excess > budget {
            return Err(Error::InfeasibleRow {
                row: row_id,
                reason: format!("lower bounds sum to {check_sum}, excess exceeds repair budget {budget}"),
            });
        }
        for e in row.iter_mut() {
            e.check /= check_sum;
        }
        fixes.push(RowFix {
            kind: "deflate_check".into(),
            amount: excess,
        });
    }
    Ok(fixes)
}

/// Initial mass of every cell and of the outside of the domain.
pub fn initial_masses(
    partition: &Partition,
    p0: &InitialDistribution,
    int: &IntegratorSettings,
) -> Result<(Vec<f64>, f64)> {
    let m = partition.len();
    match p0 {
        InitialDistribution::Uniform => {
            let total = partition.domain.volume();
            Ok((partition.cells.iter().map(|c| c.volume() / total).collect(), 0.0))
        }
        InitialDistribution::PointMass(x) => {
            let mut w = vec![0.0; m];
            match partition.locate(x.as_slice()) {
                Some(i) => {
                    w[i] = 1.0;
                    Ok((w, 0.0))
                }
                None => Ok((w, 1.0)),
            }
        }
        InitialDistribution::Gaussian { mean, cov } => {
            let mut w = partition
                .cells
                .iter()
                .map(|c| Ok(mvn_rect_prob(mean, cov, c, int)?.value))
                .collect::<Result<Vec<f64>>>()?;
            let inside: f64 = w.iter().sum();
            if inside > 1.0 {
                for v in &mut w {
                    *v /= inside;
                }
                Ok((w, 0.0))
            } else {
                Ok((w, 1.0 - inside))
            }
        }
    }
}

/// Range of the reward over the concrete states abstracted by `state`.
pub fn reward_bounds(rw: &RewardSpec, state: AbstractState, partition: &Partition, k_max: usize) -> Result<(f64, f64)> {
    match (&rw.kind, state) {
        (RewardKind::IntereventTime, AbstractState::Region { s, .. }) => Ok((s as f64, s as f64)),
        (RewardKind::IntereventTime, AbstractState::Unsafe) => Ok((0.0, k_max as f64)),
        (
            RewardKind::OvershootPenalty {
                alpha,
                beta,
                eps_tilde,
                r_max,
            },
            st,
        ) => {
            let f = |norm: f64, s: usize| (alpha / (norm + eps_tilde) + beta * s as f64).min(*r_max);
            match st {
                AbstractState::Region { region_id, s } => {
                    let cell = partition
                        .cells
                        .get(region_id)
                        .ok_or_else(|| Error::Dimension(format!("region {region_id} not in the partition")))?;
                    let (near, far) = cell.norm_range();
                    Ok((f(far, s), f(near, s)))
                }
                // infimum as |x| → ∞ with s = 0, supremum at x = 0 with s = k_max
                AbstractState::Unsafe => Ok((0.0, f(0.0, k_max))),
            }
        }
        (
            RewardKind::Table {
                entries,
                default,
                unsafe_row,
                ..
            },
            st,
        ) => match st {
            AbstractState::Region { region_id, s } => entries
                .get(&(region_id, s))
                .copied()
                .or(*default)
                .ok_or_else(|| Error::config("reward.entries", format!("no entry for region {region_id}, s {s}"))),
            AbstractState::Unsafe => {
                unsafe_row.ok_or_else(|| Error::config("reward.unsafe", "table rewards require an unsafe row"))
            }
        },
    }
}

/// Reward bound vectors over all states of a chain.
pub fn reward_vectors(
    rw: &RewardSpec,
    imc: &IntervalMarkovChain,
    partition: &Partition,
    k_max: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lo = Vec::with_capacity(imc.len());
    let mut hi = Vec::with_capacity(imc.len());
    for &q in &imc.states {
        let (a, b) = reward_bounds(rw, q, partition, k_max)?;
        lo.push(a);
        hi.push(b);
    }
    Ok((lo, hi))
}
