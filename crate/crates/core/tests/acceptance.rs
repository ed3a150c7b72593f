//! Acceptance suite. Runs every criterion, prints one line each and exits
//! non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use common::{bracketing_audit, scalar, stable_2d, wiener, LARGE_EPS_CONFIG, STABLE_2D_CONFIG};
use nalgebra::{DMatrix, DVector};
use petc_imc::abstraction::{reward_bounds, reward_vectors, AbstractionSettings, Abstractor};
use petc_imc::cli::{build, evaluate, simulate, CheckReport};
use petc_imc::config::Config;
use petc_imc::gaussint::{mvn_rect_prob, std_normal_cdf, std_normal_pdf, IntegratorSettings};
use petc_imc::geometry::{grid_partition, HyperRect, Partition};
use petc_imc::imc::{interval_value_iteration, AbstractState, Entry, ImcMeta, IntervalMarkovChain};
use petc_imc::meanopt::{max_integral_over_means, min_integral_over_means, MeanSet, OptSettings};
use petc_imc::model::{InitialDistribution, RewardKind, RewardSpec};
use petc_imc::moments::{gram_cov, mean_matrix, Moments};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn grid(lo: &[f64], hi: &[f64], counts: &[usize]) -> Partition {
    grid_partition(&HyperRect::new(lo.to_vec(), hi.to_vec()).unwrap(), counts).unwrap()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn moment_oracle() -> Outcome {
    let sys = scalar(-1.0, -1.0, 1.0, 1.0, 1);
    // RK4 on m' = A m + BK x with m(0) = x = 1.
    let mut m = 1.0;
    let steps = 10_000;
    let h = 1.0 / steps as f64;
    let f = |m: f64| -m - 1.0;
    for _ in 0..steps {
        let k1 = f(m);
        let k2 = f(m + 0.5 * h * k1);
        let k3 = f(m + 0.5 * h * k2);
        let k4 = f(m + h * k3);
        m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    let g = simpson(|s| (-2.0 * s).exp(), 0.0, 1.0, 2000);
    let mean = mean_matrix(&sys, 1)[(0, 0)];
    let cov = gram_cov(&sys, 1, 1)[(0, 0)];
    let (dm, dc) = ((mean - m).abs(), (cov - g).abs());
    outcome(
        dm < 1e-8 && dc < 1e-8,
        format!("M(1) = {mean:.9} (oracle {m:.9}), Cov(1,1) = {cov:.9} (oracle {g:.9})"),
    )
}

fn wiener_exactness() -> Outcome {
    let sys = petc_imc::model::PetcSystem::new(
        DMatrix::zeros(2, 2),
        DMatrix::identity(2, 2),
        DMatrix::zeros(2, 2),
        DMatrix::identity(2, 2),
        1.0,
        3,
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for t1 in 1..=3 {
        for t2 in 1..=3 {
            let expected = DMatrix::<f64>::identity(2, 2) * t1.min(t2) as f64;
            worst = worst.max((gram_cov(&sys, t1, t2) - expected).abs().max());
        }
    }
    outcome(worst <= 1e-12, format!("max deviation from min(t1, t2) I: {worst:.1e}"))
}

fn integrator() -> Outcome {
    let settings = IntegratorSettings::default();
    let mut ok = true;
    let mut notes = Vec::new();
    let one = |v: f64| DMatrix::from_element(1, 1, v);

    let p = mvn_rect_prob(&DVector::zeros(1), &one(1.0), &HyperRect::symmetric(1.0, 1), &settings).unwrap();
    let oracle = std_normal_cdf(1.0) - std_normal_cdf(-1.0);
    ok &= (p.value - oracle).abs() <= p.err.max(1e-15) && p.err <= 1e-4 && (p.value - 0.6826895).abs() < 1e-7;
    notes.push(format!("1-D {:.7}", p.value));

    let p = mvn_rect_prob(&DVector::zeros(2), &DMatrix::identity(2, 2), &HyperRect::symmetric(1.0, 2), &settings).unwrap();
    ok &= (p.value - oracle * oracle).abs() <= p.err.max(1e-15) && p.err <= 1e-4 && (p.value - 0.4660649).abs() < 1e-7;
    notes.push(format!("2-D {:.7}", p.value));

    // Correlated pair against a one-dimensional quadrature of the conditional law.
    let rho: f64 = 0.6;
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
    let rect = HyperRect::new(vec![-1.0, -0.5], vec![1.5, 2.0]).unwrap();
    let sd = (1.0 - rho * rho).sqrt();
    let oracle = simpson(
        |x| std_normal_pdf(x) * (std_normal_cdf((2.0 - rho * x) / sd) - std_normal_cdf((-0.5 - rho * x) / sd)),
        -1.0,
        1.5,
        4000,
    );
    let p = mvn_rect_prob(&DVector::zeros(2), &cov, &rect, &settings).unwrap();
    ok &= (p.value - oracle).abs() <= p.err && p.err <= 1e-4;
    notes.push(format!("correlated {:.6} (err {:.1e})", p.value, p.err));

    let d = 40;
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let var: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..2.0)).collect();
    let mean = DVector::from_fn(d, |_, _| rng.random_range(-0.3..0.3));
    let rect = HyperRect::new(vec![-2.5; d], vec![2.5; d]).unwrap();
    let product: f64 = (0..d)
        .map(|i| {
            let s = var[i].sqrt();
            std_normal_cdf((2.5 - mean[i]) / s) - std_normal_cdf((-2.5 - mean[i]) / s)
        })
        .product();
    let p = mvn_rect_prob(&mean, &DMatrix::from_diagonal(&DVector::from_vec(var)), &rect, &settings).unwrap();
    ok &= (p.value - product).abs() <= 1e-6;
    notes.push(format!("40-D {:.6} vs {:.6}", p.value, product));
    outcome(ok, notes.join(", "))
}

fn chain(rows: Vec<Vec<(f64, f64)>>, p0: Vec<f64>) -> IntervalMarkovChain {
    let n = rows.len();
    let mut states: Vec<AbstractState> = (0..n - 1).map(|i| AbstractState::Region { region_id: i, s: 0 }).collect();
    states.push(AbstractState::Unsafe);
    IntervalMarkovChain {
        states,
        p0,
        rows: rows
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .enumerate()
                    .filter(|(_, (_, h))| *h > 0.0)
                    .map(|(col, (check, hat))| Entry { col, check, hat })
                    .collect()
            })
            .collect(),
        meta: ImcMeta::default(),
    }
}

/// Vertices of `{p : check <= p <= hat, sum p = 1}`: all coordinates but one at a bound.
fn row_vertices(row: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let k = row.len();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for free in 0..k {
        for mask in 0..(1u32 << (k - 1)) {
            let mut p = vec![0.0; k];
            let mut bit = 0;
            for j in 0..k {
                if j == free {
                    continue;
                }
                p[j] = if mask >> bit & 1 == 1 { row[j].1 } else { row[j].0 };
                bit += 1;
            }
            let rest = 1.0 - p.iter().sum::<f64>();
            if rest >= row[free].0 - 1e-12 && rest <= row[free].1 + 1e-12 {
                p[free] = rest;
                if !out.iter().any(|q| q.iter().zip(&p).all(|(a, b)| (a - b).abs() < 1e-14)) {
                    out.push(p);
                }
            }
        }
    }
    out
}

fn policy_value(p: &[&Vec<f64>], r: &[f64], gamma: f64) -> DVector<f64> {
    let n = r.len();
    let m = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - gamma * p[i][j]);
    m.lu().solve(&DVector::from_column_slice(r)).unwrap()
}

/// Component-wise extremes over every stationary choice of row vertices.
fn enumerate_policies(rows: &[Vec<(f64, f64)>], r_lo: &[f64], r_hi: &[f64], gamma: f64) -> (Vec<f64>, Vec<f64>) {
    let verts: Vec<Vec<Vec<f64>>> = rows.iter().map(|r| row_vertices(r)).collect();
    let n = rows.len();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let mut idx = vec![0usize; n];
    loop {
        let pick: Vec<&Vec<f64>> = (0..n).map(|i| &verts[i][idx[i]]).collect();
        let vl = policy_value(&pick, r_lo, gamma);
        let vh = policy_value(&pick, r_hi, gamma);
        for i in 0..n {
            lo[i] = lo[i].min(vl[i]);
            hi[i] = hi[i].max(vh[i]);
        }
        let mut k = 0;
        while k < n {
            idx[k] += 1;
            if idx[k] < verts[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == n {
            return (lo, hi);
        }
    }
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<(f64, f64)>> {
    (0..n)
        .map(|_| {
            let mut w: Vec<f64> = (0..n)
                .map(|_| if rng.random_bool(0.25) { 0.0 } else { rng.random_range(0.05..1.0) })
                .collect();
            if w.iter().all(|&x| x == 0.0) {
                w[rng.random_range(0..n)] = 1.0;
            }
            let total: f64 = w.iter().sum();
            w.iter()
                .map(|&p| {
                    let p = p / total;
                    if p == 0.0 {
                        (0.0, 0.0)
                    } else {
                        ((p - rng.random_range(0.0..0.2)).max(0.0), (p + rng.random_range(0.0..0.2)).min(1.0))
                    }
                })
                .collect()
        })
        .collect()
}

fn value_iteration_vs_enumeration() -> Outcome {
    let gamma = 0.9;
    let iterations = 600;
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let mut compare = |rows: Vec<Vec<(f64, f64)>>, r_lo: Vec<f64>, r_hi: Vec<f64>| {
        let n = rows.len();
        let (lo, hi) = enumerate_policies(&rows, &r_lo, &r_hi, gamma);
        let imc = chain(rows, vec![1.0 / n as f64; n]);
        let vb = interval_value_iteration(&imc, &r_lo, &r_hi, gamma, iterations).unwrap();
        for i in 0..n {
            worst = worst.max((vb.lower[i] - lo[i]).abs()).max((vb.upper[i] - hi[i]).abs());
        }
        cases += 1;
    };

    // Hand-built chains.
    compare(vec![vec![(1.0, 1.0)]], vec![1.0], vec![2.0]);
    compare(
        vec![vec![(0.2, 0.6), (0.4, 0.8)], vec![(0.0, 0.0), (1.0, 1.0)]],
        vec![1.0, 0.0],
        vec![1.0, 0.5],
    );
    compare(
        vec![
            vec![(0.0, 0.5), (0.1, 0.7), (0.2, 0.6)],
            vec![(0.3, 0.3), (0.3, 0.3), (0.4, 0.4)],
            vec![(0.0, 0.0), (0.0, 0.0), (1.0, 1.0)],
        ],
        vec![0.0, 1.0, 0.0],
        vec![2.0, 1.0, 3.0],
    );
    compare(
        vec![
            vec![(0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0)],
            vec![(0.1, 0.2), (0.1, 0.2), (0.3, 0.5), (0.2, 0.4)],
            vec![(0.0, 0.3), (0.5, 0.9), (0.0, 0.0), (0.1, 0.2)],
            vec![(0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (1.0, 1.0)],
        ],
        vec![0.5, 1.0, 2.0, 0.0],
        vec![1.5, 1.0, 2.0, 3.0],
    );

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..40 {
        let n = rng.random_range(2..=4);
        let rows = random_rows(&mut rng, n);
        let r_lo: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let r_hi: Vec<f64> = r_lo.iter().map(|r| r + rng.random_range(0.0..1.0)).collect();
        compare(rows, r_lo, r_hi);
    }

    // Point intervals reduce to a linear solve.
    let mut degenerate_worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(2..=4);
        let rows: Vec<Vec<(f64, f64)>> = random_rows(&mut rng, n)
            .into_iter()
            .map(|row| {
                let total: f64 = row.iter().map(|e| e.1).sum();
                row.into_iter().map(|e| (e.1 / total, e.1 / total)).collect()
            })
            .collect();
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let p: Vec<Vec<f64>> = rows.iter().map(|row| row.iter().map(|e| e.0).collect()).collect();
        let refs: Vec<&Vec<f64>> = p.iter().collect();
        let exact = policy_value(&refs, &r, gamma);
        let imc = chain(rows, vec![1.0 / n as f64; n]);
        let vb = interval_value_iteration(&imc, &r, &r, gamma, iterations).unwrap();
        for i in 0..n {
            degenerate_worst = degenerate_worst
                .max((vb.lower[i] - exact[i]).abs())
                .max((vb.upper[i] - vb.tail_bound - exact[i]).abs());
        }
    }
    outcome(
        worst <= 1e-9 && degenerate_worst <= 1e-9,
        format!("{cases} chains, max deviation {worst:.1e}; point intervals {degenerate_worst:.1e}"),
    )
}

fn bracketing() -> Outcome {
    let sys = wiener(1.0, 2);
    let partition = grid(&[-2.0], &[2.0], &[4]);
    let imc = Abstractor::new(&sys, AbstractionSettings::default())
        .unwrap()
        .build_imc(&partition, &InitialDistribution::Uniform)
        .unwrap();
    let report = bracketing_audit(&sys, &partition, &imc, 200, 10_000, 5);
    let mut detail = format!(
        "{} comparisons, {} outside 3 sigma (worst {:.2} sigma)",
        report.comparisons,
        report.violations.len(),
        report.worst_z
    );
    if let Some(first) = report.violations.first() {
        detail.push_str(&format!("; first: {first}"));
    }
    outcome(report.violations.is_empty(), detail)
}

fn end_to_end() -> Outcome {
    let cfg = Config::parse(STABLE_2D_CONFIG).unwrap();
    let imc = build(&cfg).unwrap();
    let vb = evaluate(&cfg, &imc).unwrap();
    let mc = simulate(&cfg, None).unwrap();
    let r_max = cfg.reward.r_max(cfg.system.k_max);
    let gamma = cfg.reward.gamma;
    let report = CheckReport::new(&vb, &mc, r_max, gamma);
    let width_limit = 0.9 * r_max / (1.0 - gamma);
    let width = report.e_hi - report.e_lo;
    outcome(
        report.passed() && width < width_limit,
        format!(
            "E in [{:.4}, {:.4}], MC {:.4} +- {:.4}, width {:.3} (limit {width_limit:.3}), {} states, {} repairs",
            report.e_lo,
            report.e_hi,
            report.estimate,
            report.margin,
            width,
            imc.len(),
            imc.meta.repairs.len()
        ),
    )
}

fn limit_behaviour() -> Outcome {
    let cfg = Config::parse(LARGE_EPS_CONFIG).unwrap();
    let ab = Abstractor::new(&cfg.system, cfg.solver.abstraction_settings()).unwrap();
    let k_max = cfg.system.k_max;
    let worst_forced = cfg
        .partition
        .cells
        .iter()
        .map(|c| ab.tau_prob_bounds(c, k_max).unwrap().0)
        .fold(1.0, f64::min);
    let imc = build(&cfg).unwrap();
    let vb = evaluate(&cfg, &imc).unwrap();
    let mc = simulate(&cfg, None).unwrap();
    let report = CheckReport::new(&vb, &mc, cfg.reward.r_max(k_max), cfg.reward.gamma);
    // Every interevent time equals k_max = 2, so E = sum_{i>=1} 0.5^i * 2.
    let closed_form = 2.0;
    let contains = report.e_lo - report.margin <= closed_form && closed_form <= report.e_hi + report.margin;
    outcome(
        worst_forced >= 0.99 && contains && report.passed(),
        format!(
            "min_cell Pr(tau = k_max) >= {worst_forced:.6}, E in [{:.4}, {:.6}] contains {closed_form}, MC {:.6}",
            report.e_lo, report.e_hi, report.estimate
        ),
    )
}

fn invariants() -> Outcome {
    let mut failed: Vec<&str> = Vec::new();
    let mut check = |name: &'static str, ok: bool| {
        if !ok {
            failed.push(name);
        }
    };
    let settings = AbstractionSettings::default();
    let tol = settings.int.tol;
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    let cases = [
        (wiener(1.0, 2), grid(&[-2.0], &[2.0], &[4])),
        (scalar(-1.0, -1.0, 1.0, 0.5, 3), grid(&[-1.5], &[1.5], &[5])),
        (stable_2d(0.3, 2), grid(&[-1.0, -1.0], &[1.0, 1.0], &[3, 3])),
    ];
    for (sys, partition) in &cases {
        let ab = Abstractor::new(sys, settings).unwrap();
        let imc = ab.build_imc(partition, &InitialDistribution::Uniform).unwrap();
        let per_cell = sys.k_max + 1;

        check(
            "source-s invariance",
            (0..partition.len()).all(|c| (1..per_cell).all(|s| imc.rows[c * per_cell + s] == imc.rows[c * per_cell])),
        );

        let complete = partition.cells.iter().all(|cell| {
            let tau = ab.tau_bounds_all(cell).unwrap();
            let slack = sys.k_max as f64 * tol;
            tau.iter().map(|t| t.1).sum::<f64>() >= 1.0 - slack && tau.iter().map(|t| t.0).sum::<f64>() <= 1.0 + slack
        });
        check("tau-completeness", complete);

        let u = imc.unsafe_index().unwrap();
        check(
            "unsafe absorption",
            imc.rows[u] == vec![Entry { col: u, check: 1.0, hat: 1.0 }],
        );

        let rw = RewardSpec {
            kind: RewardKind::OvershootPenalty {
                alpha: 1.0,
                beta: 0.5,
                eps_tilde: 0.2,
                r_max: 4.0,
            },
            gamma: 0.9,
        };
        let mut sandwich = true;
        for (region_id, cell) in partition.cells.iter().enumerate() {
            for s in 0..=sys.k_max {
                let (lo, hi) = reward_bounds(&rw, AbstractState::Region { region_id, s }, partition, sys.k_max).unwrap();
                for _ in 0..10_000 / per_cell {
                    let x: Vec<f64> = (0..cell.dim()).map(|i| rng.random_range(cell.lower[i]..=cell.upper[i])).collect();
                    let r = rw.value(&x, s, partition);
                    sandwich &= lo <= r && r <= hi;
                }
            }
        }
        check("reward sandwich", sandwich);

        let (r_lo, r_hi) = reward_vectors(&rw, &imc, partition, sys.k_max).unwrap();
        let mut prev = r_lo.clone();
        let mut monotone = true;
        for n in 1..15 {
            let vb = interval_value_iteration(&imc, &r_lo, &r_hi, rw.gamma, n).unwrap();
            monotone &= vb.lower.iter().zip(&prev).all(|(b, a)| b >= a);
            let (lo, hi) = vb.expectation;
            monotone &= 0.0 <= lo && lo <= hi && hi <= 4.0 / (1.0 - rw.gamma) + 1e-12;
            prev = vb.lower;
        }
        check("lower-pass monotonicity", monotone);

        let moments = Moments::new(sys, sys.k_max);
        let n = sys.dim();
        let mut nested = true;
        let mut shrinks = true;
        for s in 1..=sys.k_max {
            let big = moments.joint_moments(s).unwrap().covariance;
            for l in 1..s {
                let small = moments.joint_moments(l).unwrap().covariance;
                nested &= (big.view((0, 0), (l * n, l * n)) - &small).abs().max() < 1e-12;
            }
            for l in 0..s {
                let cond = moments.conditional_gaussian(s, l).unwrap();
                let gap = moments.marginal_cov(s) - &cond.sigma_xi;
                shrinks &= gap.symmetric_eigen().eigenvalues.min() >= -1e-12;
            }
        }
        check("covariance nesting", nested);
        check("conditioning shrinks covariance", shrinks);
    }

    let int = IntegratorSettings::default();
    let mut translation = true;
    let mut min_le_max = true;
    for _ in 0..20 {
        let a = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let cov = &a * a.transpose() + DMatrix::identity(3, 3) * 0.3;
        let lo: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..0.5)).collect();
        let hi: Vec<f64> = lo.iter().map(|l| l + rng.random_range(0.2..2.5)).collect();
        let rect = HyperRect::new(lo, hi).unwrap();
        let mean = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let shift = DVector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
        let p = mvn_rect_prob(&mean, &cov, &rect, &int).unwrap();
        let q = mvn_rect_prob(&(&mean + &shift), &cov, &rect.translate(shift.as_slice()), &int).unwrap();
        translation &= (p.value - q.value).abs() <= p.err + q.err + 1e-12;

        let centre = mean.as_slice().to_vec();
        let mean_box = HyperRect::new(
            centre.iter().map(|c| c - 0.3).collect(),
            centre.iter().map(|c| c + 0.3).collect(),
        )
        .unwrap();
        let lo = min_integral_over_means(&cov, &rect, MeanSet::Box(&mean_box), &int).unwrap();
        let hi = max_integral_over_means(&cov, &rect, &mean_box, &int, &OptSettings::default()).unwrap();
        min_le_max &= lo <= hi;
    }
    check("integrator translation invariance", translation);
    check("min <= max over mean sets", min_le_max);

    if failed.is_empty() {
        outcome(true, "all invariant checks hold")
    } else {
        failed.dedup();
        outcome(false, format!("failed: {}", failed.join(", ")))
    }
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 8] = [
        ("moment oracle", Duration::from_secs(1), moment_oracle),
        ("Wiener covariance exactness", Duration::MAX, wiener_exactness),
        ("integrator oracles", Duration::from_secs(10), integrator),
        ("interval value iteration vs enumeration", Duration::from_secs(1), value_iteration_vs_enumeration),
        ("transition bracketing", Duration::from_secs(300), bracketing),
        ("end-to-end sandwich", Duration::from_secs(1800), end_to_end),
        ("limit behaviour", Duration::MAX, limit_behaviour),
        ("invariant suites", Duration::MAX, invariants),
    ];
    let mut failures = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let in_time = elapsed <= *budget;
        let passed = result.passed && in_time;
        if !passed {
            failures += 1;
        }
        let budget_note = if *budget == Duration::MAX {
            String::new()
        } else {
            format!(" / {}s", budget.as_secs())
        };
        println!(
            "[{}] {}. {} ({:.2}s{}): {}{}",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            name,
            elapsed.as_secs_f64(),
            budget_note,
            result.detail,
            if in_time { "" } else { " [over time budget]" }
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
