//! Multivariate normal probabilities of hyperrectangles.
//!
//! One dimension and diagonal covariances are handled in closed form. Two
//! dimensions use the Drezner-Wesolowsky orthant formula in Genz's form,
//! which is accurate to double precision and has an exact mean gradient. The
//! general case uses the separation-of-variables transform (Genz 1992) with
//! variable reordering, integrated by a randomly shifted Richtmyer lattice.
//! The lattice is extensible, so the sample size doubles without discarding
//! earlier points. The error radius is three standard errors across shifts.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::geometry::HyperRect;

pub const DEFAULT_INT_TOL: f64 = 1e-4;
pub const DEFAULT_MAX_POINTS: usize = 1 << 20;
pub const DEFAULT_SHIFTS: usize = 12;
/// Error radius reported by the closed-form paths.
pub const EXACT_ERR: f64 = 1e-15;
/// Probabilities below this are treated as underflow by gradient callers.
pub const UNDERFLOW_LIMIT: f64 = 1e-300;

const INITIAL_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub tol: f64,
    pub seed: u64,
    pub max_points: usize,
    pub shifts: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            tol: DEFAULT_INT_TOL,
            seed: 0,
            max_points: DEFAULT_MAX_POINTS,
            shifts: DEFAULT_SHIFTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbEstimate {
    pub value: f64,
    pub err: f64,
}

impl ProbEstimate {
    /// `[value - err, value + err]` clamped to `[0, 1]`.
    pub fn interval(&self) -> (f64, f64) {
        (
            (self.value - self.err).clamp(0.0, 1.0),
            (self.value + self.err).clamp(0.0, 1.0),
        )
    }
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn std_normal_inv_cdf(p: f64) -> f64 {
    let p = p.clamp(1e-300, 1.0 - f64::EPSILON / 2.0);
    let x = -SQRT_2 * erfc_inv(2.0 * p);
    // one Newton step against the more accurate forward function
    let dens = std_normal_pdf(x);
    if dens > 0.0 && x.is_finite() {
        x - (std_normal_cdf(x) - p) / dens
    } else {
        x
    }
}

/// `Φ(b) - Φ(a)` evaluated on the tail that keeps precision.
fn normal_interval(a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    if a > 0.0 {
        std_normal_cdf(-a) - std_normal_cdf(-b)
    } else {
        std_normal_cdf(b) - std_normal_cdf(a)
    }
    .max(0.0)
}

fn check_shapes(mean: &DVector<f64>, cov: &DMatrix<f64>, rect: &HyperRect) -> Result<usize> {
    let d = mean.len();
    if d == 0 || cov.nrows() != d || cov.ncols() != d || rect.dim() != d {
        return Err(Error::Dimension(format!(
            "gaussian of dimension {d} with covariance {}x{} over a {}-dimensional box",
            cov.nrows(),
            cov.ncols(),
            rect.dim()
        )));
    }
    Ok(d)
}

fn is_diagonal(cov: &DMatrix<f64>) -> bool {
    let d = cov.nrows();
    (0..d).all(|i| (0..d).all(|j| i == j || cov[(i, j)] == 0.0))
}

fn diagonal_prob(mean: &DVector<f64>, cov: &DMatrix<f64>, rect: &HyperRect) -> Result<ProbEstimate> {
    let d = mean.len();
    let mut value = 1.0;
    for i in 0..d {
        let var = cov[(i, i)];
        if !(var > 0.0) {
            return Err(Error::Degenerate {
                what: format!("variance of coordinate {i}"),
                min_eigenvalue: var,
            });
        }
        let sd = var.sqrt();
        value *= normal_interval((rect.lower[i] - mean[i]) / sd, (rect.upper[i] - mean[i]) / sd);
    }
    Ok(ProbEstimate {
        value,
        err: EXACT_ERR * d as f64,
    })
}

/// Error radius reported by the bivariate path.
pub const BIVARIATE_ERR: f64 = 1e-13;

const GL6_W: [f64; 3] = [0.171_324_492_379_170_5, 0.360_761_573_048_138_4, 0.467_913_934_572_690_4];
const GL6_X: [f64; 3] = [0.932_469_514_203_152_2, 0.661_209_386_466_264_7, 0.238_619_186_083_197];
const GL12_W: [f64; 6] = [
    0.047_175_336_386_511_77,
    0.106_939_325_995_318_3,
    0.160_078_328_543_346_4,
    0.203_167_426_723_065_9,
    0.233_492_536_538_354_7,
    0.249_147_045_813_402_9,
];
const GL12_X: [f64; 6] = [
    0.981_560_634_246_719_1,
    0.904_117_256_370_475,
    0.769_902_674_194_305,
    0.587_317_954_286_617_1,
    0.367_831_498_998_180_2,
    0.125_233_408_511_469_2,
];
const GL20_W: [f64; 10] = [
    0.017_614_007_139_152_12,
    0.040_601_429_800_386_94,
    0.062_672_048_334_109_06,
    0.083_276_741_576_704_75,
    0.101_930_119_817_240_4,
    0.118_194_531_961_518_4,
    0.131_688_638_449_176_6,
    0.142_096_109_318_382_1,
    0.149_172_986_472_603_7,
    0.152_753_387_130_725_9,
];
const GL20_X: [f64; 10] = [
    0.993_128_599_185_094_9,
    0.963_971_927_277_913_8,
    0.912_234_428_251_326,
    0.839_116_971_822_218_8,
    0.746_331_906_460_150_8,
    0.636_053_680_726_515,
    0.510_867_001_950_827_1,
    0.373_706_088_715_419_6,
    0.227_785_851_141_645_1,
    0.076_526_521_133_497_33,
];

/// `P(X > h, Y > k)` for standard normals with correlation `r`
/// (Drezner and Wesolowsky as refined by Genz).
fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return if k == f64::NEG_INFINITY { 1.0 } else { std_normal_cdf(-k) };
    }
    if k == f64::NEG_INFINITY {
        return std_normal_cdf(-h);
    }
    if r == 0.0 {
        return std_normal_cdf(-h) * std_normal_cdf(-k);
    }
    let (w, x): (&[f64], &[f64]) = if r.abs() < 0.3 {
        (&GL6_W, &GL6_X)
    } else if r.abs() < 0.75 {
        (&GL12_W, &GL12_X)
    } else {
        (&GL20_W, &GL20_X)
    };
    // nodes on (0, 2): 1 - x and 1 + x share the weight
    let nodes = x.iter().zip(w).flat_map(|(&xi, &wi)| [(1.0 - xi, wi), (1.0 + xi, wi)]);
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin() / 2.0;
        for (xi, wi) in nodes {
            let sn = (asr * xi).sin();
            bvn += wi * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
        }
        bvn = bvn * asr / two_pi + std_normal_cdf(-h) * std_normal_cdf(-k);
    } else {
        let mut k = k;
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let a_s = (1.0 - r) * (1.0 + r);
            let mut a = a_s.sqrt();
            let bs = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 80.0;
            let asr = -(bs / a_s + hk) / 2.0;
            if asr > -100.0 {
                bvn = a * asr.exp() * (1.0 - c * (bs - a_s) * (1.0 - d * bs) / 3.0 + c * d * a_s * a_s);
            }
            if hk > -100.0 {
                let b = bs.sqrt();
                let sp = two_pi.sqrt() * std_normal_cdf(-b / a);
                bvn -= (-hk / 2.0).exp() * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
            }
            a /= 2.0;
            let mut sum = 0.0;
            for (xi, wi) in nodes {
                let xs = (a * xi) * (a * xi);
                let asr = -(bs / xs + hk) / 2.0;
                if asr > -100.0 {
                    let sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                    let rs = (1.0 - xs).sqrt();
                    let ep = (-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))).exp() / rs;
                    sum += wi * asr.exp() * (sp - ep);
                }
            }
            bvn = (a * sum - bvn) / two_pi;
        }
        if r > 0.0 {
            bvn += std_normal_cdf(-h.max(k));
        } else if h >= k {
            bvn = -bvn;
        } else {
            let l = if h < 0.0 {
                std_normal_cdf(k) - std_normal_cdf(h)
            } else {
                std_normal_cdf(-h) - std_normal_cdf(-k)
            };
            bvn = l - bvn;
        }
    }
    bvn.clamp(0.0, 1.0)
}

fn bivariate_prob(mean: &DVector<f64>, cov: &DMatrix<f64>, rect: &HyperRect) -> Result<ProbEstimate> {
    let (v1, v2, c12) = (cov[(0, 0)], cov[(1, 1)], cov[(0, 1)]);
    if !(v1 > 0.0 && v2 > 0.0) || v1 * v2 - c12 * c12 <= 1e-14 * v1 * v2 {
        let min_eigenvalue = cov.clone().symmetric_eigenvalues().min();
        return Err(Error::Degenerate {
            what: "covariance of a bivariate rectangle probability".into(),
            min_eigenvalue,
        });
    }
    let (s1, s2) = (v1.sqrt(), v2.sqrt());
    let r = c12 / (s1 * s2);
    let z = |x: f64, m: f64, s: f64| if x.is_finite() { (x - m) / s } else { x };
    let (a1, b1) = (z(rect.lower[0], mean[0], s1), z(rect.upper[0], mean[0], s1));
    let (a2, b2) = (z(rect.lower[1], mean[1], s2), z(rect.upper[1], mean[1], s2));
    if a1 >= b1 || a2 >= b2 {
        return Ok(ProbEstimate { value: 0.0, err: 0.0 });
    }
    let value = bvn_upper(a1, a2, r) - bvn_upper(b1, a2, r) - bvn_upper(a1, b2, r) + bvn_upper(b1, b2, r);
    Ok(ProbEstimate {
        value: value.clamp(0.0, 1.0),
        err: BIVARIATE_ERR,
    })
}

/// Exact gradient of a bivariate rectangle probability with respect to the mean.
fn bivariate_grad(mean: &DVector<f64>, cov: &DMatrix<f64>, rect: &HyperRect) -> DVector<f64> {
    let mut g = DVector::zeros(2);
    for i in 0..2 {
        let j = 1 - i;
        let (vi, vj, cij) = (cov[(i, i)], cov[(j, j)], cov[(i, j)]);
        let si = vi.sqrt();
        let beta = cij / vi;
        let sc = (vj - cij * beta).max(0.0).sqrt();
        // density of coordinate i at the face times the conditional mass of j
        let face = |c: f64| {
            if !c.is_finite() {
                return 0.0;
            }
            let cm = mean[j] + beta * (c - mean[i]);
            let lo = if rect.lower[j].is_finite() { (rect.lower[j] - cm) / sc } else { rect.lower[j] };
            let hi = if rect.upper[j].is_finite() { (rect.upper[j] - cm) / sc } else { rect.upper[j] };
            std_normal_pdf((c - mean[i]) / si) / si * normal_interval(lo, hi)
        };
        g[i] = face(rect.lower[i]) - face(rect.upper[i]);
    }
    g
}

/// Covariance factor and integration limits in the reordered coordinates.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// `perm[k]` is the original coordinate integrated at position `k`.
    pub perm: Vec<usize>,
    /// Lower Cholesky factor of the permuted covariance.
    pub l: DMatrix<f64>,
    /// Limits relative to the mean, permuted.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl Prepared {
    /// Ordering chosen so that the most constrained variables come first
    /// (Genz and Bretz), with a Cholesky factor built alongside.
    pub fn new(mean: &DVector<f64>, cov: &DMatrix<f64>, rect: &HyperRect) -> Result<Self> {
        let d = check_shapes(mean, cov, rect)?;
        let mut c = cov.clone();
        let mut a: Vec<f64> = (0..d).map(|i| rect.lower[i] - mean[i]).collect();
        let mut b: Vec<f64> = (0..d).map(|i| rect.upper[i] - mean[i]).collect();
        let mut perm: Vec<usize> = (0..d).collect();
        let mut l = DMatrix::<f64>::zeros(d, d);
        let mut y = vec![0.0; d];
        let scale = (0..d).map(|i| cov[(i, i)].abs()).fold(0.0, f64::max);
        let pivot_floor = 1e-14 * scale.max(f64::MIN_POSITIVE);
        for i in 0..d {
            let mut best = i;
            let mut best_mass = f64::INFINITY;
            for j in i..d {
                let var = c[(j, j)] - (0..i).map(|k| l[(j, k)] * l[(j, k)]).sum::<f64>();
                if var <= pivot_floor {
                    continue;
                }
                let sd = var.sqrt();
                let shift: f64 = (0..i).map(|k| l[(j, k)] * y[k]).sum();
                let mass = normal_interval((a[j] - shift) / sd, (b[j] - shift) / sd);
                if mass < best_mass {
                    best_mass = mass;
                    best = j;
                }
            }
            if best != i {
                c.swap_rows(i, best);
                c.swap_columns(i, best);
                l.swap_rows(i, best);
                a.swap(i, best);
                b.swap(i, best);
                perm.swap(i, best);
            }
            let var = c[(i, i)] - (0..i).map(|k| l[(i, k)] * l[(i, k)]).sum::<f64>();
            if var <= pivot_floor {
                let min_eigenvalue = cov.clone().symmetric_eigenvalues().min();
                return Err(Error::Degenerate {
                    what: "covariance of a gaussian rectangle probability".into(),
                    min_eigenvalue,
                });
            }
            let lii = var.sqrt();
            l[(i, i)] = lii;
            for j in i + 1..d {
                let dot: f64 = (0..i).map(|k| l[(j, k)] * l[(i, k)]).sum();
                l[(j, i)] = (c[(j, i)] - dot) / lii;
            }
            // conditional mean of the truncated coordinate, used only for ordering
            let shift: f64 = (0..i).map(|k| l[(i, k)] * y[k]).sum();
            let (lo, hi) = ((a[i] - shift) / lii, (b[i] - shift) / lii);
            let mass = normal_interval(lo, hi);
            y[i] = if mass > 1e-300 {
                let pdf = |t: f64| if t.is_finite() { std_normal_pdf(t) } else { 0.0 };
                (pdf(lo) - pdf(hi)) / mass
            } else {
                let (lo, hi) = (lo.max(-40.0), hi.min(40.0));
                0.5 * (lo + hi)
            };
        }
        Ok(Prepared { perm, l, a, b })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// Integrand of the transformed problem at `w ∈ [0,1]^{d-1}`, with limits offset by `-delta`.
    fn integrand(&self, w: &[f64], delta: &[f64], y: &mut [f64]) -> f64 {
        let d = self.dim();
        let l00 = self.l[(0, 0)];
        let mut lo = std_normal_cdf((self.a[0] - delta[0]) / l00);
        let mut hi = std_normal_cdf((self.b[0] - delta[0]) / l00);
        let mut prod = hi - lo;
        for i in 1..d {
            if prod <= 0.0 {
                return 0.0;
            }
            y[i - 1] = std_normal_inv_cdf(lo + w[i - 1] * (hi - lo));
            let t: f64 = (0..i).map(|k| self.l[(i, k)] * y[k]).sum();
            let lii = self.l[(i, i)];
            lo = std_normal_cdf((self.a[i] - delta[i] - t) / lii);
            hi = std_normal_cdf((self.b[i] - delta[i] - t) / lii);
            prod *= (hi - lo).max(0.0);
        }
        prod.max(0.0)
    }

    /// Lattice estimate with the mean moved by `mean_offset` (original
    /// coordinates). With `fixed_points` the per-shift sample size is fixed,
    /// otherwise it doubles until `settings.tol` or the point cap is reached.
    /// Returns the estimate and the per-shift sample size used.
    pub fn estimate(
        &self,
        mean_offset: Option<&[f64]>,
        settings: &IntegratorSettings,
        fixed_points: Option<usize>,
    ) -> (ProbEstimate, usize) {
        let d = self.dim();
        let delta: Vec<f64> = match mean_offset {
            Some(off) => self.perm.iter().map(|&p| off[p]).collect(),
            None => vec![0.0; d],
        };
        let mut y = vec![0.0; d];
        if d == 1 {
            let value = self.integrand(&[], &delta, &mut y);
            return (ProbEstimate { value, err: EXACT_ERR }, 1);
        }
        let shifts = settings.shifts.max(2);
        let generator = richtmyer_generator(d - 1);
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ (d as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let offsets: Vec<Vec<f64>> = (0..shifts)
            .map(|_| (0..d - 1).map(|_| rng.random::<f64>()).collect())
            .collect();
        let mut sums = vec![0.0; shifts];
        let mut done = 0usize;
        let mut target = fixed_points.unwrap_or(INITIAL_POINTS).max(1);
        let mut w = vec![0.0; d - 1];
        loop {
            for (r, shift) in offsets.iter().enumerate() {
                for j in done + 1..=target {
                    for k in 0..d - 1 {
                        let u = (j as f64 * generator[k] + shift[k]).fract();
                        w[k] = 1.0 - (2.0 * u - 1.0).abs();
                    }
                    sums[r] += self.integrand(&w, &delta, &mut y);
                }
            }
            done = target;
            let means: Vec<f64> = sums.iter().map(|s| s / done as f64).collect();
            let value = means.iter().sum::<f64>() / shifts as f64;
            let var = means.iter().map(|m| (m - value).powi(2)).sum::<f64>() / (shifts * (shifts - 1)) as f64;
            let err = (3.0 * var.sqrt()).max(EXACT_ERR);
            let est = ProbEstimate {
                value: value.clamp(0.0, 1.0),
                err,
            };
            if fixed_points.is_some() || err <= settings.tol || 2 * done * shifts > settings.max_points {
                return (est, done);
            }
            target = 2 * done;
        }
    }
}

/// Fractional parts of square roots of the first `k` primes.
fn richtmyer_generator(k: usize) -> Vec<f64> {
    let mut primes = Vec::with_capacity(k);
    let mut cand = 2u64;
    while primes.len() < k {
        if primes.iter().take_while(|&&p| p * p <= cand).all(|&p| !cand.is_multiple_of(p)) {
            primes.push(cand);
        }
        cand += 1;
    }
    primes.iter().map(|&p| (p as f64).sqrt().fract()).collect()
}

/// `P(Z ∈ rect)` for `Z ~ N(mean, cov)` with an absolute error radius.
pub fn mvn_rect_prob(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rect: &HyperRect,
    settings: &IntegratorSettings,
) -> Result<ProbEstimate> {
    check_shapes(mean, cov, rect)?;
    if is_diagonal(cov) {
        return diagonal_prob(mean, cov, rect);
    }
    if mean.len() == 2 {
        return bivariate_prob(mean, cov, rect);
    }
    let prep = Prepared::new(mean, cov, rect)?;
    Ok(prep.estimate(None, settings, None).0)
}

/// Clamped `[value - err, value + err]`.
pub fn mvn_rect_prob_interval(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rect: &HyperRect,
    settings: &IntegratorSettings,
) -> Result<(f64, f64)> {
    Ok(mvn_rect_prob(mean, cov, rect, settings)?.interval())
}

/// Probability at `mean` together with the gradient of its logarithm, exact
/// in two dimensions and by central differences otherwise. Lattice
/// evaluations share the ordering, the shifts and the sample size of the
/// centre evaluation.
pub fn prob_and_log_grad(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rect: &HyperRect,
    h_step: f64,
    settings: &IntegratorSettings,
) -> Result<(ProbEstimate, DVector<f64>)> {
    let d = check_shapes(mean, cov, rect)?;
    let mut offset = vec![0.0; d];
    let mut grad = DVector::zeros(d);
    if is_diagonal(cov) {
        let p = diagonal_prob(mean, cov, rect)?;
        if p.value < UNDERFLOW_LIMIT {
            return Err(Error::Underflow(p.value));
        }
        for i in 0..d {
            let mut plus = mean.clone();
            plus[i] += h_step;
            let mut minus = mean.clone();
            minus[i] -= h_step;
            let (pp, pm) = (diagonal_prob(&plus, cov, rect)?.value, diagonal_prob(&minus, cov, rect)?.value);
            if pp < UNDERFLOW_LIMIT || pm < UNDERFLOW_LIMIT {
                return Err(Error::Underflow(pp.min(pm)));
            }
            grad[i] = (pp.ln() - pm.ln()) / (2.0 * h_step);
        }
        return Ok((p, grad));
    }
    if d == 2 {
        let p = bivariate_prob(mean, cov, rect)?;
        if p.value < UNDERFLOW_LIMIT {
            return Err(Error::Underflow(p.value));
        }
        return Ok((p, bivariate_grad(mean, cov, rect) / p.value));
    }
    let prep = Prepared::new(mean, cov, rect)?;
    let (p, points) = prep.estimate(None, settings, None);
    if p.value < UNDERFLOW_LIMIT {
        return Err(Error::Underflow(p.value));
    }
    for i in 0..d {
        offset[i] = h_step;
        let pp = prep.estimate(Some(&offset), settings, Some(points)).0.value;
        offset[i] = -h_step;
        let pm = prep.estimate(Some(&offset), settings, Some(points)).0.value;
        offset[i] = 0.0;
        if pp < UNDERFLOW_LIMIT || pm < UNDERFLOW_LIMIT {
            return Err(Error::Underflow(pp.min(pm)));
        }
        grad[i] = (pp.ln() - pm.ln()) / (2.0 * h_step);
    }
    Ok((p, grad))
}

/// Central-difference gradient of `log P(Z ∈ rect)` with respect to the mean.
pub fn log_prob_grad(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rect: &HyperRect,
    h_step: f64,
    settings: &IntegratorSettings,
) -> Result<DVector<f64>> {
    Ok(prob_and_log_grad(mean, cov, rect, h_step, settings)?.1)
}

/// Default finite-difference step for a given mean.
pub fn default_fd_step(mean: &DVector<f64>) -> f64 {
    1e-4 * (1.0 + mean.amax())
}
