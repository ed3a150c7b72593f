//! Gaussian moments of the sampled states `ζ(1;x), …, ζ(s;x)`.
//!
//! Starting from `x`, the stacked vector `(ζ(1;x), …, ζ(s;x))` is Gaussian with
//! mean `[M(1); …; M(s)]·x` and covariance blocks
//! `Cov(t₁,t₂) = ∫₀^{min} e^{A(t₁-u)} B_w B_wᵀ e^{Aᵀ(t₂-u)} du`.
//!
//! Both objects come from augmented matrix exponentials, so `A` may be singular:
//! `exp([[A, BK], [0, 0]]·t)` carries `e^{At}` and `∫₀ᵗ e^{Au}du·BK` in its top row,
//! and the Van Loan block `exp([[-A, Q], [0, Aᵀ]])` yields the one-period Gram
//! integral, which is propagated with `G(t+1) = G(1) + e^A G(t) e^{Aᵀ}`.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::model::PetcSystem;

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

fn cholesky_or_degenerate(cov: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    match Cholesky::new(cov.clone()) {
        Some(c) => Ok(c),
        None => Err(Error::Degenerate {
            what: what.to_string(),
            min_eigenvalue: cov.clone().symmetric_eigenvalues().min(),
        }),
    }
}

/// `M(t)` with `E[ζ(t;x)] = M(t)·x`.
pub fn mean_matrix(sys: &PetcSystem, t: usize) -> DMatrix<f64> {
    let n = sys.dim();
    let mut aug = DMatrix::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(&sys.a);
    aug.view_mut((0, n), (n, n)).copy_from(&sys.bk());
    let e = expm(&(aug * t as f64));
    e.view((0, 0), (n, n)) + e.view((0, n), (n, n))
}

/// One-period Gram integral `∫₀¹ e^{Au} B_w B_wᵀ e^{Aᵀu} du` (Van Loan).
fn unit_gram(sys: &PetcSystem) -> DMatrix<f64> {
    let n = sys.dim();
    let mut aug = DMatrix::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(&(-&sys.a));
    aug.view_mut((0, n), (n, n)).copy_from(&sys.noise_intensity());
    aug.view_mut((n, n), (n, n)).copy_from(&sys.a.transpose());
    let e = expm(&aug);
    let f12 = e.view((0, n), (n, n)).into_owned();
    let f22 = e.view((n, n), (n, n)).into_owned();
    let mut g = f22.transpose() * f12;
    symmetrize(&mut g);
    g
}

/// `Cov(t₁, t₂)` between the states at two sampling instants.
pub fn gram_cov(sys: &PetcSystem, t1: usize, t2: usize) -> DMatrix<f64> {
    Moments::new(sys, t1.max(t2)).cov(t1, t2)
}

/// Mean map and covariance of the first `s` sampled states, stacked.
#[derive(Debug, Clone)]
pub struct JointMoments {
    pub s: usize,
    /// `s·n × n`; the stacked mean is `mean_map · x`.
    pub mean_map: DMatrix<f64>,
    /// `s·n × s·n`.
    pub covariance: DMatrix<f64>,
    pub chol: Cholesky<f64, Dyn>,
}

/// Law of `ζ(s;x)` given `(ζ(1;x), …, ζ(l;x)) = v`: `N(C_x x + C_v v, Σ_ξ)`.
#[derive(Debug, Clone)]
pub struct ConditionalGaussian {
    pub s: usize,
    pub l: usize,
    pub c_x: DMatrix<f64>,
    /// `n × l·n`; empty when `l = 0`.
    pub c_v: DMatrix<f64>,
    pub sigma_xi: DMatrix<f64>,
}

impl ConditionalGaussian {
    pub fn dim(&self) -> usize {
        self.c_x.nrows()
    }
}

/// Moment tables for `t = 0..=t_max`, shared by every query on one system.
#[derive(Debug, Clone)]
pub struct Moments {
    n: usize,
    t_max: usize,
    exp_a: Vec<DMatrix<f64>>,
    mean: Vec<DMatrix<f64>>,
    gram: Vec<DMatrix<f64>>,
}

impl Moments {
    pub fn new(sys: &PetcSystem, t_max: usize) -> Self {
        let n = sys.dim();
        let e1 = expm(&sys.a);
        let g1 = unit_gram(sys);
        let mut exp_a = vec![DMatrix::identity(n, n)];
        let mut mean = vec![DMatrix::identity(n, n)];
        let mut gram = vec![DMatrix::zeros(n, n)];
        for t in 1..=t_max {
            exp_a.push(expm(&(&sys.a * t as f64)));
            mean.push(mean_matrix(sys, t));
            let mut g = &g1 + &e1 * &gram[t - 1] * e1.transpose();
            symmetrize(&mut g);
            gram.push(g);
        }
        Moments {
            n,
            t_max,
            exp_a,
            mean,
            gram,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    pub fn mean_matrix(&self, t: usize) -> &DMatrix<f64> {
        &self.mean[t]
    }

    /// Marginal covariance `Cov(t, t)`.
    pub fn marginal_cov(&self, t: usize) -> &DMatrix<f64> {
        &self.gram[t]
    }

    pub fn cov(&self, t1: usize, t2: usize) -> DMatrix<f64> {
        if t1 > t2 {
            return self.cov(t2, t1).transpose();
        }
        // t1 <= t2: e^{A(t1-t1)} G(t1) e^{Aᵀ(t2-t1)}
        &self.gram[t1] * self.exp_a[t2 - t1].transpose()
    }

    /// Stacked `[M(1); …; M(s)]`.
    pub fn stacked_means(&self, s: usize) -> DMatrix<f64> {
        let n = self.n;
        let mut out = DMatrix::zeros(s * n, n);
        for t in 1..=s {
            out.view_mut(((t - 1) * n, 0), (n, n)).copy_from(&self.mean[t]);
        }
        out
    }

    fn stacked_cov(&self, s: usize) -> DMatrix<f64> {
        let n = self.n;
        let mut cov = DMatrix::zeros(s * n, s * n);
        for t1 in 1..=s {
            for t2 in t1..=s {
                let block = self.cov(t1, t2);
                cov.view_mut(((t1 - 1) * n, (t2 - 1) * n), (n, n)).copy_from(&block);
                if t2 != t1 {
                    cov.view_mut(((t2 - 1) * n, (t1 - 1) * n), (n, n))
                        .copy_from(&block.transpose());
                }
            }
        }
        cov
    }

    pub fn joint_moments(&self, s: usize) -> Result<JointMoments> {
        if s == 0 || s > self.t_max {
            return Err(Error::Dimension(format!("joint moments need 1 <= s <= {}, got {s}", self.t_max)));
        }
        let covariance = self.stacked_cov(s);
        let chol = cholesky_or_degenerate(&covariance, &format!("joint covariance of {s} samples"))?;
        Ok(JointMoments {
            s,
            mean_map: self.stacked_means(s),
            covariance,
            chol,
        })
    }

    /// Stacked `M(k) - I` for `k = 1..=s`: the mean of the samples relative to the last event state.
    pub fn mu1_map(&self, s: usize) -> DMatrix<f64> {
        let n = self.n;
        let mut out = self.stacked_means(s);
        for t in 0..s {
            for i in 0..n {
                out[(t * n + i, i)] -= 1.0;
            }
        }
        out
    }

    pub fn conditional_gaussian(&self, s: usize, l: usize) -> Result<ConditionalGaussian> {
        if l >= s || s > self.t_max {
            return Err(Error::Dimension(format!(
                "conditional law needs 0 <= l < s <= {}, got s={s}, l={l}",
                self.t_max
            )));
        }
        let n = self.n;
        let cov_ss = self.marginal_cov(s).clone();
        if l == 0 {
            return Ok(ConditionalGaussian {
                s,
                l,
                c_x: self.mean[s].clone(),
                c_v: DMatrix::zeros(n, 0),
                sigma_xi: cov_ss,
            });
        }
        let joint = self.joint_moments(l)?;
        let mut cross = DMatrix::zeros(n, l * n);
        for t in 1..=l {
            cross.view_mut((0, (t - 1) * n), (n, n)).copy_from(&self.cov(s, t));
        }
        // C_v = cross Σ_l⁻¹, via Σ_l C_vᵀ = crossᵀ
        let c_v = joint.chol.solve(&cross.transpose()).transpose();
        let c_x = &self.mean[s] - &c_v * &joint.mean_map;
        let mut sigma_xi = cov_ss - &c_v * cross.transpose();
        symmetrize(&mut sigma_xi);
        Ok(ConditionalGaussian {
            s,
            l,
            c_x,
            c_v,
            sigma_xi,
        })
    }
}

pub fn joint_moments(sys: &PetcSystem, s: usize) -> Result<JointMoments> {
    Moments::new(sys, s).joint_moments(s)
}

pub fn mu1_map(sys: &PetcSystem, s: usize) -> DMatrix<f64> {
    Moments::new(sys, s).mu1_map(s)
}

pub fn conditional_gaussian(sys: &PetcSystem, s: usize, l: usize) -> Result<ConditionalGaussian> {
    Moments::new(sys, s).conditional_gaussian(s, l)
}
