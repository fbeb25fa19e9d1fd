//! Data-mixture search: Dirichlet sampling of domain weights, a degree-2
//! ridge regression from weights to proxy loss, simulated minimization over
//! fresh samples, replay blending, and the warmup/decay learning-rate schedule.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{atomic_write, JsonlError};

pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MixError {
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),
    #[error("dirichlet alpha must be finite and > 0, got {0}")]
    InvalidAlpha(f64),
    #[error("need at least one sample / candidate")]
    ZeroCount,
    #[error("ridge lambda must be finite and >= 0, got {0}")]
    InvalidLambda(f64),
    #[error("no proxy runs to fit")]
    NoRuns,
    #[error("proxy run {index} has domains {found:?}, expected {expected:?}")]
    DomainMismatch { index: usize, expected: Vec<String>, found: Vec<String> },
    #[error("proxy run {0} has a non-finite loss")]
    NonFiniteLoss(usize),
    #[error("design matrix has rank {rank} < {features} features; add runs or use lambda > 0")]
    Degenerate { rank: usize, features: usize },
    #[error("replay fraction must lie in [0, 1), got {0}")]
    InvalidReplayFraction(f64),
    #[error("replay domain `{0}` is already part of the mixture")]
    ReplayDomainPresent(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("step {step} outside [0, {total}]")]
    StepOutOfRange { step: u64, total: u64 },
    #[error(transparent)]
    Io(#[from] JsonlError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub domains: Vec<String>,
    pub weights: Vec<f64>,
}

impl MixtureSpec {
    pub fn new(domains: Vec<String>, weights: Vec<f64>) -> Result<Self, MixError> {
        let m = MixtureSpec { domains, weights };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), MixError> {
        let bad = |s: String| Err(MixError::InvalidMixture(s));
        if self.domains.is_empty() {
            return bad("no domains".into());
        }
        if self.domains.len() != self.weights.len() {
            return bad(format!("{} domains but {} weights", self.domains.len(), self.weights.len()));
        }
        let mut seen = HashSet::new();
        for d in &self.domains {
            if !seen.insert(d) {
                return bad(format!("duplicate domain `{d}`"));
            }
        }
        if let Some(w) = self.weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return bad(format!("weight {w} is negative or non-finite"));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return bad(format!("weights sum to {sum}"));
        }
        Ok(())
    }

    pub fn weight(&self, domain: &str) -> Option<f64> {
        self.domains.iter().position(|d| d == domain).map(|i| self.weights[i])
    }
}

fn check_domains(domains: &[String]) -> Result<(), MixError> {
    MixtureSpec::new(domains.to_vec(), {
        let mut w = vec![0.0; domains.len()];
        if let Some(first) = w.first_mut() {
            *first = 1.0;
        }
        w
    })
    .map(|_| ())
}

/// Draws one point from a symmetric Dirichlet via normalized Gamma variates.
fn dirichlet(rng: &mut ChaCha8Rng, gamma: &Gamma<f64>, dim: usize) -> Vec<f64> {
    if dim == 1 {
        return vec![1.0];
    }
    loop {
        let mut g: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
        let sum: f64 = g.iter().sum();
        // Tiny alphas can underflow every coordinate; redraw rather than divide by zero.
        if sum > 0.0 && sum.is_finite() {
            g.iter_mut().for_each(|x| *x /= sum);
            return g;
        }
    }
}

fn gamma_for(alpha: f64) -> Result<Gamma<f64>, MixError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(MixError::InvalidAlpha(alpha));
    }
    Gamma::new(alpha, 1.0).map_err(|_| MixError::InvalidAlpha(alpha))
}

/// `n` i.i.d. Dirichlet(alpha·1) mixtures over `domains`.
pub fn sample_mixtures(domains: &[String], n: usize, alpha: f64, seed: u64) -> Result<Vec<MixtureSpec>, MixError> {
    check_domains(domains)?;
    let gamma = gamma_for(alpha)?;
    if n == 0 {
        return Err(MixError::ZeroCount);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| MixtureSpec { domains: domains.to_vec(), weights: dirichlet(&mut rng, &gamma, domains.len()) })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxyRun {
    pub mixture: MixtureSpec,
    pub observed_loss: f64,
}

/// Linear terms `w_i` followed by pairwise products `w_i·w_j` (i < j).
///
/// No intercept or squares: on the simplex `1 = Σ w_i` and
/// `w_i² = w_i − Σ_{j≠i} w_i·w_j`, so both are already spanned.
pub fn features(w: &[f64]) -> Vec<f64> {
    let d = w.len();
    let mut f = Vec::with_capacity(d + d * d.saturating_sub(1) / 2);
    f.extend_from_slice(w);
    for i in 0..d {
        for j in i + 1..d {
            f.push(w[i] * w[j]);
        }
    }
    f
}

pub fn feature_names(domains: &[String]) -> Vec<String> {
    let mut names = domains.to_vec();
    for i in 0..domains.len() {
        for j in i + 1..domains.len() {
            names.push(format!("{}*{}", domains[i], domains[j]));
        }
    }
    names
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionModel {
    pub domains: Vec<String>,
    pub feature_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub ridge_lambda: f64,
    pub train_rmse: f64,
}

impl RegressionModel {
    /// Predicted loss at weight vector `w` (domain order as in `domains`).
    pub fn predict(&self, w: &[f64]) -> f64 {
        features(w).iter().zip(&self.coefficients).map(|(x, c)| x * c).sum()
    }

    pub fn predict_mixture(&self, m: &MixtureSpec) -> Result<f64, MixError> {
        m.validate()?;
        if m.domains != self.domains {
            return Err(MixError::DomainMismatch { index: 0, expected: self.domains.clone(), found: m.domains.clone() });
        }
        Ok(self.predict(&m.weights))
    }
}

/// Minimizes `‖Xβ − y‖² + λ‖β‖²` through the SVD of the design matrix.
pub fn fit_regression(runs: &[ProxyRun], ridge_lambda: f64) -> Result<RegressionModel, MixError> {
    if !(ridge_lambda.is_finite() && ridge_lambda >= 0.0) {
        return Err(MixError::InvalidLambda(ridge_lambda));
    }
    let first = runs.first().ok_or(MixError::NoRuns)?;
    let domains = first.mixture.domains.clone();
    for (i, r) in runs.iter().enumerate() {
        r.mixture.validate()?;
        if r.mixture.domains != domains {
            return Err(MixError::DomainMismatch { index: i, expected: domains.clone(), found: r.mixture.domains.clone() });
        }
        if !r.observed_loss.is_finite() {
            return Err(MixError::NonFiniteLoss(i));
        }
    }
    let rows: Vec<Vec<f64>> = runs.iter().map(|r| features(&r.mixture.weights)).collect();
    let p = rows[0].len();
    let m = runs.len();
    let x = DMatrix::from_fn(m, p, |i, j| rows[i][j]);
    let y = DVector::from_iterator(m, runs.iter().map(|r| r.observed_loss));

    let svd = x.clone().svd(true, true);
    let (u, vt) = (svd.u.as_ref().expect("u requested"), svd.v_t.as_ref().expect("v_t requested"));
    let s_max = svd.singular_values.max();
    let tol = s_max * 1e-10 * m.max(p) as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if ridge_lambda == 0.0 && rank < p {
        return Err(MixError::Degenerate { rank, features: p });
    }
    let uty = u.transpose() * &y;
    let mut scaled = DVector::zeros(svd.singular_values.len());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let denom = s * s + ridge_lambda;
        if denom > 0.0 && (ridge_lambda > 0.0 || s > tol) {
            scaled[k] = s * uty[k] / denom;
        }
    }
    let beta = vt.transpose() * scaled;
    let resid = &x * &beta - &y;
    let train_rmse = (resid.norm_squared() / m as f64).sqrt();
    Ok(RegressionModel {
        feature_names: feature_names(&domains),
        domains,
        coefficients: beta.iter().copied().collect(),
        ridge_lambda,
        train_rmse,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureChoice {
    pub mixture: MixtureSpec,
    pub predicted_loss: f64,
    /// Index into the candidate list: vertices first, then samples.
    pub candidate_index: usize,
    pub n_candidates: usize,
}

/// Evaluates the simplex vertices and `n_candidates` fresh Dirichlet(1)
/// samples, returning the lowest predicted loss (ties → lowest index).
pub fn optimize_mixture(model: &RegressionModel, n_candidates: usize, seed: u64) -> Result<MixtureChoice, MixError> {
    if n_candidates == 0 {
        return Err(MixError::ZeroCount);
    }
    let d = model.domains.len();
    let mut candidates: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let mut v = vec![0.0; d];
            v[i] = 1.0;
            v
        })
        .collect();
    if d > 1 {
        let gamma = gamma_for(1.0)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        candidates.extend((0..n_candidates).map(|_| dirichlet(&mut rng, &gamma, d)));
    }
    let losses: Vec<f64> = candidates.par_iter().map(|w| model.predict(w)).collect();
    let (best, &loss) = losses
        .iter()
        .enumerate()
        .reduce(|a, b| if b.1 < a.1 { b } else { a })
        .expect("at least one vertex");
    Ok(MixtureChoice {
        mixture: MixtureSpec { domains: model.domains.clone(), weights: candidates.swap_remove(best) },
        predicted_loss: loss,
        candidate_index: best,
        n_candidates: losses.len(),
    })
}

/// Prepends `replay_domain` at `fraction` and scales the rest by `1 − fraction`.
pub fn blend_replay(mix: &MixtureSpec, fraction: f64, replay_domain: &str) -> Result<MixtureSpec, MixError> {
    mix.validate()?;
    if !(0.0..1.0).contains(&fraction) {
        return Err(MixError::InvalidReplayFraction(fraction));
    }
    if mix.domains.iter().any(|d| d == replay_domain) {
        return Err(MixError::ReplayDomainPresent(replay_domain.to_string()));
    }
    let mut domains = vec![replay_domain.to_string()];
    domains.extend(mix.domains.iter().cloned());
    let mut weights = vec![fraction];
    weights.extend(mix.weights.iter().map(|w| (1.0 - fraction) * w));
    MixtureSpec::new(domains, weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayShape {
    #[default]
    Cosine,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrSchedule {
    pub warmup_steps: u64,
    pub total_steps: u64,
    pub peak_lr: f64,
    pub min_lr: f64,
    #[serde(default)]
    pub decay_shape: DecayShape,
}

impl LrSchedule {
    pub fn validate(&self) -> Result<(), MixError> {
        let bad = |s: String| Err(MixError::InvalidSchedule(s));
        if self.total_steps <= self.warmup_steps {
            return bad(format!("total_steps {} must exceed warmup_steps {}", self.total_steps, self.warmup_steps));
        }
        if !(self.peak_lr.is_finite() && self.peak_lr > 0.0) {
            return bad(format!("peak_lr {} must be > 0", self.peak_lr));
        }
        if !(self.min_lr >= 0.0 && self.min_lr <= self.peak_lr) {
            return bad(format!("min_lr {} must lie in [0, peak_lr]", self.min_lr));
        }
        Ok(())
    }

    pub fn lr_at(&self, step: u64) -> Result<f64, MixError> {
        self.validate()?;
        if step > self.total_steps {
            return Err(MixError::StepOutOfRange { step, total: self.total_steps });
        }
        let (w, t) = (self.warmup_steps, self.total_steps);
        if step < w {
            return Ok(self.peak_lr * step as f64 / w as f64);
        }
        if step == w {
            return Ok(self.peak_lr);
        }
        if step == t {
            return Ok(self.min_lr);
        }
        let frac = (step - w) as f64 / (t - w) as f64;
        let shape = match self.decay_shape {
            DecayShape::Cosine => 0.5 * (1.0 + (PI * frac).cos()),
            DecayShape::Linear => 1.0 - frac,
        };
        Ok(self.min_lr + (self.peak_lr - self.min_lr) * shape)
    }

    /// `step,lr` rows for every `every`-th step, always including both ends.
    pub fn to_csv(&self, every: u64) -> Result<String, MixError> {
        self.validate()?;
        let every = every.max(1);
        let mut out = String::from("step,lr\n");
        let mut step = 0;
        loop {
            let _ = writeln!(out, "{step},{}", self.lr_at(step)?);
            if step == self.total_steps {
                break;
            }
            step = (step + every).min(self.total_steps);
        }
        Ok(out)
    }

    pub fn write_csv(&self, path: &Path, every: u64) -> Result<(), MixError> {
        let csv = self.to_csv(every)?;
        atomic_write(path, |w| w.write_all(csv.as_bytes()))?;
        Ok(())
    }
}

/// Evaluates a synthetic loss on sampled mixtures, for tests and demos.
pub fn synthesize_runs(
    mixtures: Vec<MixtureSpec>,
    loss: impl Fn(&[f64]) -> f64,
    noise_sigma: f64,
    seed: u64,
) -> Vec<ProxyRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = rand_distr::Normal::new(0.0, noise_sigma.max(0.0)).expect("sigma >= 0");
    mixtures
        .into_iter()
        .map(|m| {
            let noise = if noise_sigma > 0.0 { normal.sample(&mut rng) } else { 0.0 };
            let observed_loss = loss(&m.weights) + noise;
            ProxyRun { mixture: m, observed_loss }
        })
        .collect()
}

/// Seeded Fisher-Yates shuffle, then splits off the last `holdout` items.
pub fn shuffle_split<T>(mut items: Vec<T>, holdout: usize, seed: u64) -> (Vec<T>, Vec<T>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
    let test = items.split_off(items.len().saturating_sub(holdout));
    (items, test)
}
