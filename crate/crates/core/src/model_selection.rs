//! Monte Carlo marginal likelihoods, posterior model probabilities, and the
//! model-comparison orchestration used by the CLI.
//!
//! Marginal likelihoods are plain prior Monte Carlo: unbiased, and the
//! standard error is reportable. Flat priors are rejected here (the integral
//! diverges) even though `inference` accepts them for conditionals.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::distributions::GigSampler;
use crate::error::{Error, Result};
use crate::inference::{MuPrior, PriorSpec, Sigma2Prior};
use crate::likelihoods::{
    ln_likelihood_gbm, ln_likelihood_jump, GbmParams, JumpModelParams,
};
use crate::numeric::{log_sum_exp, mean_and_se};
use crate::paths_and_data::{JumpDist, ReturnStat};
use crate::rng::{stream_rng, STREAM_MODEL_BASE};

/// Candidate model family. Jump-diffusions carry a fixed jump law; priors
/// apply to (μ, σ²) only, so the unsupported-hyperprior case is structurally
/// unrepresentable.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Gbm {
        priors: PriorSpec,
        r: f64,
    },
    JumpDiffusion {
        priors: PriorSpec,
        r: f64,
        jump_intensity: f64,
        jump_dist: JumpDist,
    },
}

/// A candidate model with its prior model probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    kind: ModelKind,
    prior_prob: f64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, prior_prob: f64) -> Result<Self> {
        if !(prior_prob > 0.0) || prior_prob > 1.0 {
            return Err(Error::InvalidInput(format!(
                "prior model probability must lie in (0, 1], got {prior_prob}"
            )));
        }
        let r = match &kind {
            ModelKind::Gbm { r, .. } => *r,
            ModelKind::JumpDiffusion { r, .. } => *r,
        };
        if !r.is_finite() {
            return Err(Error::InvalidInput(format!("rate must be finite, got {r}")));
        }
        Ok(ModelSpec { kind, prior_prob })
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn prior_prob(&self) -> f64 {
        self.prior_prob
    }

    fn priors(&self) -> &PriorSpec {
        match &self.kind {
            ModelKind::Gbm { priors, .. } => priors,
            ModelKind::JumpDiffusion { priors, .. } => priors,
        }
    }
}

/// Comparison output: per-model evidence, posterior probability, and Monte
/// Carlo standard error, in input order.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ModelComparison {
    pub marginals: Vec<f64>,
    pub posteriors: Vec<f64>,
    pub mc_std_errors: Vec<f64>,
}

enum CoordDraw<'a> {
    Fixed(f64),
    Normal { mean: f64, sd: f64 },
    Gig(Box<GigSampler>),
    Improper(&'a str),
}

impl CoordDraw<'_> {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            CoordDraw::Fixed(v) => *v,
            CoordDraw::Normal { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            CoordDraw::Gig(s) => s.sample(rng),
            CoordDraw::Improper(_) => unreachable!("rejected before drawing"),
        }
    }

    fn is_fixed(&self) -> bool {
        matches!(self, CoordDraw::Fixed(_))
    }
}

fn mu_draw(prior: &MuPrior) -> CoordDraw<'static> {
    match prior {
        MuPrior::Flat => CoordDraw::Improper("mu"),
        MuPrior::Normal(p) => CoordDraw::Normal { mean: p.mean(), sd: p.sd() },
        MuPrior::Point(v) => CoordDraw::Fixed(*v),
    }
}

fn sigma2_draw(prior: &Sigma2Prior) -> CoordDraw<'static> {
    match prior {
        Sigma2Prior::Flat => CoordDraw::Improper("sigma2"),
        Sigma2Prior::Gig(p) => CoordDraw::Gig(Box::new(GigSampler::new(p))),
        Sigma2Prior::Point(v) => CoordDraw::Fixed(*v),
    }
}

fn ln_likelihood_at(model: &ModelKind, stat: &ReturnStat, mu: f64, sigma2: f64) -> Result<f64> {
    match model {
        ModelKind::Gbm { r, .. } => {
            Ok(ln_likelihood_gbm(stat, &GbmParams::new(mu, sigma2, *r)?))
        }
        ModelKind::JumpDiffusion { r, jump_intensity, jump_dist, .. } => {
            let p = if sigma2 > 0.0 {
                JumpModelParams::new(
                    &GbmParams::new(mu, sigma2, *r)?,
                    *jump_intensity,
                    jump_dist.clone(),
                )?
            } else {
                JumpModelParams::pure_jump(mu, *r, *jump_intensity, jump_dist.clone())?
            };
            ln_likelihood_jump(stat, &p)
        }
    }
}

/// Prior Monte Carlo estimate of the marginal likelihood
/// ∫ L(θ) π(dθ) with `n_mc` prior draws. Returns `(estimate, std_error)`.
///
/// Deterministic given the generator. Point-mass priors on both coordinates
/// short-circuit to the exact likelihood with zero standard error.
pub fn marginal_likelihood<R: Rng + ?Sized>(
    model: &ModelSpec,
    stat: &ReturnStat,
    n_mc: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if n_mc < 100 {
        return Err(Error::InvalidInput(format!(
            "n_mc must be at least 100, got {n_mc}"
        )));
    }
    let priors = model.priors();
    let md = mu_draw(&priors.mu_prior);
    let sd = sigma2_draw(&priors.sigma2_prior);
    for d in [&md, &sd] {
        if let CoordDraw::Improper(coord) = d {
            return Err(Error::Domain(format!(
                "flat {coord} prior has a divergent marginal likelihood; \
                 use a proper prior"
            )));
        }
    }

    if md.is_fixed() && sd.is_fixed() {
        let v = ln_likelihood_at(&model.kind, stat, md.draw(rng), sd.draw(rng))?;
        return Ok((v.exp(), 0.0));
    }

    let mut values = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        let mu = md.draw(rng);
        let sigma2 = sd.draw(rng);
        values.push(ln_likelihood_at(&model.kind, stat, mu, sigma2)?.exp());
    }
    Ok(mean_and_se(&values))
}

/// Posterior model probabilities P(Mᵢ | data) ∝ marginalᵢ · priorᵢ, computed
/// through log-sum-exp and renormalized.
pub fn model_posterior(marginals: &[f64], prior_probs: &[f64]) -> Result<Vec<f64>> {
    if marginals.len() != prior_probs.len() || marginals.is_empty() {
        return Err(Error::InvalidInput(format!(
            "need equally many marginals and prior probabilities, got {} and {}",
            marginals.len(),
            prior_probs.len()
        )));
    }
    if let Some(bad) = marginals.iter().find(|m| !(**m >= 0.0) || !m.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "marginals must be nonnegative and finite, got {bad}"
        )));
    }
    if let Some(bad) = prior_probs.iter().find(|p| !(**p > 0.0) || **p > 1.0) {
        return Err(Error::InvalidInput(format!(
            "prior probabilities must lie in (0, 1], got {bad}"
        )));
    }
    let total_prior: f64 = prior_probs.iter().sum();
    if (total_prior - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "prior probabilities must sum to 1, got {total_prior}"
        )));
    }

    let ln_products: Vec<f64> = marginals
        .iter()
        .zip(prior_probs)
        .map(|(&m, &p)| m.ln() + p.ln())
        .collect();
    let lse = log_sum_exp(&ln_products);
    if !lse.is_finite() {
        return Err(Error::Numeric(
            "all evidence products are zero at working precision".into(),
        ));
    }
    let mut w: Vec<f64> = ln_products.iter().map(|&lp| (lp - lse).exp()).collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    Ok(w)
}

/// Marginal likelihoods and model posteriors for a set of candidate models.
///
/// Model k draws from stream `STREAM_MODEL_BASE + k` of `seed`, so the result
/// is bit-identical for any `max_threads`. Threads are capped at the model
/// count.
pub fn compare_models(
    models: &[ModelSpec],
    stat: &ReturnStat,
    n_mc: usize,
    seed: u64,
    max_threads: usize,
) -> Result<ModelComparison> {
    if models.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "model comparison needs at least 2 models, got {}",
            models.len()
        )));
    }
    let prior_probs: Vec<f64> = models.iter().map(|m| m.prior_prob()).collect();
    let total: f64 = prior_probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "prior model probabilities must sum to 1, got {total}"
        )));
    }

    let n_threads = max_threads.clamp(1, models.len());
    let mut results: Vec<Option<(f64, f64)>> = vec![None; models.len()];
    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::with_capacity(n_threads);
        for offset in 0..n_threads {
            handles.push(scope.spawn(move || -> Result<Vec<(usize, (f64, f64))>> {
                let mut out = Vec::new();
                let mut k = offset;
                while k < models.len() {
                    let mut rng = stream_rng(seed, STREAM_MODEL_BASE + k as u64);
                    out.push((k, marginal_likelihood(&models[k], stat, n_mc, &mut rng)?));
                    k += n_threads;
                }
                Ok(out)
            }));
        }
        for h in handles {
            for (k, v) in h.join().expect("comparison worker panicked")? {
                results[k] = Some(v);
            }
        }
        Ok(())
    })?;

    let mut marginals = Vec::with_capacity(models.len());
    let mut mc_std_errors = Vec::with_capacity(models.len());
    for r in results {
        let (m, se) = r.expect("every model index visited");
        marginals.push(m);
        mc_std_errors.push(se);
    }
    let posteriors = model_posterior(&marginals, &prior_probs)?;
    Ok(ModelComparison { marginals, posteriors, mc_std_errors })
}
