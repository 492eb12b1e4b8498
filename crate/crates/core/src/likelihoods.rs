//! Likelihoods read off the change of measure between the physical and the
//! risk-neutral dynamics, for GBM in continuous and discrete time and for a
//! finite-activity jump diffusion via its Esscher transform.
//!
//! Everything is computed in log space first; the natural-scale functions
//! are thin exp wrappers.

use crate::error::{Error, Result};
use crate::paths_and_data::{JumpDist, ReturnStat};

/// GBM parameter triple (μ, σ², r), annualized.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GbmParams {
    mu: f64,
    sigma2: f64,
    r: f64,
}

impl GbmParams {
    pub fn new(mu: f64, sigma2: f64, r: f64) -> Result<Self> {
        if !mu.is_finite() || !r.is_finite() {
            return Err(Error::Domain(format!(
                "drift and rate must be finite, got ({mu}, {r})"
            )));
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::Domain(format!(
                "variance must be positive and finite, got {sigma2}"
            )));
        }
        Ok(GbmParams { mu, sigma2, r })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Log-price drift ν = μ - σ²/2.
    pub fn nu(&self) -> f64 {
        self.mu - self.sigma2 / 2.0
    }

    /// Girsanov tilt (r - μ)/σ.
    pub fn market_price_of_risk(&self) -> f64 {
        (self.r - self.mu) / self.sigma2.sqrt()
    }
}

/// Jump-diffusion parameters: diffusion part (μ, σ², r) with σ² ≥ 0 plus a
/// compound-Poisson jump part.
///
/// σ² = 0 (pure jump) is admitted here even though [`GbmParams`] requires a
/// positive variance, because the cumulant machinery is well defined for it.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpModelParams {
    mu: f64,
    sigma2: f64,
    r: f64,
    jump_intensity: f64,
    jump_dist: JumpDist,
}

impl JumpModelParams {
    pub fn new(gbm: &GbmParams, jump_intensity: f64, jump_dist: JumpDist) -> Result<Self> {
        Self::build(gbm.mu(), gbm.sigma2(), gbm.r(), jump_intensity, jump_dist)
    }

    /// σ² = 0 variant: all randomness comes from the jumps.
    pub fn pure_jump(mu: f64, r: f64, jump_intensity: f64, jump_dist: JumpDist) -> Result<Self> {
        Self::build(mu, 0.0, r, jump_intensity, jump_dist)
    }

    fn build(
        mu: f64,
        sigma2: f64,
        r: f64,
        jump_intensity: f64,
        jump_dist: JumpDist,
    ) -> Result<Self> {
        if !mu.is_finite() || !r.is_finite() || !sigma2.is_finite() || sigma2 < 0.0 {
            return Err(Error::Domain(format!(
                "jump model needs finite mu, r and nonnegative sigma2, \
                 got ({mu}, {r}, {sigma2})"
            )));
        }
        if !(jump_intensity >= 0.0) || !jump_intensity.is_finite() {
            return Err(Error::Domain(format!(
                "jump intensity must be nonnegative, got {jump_intensity}"
            )));
        }
        Ok(JumpModelParams { mu, sigma2, r, jump_intensity, jump_dist })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn jump_intensity(&self) -> f64 {
        self.jump_intensity
    }

    pub fn jump_dist(&self) -> &JumpDist {
        &self.jump_dist
    }

    pub fn nu(&self) -> f64 {
        self.mu - self.sigma2 / 2.0
    }
}

// ---------------------------------------------------------------------------
// GBM likelihoods
// ---------------------------------------------------------------------------

/// log of the density process relating the two measures at time t, given the
/// Brownian level w_t:
///
/// ```text
/// ln Z_t = w_t (r-μ)/σ - (t/2) ((r-μ)/σ)²
/// ```
pub fn ln_rn_density_gbm(w_t: f64, t: f64, p: &GbmParams) -> Result<f64> {
    if !w_t.is_finite() {
        return Err(Error::Domain(format!("Brownian level must be finite, got {w_t}")));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    let tilt = p.market_price_of_risk();
    Ok(w_t * tilt - t / 2.0 * tilt * tilt)
}

/// Density process Z_t in natural scale; see [`ln_rn_density_gbm`].
pub fn rn_density_gbm(w_t: f64, t: f64, p: &GbmParams) -> Result<f64> {
    ln_rn_density_gbm(w_t, t, p).map(f64::exp)
}

/// log likelihood of (μ, σ²) given the return statistic: the inverse density
/// process expressed through the sufficient statistic alone,
///
/// ```text
/// ln L = t/(2σ²) [ (r - A)² - (μ - A)² ],   A = ln_ratio/t + σ²/2.
/// ```
///
/// As a function of μ this is a normal kernel peaking at A, which is the
/// flat-prior posterior mean; that profile is the binding contract.
pub fn ln_likelihood_gbm(stat: &ReturnStat, p: &GbmParams) -> f64 {
    let t = stat.horizon();
    let anchor = stat.ln_ratio() / t + p.sigma2() / 2.0;
    let dr = p.r() - anchor;
    let dm = p.mu() - anchor;
    t / (2.0 * p.sigma2()) * (dr * dr - dm * dm)
}

/// Likelihood in natural scale; see [`ln_likelihood_gbm`].
pub fn likelihood_gbm(stat: &ReturnStat, p: &GbmParams) -> f64 {
    ln_likelihood_gbm(stat, p).exp()
}

/// log density of the time-t log return under the physical measure:
/// Normal((μ - σ²/2) t, σ² t) evaluated at ln_ratio.
///
/// This is the likelihood the conjugate conditionals integrate; it differs
/// from [`ln_likelihood_gbm`] by a μ-free factor (the risk-neutral return
/// density), so both induce the same posterior in μ.
pub fn ln_return_density_gbm(stat: &ReturnStat, mu: f64, sigma2: f64) -> Result<f64> {
    if !mu.is_finite() {
        return Err(Error::Domain(format!("drift must be finite, got {mu}")));
    }
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::Domain(format!(
            "variance must be positive and finite, got {sigma2}"
        )));
    }
    let t = stat.horizon();
    let m = (mu - sigma2 / 2.0) * t;
    let v = sigma2 * t;
    let d = stat.ln_ratio() - m;
    Ok(-0.5 * (d * d / v + (2.0 * std::f64::consts::PI * v).ln()))
}

/// log of the discrete-time (Wald-product) likelihood over n returns observed
/// on intervals of the given length:
///
/// ```text
/// ln Z_n^{-1} = -a Σ R_k + n a² σ² Δ / 2,   a = (r - ν)/σ²,  ν = μ - σ²/2.
/// ```
pub fn ln_likelihood_discrete(returns: &[f64], p: &GbmParams, interval: f64) -> Result<f64> {
    if !(interval > 0.0) || !interval.is_finite() {
        return Err(Error::Domain(format!(
            "return interval must be positive, got {interval}"
        )));
    }
    if let Some(bad) = returns.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "returns must be finite, got {bad}"
        )));
    }
    if returns.is_empty() {
        return Ok(0.0);
    }
    let a = (p.r() - p.nu()) / p.sigma2();
    let sum: f64 = crate::numeric::pairwise_sum(returns);
    let n = returns.len() as f64;
    Ok(-a * sum + n * a * a * p.sigma2() * interval / 2.0)
}

/// Discrete-time likelihood in natural scale; see [`ln_likelihood_discrete`].
pub fn likelihood_discrete(returns: &[f64], p: &GbmParams, interval: f64) -> Result<f64> {
    ln_likelihood_discrete(returns, p, interval).map(f64::exp)
}

// ---------------------------------------------------------------------------
// Jump-diffusion cumulant and Esscher transform
// ---------------------------------------------------------------------------

/// Cumulant of the unit-time log-price noise σW₁ + Y₁:
///
/// ```text
/// k(θ) = θ²σ²/2 + λ Σ p_i (e^{θ x_i} - 1)
/// ```
///
/// The θ² in the Gaussian term is what makes E[e^{θσW₁}] = e^{k(θ)} hold at
/// λ = 0 and the Esscher root below collapse to the Girsanov tilt.
pub fn cumulant_k(theta: f64, p: &JumpModelParams) -> f64 {
    let gauss = theta * theta * p.sigma2() / 2.0;
    let jump: f64 = p
        .jump_dist()
        .support()
        .iter()
        .zip(p.jump_dist().probs())
        .map(|(&x, &w)| w * ((theta * x).exp() - 1.0))
        .sum();
    gauss + p.jump_intensity() * jump
}

/// k(θ+1) - k(θ) without forming the difference of two near-infinite values:
///
/// ```text
/// Δk(θ) = σ²(θ + 1/2) + λ Σ p_i e^{θ x_i} (e^{x_i} - 1)
/// ```
///
/// Strictly increasing in θ whenever σ² > 0 or some atom is nonzero.
fn cumulant_diff(theta: f64, p: &JumpModelParams) -> f64 {
    let gauss = p.sigma2() * (theta + 0.5);
    let jump: f64 = p
        .jump_dist()
        .support()
        .iter()
        .zip(p.jump_dist().probs())
        .map(|(&x, &w)| w * (theta * x).exp() * (x.exp() - 1.0))
        .sum();
    gauss + p.jump_intensity() * jump
}

const ESSCHER_BRACKET_CAP: f64 = 1e6;

/// The Esscher parameter θ* solving the martingale condition
/// k(θ*+1) - k(θ*) = r - ν, by expanding bracket plus bisection on the
/// increasing difference. Residual is at most 1e-12.
pub fn esscher_theta(p: &JumpModelParams) -> Result<f64> {
    let target = p.r() - p.nu();
    let f = |theta: f64| cumulant_diff(theta, p) - target;

    let f0 = f(0.0);
    if f0 == 0.0 {
        return Ok(0.0);
    }
    // the root lies right of 0 when f(0) < 0, left otherwise
    let dir = if f0 < 0.0 { 1.0 } else { -1.0 };
    let mut step = 1.0;
    let mut hi = dir * step;
    while f(hi) * f0 > 0.0 {
        step *= 2.0;
        if step > ESSCHER_BRACKET_CAP {
            return Err(Error::Numeric(format!(
                "no Esscher parameter within |theta| <= {ESSCHER_BRACKET_CAP}"
            )));
        }
        hi = dir * step;
    }

    let (mut lo, mut hi) = if dir > 0.0 { (0.0, hi) } else { (hi, 0.0) };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    let residual = f(theta).abs();
    if residual > 1e-12 {
        return Err(Error::Numeric(format!(
            "Esscher root residual {residual} exceeds 1e-12"
        )));
    }
    Ok(theta)
}

/// log likelihood of the jump-diffusion parameters given the return
/// statistic, through the Esscher change of measure:
///
/// ```text
/// ln L = -θ* (ln_ratio - t ν) + t k(θ*)
/// ```
pub fn ln_likelihood_jump(stat: &ReturnStat, p: &JumpModelParams) -> Result<f64> {
    let theta = esscher_theta(p)?;
    let t = stat.horizon();
    Ok(-theta * (stat.ln_ratio() - t * p.nu()) + t * cumulant_k(theta, p))
}

/// Jump-diffusion likelihood in natural scale; see [`ln_likelihood_jump`].
pub fn likelihood_jump(stat: &ReturnStat, p: &JumpModelParams) -> Result<f64> {
    ln_likelihood_jump(stat, p).map(f64::exp)
}
