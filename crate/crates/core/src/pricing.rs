//! Closed-form call pricing under the risk-neutral measure, posterior-
//! integrated prices, and model averaging.
//!
//! Under the pricing measure the drift is pinned to r, so a GBM posterior
//! price depends on the parameter draws through σ² alone; the inner
//! expectation is the lognormal closed form and no nested Monte Carlo is
//! needed.

use crate::error::{Error, Result};
use crate::inference::PosteriorDraws;
use crate::numeric::{mean_and_se, norm_cdf, pairwise_sum};
use crate::paths_and_data::PricePath;

/// Payoff family. Only European calls for now; the enum keeps the signature
/// extensible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffKind {
    EuropeanCall,
}

/// Contract terms: strike K, maturity T, and the valuation time t < T.
/// Times are in years.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "RawOption", into = "RawOption")]
pub struct OptionSpec {
    strike: f64,
    maturity: f64,
    valuation_time: f64,
    payoff_kind: PayoffKind,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct RawOption {
    strike: f64,
    maturity: f64,
    valuation_time: f64,
    payoff_kind: PayoffKind,
}

impl TryFrom<RawOption> for OptionSpec {
    type Error = Error;
    fn try_from(r: RawOption) -> Result<Self> {
        OptionSpec::new(r.strike, r.maturity, r.valuation_time, r.payoff_kind)
    }
}

impl From<OptionSpec> for RawOption {
    fn from(o: OptionSpec) -> RawOption {
        RawOption {
            strike: o.strike,
            maturity: o.maturity,
            valuation_time: o.valuation_time,
            payoff_kind: o.payoff_kind,
        }
    }
}

impl OptionSpec {
    pub fn new(
        strike: f64,
        maturity: f64,
        valuation_time: f64,
        payoff_kind: PayoffKind,
    ) -> Result<Self> {
        if !(strike > 0.0) || !strike.is_finite() {
            return Err(Error::InvalidInput(format!(
                "strike must be positive, got {strike}"
            )));
        }
        if !maturity.is_finite() || !valuation_time.is_finite() {
            return Err(Error::InvalidInput(
                "maturity and valuation_time must be finite".into(),
            ));
        }
        if !(valuation_time >= 0.0) || valuation_time >= maturity {
            return Err(Error::InvalidInput(format!(
                "need 0 <= valuation_time < maturity, got t={valuation_time}, \
                 T={maturity}"
            )));
        }
        Ok(OptionSpec { strike, maturity, valuation_time, payoff_kind })
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn valuation_time(&self) -> f64 {
        self.valuation_time
    }

    pub fn payoff_kind(&self) -> PayoffKind {
        self.payoff_kind
    }

    /// Time to expiry T − t.
    pub fn tau(&self) -> f64 {
        self.maturity - self.valuation_time
    }
}

/// A Monte Carlo price: posterior mean, its standard error, and the number
/// of draws behind it.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PriceEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_draws: usize,
}

/// Discounted risk-neutral call price under lognormal dynamics with variance
/// `sigma2`:
///
/// ```text
/// price = s Φ(d₁) − K e^{−rτ} Φ(d₂)
/// d₁ = [ln(s/K) + (r + σ²/2)τ] / (σ√τ),   d₂ = d₁ − σ√τ
/// ```
pub fn bs_call(s: f64, opt: &OptionSpec, r: f64, sigma2: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("spot must be positive, got {s}")));
    }
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::Domain(format!(
            "variance must be positive, got {sigma2}"
        )));
    }
    if !r.is_finite() {
        return Err(Error::Domain(format!("rate must be finite, got {r}")));
    }
    let tau = opt.tau();
    if !(tau > 0.0) {
        return Err(Error::Domain(format!(
            "option is at or past expiry (tau = {tau}); use intrinsic value"
        )));
    }
    let vol = (sigma2 * tau).sqrt();
    let d1 = ((s / opt.strike()).ln() + (r + sigma2 / 2.0) * tau) / vol;
    let d2 = d1 - vol;
    Ok(s * norm_cdf(d1) - opt.strike() * (-r * tau).exp() * norm_cdf(d2))
}

/// Posterior-integrated price: the mean of `bs_call` over the σ² draws, with
/// its Monte Carlo standard error. The option must be valued at the path's
/// final time (within 1e-12), where the spot is the last observed price.
pub fn price_posterior(
    path: &PricePath,
    opt: &OptionSpec,
    r: f64,
    draws: &PosteriorDraws,
) -> Result<PriceEstimate> {
    if (opt.valuation_time() - path.last_time()).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "valuation time {} does not match the path's final time {}",
            opt.valuation_time(),
            path.last_time()
        )));
    }
    let s = path.last_price();
    let prices = draws
        .sigma2()
        .iter()
        .map(|&v| bs_call(s, opt, r, v))
        .collect::<Result<Vec<f64>>>()?;
    let (mean, std_error) = mean_and_se(&prices);
    Ok(PriceEstimate { mean, std_error, n_draws: prices.len() })
}

/// Convex combination of per-model prices under the model posterior;
/// standard errors combine as the weighted root sum of squares of
/// independent components.
pub fn price_model_averaged(
    prices: &[PriceEstimate],
    model_posteriors: &[f64],
) -> Result<PriceEstimate> {
    if prices.len() != model_posteriors.len() || prices.is_empty() {
        return Err(Error::InvalidInput(format!(
            "need equally many prices and weights, got {} and {}",
            prices.len(),
            model_posteriors.len()
        )));
    }
    if let Some(bad) = model_posteriors.iter().find(|w| !(**w >= 0.0) || **w > 1.0) {
        return Err(Error::InvalidInput(format!(
            "weights must lie in [0, 1], got {bad}"
        )));
    }
    let total: f64 = model_posteriors.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "weights must sum to 1 within 1e-9, got {total}"
        )));
    }
    let weighted: Vec<f64> = prices
        .iter()
        .zip(model_posteriors)
        .map(|(p, &w)| w * p.mean)
        .collect();
    let weighted_var: Vec<f64> = prices
        .iter()
        .zip(model_posteriors)
        .map(|(p, &w)| (w * p.std_error) * (w * p.std_error))
        .collect();
    Ok(PriceEstimate {
        mean: pairwise_sum(&weighted),
        std_error: pairwise_sum(&weighted_var).sqrt(),
        n_draws: prices.iter().map(|p| p.n_draws).sum(),
    })
}
