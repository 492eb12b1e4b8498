//! Python bindings for the bayesprice core: price paths, the GIG toolkit,
//! likelihoods, the Gibbs sampler, and posterior-integrated call prices.
//!
//! Errors from the core surface as ValueError; file problems as IOError.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use bayesprice::distributions::{self, GIGParams, GigSampler};
use bayesprice::inference::{self, GibbsConfig, PriorSpec};
use bayesprice::likelihoods::{GbmParams, JumpModelParams};
use bayesprice::model_selection;
use bayesprice::paths_and_data::{self, JumpDist};
use bayesprice::pricing::{self, OptionSpec, PayoffKind};
use bayesprice::rng::stream_rng;

fn value_err(e: bayesprice::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn gig(lambda: f64, delta: f64, gamma: f64) -> PyResult<GIGParams> {
    GIGParams::new(lambda, delta, gamma).map_err(value_err)
}

fn jump_model(
    mu: f64,
    sigma2: f64,
    r: f64,
    jump_intensity: f64,
    support: Vec<f64>,
    probs: Vec<f64>,
) -> PyResult<JumpModelParams> {
    let dist = JumpDist::new(support, probs).map_err(value_err)?;
    if sigma2 == 0.0 {
        JumpModelParams::pure_jump(mu, r, jump_intensity, dist).map_err(value_err)
    } else {
        let gbm = GbmParams::new(mu, sigma2, r).map_err(value_err)?;
        JumpModelParams::new(&gbm, jump_intensity, dist).map_err(value_err)
    }
}

/// A time-indexed series of strictly positive prices.
#[pyclass(frozen, name = "PricePath")]
struct PricePath {
    inner: paths_and_data::PricePath,
}

#[pymethods]
impl PricePath {
    #[new]
    fn new(times: Vec<f64>, prices: Vec<f64>) -> PyResult<Self> {
        paths_and_data::PricePath::new(times, prices)
            .map(|inner| PricePath { inner })
            .map_err(value_err)
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times().to_vec()
    }

    #[getter]
    fn prices(&self) -> Vec<f64> {
        self.inner.prices().to_vec()
    }

    fn s0(&self) -> f64 {
        self.inner.s0()
    }

    fn last_time(&self) -> f64 {
        self.inner.last_time()
    }

    fn last_price(&self) -> f64 {
        self.inner.last_price()
    }

    /// (ln_ratio, horizon) of the whole path.
    fn log_return(&self) -> (f64, f64) {
        let stat = paths_and_data::log_return(&self.inner);
        (stat.ln_ratio(), stat.horizon())
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        let f = std::fs::File::create(path)
            .map_err(|e| PyIOError::new_err(format!("cannot create {path}: {e}")))?;
        self.inner
            .write_csv(f)
            .map_err(|e| PyIOError::new_err(format!("cannot write {path}: {e}")))
    }

    #[staticmethod]
    fn read_csv(path: &str) -> PyResult<Self> {
        let f = std::fs::File::open(path)
            .map_err(|e| PyIOError::new_err(format!("cannot open {path}: {e}")))?;
        paths_and_data::load_price_series(f)
            .map(|inner| PricePath { inner })
            .map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.inner.times().len()
    }

    fn __repr__(&self) -> String {
        format!(
            "PricePath({} points, t in [0, {}])",
            self.inner.times().len(),
            self.inner.last_time()
        )
    }
}

/// Gibbs draws of (mu, sigma2) plus the configuration that produced them.
#[pyclass(frozen, name = "PosteriorDraws")]
struct PosteriorDraws {
    inner: inference::PosteriorDraws,
}

#[pymethods]
impl PosteriorDraws {
    #[getter]
    fn mu(&self) -> Vec<f64> {
        self.inner.mu().to_vec()
    }

    #[getter]
    fn sigma2(&self) -> Vec<f64> {
        self.inner.sigma2().to_vec()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.config().seed
    }

    /// Per-coordinate mean, variance, central 90% interval, and effective
    /// sample size, as nested dicts.
    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = inference::posterior_summary(&self.inner);
        let out = PyDict::new(py);
        for (key, p) in [("mu", s.mu), ("sigma2", s.sigma2)] {
            let d = PyDict::new(py);
            d.set_item("mean", p.mean)?;
            d.set_item("variance", p.variance)?;
            d.set_item("q05", p.q05)?;
            d.set_item("q95", p.q95)?;
            d.set_item("ess", p.ess)?;
            out.set_item(key, d)?;
        }
        Ok(out)
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("draws serialize")
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text)
            .map(|inner| PosteriorDraws { inner })
            .map_err(|e| PyValueError::new_err(format!("invalid draws: {e}")))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("PosteriorDraws({} draws, seed {})", self.inner.len(), self.seed())
    }
}

/// ln K_nu(omega), the log modified Bessel function of the second kind.
#[pyfunction]
fn ln_bessel_k(nu: f64, omega: f64) -> PyResult<f64> {
    distributions::ln_bessel_k(nu, omega).map_err(value_err)
}

/// GIG(lambda, delta, gamma) density at x.
#[pyfunction]
fn gig_density(x: f64, lambda: f64, delta: f64, gamma: f64) -> PyResult<f64> {
    distributions::gig_density(x, &gig(lambda, delta, gamma)?).map_err(value_err)
}

/// (mean, variance) of GIG(lambda, delta, gamma); interior parameters only.
#[pyfunction]
fn gig_moments(lambda: f64, delta: f64, gamma: f64) -> PyResult<(f64, f64)> {
    distributions::gig_moments(&gig(lambda, delta, gamma)?).map_err(value_err)
}

/// n exact GIG draws from a seeded stream.
#[pyfunction]
fn gig_sample(lambda: f64, delta: f64, gamma: f64, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    let sampler = GigSampler::new(&gig(lambda, delta, gamma)?);
    let mut rng = stream_rng(seed, 0);
    Ok((0..n).map(|_| sampler.sample(&mut rng)).collect())
}

/// Exact-law GBM path on the given time grid; sigma is the volatility.
#[pyfunction]
fn simulate_gbm(s0: f64, mu: f64, sigma: f64, t_grid: Vec<f64>, seed: u64) -> PyResult<PricePath> {
    paths_and_data::simulate_gbm(s0, mu, sigma, &t_grid, seed)
        .map(|inner| PricePath { inner })
        .map_err(value_err)
}

/// GBM plus compound-Poisson log jumps on the given atoms.
#[pyfunction]
fn simulate_jump_diffusion(
    s0: f64,
    mu: f64,
    sigma: f64,
    jump_intensity: f64,
    support: Vec<f64>,
    probs: Vec<f64>,
    t_grid: Vec<f64>,
    seed: u64,
) -> PyResult<PricePath> {
    let dist = JumpDist::new(support, probs).map_err(value_err)?;
    paths_and_data::simulate_jump_diffusion(s0, mu, sigma, jump_intensity, &dist, &t_grid, seed)
        .map(|inner| PricePath { inner })
        .map_err(value_err)
}

/// Change-of-measure log likelihood of (mu, sigma2) given one log return.
#[pyfunction]
fn ln_likelihood_gbm(ln_ratio: f64, horizon: f64, mu: f64, sigma2: f64, r: f64) -> PyResult<f64> {
    let stat = paths_and_data::ReturnStat::new(ln_ratio, horizon).map_err(value_err)?;
    let p = GbmParams::new(mu, sigma2, r).map_err(value_err)?;
    Ok(bayesprice::likelihoods::ln_likelihood_gbm(&stat, &p))
}

/// Esscher parameter of the jump diffusion; sigma2 = 0 means pure jumps.
#[pyfunction]
fn esscher_theta(
    mu: f64,
    sigma2: f64,
    r: f64,
    jump_intensity: f64,
    support: Vec<f64>,
    probs: Vec<f64>,
) -> PyResult<f64> {
    let p = jump_model(mu, sigma2, r, jump_intensity, support, probs)?;
    bayesprice::likelihoods::esscher_theta(&p).map_err(value_err)
}

/// Gibbs sampler over the (mu, sigma2) posterior of a price path. Priors are
/// the CLI strings: "flat", "normal:MEAN,VAR", "gig:LAMBDA,DELTA,GAMMA",
/// "point:VALUE".
#[pyfunction]
#[pyo3(signature = (
    path, r, prior_mu = "flat", prior_sigma2 = "flat", n_draws = 5000,
    burn_in = 1000, thin = 1, seed = 0, init_mu = 0.0, init_sigma2 = 0.1,
))]
#[allow(clippy::too_many_arguments)]
fn gibbs_run(
    path: &PricePath,
    r: f64,
    prior_mu: &str,
    prior_sigma2: &str,
    n_draws: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
    init_mu: f64,
    init_sigma2: f64,
) -> PyResult<PosteriorDraws> {
    let stat = paths_and_data::log_return(&path.inner);
    let priors = PriorSpec {
        mu_prior: prior_mu.parse().map_err(value_err)?,
        sigma2_prior: prior_sigma2.parse().map_err(value_err)?,
    };
    let cfg = GibbsConfig { n_draws, burn_in, thin, seed, init_mu, init_sigma2 };
    inference::gibbs_run(&stat, r, &priors, &cfg)
        .map(|inner| PosteriorDraws { inner })
        .map_err(value_err)
}

/// Black-Scholes European call on variance sigma2 over
/// [valuation_time, maturity].
#[pyfunction]
fn bs_call(
    s: f64,
    strike: f64,
    maturity: f64,
    valuation_time: f64,
    r: f64,
    sigma2: f64,
) -> PyResult<f64> {
    let opt = OptionSpec::new(strike, maturity, valuation_time, PayoffKind::EuropeanCall)
        .map_err(value_err)?;
    pricing::bs_call(s, &opt, r, sigma2).map_err(value_err)
}

/// Posterior-integrated call price; returns (mean, std_error, n_draws).
#[pyfunction]
fn price_posterior(
    path: &PricePath,
    strike: f64,
    maturity: f64,
    r: f64,
    draws: &PosteriorDraws,
) -> PyResult<(f64, f64, usize)> {
    let opt = OptionSpec::new(
        strike,
        maturity,
        path.inner.last_time(),
        PayoffKind::EuropeanCall,
    )
    .map_err(value_err)?;
    pricing::price_posterior(&path.inner, &opt, r, &draws.inner)
        .map(|e| (e.mean, e.std_error, e.n_draws))
        .map_err(value_err)
}

/// Posterior model probabilities from marginal likelihoods and prior odds.
#[pyfunction]
fn model_posterior(marginals: Vec<f64>, prior_probs: Vec<f64>) -> PyResult<Vec<f64>> {
    model_selection::model_posterior(&marginals, &prior_probs).map_err(value_err)
}

#[pymodule]
fn bayesprice_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PricePath>()?;
    m.add_class::<PosteriorDraws>()?;
    m.add_function(wrap_pyfunction!(ln_bessel_k, m)?)?;
    m.add_function(wrap_pyfunction!(gig_density, m)?)?;
    m.add_function(wrap_pyfunction!(gig_moments, m)?)?;
    m.add_function(wrap_pyfunction!(gig_sample, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_gbm, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_jump_diffusion, m)?)?;
    m.add_function(wrap_pyfunction!(ln_likelihood_gbm, m)?)?;
    m.add_function(wrap_pyfunction!(esscher_theta, m)?)?;
    m.add_function(wrap_pyfunction!(gibbs_run, m)?)?;
    m.add_function(wrap_pyfunction!(bs_call, m)?)?;
    m.add_function(wrap_pyfunction!(price_posterior, m)?)?;
    m.add_function(wrap_pyfunction!(model_posterior, m)?)?;
    Ok(())
}
