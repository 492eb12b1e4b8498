//! Price paths under the physical measure, CSV ingestion, and the reduction
//! to the sufficient statistic the likelihoods consume.
//!
//! Simulation is exact-law: log increments are drawn from their true normal
//! (plus compound-Poisson) distribution per grid step, so Monte Carlo tests
//! downstream carry no discretization bias.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rand_distr::weighted::WeightedIndex;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, STREAM_BROWNIAN, STREAM_JUMPS};

/// A time-indexed series of strictly positive prices.
///
/// Invariants: times strictly increasing with `times[0] == 0`, equal-length
/// positive prices, length at least 2, `s0 == prices[0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePath {
    times: Vec<f64>,
    prices: Vec<f64>,
    s0: f64,
}

impl PricePath {
    pub fn new(times: Vec<f64>, prices: Vec<f64>) -> Result<Self> {
        if times.len() != prices.len() {
            return Err(Error::InvalidInput(format!(
                "times and prices must align, got {} vs {}",
                times.len(),
                prices.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::InvalidInput(
                "a price path needs at least 2 points".to_string(),
            ));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidInput(format!(
                "path times must start at 0, got {}",
                times[0]
            )));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::InvalidInput(format!(
                    "path times must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        for &p in &prices {
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "prices must be positive and finite, got {p}"
                )));
            }
        }
        let s0 = prices[0];
        Ok(PricePath { times, prices, s0 })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("length >= 2")
    }

    pub fn last_price(&self) -> f64 {
        *self.prices.last().expect("length >= 2")
    }

    /// Two-column CSV, header `t,price`, shortest round-trip float formatting.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,price")?;
        for (t, p) in self.times.iter().zip(&self.prices) {
            writeln!(w, "{t},{p}")?;
        }
        Ok(())
    }
}

/// The sufficient statistic of a path under the GBM likelihood:
/// `(log(S_t/S_0), t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnStat {
    ln_ratio: f64,
    horizon: f64,
}

impl ReturnStat {
    pub fn new(ln_ratio: f64, horizon: f64) -> Result<Self> {
        if !ln_ratio.is_finite() {
            return Err(Error::InvalidInput(format!(
                "log return must be finite, got {ln_ratio}"
            )));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidInput(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        Ok(ReturnStat { ln_ratio, horizon })
    }

    pub fn ln_ratio(&self) -> f64 {
        self.ln_ratio
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }
}

/// Discrete distribution of log jump sizes η = ln(1+ξ), where ξ is the
/// relative price jump. Working in log space makes the positivity constraint
/// 1 + ξ > 0 automatic for any finite η.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpDist {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl JumpDist {
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() || support.is_empty() {
            return Err(Error::InvalidInput(
                "jump support and probabilities must align and be nonempty".to_string(),
            ));
        }
        if support.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(
                "jump sizes must be finite".to_string(),
            ));
        }
        if probs.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidInput(
                "jump probabilities must be positive".to_string(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "jump probabilities must sum to 1, got {total}"
            )));
        }
        Ok(JumpDist { support, probs })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

fn validate_sim_inputs(s0: f64, mu: f64, sigma: f64, t_grid: &[f64]) -> Result<()> {
    if !(s0 > 0.0) || !s0.is_finite() {
        return Err(Error::InvalidInput(format!(
            "initial price must be positive, got {s0}"
        )));
    }
    if !mu.is_finite() {
        return Err(Error::InvalidInput(format!("drift must be finite, got {mu}")));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidInput(format!(
            "volatility must be nonnegative, got {sigma}"
        )));
    }
    if t_grid.len() < 2 {
        return Err(Error::InvalidInput(
            "time grid needs at least 2 points".to_string(),
        ));
    }
    if t_grid[0] != 0.0 {
        return Err(Error::InvalidInput(format!(
            "time grid must start at 0, got {}",
            t_grid[0]
        )));
    }
    for w in t_grid.windows(2) {
        if !(w[1] > w[0]) || !w[1].is_finite() {
            return Err(Error::InvalidInput(format!(
                "time grid must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Geometric Brownian motion sampled exactly on `t_grid`:
/// `ln S_{k+1} - ln S_k ~ Normal((mu - sigma^2/2) dt, sigma^2 dt)`.
///
/// Deterministic given `seed`; Brownian increments come from the dedicated
/// [`STREAM_BROWNIAN`] stream so jump-diffusion paths with the same seed share
/// them.
pub fn simulate_gbm(
    s0: f64,
    mu: f64,
    sigma: f64,
    t_grid: &[f64],
    seed: u64,
) -> Result<PricePath> {
    validate_sim_inputs(s0, mu, sigma, t_grid)?;
    let mut rng = stream_rng(seed, STREAM_BROWNIAN);
    let drift = mu - 0.5 * sigma * sigma;
    let mut ln_s = s0.ln();
    let mut prices = Vec::with_capacity(t_grid.len());
    prices.push(s0);
    for w in t_grid.windows(2) {
        let dt = w[1] - w[0];
        let z: f64 = rng.sample(StandardNormal);
        ln_s += drift * dt + sigma * dt.sqrt() * z;
        prices.push(ln_s.exp());
    }
    PricePath::new(t_grid.to_vec(), prices)
}

/// Jump diffusion `S_t = S_0 exp[(mu - sigma^2/2) t + sigma W_t + Y_t]` with
/// compound-Poisson log jumps `Y_t`, sampled exactly per grid step.
///
/// The Brownian and jump parts draw from separate streams of the same seed,
/// so `jump_intensity = 0` reproduces [`simulate_gbm`] bit for bit.
pub fn simulate_jump_diffusion(
    s0: f64,
    mu: f64,
    sigma: f64,
    jump_intensity: f64,
    jump_dist: &JumpDist,
    t_grid: &[f64],
    seed: u64,
) -> Result<PricePath> {
    validate_sim_inputs(s0, mu, sigma, t_grid)?;
    if !(jump_intensity >= 0.0) || !jump_intensity.is_finite() {
        return Err(Error::InvalidInput(format!(
            "jump intensity must be nonnegative, got {jump_intensity}"
        )));
    }
    let mut brownian = stream_rng(seed, STREAM_BROWNIAN);
    let mut jump_rng = stream_rng(seed, STREAM_JUMPS);
    let pick = WeightedIndex::new(jump_dist.probs())
        .expect("probabilities validated by JumpDist");

    let drift = mu - 0.5 * sigma * sigma;
    let mut ln_s = s0.ln();
    let mut prices = Vec::with_capacity(t_grid.len());
    prices.push(s0);
    for w in t_grid.windows(2) {
        let dt = w[1] - w[0];
        let z: f64 = brownian.sample(StandardNormal);
        let mut y = 0.0;
        if jump_intensity > 0.0 {
            let n = Poisson::new(jump_intensity * dt)
                .expect("positive rate")
                .sample(&mut jump_rng) as u64;
            for _ in 0..n {
                y += jump_dist.support()[pick.sample(&mut jump_rng)];
            }
        }
        ln_s += drift * dt + sigma * dt.sqrt() * z + y;
        prices.push(ln_s.exp());
    }
    PricePath::new(t_grid.to_vec(), prices)
}

/// Parse a `t,price` CSV stream into a [`PricePath`], rebasing times so the
/// first observation sits at 0. Row numbers in errors count data rows from 1.
pub fn load_price_series<R: std::io::Read>(source: R) -> Result<PricePath> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    {
        let hdr = rdr
            .headers()
            .map_err(|e| Error::Data(format!("cannot read header: {e}")))?;
        let fields: Vec<&str> = hdr.iter().collect();
        if fields != ["t", "price"] {
            return Err(Error::Data(format!(
                "expected header `t,price`, got `{}`",
                fields.join(",")
            )));
        }
    }

    let mut times = Vec::new();
    let mut prices = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::DataRow {
            row,
            msg: e.to_string(),
        })?;
        if rec.len() != 2 {
            return Err(Error::DataRow {
                row,
                msg: format!("expected 2 fields, got {}", rec.len()),
            });
        }
        let t: f64 = rec[0].parse().map_err(|_| Error::DataRow {
            row,
            msg: format!("cannot parse time `{}`", &rec[0]),
        })?;
        let p: f64 = rec[1].parse().map_err(|_| Error::DataRow {
            row,
            msg: format!("cannot parse price `{}`", &rec[1]),
        })?;
        if !t.is_finite() {
            return Err(Error::DataRow {
                row,
                msg: format!("time must be finite, got {t}"),
            });
        }
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::DataRow {
                row,
                msg: format!("price must be positive, got {p}"),
            });
        }
        if let Some(&last) = times.last() {
            if t <= last {
                return Err(Error::DataRow {
                    row,
                    msg: format!("time {t} does not increase past {last}"),
                });
            }
        }
        times.push(t);
        prices.push(p);
    }

    if times.is_empty() {
        return Err(Error::Data("no data rows".to_string()));
    }
    if times.len() < 2 {
        return Err(Error::Data(
            "a price series needs at least 2 rows".to_string(),
        ));
    }
    let t0 = times[0];
    for t in &mut times {
        *t -= t0;
    }
    times[0] = 0.0;
    PricePath::new(times, prices)
}

/// Reduce a path to `(log(S_t/S_0), t)` over its full span.
pub fn log_return(path: &PricePath) -> ReturnStat {
    ReturnStat::new((path.last_price() / path.s0()).ln(), path.last_time())
        .expect("PricePath invariants guarantee a valid statistic")
}
