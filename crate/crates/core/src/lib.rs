//! Bayesian inference and option pricing driven by the change-of-measure
//! likelihood.
//!
//! The physical measure P and the risk-neutral measure Q are linked by a
//! Radon-Nikodym derivative; restricted to the information available at time
//! t, dP/dQ acts as the likelihood of the model parameters. This crate builds
//! that likelihood for geometric Brownian motion (continuous and discrete
//! observation) and for a compound-Poisson jump diffusion (via the Esscher
//! transform), runs a Gibbs sampler on the conjugate Normal/Generalized
//! Inverse Gaussian conditionals, and turns posterior draws into
//! posterior-integrated and model-averaged call prices.
//!
//! Module layout:
//! - [`paths_and_data`]: price paths, CSV ingestion, sufficient statistics
//! - [`distributions`]: Bessel K, the GIG density/sampler/moments
//! - [`likelihoods`]: GBM and jump-diffusion likelihood machinery
//! - [`inference`]: conditional posteriors, Gibbs sampler, diagnostics
//! - [`model_selection`]: marginal likelihoods and model posteriors
//! - [`pricing`]: Black-Scholes core and posterior-weighted prices
//! - [`cli`]: the `bayesprice` command-line front end

pub mod cli;
pub mod distributions;
mod error;
pub mod inference;
pub mod likelihoods;
pub mod model_selection;
pub mod numeric;
pub mod paths_and_data;
pub mod pricing;
pub mod rng;

pub use error::{Error, Result};
