//! Command-line front end: flag/config-file resolution, command dispatch,
//! and result serialization.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error (missing or malformed
//! input files), 4 numeric error. Every run echoes its resolved
//! configuration, seed included, so any output can be reproduced from the
//! echo alone. Structured results are JSON; tabular series are CSV with the
//! config echoed as one JSON line on stdout.

use std::fs;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::inference::{
    consistency_diagnostic, gibbs_run, merging_diagnostic, posterior_summary,
    GibbsConfig, MuGrid, MuPrior, PosteriorDraws, PosteriorSummary, PriorSpec,
    Sigma2Prior,
};
use crate::model_selection::{compare_models, ModelComparison, ModelKind, ModelSpec};
use crate::paths_and_data::{
    load_price_series, log_return, simulate_gbm, simulate_jump_diffusion, JumpDist,
    PricePath,
};
use crate::pricing::{
    price_model_averaged, price_posterior, OptionSpec, PayoffKind, PriceEstimate,
};

const EXIT_OK: i32 = 0;
const EXIT_USAGE: i32 = 2;
const EXIT_DATA: i32 = 3;
const EXIT_NUMERIC: i32 = 4;

/// Parallelism override; a positive integer. Flags still win over it.
const THREADS_ENV: &str = "BAYESPRICE_THREADS";

#[derive(Debug)]
struct Failure {
    code: i32,
    msg: String,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, msg: msg.into() }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match &e {
            Error::InvalidInput(_) => EXIT_USAGE,
            Error::Data(_) | Error::DataRow { .. } => EXIT_DATA,
            Error::Domain(_) | Error::Numeric(_) | Error::Gibbs { .. } => EXIT_NUMERIC,
        };
        Failure { code, msg: e.to_string() }
    }
}

// ---------------------------------------------------------------------------
// Argument and config-file schemas
// ---------------------------------------------------------------------------

#[derive(Parser, Debug)]
#[command(
    name = "bayesprice",
    version,
    about = "Bayesian option pricing: simulation, Gibbs inference, model \
             comparison, and posterior-integrated prices"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Simulate a GBM or jump-diffusion price path to CSV
    Simulate(SimulateArgs),
    /// Sample the (mu, sigma2) posterior from a price CSV via Gibbs
    Infer(InferArgs),
    /// Posterior-integrated call price from saved draws
    Price(PriceArgs),
    /// Marginal likelihoods and model posteriors, optionally a BMA price
    Compare(CompareArgs),
    /// Consistency and merging diagnostics as plot-ready CSV
    Diagnose(DiagnoseArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// TOML config file; flags take precedence over its [simulate] section
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    s0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    /// Volatility (standard deviation per sqrt-year)
    #[arg(long)]
    sigma: Option<f64>,
    /// Horizon in years
    #[arg(long)]
    t: Option<f64>,
    /// Number of uniform steps over the horizon
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Jump arrival rate per year (0 = pure GBM)
    #[arg(long)]
    jump_intensity: Option<f64>,
    /// Comma-separated log-jump sizes, e.g. "-0.05,0.04"
    #[arg(long, allow_hyphen_values = true)]
    jump_support: Option<String>,
    /// Comma-separated jump probabilities, matching --jump-support
    #[arg(long)]
    jump_probs: Option<String>,
    /// Output CSV path
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Debug)]
struct InferArgs {
    #[arg(long)]
    config: Option<String>,
    /// Price CSV (t,price)
    #[arg(long)]
    data: Option<String>,
    /// Risk-free rate, echoed for downstream pricing
    #[arg(long, allow_hyphen_values = true)]
    r: Option<f64>,
    /// flat | normal:MEAN,VAR | point:VALUE
    #[arg(long)]
    prior_mu: Option<String>,
    /// flat | gig:LAMBDA,DELTA,GAMMA | point:VALUE
    #[arg(long)]
    prior_sigma2: Option<String>,
    /// Number of recorded posterior draws
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    init_mu: Option<f64>,
    #[arg(long)]
    init_sigma2: Option<f64>,
    /// Output JSON path
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Debug)]
struct PriceArgs {
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    data: Option<String>,
    /// Posterior JSON produced by `infer`
    #[arg(long)]
    posterior: Option<String>,
    #[arg(long)]
    strike: Option<f64>,
    /// Option maturity in years (valuation happens at the path's final time)
    #[arg(long)]
    maturity: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    r: Option<f64>,
    /// Output JSON path; stdout when omitted
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// TOML config file holding the [[compare.models]] blocks
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    data: Option<String>,
    /// Monte Carlo draws per marginal likelihood
    #[arg(long)]
    n_mc: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: BAYESPRICE_THREADS or the machine's cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Strike for the BMA price (with --maturity; GBM models only)
    #[arg(long)]
    strike: Option<f64>,
    #[arg(long)]
    maturity: Option<f64>,
    /// Gibbs draws per model for the BMA price
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    init_mu: Option<f64>,
    #[arg(long)]
    init_sigma2: Option<f64>,
    /// Output JSON path; stdout when omitted
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    data: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    r: Option<f64>,
    /// Consistency priors (default flat)
    #[arg(long)]
    prior_mu: Option<String>,
    #[arg(long)]
    prior_sigma2: Option<String>,
    /// Comma-separated checkpoint times matching path grid times
    #[arg(long, allow_hyphen_values = true)]
    checkpoints: Option<String>,
    /// Consistency CSV output (t,var_mu,var_sigma2)
    #[arg(long)]
    out_consistency: Option<String>,
    /// First merging prior on mu
    #[arg(long)]
    prior_mu_a: Option<String>,
    /// Second merging prior on mu
    #[arg(long)]
    prior_mu_b: Option<String>,
    /// Known sigma2 for the merging grid posterior
    #[arg(long)]
    merge_sigma2: Option<f64>,
    /// Merging grid as "lo,hi,n"
    #[arg(long, allow_hyphen_values = true)]
    mu_grid: Option<String>,
    /// Merging CSV output (n,l1)
    #[arg(long)]
    out_merging: Option<String>,
}

#[derive(Default, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    simulate: SimulateSection,
    infer: InferSection,
    price: PriceSection,
    compare: CompareSection,
    diagnose: DiagnoseSection,
}

#[derive(Default, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SimulateSection {
    s0: Option<f64>,
    mu: Option<f64>,
    sigma: Option<f64>,
    t: Option<f64>,
    steps: Option<u64>,
    seed: Option<u64>,
    jump_intensity: Option<f64>,
    jump_support: Option<Vec<f64>>,
    jump_probs: Option<Vec<f64>>,
    out: Option<String>,
}

#[derive(Default, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
struct InferSection {
    data: Option<String>,
    r: Option<f64>,
    prior_mu: Option<String>,
    prior_sigma2: Option<String>,
    draws: Option<usize>,
    burn_in: Option<usize>,
    thin: Option<usize>,
    seed: Option<u64>,
    init_mu: Option<f64>,
    init_sigma2: Option<f64>,
    out: Option<String>,
}

#[derive(Default, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PriceSection {
    data: Option<String>,
    posterior: Option<String>,
    strike: Option<f64>,
    maturity: Option<f64>,
    r: Option<f64>,
    out: Option<String>,
}

#[derive(Default, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CompareSection {
    data: Option<String>,
    n_mc: Option<usize>,
    seed: Option<u64>,
    threads: Option<usize>,
    strike: Option<f64>,
    maturity: Option<f64>,
    draws: Option<usize>,
    burn_in: Option<usize>,
    thin: Option<usize>,
    init_mu: Option<f64>,
    init_sigma2: Option<f64>,
    out: Option<String>,
    models: Vec<ModelSection>,
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    /// "gbm" or "jump"
    kind: String,
    r: f64,
    prior_mu: String,
    prior_sigma2: String,
    prior_prob: f64,
    jump_intensity: Option<f64>,
    jump_support: Option<Vec<f64>>,
    jump_probs: Option<Vec<f64>>,
}

#[derive(Default, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DiagnoseSection {
    data: Option<String>,
    r: Option<f64>,
    prior_mu: Option<String>,
    prior_sigma2: Option<String>,
    checkpoints: Option<Vec<f64>>,
    out_consistency: Option<String>,
    prior_mu_a: Option<String>,
    prior_mu_b: Option<String>,
    merge_sigma2: Option<f64>,
    mu_grid: Option<String>,
    out_merging: Option<String>,
}

// ---------------------------------------------------------------------------
// Output documents
// ---------------------------------------------------------------------------

#[derive(serde::Serialize)]
struct Echo<'a, C: serde::Serialize> {
    command: &'static str,
    config: &'a C,
}

#[derive(serde::Serialize)]
struct SimulateEcho {
    s0: f64,
    mu: f64,
    sigma: f64,
    t: f64,
    steps: u64,
    seed: u64,
    jump_intensity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    jump_support: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    jump_probs: Option<Vec<f64>>,
    out: String,
}

#[derive(serde::Serialize)]
struct InferEcho {
    data: String,
    r: f64,
    mu_prior: MuPrior,
    sigma2_prior: Sigma2Prior,
    gibbs: GibbsConfig,
    out: String,
}

#[derive(serde::Serialize)]
struct InferDoc<'a> {
    command: &'static str,
    config: &'a InferEcho,
    summary: PosteriorSummary,
    draws: &'a PosteriorDraws,
}

#[derive(serde::Serialize)]
struct PriceEcho {
    data: String,
    posterior: String,
    strike: f64,
    maturity: f64,
    valuation_time: f64,
    r: f64,
    payoff_kind: PayoffKind,
    /// seed of the Gibbs run behind the draws
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<String>,
}

#[derive(serde::Serialize)]
struct PriceDoc<'a> {
    command: &'static str,
    config: &'a PriceEcho,
    estimate: PriceEstimate,
}

#[derive(serde::Serialize)]
struct ModelEcho {
    kind: &'static str,
    r: f64,
    mu_prior: MuPrior,
    sigma2_prior: Sigma2Prior,
    prior_prob: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    jump_intensity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    jump_support: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    jump_probs: Option<Vec<f64>>,
}

#[derive(serde::Serialize)]
struct OptionEcho {
    strike: f64,
    maturity: f64,
    valuation_time: f64,
}

#[derive(serde::Serialize)]
struct GibbsBase {
    n_draws: usize,
    burn_in: usize,
    thin: usize,
    init_mu: f64,
    init_sigma2: f64,
}

#[derive(serde::Serialize)]
struct CompareEcho {
    data: String,
    n_mc: usize,
    seed: u64,
    threads: usize,
    models: Vec<ModelEcho>,
    #[serde(skip_serializing_if = "Option::is_none")]
    option: Option<OptionEcho>,
    /// per-model Gibbs settings for the BMA price; model k runs at seed + 1 + k
    #[serde(skip_serializing_if = "Option::is_none")]
    gibbs: Option<GibbsBase>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<String>,
}

#[derive(serde::Serialize)]
struct BmaDoc {
    per_model: Vec<PriceEstimate>,
    price: PriceEstimate,
}

#[derive(serde::Serialize)]
struct CompareDoc<'a> {
    command: &'static str,
    config: &'a CompareEcho,
    comparison: &'a ModelComparison,
    #[serde(skip_serializing_if = "Option::is_none")]
    bma: Option<BmaDoc>,
}

#[derive(serde::Serialize)]
struct GridEcho {
    lo: f64,
    hi: f64,
    n: usize,
    sigma2: f64,
}

#[derive(serde::Serialize)]
struct DiagnoseEcho {
    data: String,
    r: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu_prior: Option<MuPrior>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma2_prior: Option<Sigma2Prior>,
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoints: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out_consistency: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    prior_mu_a: Option<MuPrior>,
    #[serde(skip_serializing_if = "Option::is_none")]
    prior_mu_b: Option<MuPrior>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu_grid: Option<GridEcho>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out_merging: Option<String>,
}

/// Shape of the `infer` JSON that `price` consumes; unknown fields ignored.
#[derive(serde::Deserialize)]
struct PosteriorFile {
    draws: PosteriorDraws,
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// Parse `argv` (including the program name), run the command, and return
/// the process exit code.
pub fn run<I: IntoIterator<Item = String>>(argv: I) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap renders --help/--version through the Err path too
            if e.use_stderr() {
                eprint!("{e}");
                return EXIT_USAGE;
            }
            print!("{e}");
            return EXIT_OK;
        }
    };
    let result = match cli.command {
        Cmd::Simulate(a) => run_simulate(a),
        Cmd::Infer(a) => run_infer(a),
        Cmd::Price(a) => run_price(a),
        Cmd::Compare(a) => run_compare(a),
        Cmd::Diagnose(a) => run_diagnose(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            f.code
        }
    }
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn load_config(path: &Option<String>) -> Result<FileConfig, Failure> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure {
                code: EXIT_DATA,
                msg: format!("cannot read config {p}: {e}"),
            })?;
            toml::from_str(&text)
                .map_err(|e| usage(format!("invalid config {p}: {e}")))
        }
    }
}

fn require<T>(v: Option<T>, flag: &str) -> Result<T, Failure> {
    v.ok_or_else(|| usage(format!("missing {flag} (flag or config entry)")))
}

fn parse_list(s: &str, flag: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(str::trim)
        .map(|x| {
            x.parse::<f64>()
                .map_err(|_| usage(format!("cannot parse `{x}` in {flag}")))
        })
        .collect()
}

fn parse_prior_mu(s: &str) -> Result<MuPrior, Failure> {
    s.parse::<MuPrior>().map_err(Failure::from)
}

fn parse_prior_sigma2(s: &str) -> Result<Sigma2Prior, Failure> {
    s.parse::<Sigma2Prior>().map_err(Failure::from)
}

fn load_path(file: &str) -> Result<PricePath, Failure> {
    let f = fs::File::open(file).map_err(|e| Failure {
        code: EXIT_DATA,
        msg: format!("cannot open {file}: {e}"),
    })?;
    load_price_series(f).map_err(Failure::from)
}

fn write_text(file: &str, text: &str) -> Result<(), Failure> {
    fs::write(file, text).map_err(|e| Failure {
        code: EXIT_DATA,
        msg: format!("cannot write {file}: {e}"),
    })
}

fn echo_config<C: serde::Serialize>(command: &'static str, config: &C) {
    let line = serde_json::to_string(&Echo { command, config })
        .expect("config echo serializes");
    println!("{line}");
}

fn pretty_json<T: serde::Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("document serializes");
    s.push('\n');
    s
}

/// Write to `out` when given, else print to stdout.
fn emit(doc_json: String, out: &Option<String>) -> Result<(), Failure> {
    match out {
        Some(path) => write_text(path, &doc_json),
        None => {
            print!("{doc_json}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn run_simulate(a: SimulateArgs) -> Result<(), Failure> {
    let c = load_config(&a.config)?.simulate;
    let s0 = require(a.s0.or(c.s0), "--s0")?;
    let mu = require(a.mu.or(c.mu), "--mu")?;
    let sigma = require(a.sigma.or(c.sigma), "--sigma")?;
    let t = require(a.t.or(c.t), "--t")?;
    let steps = require(a.steps.or(c.steps), "--steps")?;
    let seed = a.seed.or(c.seed).unwrap_or(0);
    let out = require(a.out.or(c.out), "--out")?;
    let jump_intensity = a.jump_intensity.or(c.jump_intensity).unwrap_or(0.0);
    let jump_support = match &a.jump_support {
        Some(s) => Some(parse_list(s, "--jump-support")?),
        None => c.jump_support,
    };
    let jump_probs = match &a.jump_probs {
        Some(s) => Some(parse_list(s, "--jump-probs")?),
        None => c.jump_probs,
    };

    if steps == 0 {
        return Err(usage("--steps must be at least 1"));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(usage(format!("--t must be a positive horizon, got {t}")));
    }
    let grid: Vec<f64> = (0..=steps).map(|i| t * i as f64 / steps as f64).collect();

    let path = match (&jump_support, &jump_probs) {
        (None, None) if jump_intensity == 0.0 => {
            simulate_gbm(s0, mu, sigma, &grid, seed)?
        }
        (Some(xs), Some(ps)) => {
            let dist = JumpDist::new(xs.clone(), ps.clone())?;
            simulate_jump_diffusion(s0, mu, sigma, jump_intensity, &dist, &grid, seed)?
        }
        _ => {
            return Err(usage(
                "jump simulation needs --jump-intensity, --jump-support and \
                 --jump-probs together",
            ))
        }
    };

    let mut buf = Vec::new();
    path.write_csv(&mut buf).expect("in-memory write");
    write_text(&out, std::str::from_utf8(&buf).expect("ascii csv"))?;

    echo_config(
        "simulate",
        &SimulateEcho {
            s0,
            mu,
            sigma,
            t,
            steps,
            seed,
            jump_intensity,
            jump_support,
            jump_probs,
            out,
        },
    );
    Ok(())
}

fn resolve_gibbs(
    draws: Option<usize>,
    burn_in: Option<usize>,
    thin: Option<usize>,
    seed: u64,
    init_mu: Option<f64>,
    init_sigma2: Option<f64>,
) -> GibbsConfig {
    GibbsConfig {
        n_draws: draws.unwrap_or(5000),
        burn_in: burn_in.unwrap_or(1000),
        thin: thin.unwrap_or(1),
        seed,
        init_mu: init_mu.unwrap_or(0.0),
        init_sigma2: init_sigma2.unwrap_or(0.1),
    }
}

fn run_infer(a: InferArgs) -> Result<(), Failure> {
    let c = load_config(&a.config)?.infer;
    let data = require(a.data.or(c.data), "--data")?;
    let r = require(a.r.or(c.r), "--r")?;
    let mu_prior =
        parse_prior_mu(&a.prior_mu.or(c.prior_mu).unwrap_or_else(|| "flat".into()))?;
    let sigma2_prior = parse_prior_sigma2(
        &a.prior_sigma2.or(c.prior_sigma2).unwrap_or_else(|| "flat".into()),
    )?;
    let seed = a.seed.or(c.seed).unwrap_or(0);
    let gibbs = resolve_gibbs(
        a.draws.or(c.draws),
        a.burn_in.or(c.burn_in),
        a.thin.or(c.thin),
        seed,
        a.init_mu.or(c.init_mu),
        a.init_sigma2.or(c.init_sigma2),
    );
    let out = require(a.out.or(c.out), "--out")?;

    let path = load_path(&data)?;
    let stat = log_return(&path);
    let priors = PriorSpec { mu_prior, sigma2_prior };
    let draws = gibbs_run(&stat, r, &priors, &gibbs)?;
    let summary = posterior_summary(&draws);

    let config = InferEcho { data, r, mu_prior, sigma2_prior, gibbs, out };
    let doc = InferDoc { command: "infer", config: &config, summary, draws: &draws };
    write_text(&config.out, &pretty_json(&doc))?;
    echo_config("infer", &config);
    Ok(())
}

fn run_price(a: PriceArgs) -> Result<(), Failure> {
    let c = load_config(&a.config)?.price;
    let data = require(a.data.or(c.data), "--data")?;
    let posterior = require(a.posterior.or(c.posterior), "--posterior")?;
    let strike = require(a.strike.or(c.strike), "--strike")?;
    let maturity = require(a.maturity.or(c.maturity), "--maturity")?;
    let r = require(a.r.or(c.r), "--r")?;
    let out = a.out.or(c.out);

    let path = load_path(&data)?;
    let text = fs::read_to_string(&posterior).map_err(|e| Failure {
        code: EXIT_DATA,
        msg: format!("cannot read {posterior}: {e}"),
    })?;
    let post: PosteriorFile = serde_json::from_str(&text).map_err(|e| Failure {
        code: EXIT_DATA,
        msg: format!("invalid posterior file {posterior}: {e}"),
    })?;

    let opt = OptionSpec::new(strike, maturity, path.last_time(), PayoffKind::EuropeanCall)?;
    let estimate = price_posterior(&path, &opt, r, &post.draws)?;

    let config = PriceEcho {
        data,
        posterior,
        strike,
        maturity,
        valuation_time: opt.valuation_time(),
        r,
        payoff_kind: opt.payoff_kind(),
        seed: post.draws.config().seed,
        out: out.clone(),
    };
    let doc = PriceDoc { command: "price", config: &config, estimate };
    emit(pretty_json(&doc), &out)?;
    if out.is_some() {
        echo_config("price", &config);
    }
    Ok(())
}

fn build_model(m: &ModelSection) -> Result<(ModelSpec, ModelEcho), Failure> {
    let mu_prior = parse_prior_mu(&m.prior_mu)?;
    let sigma2_prior = parse_prior_sigma2(&m.prior_sigma2)?;
    let priors = PriorSpec { mu_prior, sigma2_prior };
    match m.kind.as_str() {
        "gbm" => {
            if m.jump_intensity.is_some() || m.jump_support.is_some() || m.jump_probs.is_some()
            {
                return Err(usage("gbm model blocks take no jump fields"));
            }
            let spec = ModelSpec::new(ModelKind::Gbm { priors, r: m.r }, m.prior_prob)?;
            let echo = ModelEcho {
                kind: "gbm",
                r: m.r,
                mu_prior,
                sigma2_prior,
                prior_prob: m.prior_prob,
                jump_intensity: None,
                jump_support: None,
                jump_probs: None,
            };
            Ok((spec, echo))
        }
        "jump" => {
            let intensity = m
                .jump_intensity
                .ok_or_else(|| usage("jump model blocks need jump_intensity"))?;
            let support = m
                .jump_support
                .clone()
                .ok_or_else(|| usage("jump model blocks need jump_support"))?;
            let probs = m
                .jump_probs
                .clone()
                .ok_or_else(|| usage("jump model blocks need jump_probs"))?;
            let dist = JumpDist::new(support.clone(), probs.clone())?;
            let spec = ModelSpec::new(
                ModelKind::JumpDiffusion {
                    priors,
                    r: m.r,
                    jump_intensity: intensity,
                    jump_dist: dist,
                },
                m.prior_prob,
            )?;
            let echo = ModelEcho {
                kind: "jump",
                r: m.r,
                mu_prior,
                sigma2_prior,
                prior_prob: m.prior_prob,
                jump_intensity: Some(intensity),
                jump_support: Some(support),
                jump_probs: Some(probs),
            };
            Ok((spec, echo))
        }
        other => Err(usage(format!("unknown model kind `{other}` (gbm or jump)"))),
    }
}

fn resolve_threads(flag: Option<usize>) -> Result<usize, Failure> {
    if let Some(n) = flag {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        return Ok(n);
    }
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(usage(format!("{THREADS_ENV} must be at least 1")));
        }
        return Ok(n);
    }
    Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn run_compare(a: CompareArgs) -> Result<(), Failure> {
    let c = load_config(&a.config)?.compare;
    let data = require(a.data.or(c.data), "--data")?;
    let n_mc = a.n_mc.or(c.n_mc).unwrap_or(10_000);
    let seed = a.seed.or(c.seed).unwrap_or(0);
    let threads = resolve_threads(a.threads.or(c.threads))?;
    let strike = a.strike.or(c.strike);
    let maturity = a.maturity.or(c.maturity);
    let out = a.out.or(c.out);
    if c.models.is_empty() {
        return Err(usage(
            "compare needs at least two [[compare.models]] blocks in the config file",
        ));
    }

    let mut models = Vec::with_capacity(c.models.len());
    let mut echoes = Vec::with_capacity(c.models.len());
    for section in &c.models {
        let (spec, echo) = build_model(section)?;
        models.push(spec);
        echoes.push(echo);
    }

    let path = load_path(&data)?;
    let stat = log_return(&path);
    let comparison = compare_models(&models, &stat, n_mc, seed, threads)?;

    let (option, gibbs_base) = match (strike, maturity) {
        (None, None) => (None, None),
        (Some(k), Some(m)) => {
            let base = GibbsBase {
                n_draws: a.draws.or(c.draws).unwrap_or(5000),
                burn_in: a.burn_in.or(c.burn_in).unwrap_or(1000),
                thin: a.thin.or(c.thin).unwrap_or(1),
                init_mu: a.init_mu.or(c.init_mu).unwrap_or(0.0),
                init_sigma2: a.init_sigma2.or(c.init_sigma2).unwrap_or(0.1),
            };
            (
                Some(OptionSpec::new(k, m, path.last_time(), PayoffKind::EuropeanCall)?),
                Some(base),
            )
        }
        _ => {
            return Err(usage(
                "the BMA price needs --strike and --maturity together",
            ))
        }
    };

    let bma = if let (Some(opt), Some(base)) = (&option, &gibbs_base) {
        let mut per_model = Vec::with_capacity(models.len());
        for (k, model) in models.iter().enumerate() {
            let ModelKind::Gbm { priors, r } = model.kind() else {
                return Err(usage(
                    "the BMA price supports gbm models only; drop --strike or \
                     remove jump models",
                ));
            };
            let cfg = GibbsConfig {
                n_draws: base.n_draws,
                burn_in: base.burn_in,
                thin: base.thin,
                seed: seed.wrapping_add(1 + k as u64),
                init_mu: base.init_mu,
                init_sigma2: base.init_sigma2,
            };
            let draws = gibbs_run(&stat, *r, priors, &cfg)?;
            per_model.push(price_posterior(&path, opt, *r, &draws)?);
        }
        let price = price_model_averaged(&per_model, &comparison.posteriors)?;
        Some(BmaDoc { per_model, price })
    } else {
        None
    };

    let config = CompareEcho {
        data,
        n_mc,
        seed,
        threads,
        models: echoes,
        option: option.as_ref().map(|o| OptionEcho {
            strike: o.strike(),
            maturity: o.maturity(),
            valuation_time: o.valuation_time(),
        }),
        gibbs: gibbs_base,
        out: out.clone(),
    };
    let doc = CompareDoc { command: "compare", config: &config, comparison: &comparison, bma };
    emit(pretty_json(&doc), &out)?;
    if out.is_some() {
        echo_config("compare", &config);
    }
    Ok(())
}

fn run_diagnose(a: DiagnoseArgs) -> Result<(), Failure> {
    let c = load_config(&a.config)?.diagnose;
    let data = require(a.data.or(c.data), "--data")?;
    let r = require(a.r.or(c.r), "--r")?;
    let out_consistency = a.out_consistency.or(c.out_consistency);
    let out_merging = a.out_merging.or(c.out_merging);
    if out_consistency.is_none() && out_merging.is_none() {
        return Err(usage(
            "diagnose needs --out-consistency and/or --out-merging",
        ));
    }
    let path = load_path(&data)?;

    let mut echo = DiagnoseEcho {
        data,
        r,
        mu_prior: None,
        sigma2_prior: None,
        checkpoints: None,
        out_consistency: None,
        prior_mu_a: None,
        prior_mu_b: None,
        mu_grid: None,
        out_merging: None,
    };

    if let Some(out_file) = out_consistency {
        let mu_prior =
            parse_prior_mu(a.prior_mu.or(c.prior_mu).as_deref().unwrap_or("flat"))?;
        let sigma2_prior = parse_prior_sigma2(
            a.prior_sigma2.or(c.prior_sigma2).as_deref().unwrap_or("flat"),
        )?;
        let checkpoints = match &a.checkpoints {
            Some(s) => parse_list(s, "--checkpoints")?,
            None => c
                .checkpoints
                .clone()
                .ok_or_else(|| usage("consistency needs --checkpoints"))?,
        };
        let priors = PriorSpec { mu_prior, sigma2_prior };
        let rows = consistency_diagnostic(&path, r, &priors, &checkpoints)?;
        let mut csv = String::from("t,var_mu,var_sigma2\n");
        for row in &rows {
            csv.push_str(&format!("{},{},{}\n", row.t, row.var_mu, row.var_sigma2));
        }
        write_text(&out_file, &csv)?;
        echo.mu_prior = Some(mu_prior);
        echo.sigma2_prior = Some(sigma2_prior);
        echo.checkpoints = Some(checkpoints);
        echo.out_consistency = Some(out_file);
    }

    if let Some(out_file) = out_merging {
        let prior_a = parse_prior_mu(
            a.prior_mu_a
                .or(c.prior_mu_a)
                .as_deref()
                .ok_or_else(|| usage("merging needs --prior-mu-a"))?,
        )?;
        let prior_b = parse_prior_mu(
            a.prior_mu_b
                .or(c.prior_mu_b)
                .as_deref()
                .ok_or_else(|| usage("merging needs --prior-mu-b"))?,
        )?;
        let sigma2 = require(a.merge_sigma2.or(c.merge_sigma2), "--merge-sigma2")?;
        let grid_spec = require(a.mu_grid.or(c.mu_grid), "--mu-grid")?;
        let parts = parse_list(&grid_spec, "--mu-grid")?;
        if parts.len() != 3 || parts[2].fract() != 0.0 || !(parts[2] >= 2.0) {
            return Err(usage("--mu-grid must be \"lo,hi,n\" with integer n >= 2"));
        }
        let grid = MuGrid::new(parts[0], parts[1], parts[2] as usize, sigma2)?;

        // unit-interval returns: the path must be sampled on an integer grid
        let times = path.times();
        let returns: Vec<f64> = (1..times.len())
            .map(|i| {
                let dt = times[i] - times[i - 1];
                if (dt - 1.0).abs() > 1e-9 {
                    return Err(usage(format!(
                        "merging needs unit-spaced observations; step {i} has \
                         dt = {dt}"
                    )));
                }
                Ok((path.prices()[i] / path.prices()[i - 1]).ln())
            })
            .collect::<Result<_, Failure>>()?;

        let spec_a = PriorSpec { mu_prior: prior_a, sigma2_prior: Sigma2Prior::Flat };
        let spec_b = PriorSpec { mu_prior: prior_b, sigma2_prior: Sigma2Prior::Flat };
        let rows = merging_diagnostic(&returns, r, &spec_a, &spec_b, &grid)?;
        let mut csv = String::from("n,l1\n");
        for row in &rows {
            csv.push_str(&format!("{},{}\n", row.n, row.l1));
        }
        write_text(&out_file, &csv)?;
        echo.prior_mu_a = Some(prior_a);
        echo.prior_mu_b = Some(prior_b);
        echo.mu_grid = Some(GridEcho {
            lo: parts[0],
            hi: parts[1],
            n: parts[2] as usize,
            sigma2,
        });
        echo.out_merging = Some(out_file);
    }

    echo_config("diagnose", &echo);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_parsing() {
        assert_eq!(parse_list("1, 2,3", "--x").unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(parse_list("1,foo", "--x").is_err());
    }

    #[test]
    fn error_mapping_matches_exit_codes() {
        let u: Failure = Error::InvalidInput("x".into()).into();
        assert_eq!(u.code, EXIT_USAGE);
        let d: Failure = Error::Data("x".into()).into();
        assert_eq!(d.code, EXIT_DATA);
        let dr: Failure = Error::DataRow { row: 3, msg: "x".into() }.into();
        assert_eq!(dr.code, EXIT_DATA);
        let n: Failure = Error::Numeric("x".into()).into();
        assert_eq!(n.code, EXIT_NUMERIC);
        let g: Failure = Error::Gibbs { iter: 1, msg: "x".into() }.into();
        assert_eq!(g.code, EXIT_NUMERIC);
        let dm: Failure = Error::Domain("x".into()).into();
        assert_eq!(dm.code, EXIT_NUMERIC);
    }

    #[test]
    fn thread_resolution_prefers_flag() {
        assert_eq!(resolve_threads(Some(3)).unwrap(), 3);
        assert!(resolve_threads(Some(0)).is_err());
    }
}
