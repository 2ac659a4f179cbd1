//! Thin command-line front end: `fit` estimates the model on a returns CSV,
//! `simulate` writes a synthetic path plus its generating-parameter sidecar.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use dccgarch::dist::Family;
use dccgarch::io::{run_fit, run_simulate, RunConfig, DEFAULT_SEED};
use dccgarch::model::ParamVector;

#[derive(Parser)]
#[command(
    name = "dccgarch",
    version,
    about = "Bayesian DCC-GARCH(1,1) estimation with skewed heavy-tailed errors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the model on a CSV of zero-mean log-returns.
    Fit(FitArgs),
    /// Simulate a synthetic return path from given parameters.
    Simulate(SimArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV (comma-separated, '.' decimal, optional header row).
    #[arg(long)]
    input: Option<PathBuf>,
    /// JSON config file; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Columns to use, by header name or 1-based index.
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<String>>,
    /// Error distribution: 1 = skew normal, 2 = skew t, 3 = skew GED.
    #[arg(long, value_name = "1|2|3")]
    error_dist: Option<u8>,
    /// Chain length.
    #[arg(long)]
    n_sim: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Draws dropped before summaries (default: n_sim / 10).
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Silence the per-100-iterations progress counter.
    #[arg(long)]
    quiet: bool,

    // Initial values.
    #[arg(long, value_delimiter = ',')]
    omega_init: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    alpha_init: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    beta_init: Option<Vec<f64>>,
    #[arg(long)]
    a_init: Option<f64>,
    #[arg(long)]
    b_init: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    gamma_init: Option<Vec<f64>>,
    #[arg(long)]
    tail_init: Option<f64>,

    // Prior hyper-parameters.
    #[arg(long, value_delimiter = ',')]
    mu_omega: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    sigma_omega: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    mu_alpha: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    sigma_alpha: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    mu_beta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    sigma_beta: Option<Vec<f64>>,
    #[arg(long)]
    mu_a: Option<f64>,
    #[arg(long)]
    sigma_a: Option<f64>,
    #[arg(long)]
    mu_b: Option<f64>,
    #[arg(long)]
    sigma_b: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    mu_gamma: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    sigma_gamma: Option<Vec<f64>>,
    #[arg(long)]
    mu_tail: Option<f64>,
    #[arg(long)]
    sigma_tail: Option<f64>,

    // Sampler controls.
    /// Proposal construction: auto, block (needs chol_cov in the config
    /// file) or per-parameter (needs --proposal-sds).
    #[arg(long)]
    mode: Option<String>,
    #[arg(long, value_delimiter = ',')]
    proposal_sds: Option<Vec<f64>>,
    #[arg(long)]
    pilot_length: Option<usize>,
    #[arg(long)]
    adapt_interval: Option<usize>,
}

#[derive(Args)]
struct SimArgs {
    /// Number of observations.
    #[arg(long)]
    t_len: usize,
    #[arg(long, value_delimiter = ',')]
    omega: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    beta: Vec<f64>,
    #[arg(long)]
    a: f64,
    #[arg(long)]
    b: f64,
    #[arg(long, value_delimiter = ',')]
    gamma: Vec<f64>,
    #[arg(long)]
    tail: Option<f64>,
    /// Error distribution: 1 = skew normal, 2 = skew t, 3 = skew GED.
    #[arg(long, value_name = "1|2|3", default_value_t = 1)]
    error_dist: u8,
    /// Upper-triangle off-diagonal entries of the unconditional correlation
    /// target, row by row; defaults to the identity.
    #[arg(long, value_delimiter = ',')]
    corr: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output CSV path (a `<name>.params.json` sidecar is written next to it).
    #[arg(long)]
    out: PathBuf,
}

fn build_fit_config(args: FitArgs) -> Result<RunConfig, dccgarch::Error> {
    let mut config = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = args.input {
        config.input_path = Some(v);
    }
    if let Some(v) = args.columns {
        config.columns = Some(v);
    }
    if let Some(v) = args.error_dist {
        config.error_dist = v;
    }
    if let Some(v) = args.n_sim {
        config.n_sim = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.burn_in {
        config.burn_in = Some(v);
    }
    if let Some(v) = args.thin {
        config.thin = v;
    }
    if let Some(v) = args.out_dir {
        config.out_dir = v;
    }
    if args.quiet {
        config.progress = false;
    }
    if let Some(v) = args.omega_init {
        config.omega_ini = Some(v);
    }
    if let Some(v) = args.alpha_init {
        config.alpha_ini = Some(v);
    }
    if let Some(v) = args.beta_init {
        config.beta_ini = Some(v);
    }
    if let Some(v) = args.a_init {
        config.a_ini = Some(v);
    }
    if let Some(v) = args.b_init {
        config.b_ini = Some(v);
    }
    if let Some(v) = args.gamma_init {
        config.gamma_ini = Some(v);
    }
    if let Some(v) = args.tail_init {
        config.tail_ini = Some(v);
    }
    if let Some(v) = args.mu_omega {
        config.mu_omega = Some(v);
    }
    if let Some(v) = args.sigma_omega {
        config.sigma_omega = Some(v);
    }
    if let Some(v) = args.mu_alpha {
        config.mu_alpha = Some(v);
    }
    if let Some(v) = args.sigma_alpha {
        config.sigma_alpha = Some(v);
    }
    if let Some(v) = args.mu_beta {
        config.mu_beta = Some(v);
    }
    if let Some(v) = args.sigma_beta {
        config.sigma_beta = Some(v);
    }
    if let Some(v) = args.mu_a {
        config.mu_a = Some(v);
    }
    if let Some(v) = args.sigma_a {
        config.sigma_a = Some(v);
    }
    if let Some(v) = args.mu_b {
        config.mu_b = Some(v);
    }
    if let Some(v) = args.sigma_b {
        config.sigma_b = Some(v);
    }
    if let Some(v) = args.mu_gamma {
        config.mu_gamma = Some(v);
    }
    if let Some(v) = args.sigma_gamma {
        config.sigma_gamma = Some(v);
    }
    if let Some(v) = args.mu_tail {
        config.mu_tail = Some(v);
    }
    if let Some(v) = args.sigma_tail {
        config.sigma_tail = Some(v);
    }
    if let Some(v) = args.mode {
        config.sim_alg = Some(v);
    }
    if let Some(v) = args.proposal_sds {
        config.sd_sim = Some(v);
    }
    if let Some(v) = args.pilot_length {
        config.pilot_length = v;
    }
    if let Some(v) = args.adapt_interval {
        config.adapt_interval = v;
    }
    Ok(config)
}

fn corr_target(k: usize, upper: &[f64]) -> Result<DMatrix<f64>, dccgarch::Error> {
    let expected = k * (k - 1) / 2;
    if upper.len() != expected {
        return Err(dccgarch::Error::InvalidInput(format!(
            "--corr needs {expected} entries for k = {k}, got {}",
            upper.len()
        )));
    }
    let mut r = DMatrix::identity(k, k);
    let mut idx = 0;
    for i in 0..k {
        for j in (i + 1)..k {
            r[(i, j)] = upper[idx];
            r[(j, i)] = upper[idx];
            idx += 1;
        }
    }
    Ok(r)
}

fn run(cli: Cli) -> Result<(), dccgarch::Error> {
    match cli.command {
        Command::Fit(args) => {
            let config = build_fit_config(args)?;
            let artifacts = run_fit(&config)?;
            println!(
                "wrote {} files to {} (acceptance {:.3}, {:.1}s)",
                artifacts.files.len(),
                artifacts.out_dir.display(),
                artifacts.chain.accept.overall(),
                artifacts.chain.elapsed
            );
            Ok(())
        }
        Command::Simulate(args) => {
            let family = Family::from_tag(args.error_dist)?;
            let k = args.omega.len();
            let params = ParamVector {
                omega: args.omega.clone(),
                alpha: args.alpha.clone(),
                beta: args.beta.clone(),
                a: args.a,
                b: args.b,
                gamma: args.gamma.clone(),
                tail: args.tail,
                family,
            };
            let r_bar = match &args.corr {
                Some(upper) => Some(corr_target(k, upper)?),
                None => None,
            };
            let sidecar = run_simulate(&params, r_bar.as_ref(), args.t_len, args.seed, &args.out)?;
            println!(
                "wrote {} and {}",
                args.out.display(),
                sidecar.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
