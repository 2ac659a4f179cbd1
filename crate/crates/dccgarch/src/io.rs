//! Configuration schema, CSV ingestion and the output writers behind the
//! command-line surface.
//!
//! A fit run writes six files into the output directory:
//! `chain.csv` (one named column per parameter), `summary.json` (posterior
//! summaries, acceptance rates, elapsed seconds), `volatility.csv` and
//! `correlation.csv` (posterior path means with 2.5%/97.5% bands),
//! `acf.csv` and `density.csv` (per-parameter autocorrelations and kernel
//! density estimates). Floats are written with 17 significant digits so a
//! run can be audited bit-for-bit.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{autocorrelation, density_estimate, posterior_paths, summarize};
use crate::dist::Family;
use crate::error::{Error, Result};
use crate::mcmc::{fit, AcceptanceRate, McmcChain, SamplerConfig, SamplerMode};
use crate::model::{simulate_path, ParamVector, ReturnsMatrix};
use crate::prior::{default_priors, PriorSpec};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 12_345;

/// Run configuration mirroring the package's argument and control lists.
/// Unset entries fall back to the documented defaults; command-line flags
/// override file values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub input_path: Option<PathBuf>,
    /// Column names (header required) or 1-based indices.
    pub columns: Option<Vec<String>>,
    /// 1 = skew normal, 2 = skew Student t, 3 = skew GED.
    pub error_dist: u8,
    pub n_sim: usize,
    pub seed: u64,
    /// Defaults to n_sim / 10 when unset.
    pub burn_in: Option<usize>,
    pub thin: usize,
    pub out_dir: PathBuf,
    /// Report the iteration count every 100 iterations.
    pub progress: bool,

    // Initial values; unset entries use the synopsis defaults.
    pub omega_ini: Option<Vec<f64>>,
    pub alpha_ini: Option<Vec<f64>>,
    pub beta_ini: Option<Vec<f64>>,
    pub a_ini: Option<f64>,
    pub b_ini: Option<f64>,
    pub gamma_ini: Option<Vec<f64>>,
    pub tail_ini: Option<f64>,

    // Prior hyper-parameter overrides.
    pub mu_omega: Option<Vec<f64>>,
    pub sigma_omega: Option<Vec<f64>>,
    pub mu_alpha: Option<Vec<f64>>,
    pub sigma_alpha: Option<Vec<f64>>,
    pub mu_beta: Option<Vec<f64>>,
    pub sigma_beta: Option<Vec<f64>>,
    pub mu_a: Option<f64>,
    pub sigma_a: Option<f64>,
    pub mu_b: Option<f64>,
    pub sigma_b: Option<f64>,
    pub mu_gamma: Option<Vec<f64>>,
    pub sigma_gamma: Option<Vec<f64>>,
    pub mu_tail: Option<f64>,
    pub sigma_tail: Option<f64>,

    // Sampler controls.
    /// "auto", "block" or "per-parameter".
    pub sim_alg: Option<String>,
    /// Lower-triangular block proposal factor, row by row.
    pub chol_cov: Option<Vec<Vec<f64>>>,
    /// Per-parameter proposal standard deviations.
    pub sd_sim: Option<Vec<f64>>,
    pub pilot_length: usize,
    pub adapt_interval: usize,

    // Diagnostics controls.
    pub max_path_draws: usize,
    pub density_grid: usize,
    pub acf_max_lag: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            input_path: None,
            columns: None,
            error_dist: 2,
            n_sim: 10_000,
            seed: DEFAULT_SEED,
            burn_in: None,
            thin: 1,
            out_dir: PathBuf::from("out"),
            progress: true,
            omega_ini: None,
            alpha_ini: None,
            beta_ini: None,
            a_ini: None,
            b_ini: None,
            gamma_ini: None,
            tail_ini: None,
            mu_omega: None,
            sigma_omega: None,
            mu_alpha: None,
            sigma_alpha: None,
            mu_beta: None,
            sigma_beta: None,
            mu_a: None,
            sigma_a: None,
            mu_b: None,
            sigma_b: None,
            mu_gamma: None,
            sigma_gamma: None,
            mu_tail: None,
            sigma_tail: None,
            sim_alg: None,
            chol_cov: None,
            sd_sim: None,
            pilot_length: 2_000,
            adapt_interval: 100,
            max_path_draws: 200,
            density_grid: 512,
            acf_max_lag: 50,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::stage("config", format!("{}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::stage("config", format!("{}: {e}", path.display())))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(Error::stage(
                "config",
                format!(
                    "unsupported schema_version {} (expected {})",
                    config.schema_version, SCHEMA_VERSION
                ),
            ));
        }
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn family(&self) -> Result<Family> {
        Family::from_tag(self.error_dist).map_err(|e| Error::stage("config", e))
    }

    fn validate(&self) -> Result<()> {
        if self.n_sim < 1 {
            return Err(Error::stage("config", "n_sim must be >= 1"));
        }
        if self.thin < 1 {
            return Err(Error::stage("config", "thin must be >= 1"));
        }
        let burn_in = self.burn_in.unwrap_or(self.n_sim / 10);
        if burn_in >= self.n_sim {
            return Err(Error::stage(
                "config",
                format!("burn-in {} must be smaller than n_sim {}", burn_in, self.n_sim),
            ));
        }
        self.family()?;
        Ok(())
    }

    /// Initial parameter vector: explicit entries, synopsis defaults otherwise.
    pub fn initial_values(&self, k: usize) -> Result<ParamVector> {
        let family = self.family()?;
        let mut init = ParamVector::default_init(k, family);
        let fixed_len = |name: &str, v: &Option<Vec<f64>>, k: usize| -> Result<Option<Vec<f64>>> {
            match v {
                None => Ok(None),
                Some(values) if values.len() == k => Ok(Some(values.clone())),
                Some(values) => Err(Error::stage(
                    "config",
                    format!("{name} needs {k} entries, got {}", values.len()),
                )),
            }
        };
        if let Some(v) = fixed_len("omega_ini", &self.omega_ini, k)? {
            init.omega = v;
        }
        if let Some(v) = fixed_len("alpha_ini", &self.alpha_ini, k)? {
            init.alpha = v;
        }
        if let Some(v) = fixed_len("beta_ini", &self.beta_ini, k)? {
            init.beta = v;
        }
        if let Some(v) = fixed_len("gamma_ini", &self.gamma_ini, k)? {
            init.gamma = v;
        }
        if let Some(a) = self.a_ini {
            init.a = a;
        }
        if let Some(b) = self.b_ini {
            init.b = b;
        }
        if family.has_tail() {
            if let Some(tail) = self.tail_ini {
                init.tail = Some(tail);
            }
        } else if self.tail_ini.is_some() {
            return Err(Error::stage(
                "config",
                "tail_ini is not used by the skew-normal family",
            ));
        }
        Ok(init)
    }

    /// Prior specification: defaults overridden entry by entry.
    pub fn priors(&self, k: usize) -> Result<PriorSpec> {
        let family = self.family()?;
        let mut priors = default_priors(k, family);
        macro_rules! vec_override {
            ($field:ident) => {
                if let Some(v) = &self.$field {
                    if v.len() != k {
                        return Err(Error::stage(
                            "config",
                            format!("{} needs {k} entries, got {}", stringify!($field), v.len()),
                        ));
                    }
                    priors.$field = v.clone();
                }
            };
        }
        vec_override!(mu_omega);
        vec_override!(sigma_omega);
        vec_override!(mu_alpha);
        vec_override!(sigma_alpha);
        vec_override!(mu_beta);
        vec_override!(sigma_beta);
        vec_override!(mu_gamma);
        vec_override!(sigma_gamma);
        if let Some(v) = self.mu_a {
            priors.mu_a = v;
        }
        if let Some(v) = self.sigma_a {
            priors.sigma_a = v;
        }
        if let Some(v) = self.mu_b {
            priors.mu_b = v;
        }
        if let Some(v) = self.sigma_b {
            priors.sigma_b = v;
        }
        if family.has_tail() {
            if let Some(v) = self.mu_tail {
                priors.mu_tail = Some(v);
            }
            if let Some(v) = self.sigma_tail {
                priors.sigma_tail = Some(v);
            }
        } else if self.mu_tail.is_some() || self.sigma_tail.is_some() {
            return Err(Error::stage(
                "config",
                "tail priors are not used by the skew-normal family",
            ));
        }
        priors.validate(k, family).map_err(|e| Error::stage("config", e))?;
        Ok(priors)
    }

    /// Sampler configuration for a p-dimensional parameter vector.
    pub fn sampler_config(&self, p: usize) -> Result<SamplerConfig> {
        let mode = match self.sim_alg.as_deref() {
            None | Some("auto") | Some("3") => SamplerMode::Auto,
            Some("block") | Some("1") => SamplerMode::Block,
            Some("per-parameter") | Some("2") => SamplerMode::PerParameter,
            Some(other) => {
                return Err(Error::stage(
                    "config",
                    format!("sim_alg must be auto, block or per-parameter, got {other}"),
                ))
            }
        };
        let proposal_chol = match &self.chol_cov {
            None => None,
            Some(rows) => {
                if rows.len() != p || rows.iter().any(|r| r.len() != p) {
                    return Err(Error::stage(
                        "config",
                        format!("chol_cov must be a {p} x {p} matrix"),
                    ));
                }
                Some(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
            }
        };
        Ok(SamplerConfig {
            n_sim: self.n_sim,
            mode,
            proposal_chol,
            proposal_sds: self.sd_sim.clone(),
            pilot_length: self.pilot_length,
            adapt_interval: self.adapt_interval,
            seed: self.seed,
            progress_every: self.progress.then_some(100),
            ..SamplerConfig::default()
        })
    }
}

/// Loads a returns CSV: comma-separated, '.' decimal, optional header row.
///
/// `columns` selects series by header name or 1-based index. Any row with a
/// missing or non-numeric cell aborts the load, naming the file line.
pub fn load_returns(path: &Path, columns: Option<&[String]>) -> Result<ReturnsMatrix> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::stage("load-data", format!("{}: {e}", path.display())))?;
    let mut lines = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() && lineno + 1 == text.lines().count() {
            continue; // trailing blank line
        }
        lines.push((lineno + 1, line));
    }
    if lines.is_empty() {
        return Err(Error::stage("load-data", "file is empty"));
    }

    let split = |line: &str| -> Vec<String> {
        line.split(',').map(|c| c.trim().to_string()).collect()
    };
    let first = split(lines[0].1);
    let has_header = first.iter().any(|c| c.parse::<f64>().is_err());
    let (names, data_lines) = if has_header {
        (first, &lines[1..])
    } else {
        (
            (1..=first.len()).map(|i| format!("V{i}")).collect(),
            &lines[..],
        )
    };
    if data_lines.len() < 2 {
        return Err(Error::stage(
            "load-data",
            format!("need at least 2 data rows, found {}", data_lines.len()),
        ));
    }

    let selected: Vec<usize> = match columns {
        None => (0..names.len()).collect(),
        Some(sel) => {
            let mut idx = Vec::with_capacity(sel.len());
            for c in sel {
                if let Ok(one_based) = c.parse::<usize>() {
                    if one_based == 0 || one_based > names.len() {
                        return Err(Error::stage(
                            "load-data",
                            format!("column index {one_based} out of range 1..={}", names.len()),
                        ));
                    }
                    idx.push(one_based - 1);
                } else if let Some(pos) = names.iter().position(|n| n == c) {
                    idx.push(pos);
                } else {
                    return Err(Error::stage(
                        "load-data",
                        format!("no column named '{c}' (header: {names:?})"),
                    ));
                }
            }
            if idx.is_empty() {
                return Err(Error::stage("load-data", "empty column selection"));
            }
            idx
        }
    };

    let t_len = data_lines.len();
    let mut values = DMatrix::zeros(t_len, selected.len());
    for (row, (lineno, line)) in data_lines.iter().enumerate() {
        let cells = split(line);
        if cells.len() != names.len() {
            return Err(Error::stage(
                "load-data",
                format!(
                    "row {lineno}: expected {} cells, found {}",
                    names.len(),
                    cells.len()
                ),
            ));
        }
        for (j, &col) in selected.iter().enumerate() {
            let cell = &cells[col];
            let v: f64 = cell.parse().map_err(|_| {
                Error::stage(
                    "load-data",
                    format!("row {lineno}: non-numeric cell '{cell}' in column {}", col + 1),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::stage(
                    "load-data",
                    format!("row {lineno}: non-finite value in column {}", col + 1),
                ));
            }
            values[(row, j)] = v;
        }
    }
    let selected_names = selected.iter().map(|&i| names[i].clone()).collect();
    ReturnsMatrix::new(values, selected_names).map_err(|e| Error::stage("load-data", e))
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

struct OutputTracker {
    written: Vec<PathBuf>,
}

impl OutputTracker {
    fn write(&mut self, path: &Path, content: &str) -> Result<()> {
        let mut file = fs::File::create(path)
            .map_err(|e| Error::stage("write-output", format!("{}: {e}", path.display())))?;
        self.written.push(path.to_path_buf());
        file.write_all(content.as_bytes())
            .map_err(|e| Error::stage("write-output", format!("{}: {e}", path.display())))
    }

    fn cleanup(&self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
    }
}

#[derive(Debug, Serialize)]
struct SummaryFile {
    schema_version: u32,
    family: &'static str,
    n_sim: usize,
    burn_in: usize,
    thin: usize,
    retained: usize,
    elapsed_seconds: f64,
    acceptance_kind: &'static str,
    acceptance: Vec<f64>,
    proposal_source: Option<String>,
    parameters: Vec<crate::diagnostics::ParamSummary>,
}

/// Artifacts of a completed fit run.
pub struct FitArtifacts {
    pub chain: McmcChain,
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// End-to-end fit: load data, assemble priors and initial values, sample,
/// summarize and write every output file. On error all partial outputs are
/// removed.
pub fn run_fit(config: &RunConfig) -> Result<FitArtifacts> {
    config.validate()?;
    let input = config
        .input_path
        .as_ref()
        .ok_or_else(|| Error::stage("config", "no input path given"))?;
    let data = load_returns(input, config.columns.as_deref())?;
    let k = data.dim();
    let priors = config.priors(k)?;
    let init = config.initial_values(k)?;
    let sampler = config.sampler_config(init.n_params())?;

    let chain = fit(&data, &priors, &init, &sampler).map_err(|e| Error::stage("sampling", e))?;

    let burn_in = config.burn_in.unwrap_or(config.n_sim / 10);
    let summary =
        summarize(&chain, burn_in, config.thin).map_err(|e| Error::stage("diagnostics", e))?;
    let paths = posterior_paths(&chain, &data, burn_in, config.thin, config.max_path_draws)
        .map_err(|e| Error::stage("diagnostics", e))?;

    let retained = chain
        .retained(burn_in, config.thin)
        .map_err(|e| Error::stage("diagnostics", e))?;
    let m = retained.nrows();
    let max_lag = config.acf_max_lag.min(m.saturating_sub(1));
    let mut acfs = Vec::with_capacity(chain.n_params());
    let mut densities = Vec::with_capacity(chain.n_params());
    for j in 0..chain.n_params() {
        let col: Vec<f64> = retained.column(j).iter().copied().collect();
        // Degenerate (stuck) columns would make the ACF/KDE error out; a
        // flat vector is recorded instead so the run still completes.
        let acf = autocorrelation(&col, max_lag).unwrap_or_else(|_| vec![1.0; max_lag + 1]);
        acfs.push(acf);
        let kde = density_estimate(&col, config.density_grid).unwrap_or_else(|_| {
            (vec![col[0]; config.density_grid], vec![0.0; config.density_grid])
        });
        densities.push(kde);
    }

    fs::create_dir_all(&config.out_dir)
        .map_err(|e| Error::stage("write-output", format!("{}: {e}", config.out_dir.display())))?;
    let mut tracker = OutputTracker { written: Vec::new() };
    let result = write_outputs(
        config,
        &data,
        &chain,
        &summary,
        &paths,
        &acfs,
        &densities,
        burn_in,
        &mut tracker,
    );
    match result {
        Ok(files) => Ok(FitArtifacts {
            chain,
            out_dir: config.out_dir.clone(),
            files,
        }),
        Err(e) => {
            tracker.cleanup();
            Err(e)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn write_outputs(
    config: &RunConfig,
    data: &ReturnsMatrix,
    chain: &McmcChain,
    summary: &crate::diagnostics::PosteriorSummary,
    paths: &crate::diagnostics::PosteriorPaths,
    acfs: &[Vec<f64>],
    densities: &[(Vec<f64>, Vec<f64>)],
    burn_in: usize,
    tracker: &mut OutputTracker,
) -> Result<Vec<PathBuf>> {
    let out = &config.out_dir;
    let family = config.family()?;

    // chain.csv
    let mut text = chain.param_names.join(",");
    text.push('\n');
    for t in 0..chain.n_draws() {
        let row: Vec<String> = (0..chain.n_params())
            .map(|j| fmt(chain.draws[(t, j)]))
            .collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    tracker.write(&out.join("chain.csv"), &text)?;

    // summary.json
    let summary_file = SummaryFile {
        schema_version: SCHEMA_VERSION,
        family: family.label(),
        n_sim: chain.n_draws(),
        burn_in,
        thin: config.thin,
        retained: summary.retained,
        elapsed_seconds: chain.elapsed,
        acceptance_kind: match chain.accept {
            AcceptanceRate::Block(_) => "block",
            AcceptanceRate::PerParameter(_) => "per-parameter",
        },
        acceptance: summary.acceptance.clone(),
        proposal_source: chain
            .phase_log
            .proposal_source
            .map(|s| format!("{s:?}")),
        parameters: summary.parameters.clone(),
    };
    let json = serde_json::to_string_pretty(&summary_file)
        .map_err(|e| Error::stage("write-output", e))?;
    tracker.write(&out.join("summary.json"), &json)?;

    // volatility.csv
    let names = data.series_names();
    let mut header = vec!["t".to_string()];
    for n in names {
        header.push(format!("{n}_mean"));
        header.push(format!("{n}_lo"));
        header.push(format!("{n}_hi"));
    }
    let mut text = header.join(",");
    text.push('\n');
    for t in 0..data.t_len() {
        let mut row = vec![(t + 1).to_string()];
        for i in 0..data.dim() {
            row.push(fmt(paths.h_mean[(t, i)]));
            row.push(fmt(paths.h_lo[(t, i)]));
            row.push(fmt(paths.h_hi[(t, i)]));
        }
        text.push_str(&row.join(","));
        text.push('\n');
    }
    tracker.write(&out.join("volatility.csv"), &text)?;

    // correlation.csv (header-only t column when k = 1)
    let mut header = vec!["t".to_string()];
    for i in 0..data.dim() {
        for j in (i + 1)..data.dim() {
            let pair = format!("{}_{}", names[i], names[j]);
            header.push(format!("rho_{pair}_mean"));
            header.push(format!("rho_{pair}_lo"));
            header.push(format!("rho_{pair}_hi"));
        }
    }
    let mut text = header.join(",");
    text.push('\n');
    for t in 0..data.t_len() {
        let mut row = vec![(t + 1).to_string()];
        for p in 0..paths.corr_mean.ncols() {
            row.push(fmt(paths.corr_mean[(t, p)]));
            row.push(fmt(paths.corr_lo[(t, p)]));
            row.push(fmt(paths.corr_hi[(t, p)]));
        }
        text.push_str(&row.join(","));
        text.push('\n');
    }
    tracker.write(&out.join("correlation.csv"), &text)?;

    // acf.csv
    let mut text = String::from("lag,");
    text.push_str(&chain.param_names.join(","));
    text.push('\n');
    let max_lag = acfs.first().map_or(0, |a| a.len());
    for lag in 0..max_lag {
        let mut row = vec![lag.to_string()];
        for a in acfs {
            row.push(fmt(a[lag]));
        }
        text.push_str(&row.join(","));
        text.push('\n');
    }
    tracker.write(&out.join("acf.csv"), &text)?;

    // density.csv
    let mut header = Vec::new();
    for n in &chain.param_names {
        header.push(format!("{n}_x"));
        header.push(format!("{n}_density"));
    }
    let mut text = header.join(",");
    text.push('\n');
    for g in 0..config.density_grid {
        let mut row = Vec::with_capacity(2 * densities.len());
        for (xs, ds) in densities {
            row.push(fmt(xs[g]));
            row.push(fmt(ds[g]));
        }
        text.push_str(&row.join(","));
        text.push('\n');
    }
    tracker.write(&out.join("density.csv"), &text)?;

    Ok(tracker.written.clone())
}

/// Writes a simulated path as CSV plus a sidecar JSON holding the
/// generating parameters in fit-config form (so it round-trips through the
/// config loader).
pub fn run_simulate(
    params: &ParamVector,
    r_bar: Option<&DMatrix<f64>>,
    t_len: usize,
    seed: u64,
    out_path: &Path,
) -> Result<PathBuf> {
    params.validate().map_err(|e| Error::stage("config", e))?;
    let data = simulate_path(params, r_bar, t_len, seed).map_err(|e| Error::stage("simulate", e))?;

    let mut text = data.series_names().join(",");
    text.push('\n');
    for t in 0..data.t_len() {
        let row: Vec<String> = (0..data.dim()).map(|i| fmt(data.values()[(t, i)])).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    if let Some(dir) = out_path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)
                .map_err(|e| Error::stage("write-output", format!("{}: {e}", dir.display())))?;
        }
    }
    fs::write(out_path, text)
        .map_err(|e| Error::stage("write-output", format!("{}: {e}", out_path.display())))?;

    let sidecar = RunConfig {
        input_path: Some(out_path.to_path_buf()),
        error_dist: params.family.tag(),
        seed,
        omega_ini: Some(params.omega.clone()),
        alpha_ini: Some(params.alpha.clone()),
        beta_ini: Some(params.beta.clone()),
        a_ini: Some(params.a),
        b_ini: Some(params.b),
        gamma_ini: Some(params.gamma.clone()),
        tail_ini: params.tail,
        ..RunConfig::default()
    };
    let sidecar_path = out_path.with_extension("params.json");
    fs::write(&sidecar_path, sidecar.to_json())
        .map_err(|e| Error::stage("write-output", format!("{}: {e}", sidecar_path.display())))?;
    Ok(sidecar_path)
}
