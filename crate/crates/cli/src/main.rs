mod config;
mod error;
mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bossamp::experiments::{
    extract_contour, run_nmse_sweep, run_phase_transition, run_support_phase_transition, uniform_axis, write_contour_csv,
    write_csv, Algorithm, DetectRule, Detector, GridConfig, NmseConfig, SweepResult, RateRow, VERSION,
};
use bossamp::instance_file;
use bossamp::model::{generate_instance, nmse, NoiseSpec, SignalModel};
use bossamp::support::support_metrics;
use bossamp::validation::{oracle_check, validate_denoiser, validate_denoiser_with, OracleConfig};
use bossamp::{Error, LikelihoodVariant, PartVariance, ProblemInstance, RecoverySettings};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::FileConfig;
use crate::error::CliError;
use crate::output::{contour_path, write_atomic};

/// Compressed-sensing recovery of complex Bernoulli-Gaussian signals with
/// AMP, cBAMP and cBOSSAMP, plus the Monte-Carlo sweeps built on them.
///
/// Exit status: 0 success, 1 usage or config error, 2 validation failure,
/// 3 I/O error.
#[derive(Debug, Parser)]
#[command(name = "bossamp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Recover one instance, read from a file or generated from a seed.
    Recover(RecoverArgs),
    /// Recovery phase transition over the (M/N, K/M) grid.
    PhaseTransition(GridArgs),
    /// Support-detection phase transition over the (M/N, K/M) grid.
    SupportPt(SupportArgs),
    /// NMSE against SNR.
    NmseSweep(NmseArgs),
    /// Check the closed-form denoiser against quadrature and the algorithms
    /// against the exact MMSE oracle.
    ValidateDenoiser(ValidateArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScaleArgs {
    /// Full-size runs (N = 1000; 200 trials per grid cell, 1000 per NMSE point).
    #[arg(long, conflicts_with = "desk_scale")]
    paper_scale: bool,
    /// Desk-sized runs (the default).
    #[arg(long)]
    desk_scale: bool,
}

#[derive(Debug, Args)]
struct SettingsArgs {
    #[arg(long)]
    t_max: Option<usize>,
    /// Relative residual change that stops the iteration.
    #[arg(long)]
    eps_tol: Option<f64>,
    /// β pairing in the cBOSSAMP likelihood: own-beta or printed-cross-beta.
    #[arg(long)]
    likelihood_variant: Option<LikelihoodVariant>,
    /// Signal variance in the cBOSSAMP likelihood: half (σ_x²/2) or full (σ_x²).
    #[arg(long)]
    part_variance: Option<PartVariance>,
    /// Freeze γ at the prior in cBOSSAMP (reduces it to cBAMP).
    #[arg(long)]
    no_exchange: bool,
}

impl SettingsArgs {
    fn resolve(&self, file: &FileConfig) -> Result<RecoverySettings, CliError> {
        let mut s = RecoverySettings::default();
        file.settings.apply(&mut s)?;
        if let Some(v) = self.t_max {
            s.t_max = v;
        }
        if let Some(v) = self.eps_tol {
            s.eps_tol = v;
        }
        if let Some(v) = self.likelihood_variant {
            s.likelihood_variant = v;
        }
        if let Some(v) = self.part_variance {
            s.part_variance = v;
        }
        if self.no_exchange {
            s.exchange = false;
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DetectArg {
    None,
    Prior,
    Em,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SignalArg {
    ExactK,
    Bernoulli,
}

#[derive(Debug, Args)]
struct RecoverArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    settings: SettingsArgs,
    /// Instance file to recover; otherwise one is generated.
    #[arg(long, conflicts_with_all = ["m", "n", "snr_db", "signal", "sigma_x2"])]
    instance: Option<PathBuf>,
    /// Measurements of a generated instance.
    #[arg(long)]
    m: Option<usize>,
    /// Length of a generated instance.
    #[arg(long)]
    n: Option<usize>,
    /// Sparsity: nonzeros of a generated instance, and the K in AMP's λ heuristic.
    #[arg(long)]
    k: Option<usize>,
    /// Complex signal variance of a generated instance.
    #[arg(long)]
    sigma_x2: Option<f64>,
    /// SNR in dB of a generated instance; noiseless when absent.
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long, value_enum)]
    signal: Option<SignalArg>,
    #[arg(long, default_value = "cbossamp")]
    algo: Algorithm,
    /// AMP threshold multiplier; overrides the heuristic from K.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum, default_value = "none")]
    detect: DetectArg,
    /// Also write the (generated) instance to this file.
    #[arg(long)]
    save_instance: Option<PathBuf>,
    /// Result CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    scale: ScaleArgs,
    #[command(flatten)]
    settings: SettingsArgs,
    #[arg(long)]
    n: Option<usize>,
    /// Trials per grid cell.
    #[arg(long)]
    trials: Option<usize>,
    /// Points per grid axis.
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    grid_lo: Option<f64>,
    #[arg(long)]
    grid_hi: Option<f64>,
    /// Success threshold on NMSE.
    #[arg(long)]
    threshold: Option<f64>,
    /// Success-rate level of the contour.
    #[arg(long)]
    level: Option<f64>,
    /// Comma-separated algorithms.
    #[arg(long, value_delimiter = ',')]
    algos: Option<Vec<Algorithm>>,
    /// Rate CSV path.
    #[arg(long, default_value = "phase_transition.csv")]
    out: PathBuf,
    /// Contour CSV path (default: next to --out with a .contour.csv suffix).
    #[arg(long)]
    contour_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SupportArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Comma-separated detectors out of cbamp+em, cbossamp+em, cbossamp+prior.
    #[arg(long, value_delimiter = ',')]
    detectors: Option<Vec<Detector>>,
}

#[derive(Debug, Args)]
struct NmseArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    scale: ScaleArgs,
    #[command(flatten)]
    settings: SettingsArgs,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated measurement counts.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    /// Comma-separated SNR values in dB (converted to linear internally).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_db: Option<Vec<f64>>,
    /// Trials per (M, SNR) point.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    algos: Option<Vec<Algorithm>>,
    #[arg(long, default_value = "nmse_sweep.csv")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    settings: SettingsArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per noise setting in the exact MMSE comparison.
    #[arg(long, default_value_t = 500)]
    oracle_trials: usize,
    /// Skip the exact MMSE comparison.
    #[arg(long)]
    skip_oracle: bool,
    /// Grid CSV path; not written when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Test fixture: validate a deliberately wrong closed form.
    #[arg(long, hide = true)]
    inject_fault: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Recover(a) => cmd_recover(a),
        Command::PhaseTransition(a) => cmd_phase_transition(a),
        Command::SupportPt(a) => cmd_support(a),
        Command::NmseSweep(a) => cmd_nmse(a),
        Command::ValidateDenoiser(a) => cmd_validate(a),
    }
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(CliError::Usage("--workers must be at least 1".into())),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {w} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn parse_list<T>(items: &[String]) -> Result<Vec<T>, CliError>
where
    T: std::str::FromStr<Err = Error>,
{
    items.iter().map(|s| s.parse::<T>().map_err(CliError::from)).collect()
}

fn load_instance(a: &RecoverArgs, file: &FileConfig) -> Result<(ProblemInstance, String), CliError> {
    if let Some(path) = &a.instance {
        let text = output::read_to_string(path)?;
        let inst = instance_file::from_text(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        return Ok((inst, format!("instance={}", path.display())));
    }
    let (m, n, k) = match (a.m, a.n, a.k) {
        (Some(m), Some(n), Some(k)) => (m, n, k),
        _ => {
            return Err(CliError::Usage(
                "recover needs --instance or all of --m, --n and --k".into(),
            ))
        }
    };
    let seed = a.common.seed.or(file.seed).unwrap_or(0);
    let sigma_x2 = a.sigma_x2.unwrap_or(1.0);
    let noise = a.snr_db.map(NoiseSpec::SnrDb).unwrap_or(NoiseSpec::Noiseless);
    let signal = match a.signal.unwrap_or(SignalArg::ExactK) {
        SignalArg::ExactK => SignalModel::ExactK,
        SignalArg::Bernoulli => SignalModel::Bernoulli,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inst = generate_instance(m, n, k, sigma_x2, noise, signal, &mut rng)?;
    inst.seed = Some(seed);
    let noise_echo = match a.snr_db {
        Some(db) => format!("snr_db={db}"),
        None => "noiseless".to_string(),
    };
    let signal_echo = if signal == SignalModel::ExactK { "exact-k" } else { "bernoulli" };
    Ok((
        inst,
        format!("generated m={m} n={n} k={k} sigma_x2={sigma_x2} {noise_echo} signal={signal_echo}"),
    ))
}

fn cmd_recover(a: RecoverArgs) -> Result<(), CliError> {
    let file = config::load(a.common.config.as_deref())?;
    let settings = a.settings.resolve(&file)?;
    let lambda = match (a.algo, a.lambda, a.k) {
        (Algorithm::Amp, None, None) => {
            return Err(CliError::Usage(
                "--algo amp needs --lambda or --k for the threshold heuristic".into(),
            ))
        }
        (_, Some(l), _) => Some(l),
        (_, None, Some(k)) => Some(bossamp::amp::lambda_heuristic(k)?),
        _ => None,
    };
    let rule = match a.detect {
        DetectArg::None => None,
        DetectArg::Prior => Some(DetectRule::Prior),
        DetectArg::Em => Some(DetectRule::Em),
    };
    if let Some(rule) = rule {
        let ok = matches!(
            (a.algo, rule),
            (Algorithm::Cbossamp, _) | (Algorithm::Cbamp, DetectRule::Em)
        );
        if !ok {
            return Err(CliError::Usage(format!(
                "--detect {} is not available for {}",
                rule.name(),
                a.algo
            )));
        }
    }
    let (inst, source) = load_instance(&a, &file)?;
    if let Some(path) = &a.save_instance {
        write_atomic(path, instance_file::to_text(&inst).as_bytes())?;
    }

    let k_true = inst.x_true.support().len();
    let mut fields: Vec<String> = vec![
        a.algo.name().into(),
        inst.m().to_string(),
        inst.n().to_string(),
        k_true.to_string(),
    ];
    match a.algo.recover(&inst.a, &inst.y, &inst.prior, &settings, lambda) {
        Ok(out) => {
            let e = nmse(&out.x_hat, &inst.x_true).ok();
            fields.push(e.map(|v| v.to_string()).unwrap_or_default());
            fields.push(e.map(|v| bossamp::model::linear_to_db(v).to_string()).unwrap_or_default());
            fields.push(out.iterations().to_string());
            fields.push(out.converged().to_string());
            fields.push(out.diverged().to_string());
            match rule {
                Some(rule) => {
                    let s = bossamp::experiments::detect_support(rule, a.algo, &out, &inst.prior)?;
                    let sm = support_metrics(&inst.x_true, &s)?;
                    fields.push(rule.name().into());
                    fields.push(sm.exact_match.to_string());
                    fields.push(sm.false_positives.to_string());
                    fields.push(sm.false_negatives.to_string());
                }
                None => fields.extend(["none".to_string(), String::new(), String::new(), String::new()]),
            }
        }
        Err(Error::NonFinite { iteration, .. }) => {
            fields.extend([
                String::new(),
                String::new(),
                iteration.to_string(),
                "false".into(),
                "true".into(),
                rule.map(|r| r.name()).unwrap_or("none").into(),
                String::new(),
                String::new(),
                String::new(),
            ]);
        }
        Err(e) => return Err(e.into()),
    }

    let mut buf = Vec::new();
    writeln!(
        buf,
        "# bossamp {VERSION} recover seed={} {source} {}",
        inst.seed.map(|s| s.to_string()).unwrap_or_else(|| "none".into()),
        settings_echo(&settings, lambda)
    )?;
    writeln!(
        buf,
        "algorithm,m,n,k,nmse,nmse_db,iterations,converged,diverged,detector,exact_match,false_positives,false_negatives"
    )?;
    writeln!(buf, "{}", fields.join(","))?;
    match &a.out {
        Some(path) => write_atomic(path, &buf)?,
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}

fn settings_echo(s: &RecoverySettings, lambda: Option<f64>) -> String {
    format!(
        "t_max={} eps_tol={} likelihood_variant={} part_variance={} exchange={} lambda={}",
        s.t_max,
        s.eps_tol,
        s.likelihood_variant.name(),
        s.part_variance.name(),
        s.exchange,
        lambda.map(|l| l.to_string()).unwrap_or_else(|| "none".into())
    )
}

/// Preset, then config file, then flags.
fn grid_config(a: &GridArgs, file: &FileConfig) -> Result<GridConfig, CliError> {
    let mut cfg = if a.scale.paper_scale { GridConfig::paper() } else { GridConfig::desk() };
    let g = &file.grid;
    cfg.n = a.n.or(g.n).unwrap_or(cfg.n);
    cfg.trials = a.trials.or(g.trials).unwrap_or(cfg.trials);
    cfg.seed = a.common.seed.or(file.seed).unwrap_or(cfg.seed);
    cfg.success_threshold = a.threshold.or(g.threshold).unwrap_or(cfg.success_threshold);
    let points = a.grid_points.or(g.points).unwrap_or(19);
    let lo = a.grid_lo.or(g.lo).unwrap_or(0.05);
    let hi = a.grid_hi.or(g.hi).unwrap_or(0.95);
    if points == 0 || !(lo <= hi) {
        return Err(CliError::Usage(format!(
            "invalid grid: {points} points over [{lo}, {hi}]"
        )));
    }
    cfg.mn_axis = uniform_axis(lo, hi, points);
    cfg.km_axis = uniform_axis(lo, hi, points);
    if let Some(algos) = &a.algos {
        cfg.algorithms = algos.clone();
    } else if let Some(list) = &g.algorithms {
        cfg.algorithms = parse_list(list)?;
    }
    cfg.settings = a.settings.resolve(file)?;
    cfg.validate()?;
    Ok(cfg)
}

fn write_rate_outputs(
    result: &SweepResult<RateRow>,
    out: &Path,
    contour_out: Option<&Path>,
    level: f64,
) -> Result<(), CliError> {
    let mut buf = Vec::new();
    write_csv(result, &mut buf)?;
    let contour = extract_contour(result, level)?;
    let mut cbuf = Vec::new();
    write_contour_csv(result, level, &contour, &mut cbuf)?;
    let cpath = contour_out.map(Path::to_path_buf).unwrap_or_else(|| contour_path(out));
    write_atomic(out, &buf)?;
    write_atomic(&cpath, &cbuf)?;
    eprintln!(
        "wrote {} rows to {} and {} contour points to {}",
        result.rows.len(),
        out.display(),
        contour.len(),
        cpath.display()
    );
    Ok(())
}

fn level_of(a: &GridArgs, file: &FileConfig) -> Result<f64, CliError> {
    let level = a.level.or(file.grid.level).unwrap_or(0.5);
    if !(0.0..=1.0).contains(&level) {
        return Err(CliError::Usage(format!("--level must lie in [0, 1], got {level}")));
    }
    Ok(level)
}

fn cmd_phase_transition(a: GridArgs) -> Result<(), CliError> {
    let file = config::load(a.common.config.as_deref())?;
    let cfg = grid_config(&a, &file)?;
    let level = level_of(&a, &file)?;
    let workers = a.common.workers.or(file.workers);
    let result = with_workers(workers, || run_phase_transition(&cfg))??;
    write_rate_outputs(&result, &a.out, a.contour_out.as_deref(), level)
}

fn cmd_support(a: SupportArgs) -> Result<(), CliError> {
    let g = &a.grid;
    let file = config::load(g.common.config.as_deref())?;
    let cfg = grid_config(g, &file)?;
    let level = level_of(g, &file)?;
    let detectors = match (&a.detectors, &file.grid.detectors) {
        (Some(d), _) => d.clone(),
        (None, Some(list)) => parse_list(list)?,
        (None, None) => Detector::DEFAULT_SET.to_vec(),
    };
    let workers = g.common.workers.or(file.workers);
    let result = with_workers(workers, || run_support_phase_transition(&cfg, &detectors))??;
    write_rate_outputs(&result, &g.out, g.contour_out.as_deref(), level)
}

fn cmd_nmse(a: NmseArgs) -> Result<(), CliError> {
    let file = config::load(a.common.config.as_deref())?;
    let f = &file.nmse;
    let mut cfg = if a.scale.paper_scale { NmseConfig::paper() } else { NmseConfig::desk() };
    cfg.n = a.n.or(f.n).unwrap_or(cfg.n);
    cfg.k = a.k.or(f.k).unwrap_or(cfg.k);
    cfg.trials = a.trials.or(f.trials).unwrap_or(cfg.trials);
    cfg.seed = a.common.seed.or(file.seed).unwrap_or(cfg.seed);
    if let Some(m) = a.m.clone().or_else(|| f.m.clone()) {
        cfg.m_list = m;
    }
    if let Some(s) = a.snr_db.clone().or_else(|| f.snr_db.clone()) {
        cfg.snr_db = s;
    }
    if let Some(algos) = &a.algos {
        cfg.algorithms = algos.clone();
    } else if let Some(list) = &f.algorithms {
        cfg.algorithms = parse_list(list)?;
    }
    cfg.settings = a.settings.resolve(&file)?;
    cfg.validate()?;
    let workers = a.common.workers.or(file.workers);
    let result = with_workers(workers, || run_nmse_sweep(&cfg))??;
    let mut buf = Vec::new();
    write_csv(&result, &mut buf)?;
    write_atomic(&a.out, &buf)?;
    eprintln!("wrote {} rows to {}", result.rows.len(), a.out.display());
    Ok(())
}

fn cmd_validate(a: ValidateArgs) -> Result<(), CliError> {
    let settings = a.settings.resolve(&FileConfig::default())?;
    let report = if a.inject_fault {
        validate_denoiser_with(|u, p| {
            bossamp::denoiser::denoise(u, &bossamp::denoiser::DenoiserParams { beta: 2.0 * p.beta, ..*p })
        })?
    } else {
        validate_denoiser()?
    };
    if let Some(path) = &a.out {
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        write_atomic(path, &buf)?;
    }
    let mut failures = Vec::new();
    eprintln!(
        "denoiser: {} grid points, max |closed - quadrature| = {:e}, max derivative relative error = {:e}",
        report.rows.len(),
        report.max_diff(),
        report.max_deriv_rel()
    );
    if !report.passed() {
        let worst: Vec<String> = report
            .worst(5)
            .iter()
            .map(|r| format!("u={} beta={} gamma={} diff={:e}", r.u, r.beta, r.gamma, r.diff))
            .collect();
        failures.push(format!("denoiser tolerance violated; worst points: {}", worst.join("; ")));
    }
    if !a.skip_oracle {
        for snr in [None, Some(20.0)] {
            let cfg = OracleConfig {
                trials: a.oracle_trials,
                seed: a.seed.unwrap_or(0),
                settings,
                ..OracleConfig::small(snr)
            };
            let label = snr.map(|s| format!("{s} dB")).unwrap_or_else(|| "noiseless".into());
            for r in oracle_check(&cfg)? {
                eprintln!(
                    "oracle ({label}): {} part {} vs {} oracle: mse {:.6e} vs {:.6e}{}",
                    r.algorithm,
                    if r.part == 0 { "re" } else { "im" },
                    r.oracle.name(),
                    r.algorithm_mse,
                    r.oracle_mse,
                    if r.passed { "" } else { "  FAIL" }
                );
                if !r.passed {
                    failures.push(format!(
                        "{} ({label}) undercuts the {} oracle by {:e}",
                        r.algorithm,
                        r.oracle.name(),
                        -r.mean_gap
                    ));
                }
            }
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(failures.join("\n")))
    }
}
