//! Monte-Carlo sweeps: recovery and support-detection phase transitions over
//! an (M/N, K/M) grid, NMSE against SNR, and contour extraction.
//!
//! Every trial draws its instance from a sub-seed derived from
//! `(base seed, cell, trial)`, so all algorithms see identical instances and
//! the output does not depend on how cells are spread across threads.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::amp::{camp_recover, lambda_heuristic, AmpConfig};
use crate::bamp::cbamp_recover;
use crate::bossamp::cbossamp_recover;
use crate::error::{Error, Result};
use crate::model::{generate_instance, nmse, NoiseSpec, ProblemInstance, SignalModel};
use crate::model::{BernoulliGaussianPrior, ComplexVector, RealMatrix};
use crate::recovery::{RecoveryOutput, RecoverySettings};
use crate::support::{detect_em, detect_em_cbamp, detect_prior_based, support_metrics, EmInputs};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Amp,
    Cbamp,
    Cbossamp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Amp, Algorithm::Cbamp, Algorithm::Cbossamp];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Amp => "amp",
            Algorithm::Cbamp => "cbamp",
            Algorithm::Cbossamp => "cbossamp",
        }
    }

    /// Runs the algorithm. AMP needs `lambda`; the Bayesian algorithms ignore it.
    pub fn recover(
        self,
        a: &RealMatrix,
        y: &ComplexVector,
        prior: &BernoulliGaussianPrior,
        settings: &RecoverySettings,
        lambda: Option<f64>,
    ) -> Result<RecoveryOutput> {
        match self {
            Algorithm::Amp => {
                let lambda = lambda.ok_or_else(|| {
                    Error::InvalidParameter("AMP needs a threshold multiplier λ or a sparsity K".into())
                })?;
                camp_recover(a, y, &AmpConfig::with_lambda(lambda, *settings)?)
            }
            Algorithm::Cbamp => cbamp_recover(a, y, prior, settings),
            Algorithm::Cbossamp => cbossamp_recover(a, y, prior, settings),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amp" => Ok(Algorithm::Amp),
            "cbamp" => Ok(Algorithm::Cbamp),
            "cbossamp" => Ok(Algorithm::Cbossamp),
            _ => Err(Error::InvalidParameter(format!(
                "unknown algorithm {s:?} (expected amp, cbamp or cbossamp)"
            ))),
        }
    }
}

/// Support-detection rule applied after recovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectRule {
    /// Prior-based rule on the exchanged zero probabilities.
    Prior,
    /// Single E-step EM rule on the final `u` and `β`.
    Em,
}

impl DetectRule {
    pub fn name(self) -> &'static str {
        match self {
            DetectRule::Prior => "prior",
            DetectRule::Em => "em",
        }
    }
}

impl FromStr for DetectRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prior" => Ok(DetectRule::Prior),
            "em" => Ok(DetectRule::Em),
            _ => Err(Error::InvalidParameter(format!(
                "unknown detector {s:?} (expected prior or em)"
            ))),
        }
    }
}

/// An (algorithm, rule) pairing for the support sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Detector {
    pub algorithm: Algorithm,
    pub rule: DetectRule,
}

impl Detector {
    pub const CBAMP_EM: Detector = Detector { algorithm: Algorithm::Cbamp, rule: DetectRule::Em };
    pub const CBOSSAMP_EM: Detector = Detector { algorithm: Algorithm::Cbossamp, rule: DetectRule::Em };
    pub const CBOSSAMP_PRIOR: Detector = Detector { algorithm: Algorithm::Cbossamp, rule: DetectRule::Prior };
    pub const DEFAULT_SET: [Detector; 3] = [Self::CBAMP_EM, Self::CBOSSAMP_EM, Self::CBOSSAMP_PRIOR];

    pub fn label(&self) -> String {
        format!("{}+{}", self.algorithm.name(), self.rule.name())
    }
}

impl FromStr for Detector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (a, r) = s.split_once('+').ok_or_else(|| {
            Error::InvalidParameter(format!("detector {s:?} should look like cbossamp+em"))
        })?;
        let d = Detector { algorithm: a.parse()?, rule: r.parse()? };
        if d.algorithm == Algorithm::Amp || (d.algorithm == Algorithm::Cbamp && d.rule == DetectRule::Prior) {
            return Err(Error::InvalidParameter(format!("detector {s:?} is not supported")));
        }
        Ok(d)
    }
}

/// Applies a detector's rule to a finished recovery.
pub fn detect_support(
    rule: DetectRule,
    algorithm: Algorithm,
    out: &RecoveryOutput,
    prior: &BernoulliGaussianPrior,
) -> Result<crate::support::SupportEstimate> {
    match (rule, algorithm) {
        (DetectRule::Prior, Algorithm::Cbossamp) => detect_prior_based(&out.re.gamma, &out.im.gamma),
        (DetectRule::Em, Algorithm::Cbossamp) => detect_em(&EmInputs {
            u_r: &out.re.u,
            u_i: &out.im.u,
            beta_r: out.re.beta,
            beta_i: out.im.beta,
            gamma_r: &out.re.gamma,
            gamma_i: &out.im.gamma,
            sigma_x2: prior.sigma_x2(),
        }),
        (DetectRule::Em, Algorithm::Cbamp) => detect_em_cbamp(
            &out.re.u,
            &out.im.u,
            out.re.beta,
            out.im.beta,
            prior.gamma0(),
            prior.sigma_x2(),
        ),
        _ => Err(Error::InvalidParameter(format!(
            "the {} rule is not defined for {}",
            rule.name(),
            algorithm.name()
        ))),
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sub-seed for trial `trial` of cell `cell`.
pub fn trial_seed(base: u64, cell: usize, trial: usize) -> u64 {
    mix(mix(mix(base) ^ cell as u64) ^ trial as u64)
}

/// `count` evenly spaced points from `lo` to `hi` inclusive.
pub fn uniform_axis(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// One grid cell with its integer dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub mn: f64,
    pub km: f64,
    pub m: usize,
    pub k: usize,
}

/// Phase-transition grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub n: usize,
    pub mn_axis: Vec<f64>,
    pub km_axis: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    /// A trial succeeds when its NMSE is below this.
    pub success_threshold: f64,
    pub sigma_x2: f64,
    pub settings: RecoverySettings,
}

impl GridConfig {
    /// N = 256, 50 trials per cell, 19×19 grid over [0.05, 0.95]².
    pub fn desk() -> Self {
        Self {
            n: 256,
            mn_axis: uniform_axis(0.05, 0.95, 19),
            km_axis: uniform_axis(0.05, 0.95, 19),
            trials: 50,
            seed: 0,
            algorithms: Algorithm::ALL.to_vec(),
            success_threshold: 1e-4,
            sigma_x2: 1.0,
            settings: RecoverySettings::default(),
        }
    }

    /// N = 1000, 200 trials per cell.
    pub fn paper() -> Self {
        Self { n: 1000, trials: 200, ..Self::desk() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.trials == 0 {
            return Err(Error::InvalidParameter("N and the trial count must be positive".into()));
        }
        if self.mn_axis.is_empty() || self.km_axis.is_empty() {
            return Err(Error::InvalidParameter("grid axes must not be empty".into()));
        }
        for v in self.mn_axis.iter().chain(&self.km_axis) {
            if !(*v > 0.0 && *v <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "grid ratios must lie in (0, 1], got {v}"
                )));
            }
        }
        if !(self.success_threshold > 0.0) || !(self.sigma_x2 > 0.0) {
            return Err(Error::InvalidParameter(
                "success threshold and σ_x² must be positive".into(),
            ));
        }
        self.settings.validate()
    }

    /// Cells in M/N-major order. `M = round(M/N · N) ≥ 1`,
    /// `K = round(K/M · M)` clamped to `[1, M]`.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::with_capacity(self.mn_axis.len() * self.km_axis.len());
        for &mn in &self.mn_axis {
            let m = ((mn * self.n as f64).round() as usize).clamp(1, self.n);
            for &km in &self.km_axis {
                let k = ((km * m as f64).round() as usize).clamp(1, m);
                out.push(Cell { index: out.len(), mn, km, m, k });
            }
        }
        out
    }

    fn echo(&self) -> String {
        format!(
            "n={} trials={} mn_axis={} km_axis={} threshold={} sigma_x2={} {}",
            self.n,
            self.trials,
            axis_echo(&self.mn_axis),
            axis_echo(&self.km_axis),
            self.success_threshold,
            self.sigma_x2,
            settings_echo(&self.settings),
        )
    }
}

fn axis_echo(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn settings_echo(s: &RecoverySettings) -> String {
    format!(
        "t_max={} eps_tol={} beta_floor={} gamma_clamp={} divergence_factor={} likelihood_variant={} part_variance={} exchange={}",
        s.t_max,
        s.eps_tol,
        s.beta_floor,
        s.gamma_clamp,
        s.divergence_factor,
        s.likelihood_variant.name(),
        s.part_variance.name(),
        s.exchange
    )
}

/// Aggregated success counts for one (cell, method).
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub mn: f64,
    pub km: f64,
    pub m: usize,
    pub k: usize,
    pub method: String,
    pub trials: usize,
    pub successes: usize,
    pub mean_iterations: f64,
    pub diverged: usize,
}

impl RateRow {
    pub fn rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Aggregated NMSE for one (M, SNR, algorithm) point.
#[derive(Debug, Clone, PartialEq)]
pub struct NmseRow {
    pub m: usize,
    pub snr_db: f64,
    pub algorithm: Algorithm,
    pub trials: usize,
    pub mean_nmse: f64,
    pub median_nmse: f64,
    pub mean_iterations: f64,
    pub diverged: usize,
}

/// Rows plus the metadata echoed into the CSV header comment.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult<R> {
    pub kind: &'static str,
    pub config: String,
    pub seed: u64,
    pub rows: Vec<R>,
}

/// Row types that can be written as CSV.
pub trait CsvRow {
    fn header() -> &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

impl CsvRow for RateRow {
    fn header() -> &'static [&'static str] {
        &["mn", "km", "m", "k", "method", "trials", "successes", "rate", "mean_iterations", "diverged"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.mn.to_string(),
            self.km.to_string(),
            self.m.to_string(),
            self.k.to_string(),
            self.method.clone(),
            self.trials.to_string(),
            self.successes.to_string(),
            self.rate().to_string(),
            self.mean_iterations.to_string(),
            self.diverged.to_string(),
        ]
    }
}

impl CsvRow for NmseRow {
    fn header() -> &'static [&'static str] {
        &[
            "m",
            "snr_db",
            "algorithm",
            "trials",
            "mean_nmse",
            "mean_nmse_db",
            "median_nmse",
            "median_nmse_db",
            "mean_iterations",
            "diverged",
        ]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.m.to_string(),
            self.snr_db.to_string(),
            self.algorithm.name().to_string(),
            self.trials.to_string(),
            self.mean_nmse.to_string(),
            crate::model::linear_to_db(self.mean_nmse).to_string(),
            self.median_nmse.to_string(),
            crate::model::linear_to_db(self.median_nmse).to_string(),
            self.mean_iterations.to_string(),
            self.diverged.to_string(),
        ]
    }
}

/// `# bossamp <version> <kind> seed=<seed> <config>` followed by the rows.
pub fn write_csv<R: CsvRow, W: Write>(result: &SweepResult<R>, mut w: W) -> Result<()> {
    writeln!(w, "# bossamp {VERSION} {} seed={} {}", result.kind, result.seed, result.config)?;
    let mut cw = csv::Writer::from_writer(w);
    cw.write_record(R::header())?;
    for r in &result.rows {
        cw.write_record(r.fields())?;
    }
    cw.flush()?;
    Ok(())
}

/// Per-trial record before aggregation.
#[derive(Debug, Clone, Copy)]
struct Outcome {
    success: bool,
    iterations: usize,
    diverged: bool,
}

fn tally(cell: &Cell, method: String, trials: usize, outcomes: &[Outcome]) -> RateRow {
    RateRow {
        mn: cell.mn,
        km: cell.km,
        m: cell.m,
        k: cell.k,
        method,
        trials,
        successes: outcomes.iter().filter(|o| o.success).count(),
        mean_iterations: outcomes.iter().map(|o| o.iterations as f64).sum::<f64>() / trials as f64,
        diverged: outcomes.iter().filter(|o| o.diverged).count(),
    }
}

fn cell_instance(cfg: &GridConfig, cell: &Cell, trial: usize) -> Result<ProblemInstance> {
    let seed = trial_seed(cfg.seed, cell.index, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inst = generate_instance(
        cell.m,
        cfg.n,
        cell.k,
        cfg.sigma_x2,
        NoiseSpec::Noiseless,
        SignalModel::ExactK,
        &mut rng,
    )?;
    inst.seed = Some(seed);
    Ok(inst)
}

/// Recovery phase transition: success means NMSE below the threshold.
/// A trial whose iteration produced non-finite values counts as a diverged
/// failure.
pub fn run_phase_transition(cfg: &GridConfig) -> Result<SweepResult<RateRow>> {
    cfg.validate()?;
    if cfg.algorithms.is_empty() {
        return Err(Error::InvalidParameter("no algorithms selected".into()));
    }
    let per_cell: Vec<Vec<RateRow>> = cfg
        .cells()
        .par_iter()
        .map(|cell| -> Result<Vec<RateRow>> {
            let lambda = lambda_heuristic(cell.k)?;
            let mut outcomes = vec![Vec::with_capacity(cfg.trials); cfg.algorithms.len()];
            for trial in 0..cfg.trials {
                let inst = cell_instance(cfg, cell, trial)?;
                for (alg, sink) in cfg.algorithms.iter().zip(outcomes.iter_mut()) {
                    let o = match alg.recover(&inst.a, &inst.y, &inst.prior, &cfg.settings, Some(lambda)) {
                        Ok(out) => Outcome {
                            success: nmse(&out.x_hat, &inst.x_true)? < cfg.success_threshold,
                            iterations: out.iterations(),
                            diverged: out.diverged(),
                        },
                        Err(Error::NonFinite { iteration, .. }) => Outcome {
                            success: false,
                            iterations: iteration,
                            diverged: true,
                        },
                        Err(e) => return Err(e),
                    };
                    sink.push(o);
                }
            }
            Ok(cfg
                .algorithms
                .iter()
                .zip(&outcomes)
                .map(|(alg, o)| tally(cell, alg.name().to_string(), cfg.trials, o))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        kind: "phase-transition",
        config: format!(
            "{} algorithms={}",
            cfg.echo(),
            cfg.algorithms.iter().map(|a| a.name()).collect::<Vec<_>>().join(";")
        ),
        seed: cfg.seed,
        rows: per_cell.into_iter().flatten().collect(),
    })
}

/// Support-detection phase transition: success means the detected support
/// equals the true one. Each needed algorithm runs once per trial and every
/// detector built on it reads the same output.
pub fn run_support_phase_transition(cfg: &GridConfig, detectors: &[Detector]) -> Result<SweepResult<RateRow>> {
    cfg.validate()?;
    if detectors.is_empty() {
        return Err(Error::InvalidParameter("no detectors selected".into()));
    }
    for d in detectors {
        if d.algorithm == Algorithm::Amp {
            return Err(Error::InvalidParameter("support detection needs cbamp or cbossamp".into()));
        }
    }
    let mut algs: Vec<Algorithm> = Vec::new();
    for d in detectors {
        if !algs.contains(&d.algorithm) {
            algs.push(d.algorithm);
        }
    }
    let per_cell: Vec<Vec<RateRow>> = cfg
        .cells()
        .par_iter()
        .map(|cell| -> Result<Vec<RateRow>> {
            let mut outcomes = vec![Vec::with_capacity(cfg.trials); detectors.len()];
            for trial in 0..cfg.trials {
                let inst = cell_instance(cfg, cell, trial)?;
                let runs: Vec<Option<RecoveryOutput>> = algs
                    .iter()
                    .map(|alg| match alg.recover(&inst.a, &inst.y, &inst.prior, &cfg.settings, None) {
                        Ok(out) => Ok(Some(out)),
                        Err(Error::NonFinite { .. }) => Ok(None),
                        Err(e) => Err(e),
                    })
                    .collect::<Result<_>>()?;
                for (d, sink) in detectors.iter().zip(outcomes.iter_mut()) {
                    let run = &runs[algs.iter().position(|a| *a == d.algorithm).unwrap_or(0)];
                    let o = match run {
                        Some(out) => {
                            let s = detect_support(d.rule, d.algorithm, out, &inst.prior)?;
                            Outcome {
                                success: support_metrics(&inst.x_true, &s)?.exact_match,
                                iterations: out.iterations(),
                                diverged: out.diverged(),
                            }
                        }
                        None => Outcome { success: false, iterations: 0, diverged: true },
                    };
                    sink.push(o);
                }
            }
            Ok(detectors
                .iter()
                .zip(&outcomes)
                .map(|(d, o)| tally(cell, d.label(), cfg.trials, o))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        kind: "support-phase-transition",
        config: format!(
            "{} detectors={}",
            cfg.echo(),
            detectors.iter().map(|d| d.label()).collect::<Vec<_>>().join(";")
        ),
        seed: cfg.seed,
        rows: per_cell.into_iter().flatten().collect(),
    })
}

/// NMSE-versus-SNR sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct NmseConfig {
    pub n: usize,
    pub k: usize,
    pub m_list: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub sigma_x2: f64,
    pub settings: RecoverySettings,
}

impl NmseConfig {
    /// N = 500, K = 20, M ∈ {70, 140}, SNR ∈ {10, 20, 30, 40} dB, 200 trials.
    pub fn desk() -> Self {
        Self {
            n: 500,
            k: 20,
            m_list: vec![70, 140],
            snr_db: vec![10.0, 20.0, 30.0, 40.0],
            trials: 200,
            seed: 0,
            algorithms: Algorithm::ALL.to_vec(),
            sigma_x2: 1.0,
            settings: RecoverySettings::default(),
        }
    }

    /// Same points with N = 1000 and 1000 trials.
    pub fn paper() -> Self {
        Self { n: 1000, trials: 1000, ..Self::desk() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.trials == 0 || self.k == 0 || self.k > self.n {
            return Err(Error::InvalidParameter(format!(
                "need N ≥ 1, 1 ≤ K ≤ N and at least one trial (N={}, K={}, trials={})",
                self.n, self.k, self.trials
            )));
        }
        if self.m_list.is_empty() || self.snr_db.is_empty() || self.algorithms.is_empty() {
            return Err(Error::InvalidParameter("M list, SNR list and algorithms must be non-empty".into()));
        }
        if let Some(m) = self.m_list.iter().find(|&&m| m == 0 || m > self.n) {
            return Err(Error::InvalidParameter(format!("M = {m} is outside [1, N]")));
        }
        if let Some(s) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter(format!("SNR {s} dB is not finite")));
        }
        if !(self.sigma_x2 > 0.0) {
            return Err(Error::InvalidParameter("σ_x² must be positive".into()));
        }
        self.settings.validate()
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Per trial NMSE of each algorithm at every (M, SNR) point. A trial that
/// produced non-finite iterates is recorded as diverged with NMSE 1.
pub fn run_nmse_sweep(cfg: &NmseConfig) -> Result<SweepResult<NmseRow>> {
    cfg.validate()?;
    let lambda = lambda_heuristic(cfg.k)?;
    let points: Vec<(usize, usize, f64)> = cfg
        .m_list
        .iter()
        .flat_map(|&m| cfg.snr_db.iter().map(move |&s| (m, s)))
        .enumerate()
        .map(|(i, (m, s))| (i, m, s))
        .collect();
    let per_point: Vec<Vec<NmseRow>> = points
        .par_iter()
        .map(|&(index, m, snr)| -> Result<Vec<NmseRow>> {
            let na = cfg.algorithms.len();
            let mut errs = vec![Vec::with_capacity(cfg.trials); na];
            let mut iters = vec![0usize; na];
            let mut diverged = vec![0usize; na];
            for trial in 0..cfg.trials {
                let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(cfg.seed, index, trial));
                let inst = generate_instance(
                    m,
                    cfg.n,
                    cfg.k,
                    cfg.sigma_x2,
                    NoiseSpec::SnrDb(snr),
                    SignalModel::ExactK,
                    &mut rng,
                )?;
                for (j, alg) in cfg.algorithms.iter().enumerate() {
                    match alg.recover(&inst.a, &inst.y, &inst.prior, &cfg.settings, Some(lambda)) {
                        Ok(out) => {
                            errs[j].push(nmse(&out.x_hat, &inst.x_true)?);
                            iters[j] += out.iterations();
                            diverged[j] += out.diverged() as usize;
                        }
                        Err(Error::NonFinite { iteration, .. }) => {
                            errs[j].push(1.0);
                            iters[j] += iteration;
                            diverged[j] += 1;
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
            Ok(cfg
                .algorithms
                .iter()
                .enumerate()
                .map(|(j, &algorithm)| {
                    let mean = errs[j].iter().sum::<f64>() / cfg.trials as f64;
                    NmseRow {
                        m,
                        snr_db: snr,
                        algorithm,
                        trials: cfg.trials,
                        mean_nmse: mean,
                        median_nmse: median(&mut errs[j]),
                        mean_iterations: iters[j] as f64 / cfg.trials as f64,
                        diverged: diverged[j],
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        kind: "nmse-sweep",
        config: format!(
            "n={} k={} m_list={} snr_db={} trials={} sigma_x2={} algorithms={} {}",
            cfg.n,
            cfg.k,
            cfg.m_list.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(";"),
            axis_echo(&cfg.snr_db),
            cfg.trials,
            cfg.sigma_x2,
            cfg.algorithms.iter().map(|a| a.name()).collect::<Vec<_>>().join(";"),
            settings_echo(&cfg.settings),
        ),
        seed: cfg.seed,
        rows: per_point.into_iter().flatten().collect(),
    })
}

/// One point of a success-rate contour.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourPoint {
    pub method: String,
    pub mn: f64,
    pub km: f64,
}

/// For each method and M/N column, the K/M where the success rate first
/// drops from at least `level` to below it, linearly interpolated between
/// the two grid rows. Columns that never cross are left out.
pub fn extract_contour(result: &SweepResult<RateRow>, level: f64) -> Result<Vec<ContourPoint>> {
    if result.rows.is_empty() {
        return Err(Error::InvalidParameter("cannot extract a contour from an empty result".into()));
    }
    let mut methods: Vec<&str> = Vec::new();
    let mut columns: Vec<f64> = Vec::new();
    for r in &result.rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
        if !columns.contains(&r.mn) {
            columns.push(r.mn);
        }
    }
    let mut out = Vec::new();
    for method in methods {
        for &mn in &columns {
            let mut col: Vec<&RateRow> = result.rows.iter().filter(|r| r.method == method && r.mn == mn).collect();
            col.sort_by(|a, b| a.km.total_cmp(&b.km));
            for pair in col.windows(2) {
                let (hi, lo) = (pair[0].rate(), pair[1].rate());
                if hi >= level && lo < level {
                    let t = (hi - level) / (hi - lo);
                    out.push(ContourPoint {
                        method: method.to_string(),
                        mn,
                        km: pair[0].km + t * (pair[1].km - pair[0].km),
                    });
                    break;
                }
            }
        }
    }
    Ok(out)
}

/// Writes contour points as CSV with the same header comment convention.
pub fn write_contour_csv<W: Write>(
    result: &SweepResult<RateRow>,
    level: f64,
    points: &[ContourPoint],
    mut w: W,
) -> Result<()> {
    writeln!(
        w,
        "# bossamp {VERSION} {}-contour level={level} seed={} {}",
        result.kind, result.seed, result.config
    )?;
    let mut cw = csv::Writer::from_writer(w);
    cw.write_record(["method", "mn", "km"])?;
    for p in points {
        cw.write_record([p.method.clone(), p.mn.to_string(), p.km.to_string()])?;
    }
    cw.flush()?;
    Ok(())
}
