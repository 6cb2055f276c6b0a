//! Oracle checks: the closed-form denoiser against quadrature, and every
//! algorithm against the exact MMSE estimate on tiny problems.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::amp::lambda_heuristic;
use crate::denoiser::{denoise, denoise_deriv, denoise_numeric, exact_mmse, exact_mmse_joint, DenoiserParams};
use crate::error::Result;
use crate::experiments::{trial_seed, uniform_axis, Algorithm, VERSION};
use crate::model::{db_to_linear, gaussian_noise, gen_matrix, gen_signal_bernoulli};
use crate::model::{measure, BernoulliGaussianPrior, ComplexVector};
use crate::recovery::RecoverySettings;

pub const DENOISER_TOL: f64 = 1e-8;
pub const DERIV_REL_TOL: f64 = 1e-5;

/// One grid point of the denoiser comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiserCheck {
    pub u: f64,
    pub beta: f64,
    pub gamma: f64,
    pub closed: f64,
    pub numeric: f64,
    pub diff: f64,
    /// `|F' − central difference| / |central difference|`
    pub deriv_rel: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserReport {
    pub s2: f64,
    pub rows: Vec<DenoiserCheck>,
}

impl DenoiserReport {
    pub fn max_diff(&self) -> f64 {
        self.rows.iter().map(|r| r.diff).fold(0.0, f64::max)
    }

    pub fn max_deriv_rel(&self) -> f64 {
        self.rows.iter().map(|r| r.deriv_rel).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_diff() <= DENOISER_TOL && self.max_deriv_rel() <= DERIV_REL_TOL
    }

    /// The `count` rows with the largest value mismatch.
    pub fn worst(&self, count: usize) -> Vec<DenoiserCheck> {
        let mut rows = self.rows.clone();
        rows.sort_by(|a, b| b.diff.total_cmp(&a.diff));
        rows.truncate(count);
        rows
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# bossamp {VERSION} validate-denoiser s2={} tol={DENOISER_TOL} deriv_rel_tol={DERIV_REL_TOL}",
            self.s2
        )?;
        let mut cw = csv::Writer::from_writer(w);
        cw.write_record(["u", "beta", "gamma", "closed_form", "quadrature", "abs_diff", "deriv_rel_err"])?;
        for r in &self.rows {
            cw.write_record([
                r.u.to_string(),
                r.beta.to_string(),
                r.gamma.to_string(),
                r.closed.to_string(),
                r.numeric.to_string(),
                r.diff.to_string(),
                r.deriv_rel.to_string(),
            ])?;
        }
        cw.flush()?;
        Ok(())
    }
}

/// The default grid: 50 points of `u` in [−6, 6], `β ∈ {1e−3, 0.1, 1, 10}`,
/// `γ ∈ {0.01, 0.5, 0.9, 0.99}`, `s² = 0.5`.
pub fn default_denoiser_grid() -> (Vec<f64>, Vec<f64>, Vec<f64>, f64) {
    (
        uniform_axis(-6.0, 6.0, 50),
        vec![1e-3, 0.1, 1.0, 10.0],
        vec![0.01, 0.5, 0.9, 0.99],
        0.5,
    )
}

/// Compares `closed` (normally [`denoise`]) and its derivative against
/// quadrature and central differences over the default grid.
pub fn validate_denoiser_with<F>(closed: F) -> Result<DenoiserReport>
where
    F: Fn(f64, &DenoiserParams) -> Result<f64>,
{
    let (us, betas, gammas, s2) = default_denoiser_grid();
    let mut rows = Vec::with_capacity(us.len() * betas.len() * gammas.len());
    for &beta in &betas {
        for &gamma in &gammas {
            let p = DenoiserParams::new(beta, gamma, s2)?;
            for &u in &us {
                let c = closed(u, &p)?;
                let numeric = denoise_numeric(u, &p)?;
                let h = 1e-5 * u.abs().max(1.0);
                let fd = (closed(u + h, &p)? - closed(u - h, &p)?) / (2.0 * h);
                let d = denoise_deriv(u, &p)?;
                rows.push(DenoiserCheck {
                    u,
                    beta,
                    gamma,
                    closed: c,
                    numeric,
                    diff: (c - numeric).abs(),
                    deriv_rel: (d - fd).abs() / fd.abs().max(f64::MIN_POSITIVE),
                });
            }
        }
    }
    Ok(DenoiserReport { s2, rows })
}

pub fn validate_denoiser() -> Result<DenoiserReport> {
    validate_denoiser_with(denoise)
}

/// Tiny-problem ensemble for the exact MMSE comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    /// `None` for noiseless measurements.
    pub snr_db: Option<f64>,
    pub sigma_x2: f64,
    pub settings: RecoverySettings,
    /// Allowed amount by which an algorithm's mean MSE may undercut the oracle.
    pub slack: f64,
}

impl OracleConfig {
    /// N = 10, M = 6, K = 2, 500 trials.
    pub fn small(snr_db: Option<f64>) -> Self {
        Self {
            n: 10,
            m: 6,
            k: 2,
            trials: 500,
            seed: 0,
            snr_db,
            sigma_x2: 1.0,
            settings: RecoverySettings::default(),
            slack: 1e-9,
        }
    }
}

/// Which oracle an algorithm is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    /// Posterior mean of one part given only that part's measurement.
    PerPart,
    /// Posterior mean of both parts given both measurements and a shared support.
    Joint,
}

impl OracleKind {
    pub fn name(self) -> &'static str {
        match self {
            OracleKind::PerPart => "per-part",
            OracleKind::Joint => "joint",
        }
    }
}

/// Mean per-part MSE of one algorithm next to its oracle over the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub algorithm: Algorithm,
    pub part: usize,
    pub oracle: OracleKind,
    pub algorithm_mse: f64,
    pub oracle_mse: f64,
    /// Mean of the paired per-instance differences.
    pub mean_gap: f64,
    pub passed: bool,
}

/// Runs every algorithm and both oracles on the same instances. Signals are
/// drawn from the Bernoulli-Gaussian prior itself with `γ⁽⁰⁾ = 1 − K/N`, and
/// the noise variance is set from the expected signal power, so the oracles
/// are exactly Bayes-optimal for the ensemble. Algorithms that see one part
/// at a time are held to the per-part oracle; all are held to the joint one.
pub fn oracle_check(cfg: &OracleConfig) -> Result<Vec<OracleRow>> {
    cfg.settings.validate()?;
    let gamma0 = 1.0 - cfg.k as f64 / cfg.n as f64;
    let prior = BernoulliGaussianPrior::uniform(cfg.n, gamma0, cfg.sigma_x2)?;
    let lambda = lambda_heuristic(cfg.k)?;
    let sigma_w2 = match cfg.snr_db {
        None => 0.0,
        Some(db) => cfg.n as f64 * (1.0 - gamma0) * cfg.sigma_x2 / (cfg.m as f64 * db_to_linear(db)),
    };

    let pairs: Vec<(Algorithm, OracleKind)> = vec![
        (Algorithm::Amp, OracleKind::PerPart),
        (Algorithm::Cbamp, OracleKind::PerPart),
        (Algorithm::Amp, OracleKind::Joint),
        (Algorithm::Cbamp, OracleKind::Joint),
        (Algorithm::Cbossamp, OracleKind::Joint),
    ];
    // [pair][part] sums of algorithm error, oracle error, paired gap
    let mut sums = vec![[[0.0f64; 3]; 2]; pairs.len()];
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;

    for trial in 0..cfg.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(cfg.seed, 0, trial));
        let a = gen_matrix(cfg.m, cfg.n, &mut rng)?;
        let x = gen_signal_bernoulli(cfg.n, &prior, &mut rng)?;
        let w = if sigma_w2 > 0.0 {
            gaussian_noise(cfg.m, sigma_w2, &mut rng)
        } else {
            ComplexVector::zeros(cfg.m)
        };
        let y = measure(&a, &x, &w)?;

        let per_part = [
            exact_mmse(&a, y.re(), &prior, sigma_w2 / 2.0)?,
            exact_mmse(&a, y.im(), &prior, sigma_w2 / 2.0)?,
        ];
        let joint = exact_mmse_joint(&a, &y, &prior, sigma_w2)?;
        let mut outputs = Vec::with_capacity(3);
        for alg in Algorithm::ALL {
            outputs.push((alg, alg.recover(&a, &y, &prior, &cfg.settings, Some(lambda))?));
        }
        for (i, (alg, kind)) in pairs.iter().enumerate() {
            let out = &outputs.iter().find(|(a, _)| a == alg).expect("every algorithm ran").1;
            for p in 0..2 {
                let reference = match kind {
                    OracleKind::PerPart => &per_part[p][..],
                    OracleKind::Joint => joint.part(p),
                };
                let e_alg = sq(out.x_hat.part(p), x.part(p));
                let e_orc = sq(reference, x.part(p));
                sums[i][p][0] += e_alg;
                sums[i][p][1] += e_orc;
                sums[i][p][2] += e_alg - e_orc;
            }
        }
    }
    let t = cfg.trials as f64;
    let mut rows = Vec::new();
    for (i, &(algorithm, oracle)) in pairs.iter().enumerate() {
        for part in 0..2 {
            let mean_gap = sums[i][part][2] / t;
            rows.push(OracleRow {
                algorithm,
                part,
                oracle,
                algorithm_mse: sums[i][part][0] / t,
                oracle_mse: sums[i][part][1] / t,
                mean_gap,
                passed: mean_gap >= -cfg.slack,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_shape() {
        let (u, b, g, s2) = default_denoiser_grid();
        assert_eq!((u.len(), b.len(), g.len(), s2), (50, 4, 4, 0.5));
    }

    #[test]
    fn corrupted_closed_form_is_caught() {
        // a Wiener gain with β doubled
        let bad = |u: f64, p: &DenoiserParams| {
            denoise(u, &DenoiserParams { beta: 2.0 * p.beta, ..*p })
        };
        let report = validate_denoiser_with(bad).unwrap();
        assert!(!report.passed());
        assert!(report.max_diff() > 1e-3);
        assert_eq!(report.worst(3).len(), 3);
    }

    #[test]
    fn oracle_check_small_run() {
        let cfg = OracleConfig { trials: 20, ..OracleConfig::small(Some(20.0)) };
        let rows = oracle_check(&cfg).unwrap();
        assert_eq!(rows.len(), 10);
        assert!(rows.iter().all(|r| r.oracle_mse.is_finite() && r.algorithm_mse.is_finite()));
    }
}
