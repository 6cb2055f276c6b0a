//! Complex BOSSAMP: two BAMP chains, one per part, that share a latent
//! activity variable. After every iteration each chain turns its pseudo-data
//! into an activity log-likelihood ratio and hands the resulting zero
//! probability to the other chain's denoiser.

use crate::bamp::{check_dims, BampState};
use crate::denoiser::logistic;
use crate::error::{Error, Result};
use crate::model::{norm_sq, BernoulliGaussianPrior, ComplexVector, RealMatrix};
use crate::recovery::{LikelihoodVariant, RecoveryOutput, RecoverySettings};

/// Log-likelihood ratio (zero vs. active) of one component given its
/// pseudo-data `u ~ N(x, β)`, combined with the prior log-odds of `gamma0`:
///
/// `l = log(γ⁰/(1−γ⁰)) + ½ (log((β+s²)/β) − u² s² / (β (β+s²)))`
pub fn likelihood_update(u: f64, beta: f64, gamma0: f64, s2: f64) -> Result<f64> {
    if !u.is_finite() || !beta.is_finite() || !gamma0.is_finite() || !s2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "likelihood update needs finite inputs (u={u}, β={beta}, γ={gamma0}, s²={s2})"
        )));
    }
    if !(beta > 0.0 && s2 > 0.0 && gamma0 > 0.0 && gamma0 < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "likelihood update needs β, s² > 0 and γ in (0, 1) (β={beta}, γ={gamma0}, s²={s2})"
        )));
    }
    Ok(log_ratio(u, beta, gamma0, s2))
}

#[inline]
fn log_ratio(u: f64, beta: f64, gamma0: f64, s2: f64) -> f64 {
    let total = beta + s2;
    (gamma0 / (1.0 - gamma0)).ln() + 0.5 * ((total / beta).ln() - u * u * s2 / (beta * total))
}

/// `1 / (1 + e^(−l))`, clamped to `[clamp, 1 − clamp]`.
pub fn prior_update(l: f64, clamp: f64) -> f64 {
    logistic(l).clamp(clamp, 1.0 - clamp)
}

/// Iteration state of both chains plus the exchanged quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct BossampState {
    pub parts: [BampState; 2],
    /// Working zero probabilities fed to each part's denoiser.
    pub gamma: [Vec<f64>; 2],
    /// Log-likelihood ratios computed from each part in the last exchange.
    pub llr: [Vec<f64>; 2],
    /// Relative residual change of each part in the last iteration.
    pub rel_change: [f64; 2],
    gamma0: Vec<f64>,
}

impl BossampState {
    pub fn new(
        a: &RealMatrix,
        y: &ComplexVector,
        prior: &BernoulliGaussianPrior,
        settings: &RecoverySettings,
    ) -> Result<Self> {
        check_dims(a, y.len(), prior.len())?;
        let c = settings.gamma_clamp;
        let gamma0: Vec<f64> = prior.gamma0().iter().map(|g| g.clamp(c, 1.0 - c)).collect();
        let n = a.cols();
        Ok(Self {
            parts: [BampState::new(n, y.re()), BampState::new(n, y.im())],
            gamma: [gamma0.clone(), gamma0.clone()],
            llr: [vec![0.0; n], vec![0.0; n]],
            rel_change: [f64::INFINITY; 2],
            gamma0,
        })
    }

    pub fn t(&self) -> usize {
        self.parts[0].t.max(self.parts[1].t)
    }

    /// One BAMP iteration on each part, then the likelihood exchange.
    /// Returns the summed relative residual change.
    pub fn step(
        &mut self,
        a: &RealMatrix,
        y: &ComplexVector,
        prior: &BernoulliGaussianPrior,
        settings: &RecoverySettings,
    ) -> Result<f64> {
        let s2 = prior.part_variance();
        for p in 0..2 {
            let step = self.parts[p].step(a, y.part(p), &self.gamma[p], s2, settings.beta_floor)?;
            self.rel_change[p] = step.rel_change;
        }
        if settings.exchange {
            self.exchange(prior.sigma_x2(), settings);
        }
        Ok(self.rel_change[0] + self.rel_change[1])
    }

    fn exchange(&mut self, sigma_x2: f64, settings: &RecoverySettings) {
        let s2 = settings.part_variance.variance(sigma_x2);
        for p in 0..2 {
            let beta = match settings.likelihood_variant {
                LikelihoodVariant::OwnBeta => self.parts[p].beta,
                LikelihoodVariant::PrintedCrossBeta => self.parts[1 - p].beta,
            };
            for ((l, &u), &g0) in self.llr[p].iter_mut().zip(&self.parts[p].u).zip(&self.gamma0) {
                *l = log_ratio(u, beta, g0, s2);
            }
        }
        // each part's evidence becomes the other part's prior
        for p in 0..2 {
            let (src, dst) = (&self.llr[p], &mut self.gamma[1 - p]);
            for (g, &l) in dst.iter_mut().zip(src) {
                *g = prior_update(l, settings.gamma_clamp);
            }
        }
    }
}

/// Complex BOSSAMP recovery.
///
/// With `settings.exchange` disabled the two chains never interact and each
/// stops on its own residual criterion, which reproduces cBAMP exactly.
pub fn cbossamp_recover(
    a: &RealMatrix,
    y: &ComplexVector,
    prior: &BernoulliGaussianPrior,
    settings: &RecoverySettings,
) -> Result<RecoveryOutput> {
    settings.validate()?;
    let mut state = BossampState::new(a, y, prior, settings)?;
    let initial = [norm_sq(y.re()), norm_sq(y.im())];

    if initial == [0.0, 0.0] {
        // y = 0 is a fixed point: no residual, no evidence to exchange
        let s2 = prior.part_variance();
        for p in 0..2 {
            state.parts[p].step(a, y.part(p), &state.gamma[p], s2, settings.beta_floor)?;
        }
        return finish(state, [true; 2], [false; 2]);
    }

    if settings.exchange {
        let mut converged = false;
        let mut diverged = false;
        loop {
            let crit = state.step(a, y, prior, settings)?;
            if (0..2).any(|p| {
                initial[p] > 0.0
                    && norm_sq(&state.parts[p].z) > settings.divergence_factor * initial[p]
            }) {
                diverged = true;
                break;
            }
            if crit <= settings.eps_tol {
                converged = true;
                break;
            }
            if state.t() >= settings.t_max {
                break;
            }
        }
        finish(state, [converged; 2], [diverged; 2])
    } else {
        let s2 = prior.part_variance();
        let mut converged = [false; 2];
        let mut diverged = [false; 2];
        for p in 0..2 {
            let chain = &mut state.parts[p];
            loop {
                let step = chain.step(a, y.part(p), &state.gamma[p], s2, settings.beta_floor)?;
                state.rel_change[p] = step.rel_change;
                if initial[p] > 0.0 && norm_sq(&chain.z) > settings.divergence_factor * initial[p] {
                    diverged[p] = true;
                    break;
                }
                if step.rel_change <= settings.eps_tol {
                    converged[p] = true;
                    break;
                }
                if chain.t >= settings.t_max {
                    break;
                }
            }
        }
        finish(state, converged, diverged)
    }
}

fn finish(state: BossampState, converged: [bool; 2], diverged: [bool; 2]) -> Result<RecoveryOutput> {
    let BossampState { parts, gamma, .. } = state;
    let [re, im] = parts;
    let [g_re, g_im] = gamma;
    RecoveryOutput::from_parts(
        re.into_result(g_re, converged[0], diverged[0]),
        im.into_result(g_im, converged[1], diverged[1]),
    )
}
