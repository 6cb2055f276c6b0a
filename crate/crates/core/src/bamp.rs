//! Bayesian-optimal AMP on a real measurement, and cBAMP: two independent
//! BAMP chains on the real and imaginary parts.

use crate::denoiser::{mean_and_slope, DenoiserParams};
use crate::error::{Error, Result};
use crate::model::{norm_sq, BernoulliGaussianPrior, ComplexVector, RealMatrix};
use crate::recovery::{PartResult, RecoveryOutput, RecoverySettings};
use crate::amp::relative_change;

/// State of one BAMP chain. `u` and `beta` hold the values computed in the
/// most recent iteration (the ones paired with its denoising step).
#[derive(Debug, Clone, PartialEq)]
pub struct BampState {
    pub x_hat: Vec<f64>,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    pub beta: f64,
    pub t: usize,
    ax: Vec<f64>,
}

/// Diagnostics from one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BampStep {
    /// `(1/M) Σ F'(u_n)`
    pub onsager: f64,
    /// `‖z⁽ᵗ⁾ − z⁽ᵗ⁻¹⁾‖² / ‖z⁽ᵗ⁻¹⁾‖²`
    pub rel_change: f64,
}

impl BampState {
    /// `t = 0`, `x̂ = 0`, `z = y`.
    pub fn new(n: usize, y: &[f64]) -> Self {
        let m = y.len();
        Self {
            x_hat: vec![0.0; n],
            z: y.to_vec(),
            u: vec![0.0; n],
            beta: norm_sq(y) / m as f64,
            t: 0,
            ax: vec![0.0; m],
        }
    }

    /// One iteration with per-component zero probabilities `gamma`.
    pub fn step(
        &mut self,
        a: &RealMatrix,
        y: &[f64],
        gamma: &[f64],
        s2: f64,
        beta_floor: f64,
    ) -> Result<BampStep> {
        let m = a.rows() as f64;
        self.t += 1;

        a.tr_mul_vec_into(&self.z, &mut self.u);
        for (u, x) in self.u.iter_mut().zip(&self.x_hat) {
            *u += x;
        }

        let z_energy = norm_sq(&self.z);
        self.beta = (z_energy / m).max(beta_floor);

        let mut slope_sum = 0.0;
        for ((x, &u), &g) in self.x_hat.iter_mut().zip(&self.u).zip(gamma) {
            let p = DenoiserParams {
                beta: self.beta,
                gamma: g,
                s2,
            };
            let (mean, slope) = mean_and_slope(u, &p);
            *x = mean;
            slope_sum += slope;
        }
        let onsager = slope_sum / m;

        a.mul_vec_into(&self.x_hat, &mut self.ax);
        let mut diff = 0.0;
        for ((z, &yi), &ax) in self.z.iter_mut().zip(y).zip(&self.ax) {
            let next = yi - ax + onsager * *z;
            diff += (next - *z).powi(2);
            *z = next;
        }
        if !diff.is_finite() || !onsager.is_finite() {
            return Err(Error::NonFinite {
                what: "BAMP residual",
                iteration: self.t,
            });
        }
        Ok(BampStep {
            onsager,
            rel_change: relative_change(diff, z_energy),
        })
    }

    pub(crate) fn into_result(self, gamma: Vec<f64>, converged: bool, diverged: bool) -> PartResult {
        PartResult {
            x_hat: self.x_hat,
            u: self.u,
            beta: self.beta,
            gamma,
            iterations: self.t,
            converged,
            diverged,
        }
    }
}

pub(crate) fn check_dims(a: &RealMatrix, y_len: usize, gamma_len: usize) -> Result<()> {
    if y_len != a.rows() {
        return Err(Error::Dimension(format!(
            "A has {} rows but y has length {y_len}",
            a.rows()
        )));
    }
    if gamma_len != a.cols() {
        return Err(Error::Dimension(format!(
            "A has {} columns but the prior has {gamma_len} components",
            a.cols()
        )));
    }
    Ok(())
}

/// BAMP on one real part. `gamma0` are the prior zero probabilities and `s2`
/// the variance of an active component of this part.
pub fn bamp_recover(
    a: &RealMatrix,
    y_part: &[f64],
    gamma0: &[f64],
    s2: f64,
    settings: &RecoverySettings,
) -> Result<PartResult> {
    check_dims(a, y_part.len(), gamma0.len())?;
    settings.validate()?;
    if !(s2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "signal variance must be positive, got {s2}"
        )));
    }
    let initial = norm_sq(y_part);
    let mut state = BampState::new(a.cols(), y_part);
    let (mut converged, mut diverged) = (false, false);
    loop {
        let step = state.step(a, y_part, gamma0, s2, settings.beta_floor)?;
        if initial > 0.0 && norm_sq(&state.z) > settings.divergence_factor * initial {
            diverged = true;
            break;
        }
        if step.rel_change <= settings.eps_tol {
            converged = true;
            break;
        }
        if state.t >= settings.t_max {
            break;
        }
    }
    Ok(state.into_result(gamma0.to_vec(), converged, diverged))
}

/// cBAMP: independent BAMP runs on the real and imaginary parts, each with
/// the per-part prior variance `σ_x²/2`.
pub fn cbamp_recover(
    a: &RealMatrix,
    y: &ComplexVector,
    prior: &BernoulliGaussianPrior,
    settings: &RecoverySettings,
) -> Result<RecoveryOutput> {
    let s2 = prior.part_variance();
    let re = bamp_recover(a, y.re(), prior.gamma0(), s2, settings)?;
    let im = bamp_recover(a, y.im(), prior.gamma0(), s2, settings)?;
    RecoveryOutput::from_parts(re, im)
}
