//! Settings shared by the iterative solvers and the result types they return.

use crate::error::{Error, Result};
use crate::model::ComplexVector;

/// Which effective-noise variance enters the activity likelihood of one part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LikelihoodVariant {
    /// Pair each part's `u` with its own `β` (the algorithm listing).
    #[default]
    OwnBeta,
    /// Pair each part's `u` with the other part's `β` (the printed formula).
    PrintedCrossBeta,
}

impl LikelihoodVariant {
    pub fn name(self) -> &'static str {
        match self {
            LikelihoodVariant::OwnBeta => "own-beta",
            LikelihoodVariant::PrintedCrossBeta => "printed-cross-beta",
        }
    }
}

impl std::str::FromStr for LikelihoodVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "own-beta" => Ok(Self::OwnBeta),
            "printed-cross-beta" => Ok(Self::PrintedCrossBeta),
            other => Err(Error::InvalidParameter(format!(
                "unknown likelihood variant '{other}'"
            ))),
        }
    }
}

/// Signal variance used in the activity likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PartVariance {
    /// `σ_x² / 2`, the variance of one part of an active component.
    #[default]
    Half,
    /// `σ_x²`, as the likelihood formula is printed.
    Full,
}

impl PartVariance {
    pub fn name(self) -> &'static str {
        match self {
            PartVariance::Half => "half",
            PartVariance::Full => "full",
        }
    }

    pub fn variance(self, sigma_x2: f64) -> f64 {
        match self {
            PartVariance::Half => sigma_x2 / 2.0,
            PartVariance::Full => sigma_x2,
        }
    }
}

impl std::str::FromStr for PartVariance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half" => Ok(Self::Half),
            "full" => Ok(Self::Full),
            other => Err(Error::InvalidParameter(format!(
                "unknown part variance '{other}'"
            ))),
        }
    }
}

/// Everything the iterations leave to the caller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoverySettings {
    pub t_max: usize,
    /// Relative squared residual change below which the loop stops.
    pub eps_tol: f64,
    pub beta_floor: f64,
    pub gamma_clamp: f64,
    /// A run is flagged diverged once `‖z‖²` exceeds this multiple of `‖y‖²`.
    pub divergence_factor: f64,
    pub likelihood_variant: LikelihoodVariant,
    pub part_variance: PartVariance,
    /// Exchange activity likelihoods between the two parts (cBOSSAMP only).
    pub exchange: bool,
}

impl Default for RecoverySettings {
    fn default() -> Self {
        Self {
            t_max: 100,
            eps_tol: 1e-4,
            beta_floor: 1e-12,
            gamma_clamp: 1e-12,
            divergence_factor: 1e6,
            likelihood_variant: LikelihoodVariant::OwnBeta,
            part_variance: PartVariance::Half,
            exchange: true,
        }
    }
}

impl RecoverySettings {
    pub fn validate(&self) -> Result<()> {
        if self.t_max < 1 {
            return Err(Error::InvalidParameter("t_max must be at least 1".into()));
        }
        if !(self.eps_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "eps_tol must be positive, got {}",
                self.eps_tol
            )));
        }
        if !(self.beta_floor > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta_floor must be positive, got {}",
                self.beta_floor
            )));
        }
        if !(self.gamma_clamp > 0.0 && self.gamma_clamp < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "gamma_clamp must lie in (0, 0.5), got {}",
                self.gamma_clamp
            )));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "divergence_factor must exceed 1, got {}",
                self.divergence_factor
            )));
        }
        Ok(())
    }
}

/// Result of one real-valued recovery chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PartResult {
    pub x_hat: Vec<f64>,
    /// Pseudo-data `u` from the last iteration.
    pub u: Vec<f64>,
    /// Effective noise variance paired with `u`.
    pub beta: f64,
    /// Working zero probabilities at exit (the prior for non-exchanging solvers).
    pub gamma: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
}

/// Result of a complex recovery: both parts plus the combined estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryOutput {
    pub x_hat: ComplexVector,
    pub re: PartResult,
    pub im: PartResult,
}

impl RecoveryOutput {
    pub fn from_parts(re: PartResult, im: PartResult) -> Result<Self> {
        let x_hat = ComplexVector::new(re.x_hat.clone(), im.x_hat.clone())?;
        Ok(Self { x_hat, re, im })
    }

    pub fn iterations(&self) -> usize {
        self.re.iterations.max(self.im.iterations)
    }

    pub fn converged(&self) -> bool {
        self.re.converged && self.im.converged
    }

    pub fn diverged(&self) -> bool {
        self.re.diverged || self.im.diverged
    }

    pub fn part(&self, p: usize) -> &PartResult {
        match p {
            0 => &self.re,
            1 => &self.im,
            _ => panic!("complex recoveries have two parts, got index {p}"),
        }
    }
}
