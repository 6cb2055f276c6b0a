//! Scalar MMSE denoiser for a real Bernoulli-Gaussian prior observed in
//! Gaussian noise, `u = x + v` with `v ~ N(0, β)` and
//! `x ~ γ δ(x) + (1 − γ) N(0, s²)`.
//!
//! The posterior is a two-branch mixture. The point mass at zero carries
//! weight `γ N(u; 0, β)`, the Gaussian branch `(1 − γ) N(u; 0, s² + β)` with
//! conditional mean `u s² / (s² + β)`. Writing `π` for the posterior
//! probability of the Gaussian branch and `g = s² / (s² + β)`:
//!
//! ```text
//! F(u)  = π g u
//! F'(u) = π g (1 + (1 − π) u² s² / (β (s² + β)))
//! ```
//!
//! `π` is evaluated as a logistic of its log-odds so that neither density
//! is ever formed explicitly.
//!
//! Two oracles live here as well: [`denoise_numeric`] integrates the
//! Gaussian branch by quadrature, and [`exact_mmse`] enumerates every
//! support of a small linear problem.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{BernoulliGaussianPrior, ComplexVector, RealMatrix};
use crate::quadrature;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Parameters of one scalar denoising problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiserParams {
    /// Effective noise variance `β`.
    pub beta: f64,
    /// Prior probability that the component is zero.
    pub gamma: f64,
    /// Variance of the active branch.
    pub s2: f64,
}

impl DenoiserParams {
    pub fn new(beta: f64, gamma: f64, s2: f64) -> Result<Self> {
        let p = Self { beta, gamma, s2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be positive, got {}",
                self.beta
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter(format!(
                "zero probability {} outside [0, 1]",
                self.gamma
            )));
        }
        if !(self.s2 > 0.0 && self.s2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "signal variance must be positive, got {}",
                self.s2
            )));
        }
        Ok(())
    }

    #[inline]
    fn gain(&self) -> f64 {
        self.s2 / (self.s2 + self.beta)
    }
}

#[inline]
pub(crate) fn ln_normal(u: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln() + u * u / var)
}

#[inline]
pub(crate) fn logistic(l: f64) -> f64 {
    if l >= 0.0 {
        1.0 / (1.0 + (-l).exp())
    } else {
        let e = l.exp();
        e / (1.0 + e)
    }
}

/// Posterior probabilities `(π, 1 − π)` that the component is active / zero.
#[inline]
fn branch_probabilities(u: f64, p: &DenoiserParams) -> (f64, f64) {
    if p.gamma >= 1.0 {
        return (0.0, 1.0);
    }
    if p.gamma <= 0.0 {
        return (1.0, 0.0);
    }
    let total = p.s2 + p.beta;
    let log_odds = ((1.0 - p.gamma) / p.gamma).ln() + 0.5 * (p.beta / total).ln()
        + 0.5 * u * u * p.s2 / (p.beta * total);
    (logistic(log_odds), logistic(-log_odds))
}

/// `(F(u), F'(u))` without argument checks; the solvers' inner loop.
#[inline]
pub(crate) fn mean_and_slope(u: f64, p: &DenoiserParams) -> (f64, f64) {
    let (active, zero) = branch_probabilities(u, p);
    let g = p.gain();
    let mean = active * g * u;
    let slope = if active == 0.0 {
        0.0
    } else {
        active * g * (1.0 + zero * u * u * p.s2 / (p.beta * (p.s2 + p.beta)))
    };
    (mean, slope)
}

fn check_input(u: f64, p: &DenoiserParams) -> Result<()> {
    if !u.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "denoiser input must be finite, got {u}"
        )));
    }
    p.validate()
}

/// Posterior probability that the component is active given `u`.
pub fn active_probability(u: f64, p: &DenoiserParams) -> Result<f64> {
    check_input(u, p)?;
    Ok(branch_probabilities(u, p).0)
}

/// Posterior mean `E[x | u]`.
pub fn denoise(u: f64, p: &DenoiserParams) -> Result<f64> {
    check_input(u, p)?;
    Ok(mean_and_slope(u, p).0)
}

/// Derivative of [`denoise`] with respect to `u`.
pub fn denoise_deriv(u: f64, p: &DenoiserParams) -> Result<f64> {
    check_input(u, p)?;
    Ok(mean_and_slope(u, p).1)
}

/// Absolute tolerance handed to the quadrature of the Gaussian branch.
const NUMERIC_TOL: f64 = 1e-13;

/// Posterior mean computed by integrating the Gaussian branch numerically
/// over `x ∈ [−10 s, 10 s]`. Independent of the closed form.
pub fn denoise_numeric(u: f64, p: &DenoiserParams) -> Result<f64> {
    check_input(u, p)?;
    if p.gamma >= 1.0 {
        return Ok(0.0);
    }
    let half_width = 10.0 * p.s2.sqrt();
    // log of likelihood × slab density, shifted by its value at the peak so
    // the integrand stays O(1)
    let log_joint = |x: f64| ln_normal(u - x, p.beta) + ln_normal(x, p.s2);
    let peak = (u * p.s2 / (p.s2 + p.beta)).clamp(-half_width, half_width);
    let shift = log_joint(peak);
    // the integrand is no wider than min(√β, s); breakpoints on that scale
    // keep the Kronrod nodes from stepping over the peak
    let width = p.beta.min(p.s2).sqrt();
    let breaks: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
        .iter()
        .flat_map(|&j| [peak - j * width, peak + j * width])
        .collect();
    let mass = quadrature::integrate_with_breaks(
        |x| (log_joint(x) - shift).exp(),
        -half_width,
        half_width,
        &breaks,
        NUMERIC_TOL,
    )?;
    let first_moment = quadrature::integrate_with_breaks(
        |x| x * (log_joint(x) - shift).exp(),
        -half_width,
        half_width,
        &breaks,
        NUMERIC_TOL,
    )?;
    let branch_mean = first_moment / mass;
    if p.gamma <= 0.0 {
        return Ok(branch_mean);
    }
    let log_zero = p.gamma.ln() + ln_normal(u, p.beta);
    let log_active = (1.0 - p.gamma).ln() + shift + mass.ln();
    let active = logistic(log_active - log_zero);
    Ok(active * branch_mean)
}

/// Largest problem [`exact_mmse`] will enumerate.
pub const EXACT_MMSE_MAX_N: usize = 14;

/// Per-support fit of one measurement part.
struct SupportFit {
    mean: Vec<f64>,
    /// Log evidence (noisy) or log density on the support's column span
    /// (noiseless).
    log_term: f64,
    residual_sq: f64,
}

fn fit_support(
    a: &RealMatrix,
    cols: &[usize],
    y: &[f64],
    s2: f64,
    sigma2: f64,
) -> Option<SupportFit> {
    let m = a.rows();
    let k = cols.len();
    let y_sq: f64 = y.iter().map(|v| v * v).sum();
    if k == 0 {
        let log_term = if sigma2 > 0.0 {
            -0.5 * (m as f64 * (LN_2PI + sigma2.ln()) + y_sq / sigma2)
        } else {
            0.0
        };
        return Some(SupportFit {
            mean: Vec::new(),
            log_term,
            residual_sq: y_sq,
        });
    }
    let a_s = DMatrix::from_fn(m, k, |r, c| a.get(r, cols[c]));
    let yv = DVector::from_column_slice(y);
    if sigma2 == 0.0 && k > m {
        return fit_wide_support(&a_s, &yv, s2);
    }
    let mut gram = a_s.transpose() * &a_s;
    if sigma2 > 0.0 {
        for i in 0..k {
            gram[(i, i)] += sigma2 / s2;
        }
    }
    let chol = gram.clone().cholesky()?;
    let l = chol.l();
    let log_det: f64 = (0..k).map(|i| 2.0 * l[(i, i)].ln()).sum();
    if sigma2 == 0.0 {
        // reject numerically rank-deficient supports
        let max_diag = (0..k).map(|i| gram[(i, i)]).fold(0.0, f64::max);
        let min_pivot = (0..k).map(|i| l[(i, i)].powi(2)).fold(f64::INFINITY, f64::min);
        if min_pivot <= 1e-10 * max_diag {
            return None;
        }
    }
    let mean = chol.solve(&(a_s.transpose() * &yv));
    let resid = &yv - &a_s * &mean;
    let residual_sq = resid.norm_squared();
    let log_term = if sigma2 > 0.0 {
        let quad = yv.dot(&resid) / sigma2;
        -0.5 * (m as f64 * LN_2PI
            + (m as f64 - k as f64) * sigma2.ln()
            + k as f64 * s2.ln()
            + log_det
            + quad)
    } else {
        -0.5 * (log_det + k as f64 * (LN_2PI + s2.ln()) + mean.norm_squared() / s2)
    };
    Some(SupportFit {
        mean: mean.iter().copied().collect(),
        log_term,
        residual_sq,
    })
}

/// Noiseless fit of a support with more columns than rows: `y` has density
/// `N(0, s² A_S A_Sᵀ)` and the conditional mean is `A_Sᵀ (A_S A_Sᵀ)⁻¹ y`.
fn fit_wide_support(a_s: &DMatrix<f64>, yv: &DVector<f64>, s2: f64) -> Option<SupportFit> {
    let m = a_s.nrows();
    let outer = a_s * a_s.transpose();
    let chol = outer.clone().cholesky()?;
    let l = chol.l();
    let max_diag = (0..m).map(|i| outer[(i, i)]).fold(0.0, f64::max);
    if (0..m).any(|i| l[(i, i)].powi(2) <= 1e-10 * max_diag) {
        return None;
    }
    let log_det: f64 = (0..m).map(|i| 2.0 * l[(i, i)].ln()).sum();
    let alpha = chol.solve(yv);
    let log_term = -0.5 * (m as f64 * (LN_2PI + s2.ln()) + log_det + yv.dot(&alpha) / s2);
    Some(SupportFit {
        mean: (a_s.transpose() * alpha).iter().copied().collect(),
        log_term,
        residual_sq: 0.0,
    })
}

/// Exact posterior mean by support enumeration, with all `parts` sharing one
/// support (one part gives the real-valued problem, two give the complex
/// problem with joint sparsity). `sigma2` is the per-part noise variance.
fn enumerate_posterior_mean(
    a: &RealMatrix,
    parts: &[&[f64]],
    gamma0: &[f64],
    s2: f64,
    sigma2: f64,
) -> Result<Vec<Vec<f64>>> {
    let n = a.cols();
    if n > EXACT_MMSE_MAX_N {
        return Err(Error::InvalidParameter(format!(
            "exact MMSE enumerates 2^N supports; N = {n} exceeds {EXACT_MMSE_MAX_N}"
        )));
    }
    if gamma0.len() != n {
        return Err(Error::Dimension(format!(
            "prior has {} components but A has {n} columns",
            gamma0.len()
        )));
    }
    if let Some(part) = parts.iter().find(|p| p.len() != a.rows()) {
        return Err(Error::Dimension(format!(
            "A has {} rows but the measurement has length {}",
            a.rows(),
            part.len()
        )));
    }
    if !(s2 > 0.0) || !(sigma2 >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "variances must be positive (signal {s2}) and non-negative (noise {sigma2})"
        )));
    }
    let energy: Vec<f64> = parts.iter().map(|p| p.iter().map(|v| v * v).sum()).collect();

    // (support size, log weight, support columns, per-part means)
    let mut candidates: Vec<(usize, f64, Vec<usize>, Vec<Vec<f64>>)> = Vec::new();
    for mask in 0u32..(1u32 << n) {
        let cols: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let log_prior: f64 = (0..n)
            .map(|i| {
                if mask & (1 << i) != 0 {
                    (1.0 - gamma0[i]).ln()
                } else {
                    gamma0[i].ln()
                }
            })
            .sum();
        if log_prior == f64::NEG_INFINITY {
            continue;
        }
        let mut log_w = log_prior;
        let mut means = Vec::with_capacity(parts.len());
        let mut usable = true;
        for (part, &e) in parts.iter().zip(&energy) {
            match fit_support(a, &cols, part, s2, sigma2) {
                Some(fit) => {
                    // noiseless: y must lie in the span of the support
                    if sigma2 == 0.0 && fit.residual_sq > 1e-20 * e.max(f64::MIN_POSITIVE) {
                        usable = false;
                        break;
                    }
                    log_w += fit.log_term;
                    means.push(fit.mean);
                }
                None => {
                    usable = false;
                    break;
                }
            }
        }
        if usable {
            candidates.push((cols.len(), log_w, cols, means));
        }
    }
    if sigma2 == 0.0 {
        // the noiseless posterior concentrates on the smallest consistent
        // supports; once those reach M every larger support is consistent
        // too and carries a finite density of the same order
        let m = a.rows();
        let k_min = candidates.iter().map(|c| c.0).min().ok_or_else(|| {
            Error::InvalidParameter("no support is consistent with the measurement".into())
        })?;
        if k_min < m {
            candidates.retain(|c| c.0 == k_min);
        }
    }
    let max_log = candidates
        .iter()
        .map(|c| c.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut out = vec![vec![0.0; n]; parts.len()];
    for (_, log_w, cols, means) in &candidates {
        let w = (log_w - max_log).exp();
        total += w;
        for (o, mean) in out.iter_mut().zip(means) {
            for (&c, &v) in cols.iter().zip(mean) {
                o[c] += w * v;
            }
        }
    }
    for o in &mut out {
        for v in o.iter_mut() {
            *v /= total;
        }
    }
    Ok(out)
}

/// Exact MMSE estimate of one real part `y = A x + w` under the per-part
/// Bernoulli-Gaussian prior (variance `σ_x²/2`), by enumerating all `2^N`
/// supports. `sigma_w2_part` is the noise variance of this part; zero gives
/// the noiseless limit.
pub fn exact_mmse(
    a: &RealMatrix,
    y_part: &[f64],
    prior: &BernoulliGaussianPrior,
    sigma_w2_part: f64,
) -> Result<Vec<f64>> {
    let mut out = enumerate_posterior_mean(
        a,
        &[y_part],
        prior.gamma0(),
        prior.part_variance(),
        sigma_w2_part,
    )?;
    Ok(out.remove(0))
}

/// Exact MMSE estimate of a complex signal whose real and imaginary parts
/// share one support. `sigma_w2` is the complex noise variance.
pub fn exact_mmse_joint(
    a: &RealMatrix,
    y: &ComplexVector,
    prior: &BernoulliGaussianPrior,
    sigma_w2: f64,
) -> Result<ComplexVector> {
    let mut out = enumerate_posterior_mean(
        a,
        &[y.re(), y.im()],
        prior.gamma0(),
        prior.part_variance(),
        sigma_w2 / 2.0,
    )?;
    let im = out.pop().unwrap_or_default();
    let re = out.pop().unwrap_or_default();
    ComplexVector::new(re, im)
}
