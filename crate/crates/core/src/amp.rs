//! Soft-thresholding AMP with the threshold `λ √β` and the sparsity-based
//! λ heuristic. Complex problems run one chain per part.

use crate::error::{Error, Result};
use crate::model::{norm_sq, ComplexVector, RealMatrix};
use crate::recovery::{PartResult, RecoveryOutput, RecoverySettings};

/// `sign(u) · max(|u| − θ, 0)`
pub fn soft_threshold(u: f64, theta: f64) -> Result<f64> {
    if !(theta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold must be non-negative, got {theta}"
        )));
    }
    Ok(shrink(u, theta))
}

#[inline]
fn shrink(u: f64, theta: f64) -> f64 {
    if u > theta {
        u - theta
    } else if u < -theta {
        u + theta
    } else {
        0.0
    }
}

/// `λ = 2.678 K^(−0.181)`
pub fn lambda_heuristic(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "the λ heuristic needs a sparsity K ≥ 1".into(),
        ));
    }
    Ok(2.678 * (k as f64).powf(-0.181))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmpConfig {
    /// Threshold multiplier; the threshold is `λ √β`.
    pub lambda: f64,
    pub settings: RecoverySettings,
}

impl AmpConfig {
    pub fn with_lambda(lambda: f64, settings: RecoverySettings) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "λ must be positive, got {lambda}"
            )));
        }
        settings.validate()?;
        Ok(Self { lambda, settings })
    }

    /// λ from the heuristic for the (complex) sparsity `k`.
    pub fn from_sparsity(k: usize, settings: RecoverySettings) -> Result<Self> {
        Self::with_lambda(lambda_heuristic(k)?, settings)
    }
}

/// One AMP iteration's bookkeeping, exposed for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct AmpState {
    pub x_hat: Vec<f64>,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    pub beta: f64,
    pub t: usize,
    ax: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmpStep {
    /// `‖x̂‖₀ / M`
    pub onsager: f64,
    pub active: usize,
    /// `‖z⁽ᵗ⁾ − z⁽ᵗ⁻¹⁾‖² / ‖z⁽ᵗ⁻¹⁾‖²`
    pub rel_change: f64,
}

impl AmpState {
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

    pub fn step(&mut self, a: &RealMatrix, y: &[f64], lambda: f64, beta_floor: f64) -> Result<AmpStep> {
        let m = a.rows() as f64;
        self.t += 1;
        a.tr_mul_vec_into(&self.z, &mut self.u);
        for (u, x) in self.u.iter_mut().zip(&self.x_hat) {
            *u += x;
        }
        let z_energy = norm_sq(&self.z);
        self.beta = (z_energy / m).max(beta_floor);
        let theta = lambda * self.beta.sqrt();
        let mut active = 0usize;
        for (x, &u) in self.x_hat.iter_mut().zip(&self.u) {
            *x = shrink(u, theta);
            if *x != 0.0 {
                active += 1;
            }
        }
        let onsager = active as f64 / m;
        a.mul_vec_into(&self.x_hat, &mut self.ax);
        let mut diff = 0.0;
        for ((z, &yi), &ax) in self.z.iter_mut().zip(y).zip(&self.ax) {
            let next = yi - ax + onsager * *z;
            diff += (next - *z).powi(2);
            *z = next;
        }
        if !diff.is_finite() || self.x_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "AMP iterate",
                iteration: self.t,
            });
        }
        Ok(AmpStep {
            onsager,
            active,
            rel_change: relative_change(diff, z_energy),
        })
    }
}

/// `diff / prev` with `0/0 = 0`.
pub(crate) fn relative_change(diff: f64, prev: f64) -> f64 {
    if prev > 0.0 {
        diff / prev
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Real-valued AMP recovery of `y = A x + w`.
pub fn amp_recover(a: &RealMatrix, y_part: &[f64], cfg: &AmpConfig) -> Result<PartResult> {
    if y_part.len() != a.rows() {
        return Err(Error::Dimension(format!(
            "A has {} rows but y has length {}",
            a.rows(),
            y_part.len()
        )));
    }
    cfg.settings.validate()?;
    let s = &cfg.settings;
    let initial = norm_sq(y_part);
    let mut state = AmpState::new(a.cols(), y_part);
    let (mut converged, mut diverged) = (false, false);
    loop {
        let step = state.step(a, y_part, cfg.lambda, s.beta_floor)?;
        if initial > 0.0 && norm_sq(&state.z) > s.divergence_factor * initial {
            diverged = true;
            break;
        }
        if step.rel_change <= s.eps_tol {
            converged = true;
            break;
        }
        if state.t >= s.t_max {
            break;
        }
    }
    Ok(PartResult {
        x_hat: state.x_hat,
        u: state.u,
        beta: state.beta,
        gamma: Vec::new(),
        iterations: state.t,
        converged,
        diverged,
    })
}

/// AMP on the real and imaginary parts independently.
pub fn camp_recover(a: &RealMatrix, y: &ComplexVector, cfg: &AmpConfig) -> Result<RecoveryOutput> {
    let re = amp_recover(a, y.re(), cfg)?;
    let im = amp_recover(a, y.im(), cfg)?;
    RecoveryOutput::from_parts(re, im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gen_matrix, gen_signal_exact_k, measure, nmse};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn soft_threshold_values() {
        assert_eq!(soft_threshold(2.0, 1.0).unwrap(), 1.0);
        assert_eq!(soft_threshold(-0.5, 1.0).unwrap(), 0.0);
        assert_eq!(soft_threshold(0.3, 0.0).unwrap(), 0.3);
        assert_eq!(soft_threshold(-3.0, 1.0).unwrap(), -2.0);
        assert!(soft_threshold(1.0, -0.1).is_err());
    }

    #[test]
    fn lambda_values() {
        assert_eq!(lambda_heuristic(1).unwrap(), 2.678);
        // 2.678 · exp(−0.181 · ln 20) = 1.5569…
        let l20 = lambda_heuristic(20).unwrap();
        assert!((l20 - 1.5569).abs() < 1e-3, "{l20}");
        assert!(lambda_heuristic(0).is_err());
        for k in 1..200 {
            assert!(lambda_heuristic(k).unwrap() > lambda_heuristic(k + 1).unwrap());
        }
    }

    proptest! {
        #[test]
        fn threshold_scale_covariance(u in -10.0f64..10.0, t in 0.0f64..5.0, c in 0.01f64..100.0) {
            let lhs = soft_threshold(c * u, c * t).unwrap();
            let rhs = c * soft_threshold(u, t).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }

    fn setup(m: usize, n: usize, k: usize, seed: u64) -> (RealMatrix, ComplexVector, ComplexVector) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = gen_matrix(m, n, &mut rng).unwrap();
        let x = gen_signal_exact_k(n, k, 1.0, &mut rng).unwrap();
        let y = measure(&a, &x, &ComplexVector::zeros(m)).unwrap();
        (a, x, y)
    }

    #[test]
    fn zero_measurement_converges_immediately() {
        let (a, _, _) = setup(10, 20, 2, 1);
        let cfg = AmpConfig::from_sparsity(2, RecoverySettings::default()).unwrap();
        let r = amp_recover(&a, &[0.0; 10], &cfg).unwrap();
        assert!(r.x_hat.iter().all(|&v| v == 0.0));
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
    }

    #[test]
    fn onsager_coefficient_counts_active_set() {
        let (a, _, y) = setup(40, 100, 8, 2);
        let mut st = AmpState::new(100, y.re());
        for _ in 0..5 {
            let step = st.step(&a, y.re(), 1.5, 1e-12).unwrap();
            let nnz = st.x_hat.iter().filter(|&&v| v != 0.0).count();
            assert_eq!(step.active, nnz);
            assert_eq!(step.onsager, nnz as f64 / 40.0);
        }
    }

    #[test]
    fn infinite_lambda_gives_zero() {
        let (a, _, y) = setup(30, 60, 5, 3);
        let cfg = AmpConfig::with_lambda(f64::INFINITY, RecoverySettings::default()).unwrap();
        let mut st = AmpState::new(60, y.re());
        st.step(&a, y.re(), cfg.lambda, 1e-12).unwrap();
        assert!(st.x_hat.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn easy_noiseless_recovery() {
        // N=256, M=192, K=8: NMSE < 1e-4 in at least 90% of 50 trials
        let mut ok = 0;
        for seed in 0..50 {
            let (a, x, y) = setup(192, 256, 8, 1000 + seed);
            let cfg = AmpConfig::from_sparsity(8, RecoverySettings::default()).unwrap();
            let out = camp_recover(&a, &y, &cfg).unwrap();
            if nmse(&out.x_hat, &x).unwrap() < 1e-4 {
                ok += 1;
            }
        }
        assert!(ok >= 45, "{ok}/50 successes");
    }

    #[test]
    fn deterministic_and_part_independent() {
        let (a, x, _) = setup(60, 128, 5, 4);
        let cfg = AmpConfig::from_sparsity(5, RecoverySettings::default()).unwrap();
        // purely real measurement: the imaginary chain sees y = 0
        let xr = ComplexVector::new(x.re().to_vec(), vec![0.0; 128]).unwrap();
        let y = measure(&a, &xr, &ComplexVector::zeros(60)).unwrap();
        let out1 = camp_recover(&a, &y, &cfg).unwrap();
        let out2 = camp_recover(&a, &y, &cfg).unwrap();
        assert_eq!(out1, out2);
        assert!(out1.im.x_hat.iter().all(|&v| v == 0.0));

        // purely imaginary signal: the real estimate is negligible
        let xi = ComplexVector::new(vec![0.0; 128], x.im().to_vec()).unwrap();
        let y = measure(&a, &xi, &ComplexVector::zeros(60)).unwrap();
        let out = camp_recover(&a, &y, &cfg).unwrap();
        assert!(out.re.x_hat.iter().all(|&v| v == 0.0));
        assert!(nmse(&out.x_hat, &xi).unwrap() < 1e-4);
    }

    #[test]
    fn divergence_flag_propagates() {
        let re = PartResult {
            x_hat: vec![0.0],
            u: vec![0.0],
            beta: 1.0,
            gamma: vec![],
            iterations: 3,
            converged: false,
            diverged: true,
        };
        let out = RecoveryOutput::from_parts(re.clone(), re).unwrap();
        assert!(out.diverged());
        assert!(!out.converged());
    }
}
