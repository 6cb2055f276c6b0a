//! Compressed-sensing recovery of complex Bernoulli-Gaussian signals measured
//! through a real matrix: soft-thresholding AMP, Bayesian AMP run separately
//! on the real and imaginary parts (cBAMP), and complex BOSSAMP, which
//! couples the two parts through a shared activity variable. Support
//! detection and a Monte-Carlo experiment harness sit on top.

pub mod amp;
pub mod bamp;
pub mod bossamp;
pub mod denoiser;
pub mod error;
pub mod experiments;
pub mod instance_file;
pub mod model;
pub mod quadrature;
pub mod recovery;
pub mod support;
pub mod validation;

pub use error::{Error, Result};
pub use model::{BernoulliGaussianPrior, ComplexVector, ProblemInstance, RealMatrix};
pub use recovery::{LikelihoodVariant, PartResult, PartVariance, RecoveryOutput, RecoverySettings};
