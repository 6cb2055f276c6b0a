//! Optional TOML config file. Every key is optional; command-line flags win
//! over file values, and file values win over the scale preset.

use std::path::Path;

use bossamp::{LikelihoodVariant, PartVariance, RecoverySettings};
use serde::Deserialize;

use crate::error::CliError;
use crate::output::read_to_string;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub nmse: NmseSection,
    #[serde(default)]
    pub settings: SettingsSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: Option<usize>,
    pub trials: Option<usize>,
    pub points: Option<usize>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub threshold: Option<f64>,
    pub level: Option<f64>,
    pub algorithms: Option<Vec<String>>,
    pub detectors: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmseSection {
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub m: Option<Vec<usize>>,
    pub snr_db: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub algorithms: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingsSection {
    pub t_max: Option<usize>,
    pub eps_tol: Option<f64>,
    pub beta_floor: Option<f64>,
    pub gamma_clamp: Option<f64>,
    pub divergence_factor: Option<f64>,
    pub likelihood_variant: Option<String>,
    pub part_variance: Option<String>,
}

impl SettingsSection {
    pub fn apply(&self, s: &mut RecoverySettings) -> Result<(), CliError> {
        if let Some(v) = self.t_max {
            s.t_max = v;
        }
        if let Some(v) = self.eps_tol {
            s.eps_tol = v;
        }
        if let Some(v) = self.beta_floor {
            s.beta_floor = v;
        }
        if let Some(v) = self.gamma_clamp {
            s.gamma_clamp = v;
        }
        if let Some(v) = self.divergence_factor {
            s.divergence_factor = v;
        }
        if let Some(v) = &self.likelihood_variant {
            s.likelihood_variant = v.parse::<LikelihoodVariant>()?;
        }
        if let Some(v) = &self.part_variance {
            s.part_variance = v.parse::<PartVariance>()?;
        }
        Ok(())
    }
}

pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = read_to_string(p)?;
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settings_section_applies_over_defaults() {
        let cfg: FileConfig = toml::from_str(
            "seed = 3\n[settings]\nt_max = 40\nlikelihood_variant = \"printed-cross-beta\"\npart_variance = \"full\"\n",
        )
        .unwrap();
        let mut s = RecoverySettings::default();
        cfg.settings.apply(&mut s).unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(s.t_max, 40);
        assert_eq!(s.likelihood_variant, LikelihoodVariant::PrintedCrossBeta);
        assert_eq!(s.part_variance, PartVariance::Full);
        assert_eq!(s.eps_tol, RecoverySettings::default().eps_tol);
    }

    #[test]
    fn unknown_keys_and_bad_names_are_usage_errors() {
        assert!(toml::from_str::<FileConfig>("[grid]\nsize = 3\n").is_err());
        let cfg: FileConfig = toml::from_str("[settings]\npart_variance = \"double\"\n").unwrap();
        let err = cfg.settings.apply(&mut RecoverySettings::default()).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
