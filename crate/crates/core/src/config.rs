//! Run configuration shared by the command line and the check suites.

use crate::error::{Error, Result};
use crate::geometry::{GridSpec, WormParams};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

/// Default thresholds, keyed by check name.
pub const DEFAULT_TOLERANCES: [(&str, f64); 14] = [
    ("parseval", 1e-6),
    ("nu_transform", 1e-10),
    ("reproducing", 1e-4),
    ("kernel_symmetry", 1e-10),
    ("idempotence", 1e-3),
    ("self_adjointness", 1e-3),
    ("refinement_gain", 2.0),
    ("fixed_point", 1e-2),
    ("rayleigh_excess", 2e-3),
    ("refinement_change", 0.05),
    ("blow_up_band", 3.0),
    ("derivative_display", 1e-6),
    ("sobolev", 1e-4),
    ("sobolev_order", 1.0),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub beta: f64,
    /// Half-length of the x window.
    #[serde(rename = "L")]
    pub l: f64,
    pub n_x: usize,
    pub n_v: usize,
    pub n_theta: usize,
    pub n_t: usize,
    /// Half-width of the frequency grid for strip densities.
    pub xi_max: f64,
    pub j_max: i64,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            beta: PI,
            l: 20.0,
            n_x: 512,
            n_v: 64,
            n_theta: 32,
            n_t: 64,
            xi_max: 12.0,
            j_max: 64,
            tolerances: BTreeMap::new(),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        WormParams::new(self.beta)?;
        self.grid_spec().validate()?;
        if self.n_t == 0 || self.j_max < 1 || !(self.xi_max > 0.0) {
            return Err(Error::Config("n_t, j_max and xi_max must be positive".into()));
        }
        for (k, v) in &self.tolerances {
            if !DEFAULT_TOLERANCES.iter().any(|(name, _)| name == k) {
                return Err(Error::Config(format!("unknown tolerance '{k}'")));
            }
            if !(*v > 0.0) {
                return Err(Error::Config(format!("tolerance '{k}' must be positive")));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Result<WormParams> {
        WormParams::new(self.beta)
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec { l: self.l, n_x: self.n_x, n_v: self.n_v, n_theta: self.n_theta }
    }

    /// Configured threshold for `name`, falling back to the default table.
    pub fn tolerance(&self, name: &str) -> f64 {
        self.tolerances.get(name).copied().unwrap_or_else(|| {
            DEFAULT_TOLERANCES
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .unwrap_or_else(|| panic!("no default tolerance named {name}"))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
        assert_eq!(cfg.tolerance("idempotence"), 1e-3);
    }

    #[test]
    fn partial_files_override_defaults() {
        let cfg = RunConfig::from_toml_str("beta = 4.0\nL = 10.0\nseed = 9\n[tolerances]\nparseval = 1e-5\n").unwrap();
        assert_eq!(cfg.beta, 4.0);
        assert_eq!(cfg.l, 10.0);
        assert_eq!(cfg.n_x, 512);
        assert_eq!(cfg.tolerance("parseval"), 1e-5);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_toml_str("beta = 1.0").is_err());
        assert!(RunConfig::from_toml_str("n_x = 0").is_err());
        assert!(RunConfig::from_toml_str("bogus = 1").is_err());
        assert!(RunConfig::from_toml_str("[tolerances]\nnope = 1.0").is_err());
    }
}
