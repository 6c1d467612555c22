//! Experiment configuration: typed TOML with embedded defaults and calibrated constants.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constants fixed by a calibration run and asserted by later runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockedConstants {
    /// Bootstrap constant `B`.
    pub b: Option<f64>,
    /// Cauchy constant `C′`.
    pub c_prime: Option<f64>,
    /// Final-decade `max/min` of `‖u‖²/log t`.
    pub ratio_band: Option<f64>,
    /// Selected phase index of the trajectory scan.
    pub phase: Option<usize>,
    /// `sup |t − s|/(log s)²`.
    pub b0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub epsilon: f64,
    pub n_modes: usize,
    pub quad_order: usize,
    pub s0: f64,
    /// Terminal times of the backward runs.
    pub m_list: Vec<f64>,
    /// Horizon of the modulation trajectory in `s`.
    pub s_end: f64,
    /// Horizon of the growth report in `t`; `None` runs to the end of the trajectory.
    pub t_max: Option<f64>,
    pub n_phases: usize,
    pub ds: f64,
    pub output_dir: PathBuf,
    pub tolerances: BTreeMap<String, f64>,
    pub locked_constants: LockedConstants,
}

/// Named tolerances and their defaults.
pub const DEFAULT_TOLERANCES: &[(&str, f64)] = &[
    ("soliton_residual", 1e-10),
    ("oracle_sup", 1e-6),
    ("mu_gap", 0.3),
    ("mu0", 1e-6),
    ("hm_kernel", 1e-8),
    ("fd_relative", 0.05),
    ("energy_relative", 1e-8),
    ("generator", 1e-5),
    ("e_over_log_lo", 0.5),
    ("e_over_log_hi", 2.0),
    ("bound_uniformity", 2.0),
    ("l2_drift_per_100", 1e-7),
    ("quad_identity", 1e-8),
    ("reversal_h3", 1e-5),
    ("bootstrap_factor", 1.5),
    ("bootstrap_abort", 10.0),
    ("cauchy_factor", 1.5),
    ("ratio_band", 4.0),
    ("remainder_fraction", 0.05),
    ("v_decay", 5.0),
    ("regression_relative", 1e-6),
];

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            n_modes: 128,
            quad_order: 512,
            s0: 20.0,
            m_list: vec![400.0, 800.0, 1600.0],
            s_end: 1e4,
            t_max: None,
            n_phases: 32,
            ds: 1e-2,
            output_dir: PathBuf::from("out"),
            tolerances: DEFAULT_TOLERANCES.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            locked_constants: LockedConstants::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        // Partial tolerance maps keep the remaining defaults.
        for (k, v) in DEFAULT_TOLERANCES {
            cfg.tolerances.entry(k.to_string()).or_insert(*v);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn tol(&self, name: &str) -> f64 {
        self.tolerances
            .get(name)
            .copied()
            .or_else(|| DEFAULT_TOLERANCES.iter().find(|(k, _)| *k == name).map(|(_, v)| *v))
            .unwrap_or_else(|| panic!("unknown tolerance {name}"))
    }

    pub fn lambda(&self) -> f64 {
        2.0 + self.epsilon
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.epsilon > 0.0) {
            return Err(Error::NoSoliton { lambda: self.lambda() });
        }
        if self.n_modes == 0 {
            return bad("n_modes must be positive".into());
        }
        if self.quad_order < 2 * self.n_modes {
            return bad(format!("quad_order {} < 2·n_modes = {}", self.quad_order, 2 * self.n_modes));
        }
        if !(self.s0 > 1.0) {
            return bad(format!("s0 must exceed 1, got {}", self.s0));
        }
        if self.m_list.windows(2).any(|p| !(p[1] > p[0])) {
            return bad("m_list must be strictly increasing".into());
        }
        if let Some(&m) = self.m_list.first() {
            if !(m > self.s0) {
                return bad(format!("every M must exceed s0 = {}", self.s0));
            }
        }
        if !(self.s_end > self.s0) {
            return bad(format!("s_end {} must exceed s0 {}", self.s_end, self.s0));
        }
        if self.n_phases == 0 {
            return bad("n_phases must be positive".into());
        }
        if !(self.ds > 0.0) {
            return bad("ds must be positive".into());
        }
        if let Some(t) = self.t_max {
            if !(t > self.s0) {
                return bad(format!("t_max {t} must exceed t(s0) = {}", self.s0));
            }
        }
        for (k, v) in &self.tolerances {
            if !DEFAULT_TOLERANCES.iter().any(|(d, _)| d == k) {
                return bad(format!("unknown tolerance '{k}'"));
            }
            if !(v.is_finite() && *v > 0.0) {
                return bad(format!("tolerance '{k}' must be positive"));
            }
        }
        Ok(())
    }

    /// Directory for artifacts, which must already exist.
    pub fn output_dir_checked(&self) -> Result<&Path> {
        let p = self.output_dir.as_path();
        if !p.is_dir() {
            return Err(Error::Config(format!("output directory {} does not exist", p.display())));
        }
        Ok(p)
    }
}
