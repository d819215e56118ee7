use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::allocator::OptimizerConfig;
use crate::channel::{CouplingKind, PortGeometry};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SnrSweep,
    PortSweep,
    LosCompare,
    Allocate,
    Validate,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SnrSweep => "snr-sweep",
            ExperimentKind::PortSweep => "port-sweep",
            ExperimentKind::LosCompare => "los-compare",
            ExperimentKind::Allocate => "allocate",
            ExperimentKind::Validate => "validate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub kind: CouplingKind,
    /// Rician K-factor in dB; for `los-compare` this is the LOS level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_factor_db: Option<f64>,
    /// Coupling model document to use instead of building one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_path: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Baselines {
    /// Conventional array with half-wavelength element spacing.
    pub fixed: bool,
    /// Element count of the fixed array; defaults to `floor(2W) + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_count: Option<usize>,
    /// Uncorrelated arrays, one curve per entry of `iid_counts`.
    pub iid: bool,
    #[serde(default)]
    pub iid_counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub geometry: PortGeometry,
    pub coupling: CouplingSpec,
    #[serde(default)]
    pub snr_grid_db: Vec<f64>,
    #[serde(default)]
    pub port_grid: Vec<usize>,
    pub n_trials: usize,
    pub seed: u64,
    pub baselines: Baselines,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

fn grid(start: f64, step: f64, stop: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

impl ExperimentConfig {
    /// Built-in settings for each experiment kind.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let mut cfg = Self {
            kind,
            geometry: PortGeometry {
                nt: 8,
                nr: 8,
                wt: 1.0,
                wr: 1.0,
            },
            coupling: CouplingSpec {
                kind: CouplingKind::SeparableRayleigh,
                k_factor_db: None,
                model_path: None,
            },
            snr_grid_db: grid(-10.0, 5.0, 30.0),
            port_grid: Vec::new(),
            n_trials: 100_000,
            seed: 1,
            baselines: Baselines {
                fixed: true,
                fixed_count: None,
                iid: false,
                iid_counts: Vec::new(),
            },
            output_path: None,
            optimizer: OptimizerConfig::default(),
        };
        match kind {
            ExperimentKind::SnrSweep => {}
            ExperimentKind::PortSweep => {
                cfg.snr_grid_db = vec![20.0];
                cfg.port_grid = vec![2, 4, 8, 16];
                cfg.baselines.iid = true;
                cfg.baselines.iid_counts = vec![5, 10, 15, 20, 25];
            }
            ExperimentKind::LosCompare => {
                cfg.coupling.k_factor_db = Some(6.0);
                cfg.baselines.iid = true;
                cfg.baselines.iid_counts = vec![8];
            }
            ExperimentKind::Allocate => {
                cfg.snr_grid_db = grid(-30.0, 10.0, 40.0);
                cfg.baselines.fixed = false;
            }
            ExperimentKind::Validate => {
                cfg.snr_grid_db = Vec::new();
                cfg.n_trials = 200_000;
                cfg.baselines.fixed = false;
            }
        }
        cfg
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Element count of the fixed half-wavelength baseline.
    pub fn fixed_count(&self) -> usize {
        self.baselines
            .fixed_count
            .unwrap_or((2.0 * self.geometry.wt).floor() as usize + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.geometry.validate()?;
        self.optimizer.validate()?;
        if self.n_trials == 0 {
            return bad("n_trials must be at least 1".into());
        }
        if self.snr_grid_db.iter().any(|v| !v.is_finite()) {
            return bad("SNR grid values must be finite".into());
        }
        let needs_snr = !matches!(self.kind, ExperimentKind::Validate);
        if needs_snr && self.snr_grid_db.is_empty() {
            return bad(format!("{} needs a nonempty SNR grid", self.kind.name()));
        }
        match self.kind {
            ExperimentKind::PortSweep => {
                if self.snr_grid_db.len() != 1 {
                    return bad("port-sweep runs at exactly one SNR".into());
                }
                if self.port_grid.is_empty() {
                    return bad("port-sweep needs a nonempty port grid".into());
                }
                if self.port_grid.iter().any(|&n| n < 2) {
                    return bad("port counts must be at least 2".into());
                }
                if self.coupling.model_path.is_some() {
                    return bad("a coupling model file has a fixed size and cannot be swept".into());
                }
            }
            ExperimentKind::LosCompare => {
                if self.coupling.k_factor_db.is_none() {
                    return bad("los-compare needs coupling.k_factor_db".into());
                }
                if self.coupling.model_path.is_some() {
                    return bad("los-compare builds its own coupling models".into());
                }
            }
            _ => {}
        }
        let rician = self.coupling.kind == CouplingKind::SeparableRician;
        if rician && self.coupling.k_factor_db.is_none() {
            return bad("the Rician coupling needs k_factor_db".into());
        }
        if self.kind != ExperimentKind::LosCompare && !rician && self.coupling.k_factor_db.is_some() {
            return bad("k_factor_db is only used by the Rician coupling and los-compare".into());
        }
        if self.baselines.fixed && self.fixed_count() < 2 {
            return bad("the fixed array needs at least 2 elements".into());
        }
        if self.baselines.iid && self.baselines.iid_counts.contains(&0) {
            return bad("i.i.d. array sizes must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        for kind in [
            ExperimentKind::SnrSweep,
            ExperimentKind::PortSweep,
            ExperimentKind::LosCompare,
            ExperimentKind::Allocate,
            ExperimentKind::Validate,
        ] {
            let cfg = ExperimentConfig::default_for(kind);
            cfg.validate().unwrap();
            let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn fixed_count_default() {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::SnrSweep);
        assert_eq!(cfg.fixed_count(), 3);
        cfg.baselines.fixed_count = Some(2);
        assert_eq!(cfg.fixed_count(), 2);
    }

    #[test]
    fn rejects_bad_grids() {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::PortSweep);
        cfg.snr_grid_db = vec![0.0, 10.0];
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::SnrSweep);
        cfg.snr_grid_db.clear();
        assert!(cfg.validate().is_err());
        cfg.snr_grid_db = vec![0.0];
        cfg.n_trials = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v: serde_json::Value = serde_json::to_value(ExperimentConfig::default_for(
            ExperimentKind::SnrSweep,
        ))
        .unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
    }
}
