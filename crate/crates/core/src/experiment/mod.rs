//! Batch experiments: configuration, CSV sweeps and validation suites.

mod config;
mod sweeps;
mod validate;

pub use config::{Baselines, CouplingSpec, ExperimentConfig, ExperimentKind};
pub use sweeps::{
    run_allocate, run_los_compare, run_port_sweep, run_snr_sweep, Table,
};
pub use validate::{random_coupling, run_validate, SuiteResult, ValidateOptions, ValidationReport};

use crate::error::Result;

/// What a run produced.
#[derive(Debug)]
pub enum RunOutput {
    Table(Table),
    Report(ValidationReport),
}

/// Runs the experiment described by `cfg`. Tables are returned, not written;
/// see [`Table::write`].
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    Ok(match cfg.kind {
        ExperimentKind::SnrSweep => RunOutput::Table(run_snr_sweep(cfg)?),
        ExperimentKind::PortSweep => RunOutput::Table(run_port_sweep(cfg)?),
        ExperimentKind::LosCompare => RunOutput::Table(run_los_compare(cfg)?),
        ExperimentKind::Allocate => RunOutput::Table(run_allocate(cfg)?),
        ExperimentKind::Validate => RunOutput::Report(run_validate(&ValidateOptions::from(cfg))),
    })
}
