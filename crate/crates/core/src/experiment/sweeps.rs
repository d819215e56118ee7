use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use crate::allocator::{low_snr_allocation, objective, optimize};
use crate::capacity::{
    mc_full_capacity, mc_selection_capacity, upper_bound, CapacityEstimate, PowerAllocation,
    SnrSpec,
};
use crate::channel::{
    build_correlation, build_coupling, build_eigenbasis, k_factor_linear, CouplingKind,
    CouplingModel, EigenBasis, PortGeometry,
};
use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// Rows of one CSV file plus the configuration that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub config_json: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// CSV text: a `# config: {...}` comment line, the header, then one
    /// line per grid point.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# config: {}\n{}\n", self.config_json, self.header.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Writes the CSV to `path`, or to standard output when `None`.
    pub fn write(&self, path: Option<&Path>) -> Result<()> {
        let csv = self.to_csv();
        match path {
            Some(p) => std::fs::write(p, csv)?,
            None => std::io::stdout().lock().write_all(csv.as_bytes())?,
        }
        Ok(())
    }
}

// Stream ids: every curve at every grid point draws from its own substream
// of `(seed, 0)`, indexed first by grid point and then by curve.
const SHARED_POINT: u64 = 1 << 40;
const CURVE_COUPLING: u64 = 1;
const CURVE_FULL_EQUAL: u64 = 2;
const CURVE_FULL_OPT: u64 = 3;
const CURVE_SEL: u64 = 4;
const CURVE_FIXED: u64 = 5;
const CURVE_FAS_LOS: u64 = 6;
const CURVE_FIXED_LOS: u64 = 7;
const CURVE_IID: u64 = 1000;
const CURVE_IID_LOS: u64 = 2000;

fn stream(cfg: &ExperimentConfig, point: u64, curve: u64) -> RngStream {
    RngStream::new(cfg.seed, 0).substream(point).substream(curve)
}

fn echo(cfg: &ExperimentConfig) -> Result<String> {
    let mut c = cfg.clone();
    c.output_path = None;
    Ok(serde_json::to_string(&c)?)
}

fn sinc_basis(geom: &PortGeometry) -> Result<EigenBasis> {
    build_eigenbasis(&build_correlation(geom)?)
}

/// Eigenbasis of a conventional array of `m` elements at half-wavelength
/// spacing.
fn fixed_basis(m: usize) -> Result<EigenBasis> {
    let w = (m - 1) as f64 / 2.0;
    sinc_basis(&PortGeometry::symmetric(m, w)?)
}

fn fas_model(cfg: &ExperimentConfig, basis: &EigenBasis) -> Result<CouplingModel> {
    if let Some(path) = &cfg.coupling.model_path {
        let model = CouplingModel::from_json(&std::fs::read_to_string(path)?)?;
        if model.nt() != basis.nt() || model.nr() != basis.nr() {
            return Err(Error::Config(format!(
                "coupling model is {}x{}, geometry is {}x{}",
                model.nr(),
                model.nt(),
                basis.nr(),
                basis.nt()
            )));
        }
        return Ok(model);
    }
    let mut rng = stream(cfg, SHARED_POINT, CURVE_COUPLING);
    let k = match cfg.coupling.kind {
        CouplingKind::SeparableRician => cfg.coupling.k_factor_db,
        _ => None,
    };
    build_coupling(basis, cfg.coupling.kind, k, Some(&mut rng))
}

fn rayleigh(basis: &EigenBasis) -> Result<CouplingModel> {
    build_coupling(basis, CouplingKind::SeparableRayleigh, None, None)
}

/// Rank-one Rician array: specular power along the strongest mode of the
/// LOS-augmented correlation.
fn rician_array(basis: &EigenBasis, k_db: f64) -> Result<CouplingModel> {
    let composite = basis.with_line_of_sight(k_factor_linear(k_db)?)?;
    build_coupling(&composite, CouplingKind::SeparableRician, Some(k_db), None)
}

fn equal_power(
    model: &CouplingModel,
    snr_db: f64,
    n_trials: usize,
    rng: &RngStream,
) -> Result<CapacityEstimate> {
    let snr = SnrSpec::from_db(snr_db, model.nt())?;
    mc_full_capacity(model, &PowerAllocation::equal(model.nt()), snr, n_trials, rng)
}

fn push_est(row: &mut Vec<f64>, e: CapacityEstimate) {
    row.push(e.mean_bits);
    row.push(e.std_error);
}

fn est_columns(header: &mut Vec<String>, name: &str) {
    header.push(name.to_string());
    header.push(format!("{name}_se"));
}

/// Baseline arrays attached to the sweeps.
struct BaselineSet {
    fixed: Option<(usize, CouplingModel)>,
    iid: Vec<(usize, CouplingModel)>,
}

impl BaselineSet {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let fixed = if cfg.baselines.fixed {
            let m = cfg.fixed_count();
            Some((m, rayleigh(&fixed_basis(m)?)?))
        } else {
            None
        };
        let iid = if cfg.baselines.iid {
            cfg.baselines
                .iid_counts
                .iter()
                .map(|&m| Ok((m, rayleigh(&EigenBasis::uncorrelated(m, m))?)))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        Ok(Self { fixed, iid })
    }

    fn header(&self, header: &mut Vec<String>) {
        if let Some((m, _)) = &self.fixed {
            est_columns(header, &format!("c_fixed_m{m}"));
        }
        for (m, _) in &self.iid {
            est_columns(header, &format!("c_iid_m{m}"));
        }
    }

    fn values(&self, cfg: &ExperimentConfig, point: u64, snr_db: f64) -> Result<Vec<f64>> {
        let mut row = Vec::new();
        if let Some((_, model)) = &self.fixed {
            let rng = stream(cfg, point, CURVE_FIXED);
            push_est(&mut row, equal_power(model, snr_db, cfg.n_trials, &rng)?);
        }
        for (k, (_, model)) in self.iid.iter().enumerate() {
            let rng = stream(cfg, point, CURVE_IID + k as u64);
            push_est(&mut row, equal_power(model, snr_db, cfg.n_trials, &rng)?);
        }
        Ok(row)
    }
}

const FAS_COLUMNS: [&str; 3] = ["c_full_equal", "c_full_opt", "c_sel"];

/// Full-port capacity with equal and optimized power, selection capacity
/// and the bound at both allocations, for one SNR point.
fn fas_values(
    cfg: &ExperimentConfig,
    point: u64,
    basis: &EigenBasis,
    model: &CouplingModel,
    snr_db: f64,
) -> Result<Vec<f64>> {
    let nt = model.nt();
    let snr = SnrSpec::from_db(snr_db, nt)?;
    let equal = PowerAllocation::equal(nt);
    let opt = optimize(&model.omega, snr, &cfg.optimizer)?;
    let n = cfg.n_trials;
    let mut row = Vec::new();
    push_est(
        &mut row,
        mc_full_capacity(model, &equal, snr, n, &stream(cfg, point, CURVE_FULL_EQUAL))?,
    );
    push_est(
        &mut row,
        mc_full_capacity(model, &opt.allocation, snr, n, &stream(cfg, point, CURVE_FULL_OPT))?,
    );
    push_est(
        &mut row,
        mc_selection_capacity(model, basis, snr, n, &stream(cfg, point, CURVE_SEL))?,
    );
    row.push(upper_bound(model, &equal, snr)?);
    row.push(opt.objective());
    Ok(row)
}

fn fas_header(first: &str) -> Vec<String> {
    let mut header = vec![first.to_string()];
    for name in FAS_COLUMNS {
        est_columns(&mut header, name);
    }
    header.push("c_upper_equal".into());
    header.push("c_upper_opt".into());
    header
}

fn collect_rows<F>(len: usize, row: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync + Send,
{
    (0..len).into_par_iter().map(row).collect()
}

/// Capacity against SNR for the configured geometry.
pub fn run_snr_sweep(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let basis = sinc_basis(&cfg.geometry)?;
    let model = fas_model(cfg, &basis)?;
    let baselines = BaselineSet::new(cfg)?;
    let mut header = fas_header("snr_db");
    baselines.header(&mut header);
    let rows = collect_rows(cfg.snr_grid_db.len(), |g| {
        let snr_db = cfg.snr_grid_db[g];
        let mut row = vec![snr_db];
        row.extend(fas_values(cfg, g as u64, &basis, &model, snr_db)?);
        row.extend(baselines.values(cfg, g as u64, snr_db)?);
        Ok(row)
    })?;
    Ok(Table {
        config_json: echo(cfg)?,
        header,
        rows,
    })
}

/// Capacity against the port count `Nt = Nr = N` at a fixed aperture and SNR.
/// Baselines do not depend on `N` and repeat on every row.
pub fn run_port_sweep(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let snr_db = cfg.snr_grid_db[0];
    let baselines = BaselineSet::new(cfg)?;
    let shared = baselines.values(cfg, SHARED_POINT, snr_db)?;
    let mut header = fas_header("n_ports");
    baselines.header(&mut header);
    let rows = collect_rows(cfg.port_grid.len(), |g| {
        let n = cfg.port_grid[g];
        let geom = PortGeometry::new(n, n, cfg.geometry.wt, cfg.geometry.wr)?;
        let basis = sinc_basis(&geom)?;
        let model = fas_model(cfg, &basis)?;
        let mut row = vec![n as f64];
        row.extend(fas_values(cfg, g as u64, &basis, &model, snr_db)?);
        row.extend_from_slice(&shared);
        Ok(row)
    })?;
    Ok(Table {
        config_json: echo(cfg)?,
        header,
        rows,
    })
}

/// Equal-power capacity with and without a line-of-sight component, for the
/// fluid antenna link and the baseline arrays.
pub fn run_los_compare(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let k_db = cfg.coupling.k_factor_db.expect("validated");
    let basis = sinc_basis(&cfg.geometry)?;
    let fas_ray = rayleigh(&basis)?;
    let fas_los = build_coupling(&basis, CouplingKind::SeparableRician, Some(k_db), None)?;
    let ratio = fas_los.specular_power() / fas_los.scattered_power();

    let mut arrays: Vec<(String, u64, u64, CouplingModel, CouplingModel)> = Vec::new();
    if cfg.baselines.fixed {
        let m = cfg.fixed_count();
        let b = fixed_basis(m)?;
        arrays.push((format!("c_fixed_m{m}"), CURVE_FIXED, CURVE_FIXED_LOS, rayleigh(&b)?, rician_array(&b, k_db)?));
    }
    if cfg.baselines.iid {
        for (k, &m) in cfg.baselines.iid_counts.iter().enumerate() {
            let b = EigenBasis::uncorrelated(m, m);
            arrays.push((
                format!("c_iid_m{m}"),
                CURVE_IID + k as u64,
                CURVE_IID_LOS + k as u64,
                rayleigh(&b)?,
                rician_array(&b, k_db)?,
            ));
        }
    }

    let mut header = vec!["snr_db".to_string(), "los_power_ratio".to_string()];
    est_columns(&mut header, "c_fas_rayleigh");
    est_columns(&mut header, "c_fas_los");
    header.push("c_upper_rayleigh".into());
    header.push("c_upper_los".into());
    for (name, ..) in &arrays {
        est_columns(&mut header, &format!("{name}_rayleigh"));
        est_columns(&mut header, &format!("{name}_los"));
    }

    let n = cfg.n_trials;
    let rows = collect_rows(cfg.snr_grid_db.len(), |g| {
        let p = g as u64;
        let snr_db = cfg.snr_grid_db[g];
        let nt = basis.nt();
        let snr = SnrSpec::from_db(snr_db, nt)?;
        let equal = PowerAllocation::equal(nt);
        let mut row = vec![snr_db, ratio];
        push_est(&mut row, equal_power(&fas_ray, snr_db, n, &stream(cfg, p, CURVE_FULL_EQUAL))?);
        push_est(&mut row, equal_power(&fas_los, snr_db, n, &stream(cfg, p, CURVE_FAS_LOS))?);
        row.push(upper_bound(&fas_ray, &equal, snr)?);
        row.push(upper_bound(&fas_los, &equal, snr)?);
        for (_, ray_id, los_id, ray, los) in &arrays {
            push_est(&mut row, equal_power(ray, snr_db, n, &stream(cfg, p, *ray_id))?);
            push_est(&mut row, equal_power(los, snr_db, n, &stream(cfg, p, *los_id))?);
        }
        Ok(row)
    })?;
    Ok(Table {
        config_json: echo(cfg)?,
        header,
        rows,
    })
}

/// Optimized allocation per SNR with its bound, the equal-power and
/// single-mode bounds, and KKT diagnostics.
pub fn run_allocate(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let basis = sinc_basis(&cfg.geometry)?;
    let model = fas_model(cfg, &basis)?;
    let nt = model.nt();
    let mut header: Vec<String> = [
        "snr_db",
        "c_upper_opt",
        "c_upper_equal",
        "c_upper_low_snr",
        "iterations",
        "converged",
        "kkt_mu",
        "kkt_max_violation",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=nt).map(|i| format!("lambda_{i}")));
    let single = low_snr_allocation(&model.omega);
    let rows = collect_rows(cfg.snr_grid_db.len(), |g| {
        let snr_db = cfg.snr_grid_db[g];
        let snr = SnrSpec::from_db(snr_db, nt)?;
        let res = optimize(&model.omega, snr, &cfg.optimizer)?;
        let mut row = vec![
            snr_db,
            res.objective(),
            objective(&model.omega, &vec![1.0; nt], snr.gamma)?,
            objective(&model.omega, single.lambda(), snr.gamma)?,
            res.iterations as f64,
            if res.converged { 1.0 } else { 0.0 },
            res.kkt.mu,
            res.kkt.max_violation,
        ];
        row.extend_from_slice(res.allocation.lambda());
        Ok(row)
    })?;
    Ok(Table {
        config_json: echo(cfg)?,
        header,
        rows,
    })
}
