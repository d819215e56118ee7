//! Statistical eigenmode power allocation maximizing the upper bound
//! `C_u(λ) = log2 Per~(γ Ω diag(λ))` over `{λ ⪰ 0, Σλ = Nt}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::{PowerAllocation, SnrSpec};
use crate::error::{Error, Result};
use crate::permanent::{extended_permanent_log2, marginal_expansion, RealMatrix};

/// Powers above this count as active in KKT reports.
pub const ACTIVE_THRESHOLD: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub step_init: f64,
    pub armijo_beta: f64,
    pub armijo_c: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            step_init: 1.0,
            armijo_beta: 0.5,
            armijo_c: 1e-4,
            tol: 1e-6,
            max_iters: 500,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.step_init > 0.0
            && self.step_init.is_finite()
            && self.armijo_beta > 0.0
            && self.armijo_beta < 1.0
            && self.armijo_c > 0.0
            && self.armijo_c < 1.0
            && self.tol > 0.0
            && self.max_iters >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// First-order optimality summary at a feasible point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// Mean marginal utility over the active modes.
    pub mu: f64,
    pub max_violation: f64,
    pub active_set: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct AllocationResult {
    pub allocation: PowerAllocation,
    pub kkt: KktReport,
    /// Objective value (bits) at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl AllocationResult {
    pub fn objective(&self) -> f64 {
        *self.trace.last().expect("trace holds the starting point")
    }
}

fn check_lambda(omega: &RealMatrix, lambda: &[f64]) -> Result<()> {
    if lambda.len() != omega.cols() {
        return Err(Error::Structure(format!(
            "power vector has {} entries for {} transmit modes",
            lambda.len(),
            omega.cols()
        )));
    }
    Ok(())
}

/// `C_u(λ)` in bits.
pub fn objective(omega: &RealMatrix, lambda: &[f64], gamma: f64) -> Result<f64> {
    check_lambda(omega, lambda)?;
    Ok(extended_permanent_log2(&omega.scale_columns(gamma, lambda)))
}

/// `∂C_u/∂λ_i = f1_i / (ln2 · F(λ))` with `F = f0_i + λ_i f1_i`.
pub fn gradient(omega: &RealMatrix, lambda: &[f64], gamma: f64) -> Result<Vec<f64>> {
    check_lambda(omega, lambda)?;
    (0..omega.cols())
        .into_par_iter()
        .map(|i| {
            let e = marginal_expansion(omega, lambda, gamma, i)?;
            let f = e.f0 + lambda[i] * e.f1;
            Ok(e.f1 / (std::f64::consts::LN_2 * f))
        })
        .collect()
}

/// Euclidean projection onto `{x ⪰ 0, Σx = budget}` by sorting and
/// thresholding.
pub fn project_simplex(z: &[f64], budget: f64) -> Vec<f64> {
    assert!(budget > 0.0, "simplex budget must be positive");
    let mut u = z.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut prefix = 0.0;
    let mut tau = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        prefix += uk;
        let t = (prefix - budget) / (k + 1) as f64;
        if uk - t > 0.0 {
            tau = t;
        }
    }
    let mut x: Vec<f64> = z.iter().map(|&v| (v - tau).max(0.0)).collect();
    // Put the rounding residue on the largest entry so the sum is exact
    // to working precision.
    let s: f64 = x.iter().sum();
    if let Some(imax) = (0..x.len()).max_by(|&a, &b| x[a].total_cmp(&x[b]).then(b.cmp(&a))) {
        x[imax] += budget - s;
    }
    x
}

/// KKT diagnostics at a feasible `λ`.
pub fn kkt_residual(omega: &RealMatrix, lambda: &[f64], gamma: f64) -> Result<KktReport> {
    let g = gradient(omega, lambda, gamma)?;
    Ok(kkt_from_gradient(lambda, &g))
}

fn kkt_from_gradient(lambda: &[f64], g: &[f64]) -> KktReport {
    let active_set: Vec<usize> = (0..lambda.len())
        .filter(|&i| lambda[i] > ACTIVE_THRESHOLD)
        .collect();
    assert!(!active_set.is_empty(), "a feasible allocation has an active mode");
    let mu = active_set.iter().map(|&i| g[i]).sum::<f64>() / active_set.len() as f64;
    let max_violation = (0..lambda.len())
        .map(|i| {
            if lambda[i] > ACTIVE_THRESHOLD {
                (g[i] - mu).abs()
            } else {
                (g[i] - mu).max(0.0)
            }
        })
        .fold(0.0, f64::max);
    KktReport {
        mu,
        max_violation,
        active_set,
    }
}

/// Largest step tried; trial steps grow after accepted iterations.
const MAX_STEP: f64 = 1e12;

/// Projected-gradient ascent on `C_u` from equal power.
///
/// Each iteration tries the step `α/β` (α = last accepted step, initially
/// `step_init`) and backtracks by `β` until the Armijo condition
/// `C_u(λ⁺) ≥ C_u(λ) + c ∇C_uᵀ(λ⁺ − λ)` holds. Stops when an accepted move
/// is shorter than `tol`, or after `max_iters` iterations.
pub fn optimize(omega: &RealMatrix, snr: SnrSpec, cfg: &OptimizerConfig) -> Result<AllocationResult> {
    cfg.validate()?;
    let nt = omega.cols();
    let budget = nt as f64;
    let gamma = snr.gamma;
    let mut lambda = vec![1.0; nt];
    let mut value = objective(omega, &lambda, gamma)?;
    let mut trace = vec![value];
    let mut alpha = cfg.step_init * cfg.armijo_beta;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        let g = gradient(omega, &lambda, gamma)?;
        let mut step = (alpha / cfg.armijo_beta).min(MAX_STEP);
        let accepted = loop {
            let z: Vec<f64> = lambda.iter().zip(&g).map(|(l, gi)| l + step * gi).collect();
            let cand = project_simplex(&z, budget);
            let d: Vec<f64> = cand.iter().zip(&lambda).map(|(a, b)| a - b).collect();
            let dnorm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if dnorm <= cfg.tol {
                break None;
            }
            let cand_value = objective(omega, &cand, gamma)?;
            let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            if cand_value >= value + cfg.armijo_c * slope {
                break Some((cand, cand_value, dnorm));
            }
            step *= cfg.armijo_beta;
        };
        match accepted {
            None => {
                converged = true;
                break;
            }
            Some((cand, cand_value, dnorm)) => {
                lambda = cand;
                value = cand_value;
                trace.push(value);
                alpha = step;
                if dnorm <= cfg.tol {
                    converged = true;
                    break;
                }
            }
        }
    }

    let kkt = kkt_residual(omega, &lambda, gamma)?;
    Ok(AllocationResult {
        allocation: PowerAllocation::new(lambda)?,
        kkt,
        trace,
        iterations,
        converged,
    })
}

/// All power on the transmit mode with the largest column sum of `Ω`
/// (lowest index on ties): the small-SNR optimum.
pub fn low_snr_allocation(omega: &RealMatrix) -> PowerAllocation {
    let cols = omega.col_sums();
    let mut best = 0;
    for (i, &c) in cols.iter().enumerate() {
        if c > cols[best] {
            best = i;
        }
    }
    PowerAllocation::single_mode(omega.cols(), best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> RealMatrix {
        RealMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn scalar_gradient() {
        let g = gradient(&m(&[&[2.0]]), &[1.0], 0.5).unwrap();
        assert!((g[0] - 1.0 / (std::f64::consts::LN_2 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_simplex(&[1.0, 1.0, 1.0], 3.0), vec![1.0, 1.0, 1.0]);
        assert_eq!(project_simplex(&[3.0, 1.0], 2.0), vec![2.0, 0.0]);
        assert_eq!(project_simplex(&[5.0, 5.0, 5.0], 3.0), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn symmetric_columns_keep_equal_power() {
        let omega = m(&[&[1.0, 1.0, 1.0], &[2.0, 2.0, 2.0]]);
        let snr = SnrSpec::from_linear(10.0, 3).unwrap();
        let res = optimize(&omega, snr, &OptimizerConfig::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.allocation.lambda(), &[1.0, 1.0, 1.0]);
        assert!(res.kkt.max_violation < 1e-12);
    }

    #[test]
    fn low_snr_tie_goes_to_lowest_index() {
        let omega = m(&[&[1.0, 3.0, 3.0], &[1.0, 0.0, 0.0]]);
        assert_eq!(low_snr_allocation(&omega).lambda(), &[0.0, 3.0, 0.0]);
    }

    #[test]
    fn unbalanced_point_is_not_stationary() {
        let omega = m(&[&[4.0, 0.5], &[1.0, 0.2]]);
        let rep = kkt_residual(&omega, &[0.1, 1.9], 1.0).unwrap();
        assert!(rep.max_violation > 0.0);
        let scalar = kkt_residual(&m(&[&[3.0]]), &[1.0], 2.0).unwrap();
        assert_eq!(scalar.max_violation, 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let bad = OptimizerConfig {
            armijo_beta: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
