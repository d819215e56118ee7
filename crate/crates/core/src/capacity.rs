//! Ergodic capacities by Monte Carlo and the extended-permanent upper bound.
//!
//! All Monte-Carlo estimators share one runner: trials are split into
//! fixed-size chunks, chunk `c` draws from `root.substream(c)`, and the chunk
//! statistics are merged in chunk order. Results therefore do not depend on
//! the number of worker threads.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_eigenmode, CouplingModel, EigenBasis};
use crate::error::{Error, Result};
use crate::numerics::{cholesky_logdet2, CMatrix, RngStream};
use crate::permanent::{extended_permanent, extended_permanent_log2};

/// Average SNR `ρ` and the per-stream scaling `γ = ρ / Nt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrSpec {
    pub rho: f64,
    pub gamma: f64,
}

impl SnrSpec {
    pub fn from_linear(rho: f64, nt: usize) -> Result<Self> {
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::Domain(format!("SNR must be finite and >= 0, got {rho}")));
        }
        if nt == 0 {
            return Err(Error::Structure("no transmit modes".into()));
        }
        Ok(Self {
            rho,
            gamma: rho / nt as f64,
        })
    }

    pub fn from_db(db: f64, nt: usize) -> Result<Self> {
        Self::from_linear(10f64.powf(db / 10.0), nt)
    }
}

/// Monte-Carlo mean in bits/s/Hz with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityEstimate {
    pub mean_bits: f64,
    pub std_error: f64,
    pub n_trials: usize,
}

/// Transmit eigenmode powers `λ ⪰ 0` with `Σλ = Nt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    lambda: Vec<f64>,
}

impl PowerAllocation {
    pub const BUDGET_TOL: f64 = 1e-9;

    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::Structure("empty power allocation".into()));
        }
        if lambda.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(Error::Domain("powers must be finite and nonnegative".into()));
        }
        let nt = lambda.len() as f64;
        let total: f64 = lambda.iter().sum();
        if (total - nt).abs() > Self::BUDGET_TOL * nt.max(1.0) {
            return Err(Error::Domain(format!(
                "powers sum to {total}, expected {nt}"
            )));
        }
        Ok(Self { lambda })
    }

    /// Equal power, `λ = 1`.
    pub fn equal(nt: usize) -> Self {
        Self {
            lambda: vec![1.0; nt],
        }
    }

    /// All power on mode `i`.
    pub fn single_mode(nt: usize, i: usize) -> Self {
        let mut lambda = vec![0.0; nt];
        lambda[i] = nt as f64;
        Self { lambda }
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn nt(&self) -> usize {
        self.lambda.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.lambda
    }
}

/// Trials per chunk. Part of the reproducibility contract: changing it
/// changes every Monte-Carlo result.
pub const CHUNK_TRIALS: usize = 4096;

#[derive(Clone, Copy, Default)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        Moments {
            n,
            mean: self.mean + delta * w,
            m2: self.m2 + other.m2 + delta * delta * self.n as f64 * w,
        }
    }
}

/// Mean and standard error of `trial` over `n_trials` draws.
///
/// `trial` is called once per draw with the stream of the draw's chunk.
pub fn monte_carlo<F>(n_trials: usize, root: &RngStream, trial: F) -> CapacityEstimate
where
    F: Fn(&mut RngStream) -> f64 + Sync,
{
    let n_chunks = n_trials.div_ceil(CHUNK_TRIALS);
    let parts: Vec<Moments> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = root.substream(c as u64);
            let len = CHUNK_TRIALS.min(n_trials - c * CHUNK_TRIALS);
            let mut m = Moments::default();
            for _ in 0..len {
                m.push(trial(&mut rng));
            }
            m
        })
        .collect();
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    let std_error = if total.n > 1 {
        (total.m2 / (total.n - 1) as f64).sqrt() / (total.n as f64).sqrt()
    } else {
        0.0
    };
    CapacityEstimate {
        mean_bits: total.mean,
        std_error,
        n_trials: total.n,
    }
}

fn check_dims(model: &CouplingModel, alloc: &PowerAllocation) -> Result<()> {
    if alloc.nt() != model.nt() {
        return Err(Error::Structure(format!(
            "allocation has {} modes, model has {}",
            alloc.nt(),
            model.nt()
        )));
    }
    Ok(())
}

fn check_trials(n_trials: usize) -> Result<()> {
    if n_trials == 0 {
        return Err(Error::Config("at least one trial is required".into()));
    }
    Ok(())
}

/// `log2 det(I + γ H Λ Hᴴ)` for an `Nr x Nt` channel and diagonal `Λ`.
pub fn log2det_eigenmode(h: &CMatrix, lambda: &[f64], gamma: f64) -> f64 {
    let nr = h.rows();
    let nt = h.cols();
    let mut g = vec![Complex64::new(0.0, 0.0); nr * nr];
    for i in 0..nr {
        g[i * nr + i] = Complex64::new(1.0, 0.0);
    }
    for (j, &l) in lambda.iter().enumerate().take(nt) {
        let w = gamma * l;
        if w == 0.0 {
            continue;
        }
        for a in 0..nr {
            let ha = h[(a, j)] * w;
            // Lower triangle only; the factorization never reads the rest.
            for b in 0..=a {
                g[a * nr + b] += ha * h[(b, j)].conj();
            }
        }
    }
    cholesky_logdet2(nr, &mut g).expect("I + γ H Λ Hᴴ is positive definite")
}

/// `log2 det(I + γ H Q Hᴴ)` with `Q = U_t diag(λ) U_tᴴ`, the port-domain
/// form of [`log2det_eigenmode`].
pub fn log2det_port(h: &CMatrix, ut: &CMatrix, lambda: &[f64], gamma: f64) -> Result<f64> {
    // H Q Hᴴ = (H U_t) Λ (H U_t)ᴴ.
    let hu = h.matmul(ut)?;
    let q = hu.matmul(&CMatrix::diag_real(lambda))?.matmul(&hu.adjoint())?;
    let nr = h.rows();
    let mut g = CMatrix::identity(nr);
    for (x, y) in g.as_mut_slice().iter_mut().zip(q.as_slice()) {
        *x += y * gamma;
    }
    crate::numerics::logdet2_hpd(&g)
}

/// Largest port-pair gain `max |H_mp|²`.
pub fn max_port_gain(h: &CMatrix) -> f64 {
    h.as_slice().iter().map(|z| z.norm_sqr()).fold(0.0, f64::max)
}

/// `E log2 det(I + γ H~ diag(λ) H~ᴴ)`, evaluated in the eigenmode domain.
pub fn mc_full_capacity(
    model: &CouplingModel,
    alloc: &PowerAllocation,
    snr: SnrSpec,
    n_trials: usize,
    rng: &RngStream,
) -> Result<CapacityEstimate> {
    check_dims(model, alloc)?;
    check_trials(n_trials)?;
    let lambda = alloc.lambda();
    Ok(monte_carlo(n_trials, rng, |r| {
        let h = sample_eigenmode(model, r);
        log2det_eigenmode(&h, lambda, snr.gamma)
    }))
}

/// `E log2(1 + ρ max |H_mp|²)`: the best single port pair carries the full
/// power.
pub fn mc_selection_capacity(
    model: &CouplingModel,
    basis: &EigenBasis,
    snr: SnrSpec,
    n_trials: usize,
    rng: &RngStream,
) -> Result<CapacityEstimate> {
    if basis.nt() != model.nt() || basis.nr() != model.nr() {
        return Err(Error::Structure("basis and coupling model disagree in size".into()));
    }
    check_trials(n_trials)?;
    let urt = &basis.ur;
    let uth = basis.ut.adjoint();
    Ok(monte_carlo(n_trials, rng, |r| {
        let ht = sample_eigenmode(model, r);
        let h = urt
            .matmul(&ht)
            .and_then(|x| x.matmul(&uth))
            .expect("dimensions checked");
        (1.0 + snr.rho * max_port_gain(&h)).log2()
    }))
}

/// `log2 Per~(γ Ω diag(λ))`, the Jensen bound on the full-port capacity.
pub fn upper_bound(model: &CouplingModel, alloc: &PowerAllocation, snr: SnrSpec) -> Result<f64> {
    check_dims(model, alloc)?;
    check_mean_structure(model)?;
    Ok(extended_permanent_log2(
        &model.omega.scale_columns(snr.gamma, alloc.lambda()),
    ))
}

fn check_mean_structure(model: &CouplingModel) -> Result<()> {
    if !model.mean_is_sparse_matching() {
        return Err(Error::Precondition(
            "the mean matrix must have at most one nonzero entry per row and column".into(),
        ));
    }
    Ok(())
}

/// Monte-Carlo `E det(I + γ H~ Λ H~ᴴ)` (the raw determinant, not its log).
/// Its exact value is `Per~(γ Ω Λ)`; see [`exact_det_expectation`].
pub fn mc_det_expectation(
    model: &CouplingModel,
    alloc: &PowerAllocation,
    snr: SnrSpec,
    n_trials: usize,
    rng: &RngStream,
) -> Result<CapacityEstimate> {
    check_dims(model, alloc)?;
    check_mean_structure(model)?;
    check_trials(n_trials)?;
    let lambda = alloc.lambda();
    Ok(monte_carlo(n_trials, rng, |r| {
        let h = sample_eigenmode(model, r);
        log2det_eigenmode(&h, lambda, snr.gamma).exp2()
    }))
}

/// `Per~(γ Ω Λ)`.
pub fn exact_det_expectation(
    model: &CouplingModel,
    alloc: &PowerAllocation,
    snr: SnrSpec,
) -> Result<f64> {
    check_dims(model, alloc)?;
    check_mean_structure(model)?;
    Ok(extended_permanent(
        &model.omega.scale_columns(snr.gamma, alloc.lambda()),
    ))
}

/// First-order small-SNR expansion `(γ/ln2) Σ_i λ_i Σ_m Ω[m,i]` in bits.
pub fn asymptotic_low_snr(model: &CouplingModel, alloc: &PowerAllocation, snr: SnrSpec) -> f64 {
    let cols = model.omega.col_sums();
    let s: f64 = alloc.lambda().iter().zip(&cols).map(|(l, c)| l * c).sum();
    snr.gamma * s / std::f64::consts::LN_2
}

/// Equal power, optimal at high SNR when `Nr >= Nt`.
pub fn asymptotic_high_snr_optimal(nt: usize) -> PowerAllocation {
    PowerAllocation::equal(nt)
}
