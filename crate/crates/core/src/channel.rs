//! Dual-side fluid antenna channel model.
//!
//! Ports sit uniformly on a linear aperture at each end. Their marginal
//! correlation is a sinc-kernel Toeplitz matrix whose eigenvectors define the
//! transmit and receive eigenmodes. In the joint eigenmode domain the channel
//! is `H~ = D + M ⊙ H0` with `H0` i.i.d. CN(0, 1), and the port-domain channel
//! is `H = U_r H~ U_t^H`. The coupling matrix `Ω = |D|² + M ⊙ M` carries all
//! second-order statistics; its normalized row and column sums reproduce the
//! receive and transmit eigenvalue profiles.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{hermitian_eigendecompose, CMatrix, RngStream};
use crate::permanent::RealMatrix;

/// Port counts and aperture lengths (in wavelengths) at both ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortGeometry {
    pub nt: usize,
    pub nr: usize,
    pub wt: f64,
    pub wr: f64,
}

impl PortGeometry {
    pub fn new(nt: usize, nr: usize, wt: f64, wr: f64) -> Result<Self> {
        let g = Self { nt, nr, wt, wr };
        g.validate()?;
        Ok(g)
    }

    /// Same port count and aperture on both sides.
    pub fn symmetric(n: usize, w: f64) -> Result<Self> {
        Self::new(n, n, w, w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nt < 2 || self.nr < 2 {
            return Err(Error::Structure(format!(
                "each side needs at least two ports, got Nt={} Nr={}",
                self.nt, self.nr
            )));
        }
        if !(self.wt > 0.0 && self.wt.is_finite() && self.wr > 0.0 && self.wr.is_finite()) {
            return Err(Error::Domain(format!(
                "apertures must be positive, got Wt={} Wr={}",
                self.wt, self.wr
            )));
        }
        Ok(())
    }

    pub fn tx_positions(&self) -> Vec<f64> {
        port_positions(self.nt, self.wt)
    }

    pub fn rx_positions(&self) -> Vec<f64> {
        port_positions(self.nr, self.wr)
    }
}

fn port_positions(n: usize, w: f64) -> Vec<f64> {
    let step = w / (n - 1) as f64;
    (0..n)
        .map(|p| if p == n - 1 { w } else { p as f64 * step })
        .collect()
}

/// How the sinc kernel's argument is interpreted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SincConvention {
    /// `sin(x)/x` evaluated at `x = 2π d` for port spacing `d` wavelengths
    /// (Clarke / isotropic scattering).
    #[default]
    Unnormalized,
    /// `sin(πx)/(πx)` evaluated at the same argument.
    Normalized,
}

impl SincConvention {
    pub fn eval(self, x: f64) -> f64 {
        let x = match self {
            SincConvention::Unnormalized => x,
            SincConvention::Normalized => std::f64::consts::PI * x,
        };
        if x == 0.0 {
            1.0
        } else {
            x.sin() / x
        }
    }
}

/// Real symmetric Toeplitz correlation of `n` ports with uniform spacing
/// `spacing` wavelengths: entry `(p, q)` is `sinc(2π (p-q) spacing)`.
pub fn sinc_toeplitz(n: usize, spacing: f64, convention: SincConvention) -> CMatrix {
    let lags: Vec<f64> = (0..n)
        .map(|l| convention.eval(2.0 * std::f64::consts::PI * l as f64 * spacing))
        .collect();
    CMatrix::from_fn(n, n, |p, q| Complex64::new(lags[p.abs_diff(q)], 0.0))
}

#[derive(Clone, Debug)]
pub struct CorrelationPair {
    pub sigma_t: CMatrix,
    pub sigma_r: CMatrix,
}

pub fn build_correlation(geom: &PortGeometry) -> Result<CorrelationPair> {
    build_correlation_with(geom, SincConvention::default())
}

pub fn build_correlation_with(
    geom: &PortGeometry,
    convention: SincConvention,
) -> Result<CorrelationPair> {
    geom.validate()?;
    Ok(CorrelationPair {
        sigma_t: sinc_toeplitz(geom.nt, geom.wt / (geom.nt - 1) as f64, convention),
        sigma_r: sinc_toeplitz(geom.nr, geom.wr / (geom.nr - 1) as f64, convention),
    })
}

/// Eigenmodes and normalized eigenvalue profiles of both correlations.
#[derive(Clone, Debug)]
pub struct EigenBasis {
    pub ut: CMatrix,
    pub ur: CMatrix,
    pub lambda_t: Vec<f64>,
    pub lambda_r: Vec<f64>,
    pub pi_t: Vec<f64>,
    pub pi_r: Vec<f64>,
}

/// Relative threshold below which correlation eigenvalues are set to zero.
pub const EIGEN_CLAMP_REL: f64 = 1e-12;

fn side_basis(sigma: &CMatrix) -> Result<(CMatrix, Vec<f64>)> {
    let peak = sigma.as_slice().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let eig = hermitian_eigendecompose(sigma, EIGEN_CLAMP_REL * peak.max(f64::MIN_POSITIVE))?;
    let top = eig.values.first().copied().unwrap_or(0.0);
    let clamp = EIGEN_CLAMP_REL * top;
    if let Some(&neg) = eig.values.iter().find(|&&v| v < -clamp) {
        return Err(Error::Domain(format!(
            "correlation matrix is not positive semidefinite (eigenvalue {neg:e})"
        )));
    }
    let values = eig
        .values
        .iter()
        .map(|&v| if v.abs() < clamp { 0.0 } else { v })
        .collect();
    Ok((eig.vectors, values))
}

fn normalized(values: &[f64]) -> Vec<f64> {
    let s: f64 = values.iter().sum();
    values.iter().map(|v| v / s).collect()
}

pub fn build_eigenbasis(corr: &CorrelationPair) -> Result<EigenBasis> {
    let (ut, lambda_t) = side_basis(&corr.sigma_t)?;
    let (ur, lambda_r) = side_basis(&corr.sigma_r)?;
    Ok(EigenBasis::from_parts(ut, ur, lambda_t, lambda_r))
}

impl EigenBasis {
    pub fn from_parts(ut: CMatrix, ur: CMatrix, lambda_t: Vec<f64>, lambda_r: Vec<f64>) -> Self {
        let pi_t = normalized(&lambda_t);
        let pi_r = normalized(&lambda_r);
        Self {
            ut,
            ur,
            lambda_t,
            lambda_r,
            pi_t,
            pi_r,
        }
    }

    /// Uncorrelated arrays: identity correlations, uniform profiles.
    pub fn uncorrelated(nt: usize, nr: usize) -> Self {
        Self::from_parts(
            CMatrix::identity(nt),
            CMatrix::identity(nr),
            vec![1.0; nt],
            vec![1.0; nr],
        )
    }

    pub fn nt(&self) -> usize {
        self.lambda_t.len()
    }

    pub fn nr(&self) -> usize {
        self.lambda_r.len()
    }

    /// Profile of the composite correlation when a specular path with
    /// K-factor `k_linear` is added along the strongest eigenmode at each
    /// end: `Σ' = Σ/(1+K) + K/(1+K) · N · u₁u₁ᴴ`. Eigenvectors are unchanged.
    ///
    /// This is the classic rank-one Rician array (the specular power changes
    /// the port correlation), as opposed to [`CouplingKind::SeparableRician`]
    /// on the scattering basis, which keeps the scattering profile fixed.
    pub fn with_line_of_sight(&self, k_linear: f64) -> Result<Self> {
        check_k(k_linear)?;
        let frac = k_linear / (1.0 + k_linear);
        let bend = |lam: &[f64]| -> Vec<f64> {
            let n = lam.len() as f64;
            let tr: f64 = lam.iter().sum();
            lam.iter()
                .enumerate()
                .map(|(i, &l)| {
                    let los = if i == 0 { frac * tr.max(n) } else { 0.0 };
                    l / (1.0 + k_linear) + los
                })
                .collect()
        };
        Ok(Self::from_parts(
            self.ut.clone(),
            self.ur.clone(),
            bend(&self.lambda_t),
            bend(&self.lambda_r),
        ))
    }
}

/// Which coupling structure to build on top of an [`EigenBasis`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingKind {
    /// `D = 0`, rank-one `Ω ∝ π_r π_tᵀ` (Kronecker-type special case).
    SeparableRayleigh,
    /// `D = 0`, random positive `Ω` fitted to the marginal profiles.
    NonSeparableRayleigh,
    /// Specular `D` on the strongest diagonal eigenmode pairs plus a
    /// scattering part fitted so the combined `Ω` keeps the marginals.
    SeparableRician,
}

/// Mean, scattering strength and coupling matrix in the joint eigenmode
/// domain, all `Nr x Nt`.
#[derive(Clone, Debug)]
pub struct CouplingModel {
    pub d: CMatrix,
    pub m: RealMatrix,
    pub omega: RealMatrix,
}

/// Marginal fitting tolerance on normalized row and column sums.
pub const FIT_TOL: f64 = 1e-10;
/// Maximum number of row+column rescaling sweeps.
pub const FIT_MAX_SWEEPS: usize = 10_000;

pub fn k_factor_linear(k_db: f64) -> Result<f64> {
    let k = 10f64.powf(k_db / 10.0);
    check_k(k)?;
    Ok(k)
}

fn check_k(k: f64) -> Result<()> {
    if k.is_nan() || k < 0.0 || k.is_infinite() {
        return Err(Error::Domain(format!("K-factor must be finite and >= 0, got {k}")));
    }
    Ok(())
}

pub fn build_coupling(
    basis: &EigenBasis,
    kind: CouplingKind,
    k_factor_db: Option<f64>,
    rng: Option<&mut RngStream>,
) -> Result<CouplingModel> {
    let nt = basis.nt();
    let nr = basis.nr();
    let total = (nt * nr) as f64;
    let rank_one = || -> Vec<f64> {
        let mut v = Vec::with_capacity(nr * nt);
        for &pr in &basis.pi_r {
            for &pt in &basis.pi_t {
                v.push(total * pr * pt);
            }
        }
        v
    };
    if kind != CouplingKind::SeparableRician && k_factor_db.is_some() {
        return Err(Error::Precondition(
            "a K-factor is only meaningful for the Rician coupling".into(),
        ));
    }

    match kind {
        CouplingKind::SeparableRayleigh => {
            let omega = rank_one();
            CouplingModel::from_scattering(CMatrix::zeros(nr, nt), nr, nt, omega)
        }
        CouplingKind::NonSeparableRayleigh => {
            let rng = rng.ok_or_else(|| {
                Error::Precondition("non-separable coupling needs a random stream".into())
            })?;
            let mut omega = Vec::with_capacity(nr * nt);
            for &pr in &basis.pi_r {
                for &pt in &basis.pi_t {
                    let draw = 0.1 + rng.uniform();
                    omega.push(if pr > 0.0 && pt > 0.0 { draw } else { 0.0 });
                }
            }
            let rows: Vec<f64> = basis.pi_r.iter().map(|p| p * total).collect();
            let cols: Vec<f64> = basis.pi_t.iter().map(|p| p * total).collect();
            fit_marginals(&mut omega, &rows, &cols)?;
            CouplingModel::from_scattering(CMatrix::zeros(nr, nt), nr, nt, omega)
        }
        CouplingKind::SeparableRician => {
            let k_db = k_factor_db.ok_or_else(|| {
                Error::Precondition("the Rician coupling needs a K-factor".into())
            })?;
            let k = k_factor_linear(k_db)?;
            let los_power = k / (1.0 + k) * total;

            // Strongest-first: (1,1) takes as much specular power as its
            // marginals allow, the remainder spills to (2,2), (3,3), ...
            let mut d = CMatrix::zeros(nr, nt);
            let mut d_pow = vec![0.0; nr.min(nt)];
            let mut remaining = los_power;
            for (i, slot) in d_pow.iter_mut().enumerate() {
                if remaining <= 0.0 {
                    break;
                }
                let room = basis.pi_r[i].min(basis.pi_t[i]) * total;
                let take = remaining.min(room);
                *slot = take;
                d[(i, i)] = Complex64::new(take.sqrt(), 0.0);
                remaining -= take;
            }
            if remaining > 1e-12 * total {
                return Err(Error::Domain(format!(
                    "K-factor {k_db} dB does not fit the marginal profiles \
                     ({remaining:e} of specular power left over)"
                )));
            }

            let row_target: Vec<f64> = (0..nr)
                .map(|i| (basis.pi_r[i] * total - d_pow.get(i).copied().unwrap_or(0.0)).max(0.0))
                .collect();
            let col_target: Vec<f64> = (0..nt)
                .map(|j| (basis.pi_t[j] * total - d_pow.get(j).copied().unwrap_or(0.0)).max(0.0))
                .collect();
            let mut scatter: Vec<f64> = rank_one().iter().map(|v| v / (1.0 + k)).collect();
            if row_target.iter().sum::<f64>() > 0.0 {
                fit_marginals(&mut scatter, &row_target, &col_target)?;
            } else {
                scatter.iter_mut().for_each(|v| *v = 0.0);
            }
            CouplingModel::from_scattering(d, nr, nt, scatter)
        }
    }
}

/// Iterative proportional fitting: alternately rescale rows and columns of
/// the nonnegative row-major `a` until its row sums match `rows` and its
/// column sums match `cols`, both to `FIT_TOL` relative to the total.
pub fn fit_marginals(a: &mut [f64], rows: &[f64], cols: &[f64]) -> Result<usize> {
    let nr = rows.len();
    let nt = cols.len();
    assert_eq!(a.len(), nr * nt);
    let total: f64 = rows.iter().sum();
    let mut residual = f64::INFINITY;
    for sweep in 1..=FIT_MAX_SWEEPS {
        for (i, &target) in rows.iter().enumerate() {
            let row = &mut a[i * nt..(i + 1) * nt];
            let s: f64 = row.iter().sum();
            let f = if s > 0.0 { target / s } else { 0.0 };
            row.iter_mut().for_each(|v| *v *= f);
        }
        for (j, &target) in cols.iter().enumerate() {
            let s: f64 = (0..nr).map(|i| a[i * nt + j]).sum();
            let f = if s > 0.0 { target / s } else { 0.0 };
            (0..nr).for_each(|i| a[i * nt + j] *= f);
        }
        // Columns are exact after the column pass; check the rows.
        residual = (0..nr)
            .map(|i| (a[i * nt..(i + 1) * nt].iter().sum::<f64>() - rows[i]).abs())
            .fold(0.0, f64::max)
            / total;
        if residual <= FIT_TOL {
            return Ok(sweep);
        }
    }
    Err(Error::Convergence {
        sweeps: FIT_MAX_SWEEPS,
        residual,
    })
}

impl CouplingModel {
    fn from_scattering(d: CMatrix, nr: usize, nt: usize, scatter: Vec<f64>) -> Result<Self> {
        let m = RealMatrix::new(nr, nt, scatter.iter().map(|v| v.max(0.0).sqrt()).collect())?;
        Self::from_parts(d, m)
    }

    /// Assembles a model from `D` and `M`, computing `Ω = |D|² + M ⊙ M`.
    pub fn from_parts(d: CMatrix, m: RealMatrix) -> Result<Self> {
        if (d.rows(), d.cols()) != (m.rows(), m.cols()) {
            return Err(Error::Structure("D and M must have the same shape".into()));
        }
        let omega = RealMatrix::new(
            m.rows(),
            m.cols(),
            d.abs_sqr()
                .iter()
                .zip(m.as_slice())
                .map(|(a, b)| a + b * b)
                .collect(),
        )?;
        Ok(Self { d, m, omega })
    }

    pub fn nr(&self) -> usize {
        self.omega.rows()
    }

    pub fn nt(&self) -> usize {
        self.omega.cols()
    }

    /// True when `D` has at most one nonzero entry in every row and column.
    pub fn mean_is_sparse_matching(&self) -> bool {
        let nz = |i: usize, j: usize| self.d[(i, j)] != Complex64::new(0.0, 0.0);
        (0..self.nr()).all(|i| (0..self.nt()).filter(|&j| nz(i, j)).count() <= 1)
            && (0..self.nt()).all(|j| (0..self.nr()).filter(|&i| nz(i, j)).count() <= 1)
    }

    pub fn specular_power(&self) -> f64 {
        self.d.abs_sqr().iter().sum()
    }

    pub fn scattered_power(&self) -> f64 {
        self.m.as_slice().iter().map(|v| v * v).sum()
    }

    /// Normalized row and column sums of `Ω`.
    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let t = self.omega.total();
        (
            self.omega.row_sums().iter().map(|v| v / t).collect(),
            self.omega.col_sums().iter().map(|v| v / t).collect(),
        )
    }

    pub fn to_document(&self) -> CouplingDocument {
        let d = (0..self.nr())
            .map(|i| self.d.row(i).iter().map(|z| [z.re, z.im]).collect())
            .collect();
        let m = (0..self.nr()).map(|i| self.m.row(i).to_vec()).collect();
        let omega = (0..self.nr()).map(|i| self.omega.row(i).to_vec()).collect();
        CouplingDocument { d, m, omega }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CouplingDocument = serde_json::from_str(text)?;
        Self::try_from(doc)
    }
}

/// Plain-array file form of a [`CouplingModel`]; complex entries are
/// `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingDocument {
    pub d: Vec<Vec<[f64; 2]>>,
    pub m: Vec<Vec<f64>>,
    pub omega: Vec<Vec<f64>>,
}

impl TryFrom<CouplingDocument> for CouplingModel {
    type Error = Error;

    fn try_from(doc: CouplingDocument) -> Result<Self> {
        let m = RealMatrix::from_rows(&doc.m)?;
        let nr = m.rows();
        let nt = m.cols();
        if doc.d.len() != nr || doc.d.iter().any(|r| r.len() != nt) {
            return Err(Error::Structure("D and M must have the same shape".into()));
        }
        let d = CMatrix::from_vec(
            nr,
            nt,
            doc.d.iter().flatten().map(|&[re, im]| Complex64::new(re, im)).collect(),
        )?;
        let model = CouplingModel::from_parts(d, m)?;
        let stored = RealMatrix::from_rows(&doc.omega)?;
        if (stored.rows(), stored.cols()) != (nr, nt) {
            return Err(Error::Structure("omega shape does not match M".into()));
        }
        let scale = model.omega.as_slice().iter().copied().fold(1.0, f64::max);
        let mismatch = stored
            .as_slice()
            .iter()
            .zip(model.omega.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if mismatch > 1e-9 * scale {
            return Err(Error::Structure(format!(
                "omega differs from |D|^2 + M*M by {mismatch:e}"
            )));
        }
        Ok(model)
    }
}

/// One channel draw in both domains.
#[derive(Clone, Debug)]
pub struct ChannelSample {
    pub htilde: CMatrix,
    pub h: CMatrix,
}

/// Eigenmode-domain draw `D + M ⊙ H0`; `H0` is drawn row-major.
pub fn sample_eigenmode(model: &CouplingModel, rng: &mut RngStream) -> CMatrix {
    let nt = model.nt();
    let m = model.m.as_slice();
    let d = model.d.as_slice();
    CMatrix::from_fn(model.nr(), nt, |i, j| {
        let k = i * nt + j;
        d[k] + rng.cn01() * m[k]
    })
}

pub fn sample_channel(
    model: &CouplingModel,
    basis: &EigenBasis,
    rng: &mut RngStream,
) -> Result<ChannelSample> {
    if basis.nt() != model.nt() || basis.nr() != model.nr() {
        return Err(Error::Structure("basis and coupling model disagree in size".into()));
    }
    let htilde = sample_eigenmode(model, rng);
    let h = htilde.sandwich(&basis.ur, &basis.ut)?;
    Ok(ChannelSample { htilde, h })
}
