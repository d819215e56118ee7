use num_complex::Complex64;

use super::matrix::CMatrix;
use crate::error::{Error, Result};

/// Eigendecomposition `A = U diag(values) U^H` of a Hermitian matrix.
///
/// Eigenvalues are sorted in descending order and `vectors` holds the
/// matching eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub vectors: CMatrix,
    pub values: Vec<f64>,
}

impl HermitianEig {
    /// `U diag(values) U^H`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.values.len();
        let u = &self.vectors;
        CMatrix::from_fn(n, n, |i, j| {
            (0..n).fold(Complex64::new(0.0, 0.0), |acc, k| {
                acc + u[(i, k)] * self.values[k] * u[(j, k)].conj()
            })
        })
    }
}

const HERMITIAN_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Cyclic complex Jacobi eigensolver for Hermitian matrices.
///
/// Eigenvalues with magnitude below `clamp_tol` are set to exactly zero.
pub fn hermitian_eigendecompose(a: &CMatrix, clamp_tol: f64) -> Result<HermitianEig> {
    if !a.is_square() {
        return Err(Error::Structure(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let scale = a.as_slice().iter().map(|z| z.norm()).fold(1.0, f64::max);
    if !a.is_hermitian(HERMITIAN_TOL * scale) {
        return Err(Error::Structure("matrix is not Hermitian".into()));
    }

    let n = a.rows();
    // Work on the exactly Hermitian part.
    let mut w = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(a[(i, i)].re, 0.0)
        } else {
            (a[(i, j)] + a[(j, i)].conj()) * 0.5
        }
    });
    let mut v = CMatrix::identity(n);
    let threshold = f64::EPSILON * w.frobenius_norm();

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| w[(i, j)].norm_sqr())
            .sum();
        if off.sqrt() <= threshold {
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                rotate(&mut w, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[(j, j)].re.total_cmp(&w[(i, i)].re));

    let values = order
        .iter()
        .map(|&k| {
            let lam = w[(k, k)].re;
            if lam.abs() < clamp_tol {
                0.0
            } else {
                lam
            }
        })
        .collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(HermitianEig { vectors, values })
}

/// One two-sided Jacobi rotation annihilating `w[p][q]`.
fn rotate(w: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = w[(p, q)];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = w[(p, p)].re;
    let aqq = w[(q, q)].re;
    let theta = (aqq - app) / (2.0 * mag);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    // Phase first makes the pivot real, then a real rotation zeroes it.
    let phase_conj = (apq / mag).conj();
    let jpp = Complex64::new(c, 0.0);
    let jpq = Complex64::new(s, 0.0);
    let jqp = -phase_conj * s;
    let jqq = phase_conj * c;

    let n = w.rows();
    for k in 0..n {
        let wkp = w[(k, p)];
        let wkq = w[(k, q)];
        w[(k, p)] = wkp * jpp + wkq * jqp;
        w[(k, q)] = wkp * jpq + wkq * jqq;
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * jpp + vkq * jqp;
        v[(k, q)] = vkp * jpq + vkq * jqq;
    }
    for k in 0..n {
        let wpk = w[(p, k)];
        let wqk = w[(q, k)];
        w[(p, k)] = jpp.conj() * wpk + jqp.conj() * wqk;
        w[(q, k)] = jpq.conj() * wpk + jqq.conj() * wqk;
    }
    w[(p, q)] = Complex64::new(0.0, 0.0);
    w[(q, p)] = Complex64::new(0.0, 0.0);
    w[(p, p)] = Complex64::new(app - t * mag, 0.0);
    w[(q, q)] = Complex64::new(aqq + t * mag, 0.0);
}

/// `log2 det(A)` for Hermitian positive definite `A`, via Cholesky.
pub fn logdet2_hpd(a: &CMatrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::Structure(format!(
            "log-determinant needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let mut buf = a.as_slice().to_vec();
    cholesky_logdet2(a.rows(), &mut buf)
        .ok_or_else(|| Error::Domain("matrix is not Hermitian positive definite".into()))
}

/// In-place Cholesky of the lower triangle of a row-major `n x n` buffer,
/// returning `log2 det`. `None` when a pivot is not strictly positive.
pub(crate) fn cholesky_logdet2(n: usize, a: &mut [Complex64]) -> Option<f64> {
    let mut acc = 0.0;
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= a[j * n + k].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        acc += d.log2();
        let ljj = d.sqrt();
        a[j * n + j] = Complex64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k].conj();
            }
            a[i * n + j] = s / ljj;
        }
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{sample_cn01, RngStream};

    fn unitary_defect(u: &CMatrix) -> f64 {
        let g = u.adjoint().matmul(u).unwrap();
        g.max_abs_diff(&CMatrix::identity(u.rows()))
    }

    #[test]
    fn identity_has_unit_eigenvalues() {
        let eig = hermitian_eigendecompose(&CMatrix::identity(4), 1e-12).unwrap();
        assert_eq!(eig.values, vec![1.0; 4]);
        // Each column is a unit-modulus multiple of a canonical basis vector.
        for j in 0..4 {
            let nonzero = (0..4).filter(|&i| eig.vectors[(i, j)].norm() > 1e-14).count();
            assert_eq!(nonzero, 1);
        }
    }

    #[test]
    fn diagonal_input_is_sorted() {
        let a = CMatrix::diag_real(&[1.0, 3.0]);
        let eig = hermitian_eigendecompose(&a, 1e-12).unwrap();
        assert_eq!(eig.values, vec![3.0, 1.0]);
    }

    #[test]
    fn complex_hermitian_reconstructs() {
        let mut rng = RngStream::new(11, 0);
        let b = sample_cn01(&mut rng, 6, 6);
        let a = b.adjoint().matmul(&b).unwrap();
        let eig = hermitian_eigendecompose(&a, 0.0).unwrap();
        let rel = eig.reconstruct().sub(&a).unwrap().frobenius_norm() / a.frobenius_norm();
        assert!(rel < 1e-12, "relative reconstruction error {rel:e}");
        assert!(unitary_defect(&eig.vectors) < 1e-12);
        assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn clamps_tiny_eigenvalues() {
        let a = CMatrix::diag_real(&[2.0, 1e-14, -1e-15]);
        let eig = hermitian_eigendecompose(&a, 1e-12).unwrap();
        assert_eq!(eig.values, vec![2.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_non_hermitian_and_non_square() {
        let a = CMatrix::from_real(2, 2, &[1.0, 2.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            hermitian_eigendecompose(&a, 0.0),
            Err(Error::Structure(_))
        ));
        let r = CMatrix::zeros(2, 3);
        assert!(matches!(
            hermitian_eigendecompose(&r, 0.0),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn logdet_of_simple_matrices() {
        assert_eq!(logdet2_hpd(&CMatrix::identity(5)).unwrap(), 0.0);
        assert!((logdet2_hpd(&CMatrix::diag_real(&[2.0, 2.0])).unwrap() - 2.0).abs() < 1e-15);
        let c: f64 = 3.7;
        let got = logdet2_hpd(&CMatrix::identity(4).scale(c)).unwrap();
        assert!((got - 4.0 * c.log2()).abs() < 1e-14);
    }

    #[test]
    fn logdet_rejects_indefinite() {
        let a = CMatrix::diag_real(&[1.0, -1.0]);
        assert!(matches!(logdet2_hpd(&a), Err(Error::Domain(_))));
        assert!(matches!(
            logdet2_hpd(&CMatrix::zeros(2, 3)),
            Err(Error::Structure(_))
        ));
    }
}
