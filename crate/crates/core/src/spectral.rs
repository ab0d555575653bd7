//! Dense spectral routines: the Perron pair of a nonnegative irreducible
//! matrix, the stationary vector of a stochastic matrix, and symmetric
//! spectra.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest dimension handled by the dense Schur route. Above this the
/// Perron pair comes from power iteration.
pub const DENSE_EIGEN_MAX_DIM: usize = 4096;

/// Target relative residual for the Perron pair.
pub const PERRON_RESIDUAL_TARGET: f64 = 1e-13;

/// Residual above which the Perron pair is rejected.
pub const PERRON_RESIDUAL_LIMIT: f64 = 1e-12;

const SCHUR_MAX_ITER: usize = 10_000;
const INVERSE_ITER_MAX: usize = 12;
const POWER_ITER_MAX: usize = 1_000_000;
const DEFLATION_ITER: usize = 500;

/// Dominant eigenvalue with its right and left eigenvectors.
#[derive(Debug, Clone)]
pub struct PerronPair {
    pub value: f64,
    /// Entrywise positive, unit 1-norm.
    pub right: DVector<f64>,
    /// Entrywise positive, normalized so that `left · right = 1`.
    pub left: DVector<f64>,
    /// Largest modulus among the remaining eigenvalues.
    pub subdominant_modulus: f64,
    /// max of the right and left relative residuals.
    pub residual: f64,
}

/// `‖M x − λ x‖∞ / (λ ‖x‖∞)`
pub fn relative_residual(m: &DMatrix<f64>, x: &DVector<f64>, lambda: f64) -> f64 {
    let r = m * x - x * lambda;
    r.amax() / (lambda.abs() * x.amax())
}

pub fn perron_pair(m: &DMatrix<f64>) -> Result<PerronPair> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::domain("Perron pair needs a nonempty square matrix"));
    }
    if m.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::domain("Perron pair needs a finite nonnegative matrix"));
    }
    if m.nrows() <= DENSE_EIGEN_MAX_DIM {
        // None: Schur did not converge, fall through to power iteration
        if let Some(pair) = dense_perron(m)? {
            return Ok(pair);
        }
    }
    power_perron(m)
}

fn dense_perron(m: &DMatrix<f64>) -> Result<Option<PerronPair>> {
    let n = m.nrows();
    let Some(schur) = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER) else {
        return Ok(None);
    };
    let eigs = schur.complex_eigenvalues();
    let (dominant_idx, dominant) = eigs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.re.total_cmp(&b.1.re))
        .map(|(i, z)| (i, *z))
        .expect("nonempty spectrum");
    if dominant.re <= 0.0 {
        return Err(Error::numerical(format!(
            "dominant eigenvalue {} is not positive",
            dominant.re
        )));
    }
    let subdominant_modulus = eigs
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != dominant_idx)
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max);
    if n > 1 && subdominant_modulus >= dominant.re * (1.0 - 1e-14) {
        return Err(Error::numerical(format!(
            "dominant eigenvalue {} is not simple (next modulus {})",
            dominant.re, subdominant_modulus
        )));
    }

    let right = inverse_iteration(m, dominant.re)?;
    let mt = m.transpose();
    let left = inverse_iteration(&mt, dominant.re)?;
    finish_pair(m, &mt, right, left, subdominant_modulus).map(Some)
}

/// Inverse iteration at a shift just above `lambda`; the result is positive
/// and has unit 1-norm.
fn inverse_iteration(m: &DMatrix<f64>, lambda: f64) -> Result<DVector<f64>> {
    let n = m.nrows();
    let shift = lambda * (1.0 + 1e-10);
    let shifted = m - DMatrix::identity(n, n) * shift;
    let lu = shifted.lu();
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut best = x.clone();
    let mut best_res = f64::INFINITY;
    for _ in 0..INVERSE_ITER_MAX {
        let y = lu
            .solve(&x)
            .ok_or_else(|| Error::numerical("singular matrix in inverse iteration"))?;
        let sign = y.sum().signum();
        x = y.map(|v| (v * sign).abs());
        let norm = x.sum();
        x /= norm;
        let lam = rayleigh_positive(m, &x);
        let res = relative_residual(m, &x, lam);
        if res < best_res {
            best_res = res;
            best = x.clone();
        }
        if res <= PERRON_RESIDUAL_TARGET {
            break;
        }
    }
    Ok(best)
}

fn rayleigh_positive(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    (m * x).sum() / x.sum()
}

fn finish_pair(
    m: &DMatrix<f64>,
    mt: &DMatrix<f64>,
    right: DVector<f64>,
    left: DVector<f64>,
    subdominant_modulus: f64,
) -> Result<PerronPair> {
    let value = rayleigh_positive(m, &right);
    let dot = left.dot(&right);
    let left = left / dot;
    let residual =
        relative_residual(m, &right, value).max(relative_residual(mt, &left, value));
    if !(residual <= PERRON_RESIDUAL_LIMIT) {
        return Err(Error::numerical(format!(
            "Perron pair residual {residual:e} exceeds {PERRON_RESIDUAL_LIMIT:e}"
        )));
    }
    if right.iter().chain(left.iter()).any(|&v| !(v > 0.0)) {
        return Err(Error::numerical(
            "Perron eigenvector is not entrywise positive (matrix reducible?)",
        ));
    }
    Ok(PerronPair {
        value,
        right,
        left,
        subdominant_modulus,
        residual,
    })
}

fn power_perron(m: &DMatrix<f64>) -> Result<PerronPair> {
    let mt = m.transpose();
    let right = power_vector(m)?;
    let left = power_vector(&mt)?;
    let value = rayleigh_positive(m, &right);
    let sub = deflated_modulus(m, &right, &(left.clone() / left.dot(&right)), value);
    finish_pair(m, &mt, right, left, sub)
}

fn power_vector(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = m.nrows();
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..POWER_ITER_MAX {
        let mut y = m * &x;
        let norm = y.sum();
        if !(norm > 0.0) {
            return Err(Error::numerical("power iteration collapsed to zero"));
        }
        y /= norm;
        x = y;
        let lam = rayleigh_positive(m, &x);
        if relative_residual(m, &x, lam) <= PERRON_RESIDUAL_TARGET {
            return Ok(x);
        }
    }
    Err(Error::numerical(format!(
        "power iteration did not reach residual {PERRON_RESIDUAL_TARGET:e} in {POWER_ITER_MAX} steps"
    )))
}

/// Estimate of the second-largest eigenvalue modulus by power iteration on
/// `M − λ u vᵀ`.
fn deflated_modulus(m: &DMatrix<f64>, u: &DVector<f64>, v: &DVector<f64>, lambda: f64) -> f64 {
    let n = m.nrows();
    if n == 1 {
        return 0.0;
    }
    // deterministic start with no component along u
    let mut x = DVector::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { -0.5 });
    x -= u * v.dot(&x);
    // geometric mean growth over the second half
    let mut log_growth = 0.0;
    for step in 0..DEFLATION_ITER {
        let norm = x.norm();
        if norm == 0.0 {
            return 0.0;
        }
        x /= norm;
        let mut y = m * &x;
        y -= u * (lambda * v.dot(&x));
        if step >= DEFLATION_ITER / 2 {
            log_growth += y.norm().ln();
        }
        x = y;
    }
    (log_growth / (DEFLATION_ITER - DEFLATION_ITER / 2) as f64).exp()
}

/// Stationary row vector of a row-stochastic matrix, from the linear system
/// `π (P − I) = 0`, `Σ π = 1`.
pub fn stationary_vector(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = p.nrows();
    let mut a = (p - DMatrix::identity(n, n)).transpose();
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::numerical("stationary system is singular (chain reducible?)"))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("stationary solve produced non-finite values"));
    }
    let residual = (p.transpose() * &x - &x).amax();
    if residual > 1e-10 {
        return Err(Error::numerical(format!(
            "stationary residual {residual:e} exceeds 1e-10"
        )));
    }
    Ok(x)
}

/// Eigenvalues of a symmetric matrix, sorted in decreasing order. Rows and
/// columns that are entirely zero are split off first; each contributes an
/// exact zero eigenvalue.
pub fn symmetric_spectrum(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    let support: Vec<usize> = (0..n).filter(|&i| m.row(i).iter().any(|&x| x != 0.0)).collect();
    let mut ev = vec![0.0; n - support.len()];
    if !support.is_empty() {
        let k = support.len();
        let sub = DMatrix::from_fn(k, k, |i, j| m[(support[i], support[j])]);
        let eig = SymmetricEigen::try_new(sub, f64::EPSILON, SCHUR_MAX_ITER)
            .ok_or_else(|| Error::numerical("symmetric eigensolver did not converge"))?;
        if eig.eigenvalues.iter().any(|x| !x.is_finite()) {
            return Err(Error::numerical("symmetric eigensolver returned non-finite eigenvalues"));
        }
        ev.extend(eig.eigenvalues.iter());
    }
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}
