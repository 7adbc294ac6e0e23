//! Dense helpers on top of `nalgebra` for the tiny matrices used here
//! (state dimension is 3 for the vehicle model, at most a few dozen elsewhere).

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn diag(entries: &Vector) -> Mat {
    Mat::from_diagonal(entries)
}

/// Largest singular value.
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn symmetry_defect(m: &Mat) -> f64 {
    (m - m.transpose()).amax()
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn min_symmetric_eigenvalue(m: &Mat) -> f64 {
    symmetrize(m).symmetric_eigenvalues().min()
}

pub fn max_symmetric_eigenvalue(m: &Mat) -> f64 {
    symmetrize(m).symmetric_eigenvalues().max()
}

pub fn eigenvalues(m: &Mat) -> Vec<Complex<f64>> {
    m.complex_eigenvalues().iter().copied().collect()
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(m: &Mat) -> f64 {
    eigenvalues(m)
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_hurwitz(m: &Mat) -> bool {
    spectral_abscissa(m) < 0.0
}

pub fn ensure_square(m: &Mat, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

/// Solves `Fᵀ X + X F = -Q` by vectorization. Cost is O(n⁶), acceptable for n ≤ 50.
pub fn solve_lyapunov(f: &Mat, q: &Mat) -> Result<Mat> {
    let n = ensure_square(f, "Lyapunov operator")?;
    let n2 = n * n;
    // vec(FᵀX + XF) = (I ⊗ Fᵀ + Fᵀ ⊗ I) vec(X), column-major vec.
    let mut kron = Mat::zeros(n2, n2);
    for j in 0..n {
        for i in 0..n {
            let row = j * n + i;
            for k in 0..n {
                // (FᵀX)_{ij} = Σ_k F_{ki} X_{kj}
                kron[(row, j * n + k)] += f[(k, i)];
                // (XF)_{ij} = Σ_k X_{ik} F_{kj}
                kron[(row, k * n + i)] += f[(k, j)];
            }
        }
    }
    let rhs = Vector::from_iterator(n2, q.iter().map(|v| -v));
    let sol = kron
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NoStabilizingSolution("singular Lyapunov operator".into()))?;
    Ok(symmetrize(&Mat::from_column_slice(n, n, sol.as_slice())))
}

pub fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}
