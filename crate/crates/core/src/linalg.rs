//! Small dense helpers shared by the solvers.

use nalgebra::{DMatrix, DVector, Dim, Matrix, RawStorage, SVector};

use crate::generator::Mat12;

use crate::error::{Error, Result};

pub type Vec12 = SVector<f64, 12>;
pub type Vec7 = SVector<f64, 7>;

/// Stationary row vector of a conservative generator: `x Q = 0`, `x e = 1`.
///
/// The last balance equation is replaced by the normalization.
pub fn stationary_dense(q: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = q.nrows();
    let mut system = q.transpose();
    for j in 0..n {
        system[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let x = system
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularSystem("stationary vector"))?;
    let scale = q.amax().max(1.0);
    let residual = (x.transpose() * q).amax();
    if x.iter().any(|v| !v.is_finite() || *v < -1e-10) || residual > 1e-9 * scale {
        return Err(Error::SingularSystem("stationary vector"));
    }
    Ok(x)
}

pub fn to_dynamic<R: Dim, C: Dim, S: RawStorage<f64, R, C>>(m: &Matrix<f64, R, C, S>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Stationary vector of the 12-phase generator.
pub fn stationary_vector(q: &Mat12) -> Result<Vec12> {
    let x = stationary_dense(&to_dynamic(q))?;
    Ok(Vec12::from_iterator(x.iter().copied()))
}

/// Spectral radius, via the real Schur form.
pub fn spectral_radius<R: Dim, C: Dim, S: RawStorage<f64, R, C>>(m: &Matrix<f64, R, C, S>) -> f64 {
    to_dynamic(m)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}
