//! Symmetric eigendecomposition and the Moore–Penrose pseudoinverse built on it.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative factor applied to the largest eigenvalue magnitude to obtain the
/// default rank cut-off of [`pseudoinverse`].
pub const DEFAULT_RELATIVE_RANK_TOL: f64 = 1e-8;

/// Eigenpairs of a real symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: DMatrix<f64>,
}

/// Largest absolute deviation from symmetry.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::param(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(1.0);
    let asym = asymmetry(m);
    if asym > 1e-8 * scale {
        return Err(Error::param(format!(
            "matrix is not symmetric (max deviation {asym:e})"
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("matrix contains non-finite entries"));
    }
    Ok(())
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen> {
    check_symmetric(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(SymmetricEigen {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, 1000 * n.max(10))
        .ok_or_else(|| Error::numerical(format!("symmetric eigensolver did not converge (n = {n})")))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SymmetricEigen { values, vectors })
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    symmetric_eigen(m).map(|e| e.values)
}

/// Moore–Penrose pseudoinverse of a symmetric matrix.
///
/// Eigenvalues with `|λ| <= rank_tolerance` are treated as zero; the rest are
/// inverted. `None` selects `1e-8 · max|λ|`.
pub fn pseudoinverse(m: &DMatrix<f64>, rank_tolerance: Option<f64>) -> Result<DMatrix<f64>> {
    let eig = symmetric_eigen(m)?;
    let n = m.nrows();
    let scale = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = match rank_tolerance {
        Some(t) if t < 0.0 || !t.is_finite() => {
            return Err(Error::param(format!("rank tolerance must be finite and >= 0, got {t}")))
        }
        Some(t) => t,
        None => DEFAULT_RELATIVE_RANK_TOL * scale,
    };

    let mut out = DMatrix::zeros(n, n);
    for (k, &lambda) in eig.values.iter().enumerate() {
        if lambda.abs() <= tol {
            continue;
        }
        let v = eig.vectors.column(k);
        out.ger(1.0 / lambda, &v, &v, 1.0);
    }
    // exact symmetry
    let t = out.transpose();
    out += t;
    out *= 0.5;
    Ok(out)
}

/// Number of eigenvalues with `|λ| <= tol`.
pub fn null_count(values: &[f64], tol: f64) -> usize {
    values.iter().filter(|v| v.abs() <= tol).count()
}
