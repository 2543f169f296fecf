//! Dense helpers shared by the library modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{BmiError, Result};

/// Relative tolerance used for symmetry validation of user data.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Largest `|A_ij − A_ji|` divided by `‖A‖_F` (zero for the zero matrix).
pub fn relative_asymmetry(a: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..a.nrows() {
        for j in 0..i {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    let norm = a.norm();
    if worst == 0.0 {
        0.0
    } else if norm == 0.0 {
        f64::INFINITY
    } else {
        worst / norm
    }
}

pub fn ensure_symmetric(a: &DMatrix<f64>, what: impl FnOnce() -> String) -> Result<()> {
    if !a.is_square() {
        return Err(BmiError::Input(format!(
            "{} must be square, got {}x{}",
            what(),
            a.nrows(),
            a.ncols()
        )));
    }
    let rel = relative_asymmetry(a);
    if rel > SYMMETRY_TOL {
        return Err(BmiError::Asymmetric { what: what(), rel });
    }
    Ok(())
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

fn eigenvalues(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    if a.nrows() == 1 {
        return Ok(DVector::from_element(1, a[(0, 0)]));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(BmiError::Numerical("eigenvalues of a non-finite matrix".into()));
    }
    SymmetricEigen::try_new(symmetrize(a), f64::EPSILON, 10_000)
        .map(|e| e.eigenvalues)
        .ok_or_else(|| BmiError::Numerical("symmetric eigensolver did not converge".into()))
}

pub fn max_eigenvalue(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?.max())
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?.min())
}

/// Eigenpairs sorted by ascending eigenvalue.
pub fn sorted_eigen(a: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
    let k = a.nrows();
    if k == 1 {
        return Ok((vec![a[(0, 0)]], vec![DVector::from_element(1, 1.0)]));
    }
    let eig = SymmetricEigen::try_new(symmetrize(a), f64::EPSILON, 10_000)
        .ok_or_else(|| BmiError::Numerical("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    Ok((vals, vecs))
}

/// Spectral norm of a symmetric matrix.
pub fn spectral_norm(a: &DMatrix<f64>) -> Result<f64> {
    let e = eigenvalues(a)?;
    Ok(e.iter().fold(0.0_f64, |acc, l| acc.max(l.abs())))
}

/// Entrywise q-norm for q ∈ {1, 2}.
pub fn entry_norm(a: &DMatrix<f64>, q: u8) -> f64 {
    match q {
        1 => a.iter().map(|x| x.abs()).sum(),
        _ => a.norm(),
    }
}

/// Uniformly distributed point on the unit sphere in `R^k`.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, k: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}
