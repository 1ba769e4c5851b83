//! Dense symmetric eigenproblems, backed by faer's self-adjoint solver.

use faer::Side;

use crate::error::{invalid, Error, Result};

pub type Matrix = faer::Mat<f64>;

/// Eigenvalues in ascending order, with eigenvectors as columns when requested.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Option<Matrix>,
}

/// Largest absolute entry; cheap scale for tolerance checks.
pub fn max_abs(a: &Matrix) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].abs());
        }
    }
    m
}

/// Rejects non-square input and asymmetry above `1e-12` relative to the
/// largest entry.
pub fn check_symmetric(a: &Matrix) -> Result<()> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(invalid(format!("matrix is {}x{}, not square", n, a.ncols())));
    }
    let tol = 1e-12 * max_abs(a);
    for j in 0..n {
        for i in (j + 1)..n {
            let d = (a[(i, j)] - a[(j, i)]).abs();
            if d > tol {
                return Err(invalid(format!(
                    "matrix not symmetric: |A[{i},{j}] - A[{j},{i}]| = {d:e}"
                )));
            }
        }
    }
    Ok(())
}

pub fn symmetric_eigen(a: &Matrix, vectors: bool) -> Result<SymmetricEigen> {
    check_symmetric(a)?;
    if a.nrows() == 0 {
        return Ok(SymmetricEigen {
            values: Vec::new(),
            vectors: vectors.then(|| Matrix::zeros(0, 0)),
        });
    }
    if vectors {
        let evd = a
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let s = evd.S().column_vector();
        let values = (0..a.nrows()).map(|i| s[i]).collect();
        Ok(SymmetricEigen {
            values,
            vectors: Some(evd.U().to_owned()),
        })
    } else {
        let values = a
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Eigen(format!("{e:?}")))?;
        Ok(SymmetricEigen { values, vectors: None })
    }
}

/// Eigenvalues sorted descending.
pub fn eigenvalues_descending(a: &Matrix) -> Result<Vec<f64>> {
    let mut v = symmetric_eigen(a, false)?.values;
    v.reverse();
    Ok(v)
}

/// Singular values, descending.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    let mut s = a
        .singular_values()
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

pub fn frobenius_norm(a: &Matrix) -> f64 {
    a.norm_l2()
}

/// Operator 2-norm.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

/// `max_k |(A v_k - lambda_k v_k)|` over all eigenpairs.
pub fn max_residual(a: &Matrix, eig: &SymmetricEigen) -> Option<f64> {
    let v = eig.vectors.as_ref()?;
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for k in 0..eig.values.len() {
        let mut r2 = 0.0;
        for i in 0..n {
            let mut acc = -eig.values[k] * v[(i, k)];
            for j in 0..n {
                acc += a[(i, j)] * v[(j, k)];
            }
            r2 += acc * acc;
        }
        worst = worst.max(r2.sqrt());
    }
    Some(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Matrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let x: f64 = rng.gen_range(-1.0..1.0);
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
        }
        a
    }

    /// Orthogonal matrix by Gram-Schmidt on random columns.
    fn random_orthogonal(n: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        for j in 0..n {
            for k in 0..j {
                let dot: f64 = (0..n).map(|i| q[(i, j)] * q[(i, k)]).sum();
                for i in 0..n {
                    q[(i, j)] -= dot * q[(i, k)];
                }
            }
            let norm: f64 = (0..n).map(|i| q[(i, j)].powi(2)).sum::<f64>().sqrt();
            for i in 0..n {
                q[(i, j)] /= norm;
            }
        }
        q
    }

    #[test]
    fn identity_and_swap() {
        let id = Matrix::identity(2, 2);
        let e = symmetric_eigen(&id, false).unwrap().values;
        assert!((e[0] - 1.0).abs() < 1e-15 && (e[1] - 1.0).abs() < 1e-15);
        let swap = Matrix::from_fn(2, 2, |i, j| if i != j { 1.0 } else { 0.0 });
        let e = symmetric_eigen(&swap, false).unwrap().values;
        assert!((e[0] + 1.0).abs() < 1e-15 && (e[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reconstruction_50() {
        let a = random_symmetric(50, 7);
        let eig = symmetric_eigen(&a, true).unwrap();
        assert!(eig.values.windows(2).all(|p| p[0] <= p[1]));
        let v = eig.vectors.as_ref().unwrap();
        let lam = Matrix::from_fn(50, 50, |i, j| if i == j { eig.values[i] } else { 0.0 });
        let rec = v * &lam * v.transpose();
        let rel = (&rec - &a).norm_l2() / a.norm_l2();
        assert!(rel < 1e-9, "{rel}");
        let res = max_residual(&a, &eig).unwrap();
        assert!(res <= 1e-10 * spectral_norm(&a).unwrap());
    }

    #[test]
    fn orthogonal_invariance() {
        let n = 30;
        let mut a = random_symmetric(n, 11);
        let scale = spectral_norm(&a).unwrap();
        a = &a * (1.0 / scale);
        let q = random_orthogonal(n, 12);
        let b = &q * &a * q.transpose();
        // re-symmetrize roundoff before the strict check
        let b = Matrix::from_fn(n, n, |i, j| 0.5 * (b[(i, j)] + b[(j, i)]));
        let ea = symmetric_eigen(&a, false).unwrap().values;
        let eb = symmetric_eigen(&b, false).unwrap().values;
        for (x, y) in ea.iter().zip(&eb) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_asymmetric() {
        let a = Matrix::from_fn(2, 2, |i, j| if i == 0 && j == 1 { 1.0 } else { 0.0 });
        assert!(matches!(symmetric_eigen(&a, false), Err(Error::InvalidArgument(_))));
        let r = Matrix::zeros(2, 3);
        assert!(symmetric_eigen(&r, false).is_err());
    }

    #[test]
    fn singular_values_of_diagonal() {
        let d = Matrix::from_fn(3, 3, |i, j| if i == j { [3.0, -2.0, 0.1][i] } else { 0.0 });
        let s = singular_values(&d).unwrap();
        assert!((s[0] - 3.0).abs() < 1e-14 && (s[1] - 2.0).abs() < 1e-14 && (s[2] - 0.1).abs() < 1e-14);
        assert!((frobenius_norm(&d) - (9.0f64 + 4.0 + 0.01).sqrt()).abs() < 1e-14);
    }
}
