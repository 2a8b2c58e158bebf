//! Dense symmetric eigensolver used by the rank reduction.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigenpairs sorted by decreasing eigenvalue; column `k` of `vectors`
/// belongs to `values[k]`.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOL: f64 = 1e-14;

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
/// `1e-14 ‖A‖_F`.
///
/// Eigenvectors are normalised so that their largest-magnitude entry is
/// positive (first such entry on exact ties).
pub fn jacobi_eigen(a: &DMatrix<f64>) -> Result<SymmetricEigen> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            found: a.ncols(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("non-finite entry in eigenproblem".into()));
    }
    // Symmetrise so roundoff in a product like SᵀS cannot bias the sweep.
    let mut m = (a + a.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.norm();

    if scale > 0.0 {
        let mut converged = false;
        for _ in 0..MAX_SWEEPS {
            if off_diagonal(&m) <= OFF_DIAGONAL_TOL * scale {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                    let c = 1.0 / t.hypot(1.0);
                    let s = t * c;
                    rotate(&mut m, &mut v, p, q, c, s);
                }
            }
        }
        if !converged && off_diagonal(&m) > OFF_DIAGONAL_TOL * scale {
            return Err(Error::Singular("Jacobi sweeps did not converge".into()));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]).then(i.cmp(&j)));
    let values = DVector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let mut col = v.column(i).into_owned();
        fix_sign(&mut col);
        vectors.set_column(k, &col);
    }
    Ok(SymmetricEigen { values, vectors })
}

fn off_diagonal(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut sum = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                sum += m[(i, j)] * m[(i, j)];
            }
        }
    }
    sum.sqrt()
}

fn rotate(m: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let n = m.nrows();
    // M <- Jᵀ M J with J the (p, q) plane rotation.
    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Flips `col` so that its largest-magnitude entry is positive.
pub fn fix_sign(col: &mut DVector<f64>) {
    let mut best = 0;
    for (i, x) in col.iter().enumerate() {
        if x.abs() > col[best].abs() {
            best = i;
        }
    }
    if col[best] < 0.0 {
        col.neg_mut();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonalises_small_matrix() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 1.0]);
        let eig = jacobi_eigen(&a).unwrap();
        let recon = &eig.vectors * DMatrix::from_diagonal(&eig.values) * eig.vectors.transpose();
        assert!((recon - &a).abs().max() < 1e-13);
        let orth = eig.vectors.transpose() * &eig.vectors;
        assert!((orth - DMatrix::identity(3, 3)).abs().max() < 1e-14);
        assert!(eig.values[0] >= eig.values[1] && eig.values[1] >= eig.values[2]);

        let reference = nalgebra::SymmetricEigen::new(a.clone());
        let mut ev: Vec<f64> = reference.eigenvalues.iter().copied().collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in ev.iter().zip(eig.values.iter()) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn sign_convention_and_degenerate_input() {
        let eig = jacobi_eigen(&DMatrix::identity(4, 4)).unwrap();
        assert_eq!(eig.vectors, DMatrix::identity(4, 4));
        let zero = jacobi_eigen(&DMatrix::zeros(3, 3)).unwrap();
        assert!(zero.values.iter().all(|v| *v == 0.0));
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, -2.0, 1.0]);
        let eig = jacobi_eigen(&a).unwrap();
        for k in 0..2 {
            let col = eig.vectors.column(k);
            let imax = col.iamax();
            assert!(col[imax] > 0.0);
        }
        assert!(jacobi_eigen(&DMatrix::zeros(2, 3)).is_err());
    }
}
