//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{Complex, DMatrix, DVector, Dim, Matrix, RawStorage};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Eigenvalues closer than this are treated as one degenerate cluster when ordering.
pub const DEGENERACY_TOL: f64 = 1e-10;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(c)
}

/// Largest `|m[i][j] - conj(m[j][i])|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn ensure_hermitian(m: &CMatrix, what: &'static str, tol: f64) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            what,
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let deviation = hermitian_deviation(m);
    if deviation > tol {
        return Err(Error::NotHermitian { what, deviation });
    }
    Ok(())
}

pub fn max_abs<R: Dim, K: Dim, S: RawStorage<C64, R, K>>(m: &Matrix<C64, R, K, S>) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted ascending.
///
/// Eigenvalues inside one degenerate cluster are ordered by which column of
/// `previous` they overlap with most, so repeated solves keep a stable labelling.
pub fn sorted_eigh(m: &CMatrix, previous: Option<&CMatrix>) -> (Vec<f64>, CMatrix) {
    let eig = m.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    if let Some(prev) = previous {
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && eig.eigenvalues[order[end]] - eig.eigenvalues[order[start]] < DEGENERACY_TOL {
                end += 1;
            }
            if end - start > 1 {
                let best_match = |col: usize| -> usize {
                    let v = eig.eigenvectors.column(col);
                    (0..prev.ncols())
                        .map(|j| (j, prev.column(j).dotc(&v).norm_sqr()))
                        .fold((usize::MAX, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best })
                        .0
                };
                order[start..end].sort_by_key(|&col| best_match(col));
            }
            start = end;
        }
    }

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Sorted eigenpairs of a real symmetric matrix.
pub fn sorted_eigh_real(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    let mut values: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_pair_follows_previous_labels() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0), c(1.0), c(0.0)]));
        // previous orbitals list e1 before e0
        let mut prev = CMatrix::zeros(3, 2);
        prev[(1, 0)] = c(1.0);
        prev[(0, 1)] = c(1.0);
        let (values, vectors) = sorted_eigh(&m, Some(&prev));
        assert_eq!(values[0], 0.0);
        assert!(vectors[(1, 1)].norm() > 0.99);
        assert!(vectors[(0, 2)].norm() > 0.99);
    }

    #[test]
    fn hermitian_check_rejects_skew() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = C64::new(0.0, 1.0);
        m[(1, 0)] = C64::new(0.0, 1.0);
        assert!(ensure_hermitian(&m, "test", 1e-12).is_err());
        m[(1, 0)] = C64::new(0.0, -1.0);
        assert!(ensure_hermitian(&m, "test", 1e-12).is_ok());
    }
}
