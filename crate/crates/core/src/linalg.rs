//! Small dense helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigen-decomposition of a symmetric matrix with eigenvalues ascending.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Averages a matrix with its transpose; the result is bitwise symmetric.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let (v, _) = sym_eigen_sorted(m);
    v.last().copied().unwrap_or(0.0)
}

/// Solution of a symmetric positive definite system.
#[derive(Debug, Clone)]
pub struct SpdSolve {
    pub x: DVector<f64>,
    pub condition: f64,
    pub min_eigenvalue: f64,
}

/// Solves `A x = b` through the spectral decomposition of `A`, followed by a
/// few steps of iterative refinement.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> SpdSolve {
    let (vals, vecs) = sym_eigen_sorted(a);
    let min = vals.first().copied().unwrap_or(0.0);
    let max = vals.last().copied().unwrap_or(0.0);
    let apply_inv = |r: &DVector<f64>| -> DVector<f64> {
        let mut y = vecs.transpose() * r;
        for (yi, &l) in y.iter_mut().zip(&vals) {
            *yi /= l;
        }
        &vecs * y
    };
    let mut x = apply_inv(b);
    for _ in 0..3 {
        let r = b - a * &x;
        if r.norm() <= 1e-16 * b.norm() {
            break;
        }
        x += apply_inv(&r);
    }
    SpdSolve {
        x,
        condition: if min > 0.0 { max / min } else { f64::INFINITY },
        min_eigenvalue: min,
    }
}

/// Largest generalized eigenvalue of `(A, B)` with `B` positive definite,
/// together with its `B`-normalized eigenvector.
pub fn max_generalized_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let (vals, vecs) = sym_eigen_sorted(b);
    let scale: Vec<f64> = vals.iter().map(|v| 1.0 / v.sqrt()).collect();
    // B^{-1/2} = Q diag(scale) Qᵀ
    let mut half = vecs.clone();
    for (j, s) in scale.iter().enumerate() {
        half.column_mut(j).scale_mut(*s);
    }
    let b_inv_half = &half * vecs.transpose();
    let mut k = &b_inv_half * a * &b_inv_half;
    symmetrize(&mut k);
    let (kv, kvecs) = sym_eigen_sorted(&k);
    let n = kv.len();
    let y = kvecs.column(n - 1).into_owned();
    (kv[n - 1], &b_inv_half * y)
}
