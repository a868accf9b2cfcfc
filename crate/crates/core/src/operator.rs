//! Hermite–Galerkin discretization of `H_{k,m} = (−∂²)^m + x^{2k}` on the
//! line and its eigen-decomposition.
//!
//! Position and momentum act on the Hermite basis as exact banded matrices,
//! so `(P²)^m + (X²)^k` is assembled in a padded basis and truncated; the
//! retained `N × N` block is the exact Galerkin matrix.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite;
use crate::linalg::{sym_eigen_sorted, symmetrize};

/// Relative eigenvalue drift tolerated by the reliability index.
pub const RELIABILITY_TOL: f64 = 1e-8;

/// Exponents of the anisotropic operator and the fractional power of the
/// semigroup generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShubinParams {
    pub k: u32,
    pub m: u32,
    pub s: f64,
}

impl ShubinParams {
    pub fn new(k: u32, m: u32, s: f64) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidParameter {
                name: "k",
                reason: format!("must be >= 1, got {k}"),
            });
        }
        if m < 1 {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: format!("must be >= 1, got {m}"),
            });
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "s",
                reason: format!("must be a positive real, got {s}"),
            });
        }
        Ok(Self { k, m, s })
    }

    /// `s* = ½(1/k + 1/m)`.
    pub fn critical_power(&self) -> f64 {
        0.5 * (1.0 / self.k as f64 + 1.0 / self.m as f64)
    }

    /// Same operator, different fractional power.
    pub fn with_power(self, s: f64) -> Result<Self> {
        Self::new(self.k, self.m, s)
    }

    /// Smallest admissible Galerkin truncation.
    pub fn min_truncation(&self) -> usize {
        4 * (self.k + self.m) as usize
    }

    /// Padded size used for the operator products.
    pub fn padded(&self, n: usize) -> usize {
        n + 2 * self.k as usize + 2 * self.m as usize + 4
    }
}

/// Matrix of multiplication by `x` in the first `n_pad` Hermite functions.
pub fn hermite_position_matrix(n_pad: usize) -> Result<DMatrix<f64>> {
    if n_pad < 2 {
        return Err(Error::Sizing(format!("position matrix needs N_pad >= 2, got {n_pad}")));
    }
    let mut x = DMatrix::zeros(n_pad, n_pad);
    for n in 0..n_pad - 1 {
        let v = ((n as f64 + 1.0) / 2.0).sqrt();
        x[(n, n + 1)] = v;
        x[(n + 1, n)] = v;
    }
    Ok(x)
}

fn square_matrix(n_pad: usize, sign: f64) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n_pad, n_pad);
    for n in 0..n_pad {
        let nf = n as f64;
        a[(n, n)] = (2.0 * nf + 1.0) / 2.0;
        if n + 2 < n_pad {
            let v = sign * ((nf + 1.0) * (nf + 2.0)).sqrt() / 2.0;
            a[(n, n + 2)] = v;
            a[(n + 2, n)] = v;
        }
    }
    a
}

/// `−∂²` in the Hermite basis.
pub fn momentum_square_matrix(n_pad: usize) -> DMatrix<f64> {
    square_matrix(n_pad, -1.0)
}

/// `x²` in the Hermite basis.
pub fn position_square_matrix(n_pad: usize) -> DMatrix<f64> {
    square_matrix(n_pad, 1.0)
}

fn matrix_power(a: &DMatrix<f64>, p: u32) -> DMatrix<f64> {
    let mut out = a.clone();
    for _ in 1..p {
        out = &out * a;
    }
    out
}

/// Half-bandwidth: the largest `|i − j|` with a nonzero entry.
pub fn bandwidth(a: &DMatrix<f64>) -> usize {
    let mut bw = 0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if a[(i, j)] != 0.0 {
                bw = bw.max(i.abs_diff(j));
            }
        }
    }
    bw
}

/// Truncated Galerkin matrix of `H_{k,m}`.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    pub params: ShubinParams,
    pub n: usize,
    pub n_pad: usize,
    pub matrix: DMatrix<f64>,
}

/// Assembles `(P²)^m + (X²)^k` at `N_pad` and truncates to `N × N`.
pub fn build_hamiltonian(params: ShubinParams, n: usize) -> Result<Hamiltonian> {
    let min = params.min_truncation();
    if n < min {
        return Err(Error::Sizing(format!(
            "truncation N = {n} too small for k = {}, m = {}: need N >= {min}",
            params.k, params.m
        )));
    }
    let n_pad = params.padded(n);
    let kinetic = matrix_power(&momentum_square_matrix(n_pad), params.m);
    let potential = matrix_power(&position_square_matrix(n_pad), params.k);
    let full = kinetic + potential;
    let mut matrix = full.view((0, 0), (n, n)).into_owned();
    symmetrize(&mut matrix);
    Ok(Hamiltonian {
        params,
        n,
        n_pad,
        matrix,
    })
}

/// How many eigenpairs to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeRequest {
    Count(usize),
    /// All eigenvalues `≤ λ_max`.
    UpTo(f64),
}

/// Which basis a coefficient vector is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisKind {
    Eigen,
    Hermite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffVector {
    pub basis: BasisKind,
    pub values: Vec<f64>,
}

impl CoeffVector {
    pub fn hermite(values: Vec<f64>) -> Self {
        Self {
            basis: BasisKind::Hermite,
            values,
        }
    }

    pub fn eigen(values: Vec<f64>) -> Self {
        Self {
            basis: BasisKind::Eigen,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Eigenvalues (ascending) and Hermite-coefficient eigenvectors of a
/// truncated `H_{k,m}`.
///
/// Only the lower half of the discrete spectrum is exposed; the upper half is
/// dominated by truncation. Eigenvectors are stored with `N_pad` rows (rows
/// `N..N_pad` are zero) so that ladder operations have room to act.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub params: ShubinParams,
    pub n: usize,
    pub n_pad: usize,
    eigenvalues: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl EigenBasis {
    pub fn compute(params: ShubinParams, n: usize, request: ModeRequest) -> Result<Self> {
        let h = build_hamiltonian(params, n)?;
        Self::from_hamiltonian(&h, request)
    }

    /// Solves the even and odd blocks separately (the operator commutes with
    /// parity), merges them in ascending order and fixes signs.
    pub fn from_hamiltonian(h: &Hamiltonian, request: ModeRequest) -> Result<Self> {
        let n = h.n;
        let available = n / 2;
        if let ModeRequest::Count(c) = request {
            if c > available {
                return Err(Error::Truncation {
                    requested: c,
                    available,
                    n,
                });
            }
        }
        let mut pairs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n);
        for parity in 0..2 {
            let idx: Vec<usize> = (parity..n).step_by(2).collect();
            let block = DMatrix::from_fn(idx.len(), idx.len(), |i, j| h.matrix[(idx[i], idx[j])]);
            let (vals, vecs) = sym_eigen_sorted(&block);
            for (c, &v) in vals.iter().enumerate() {
                let mut col = vec![0.0; h.n_pad];
                for (r, &i) in idx.iter().enumerate() {
                    col[i] = vecs[(r, c)];
                }
                pairs.push((v, col));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.truncate(available);

        let keep = match request {
            ModeRequest::Count(c) => c,
            ModeRequest::UpTo(lmax) => {
                let c = pairs.iter().take_while(|p| p.0 <= lmax).count();
                if c == available {
                    return Err(Error::Truncation {
                        requested: c + 1,
                        available,
                        n,
                    });
                }
                c
            }
        };
        pairs.truncate(keep);

        let mut vectors = DMatrix::zeros(h.n_pad, keep);
        let mut eigenvalues = Vec::with_capacity(keep);
        for (j, (v, mut col)) in pairs.into_iter().enumerate() {
            if let Some(first) = col.iter().find(|c| c.abs() > 1e-12) {
                if *first < 0.0 {
                    col.iter_mut().for_each(|c| *c = -*c);
                }
            }
            vectors.set_column(j, &DVector::from_vec(col));
            eigenvalues.push(v);
        }
        if eigenvalues.first().is_some_and(|&l| l <= 0.0) {
            return Err(Error::Domain(format!(
                "non-positive eigenvalue {} from truncation N = {n}",
                eigenvalues[0]
            )));
        }
        Ok(Self {
            params: h.params,
            n,
            n_pad: h.n_pad,
            eigenvalues,
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, i: usize) -> f64 {
        self.eigenvalues[i]
    }

    /// `λ_n^s` for the stored modes.
    pub fn powered_eigenvalues(&self, s: f64) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| l.powf(s)).collect()
    }

    /// `N_pad × len` matrix whose columns are Hermite coefficients.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// Hermite coefficients of `ψ_i` (length `N_pad`).
    pub fn mode(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i).iter().copied().collect()
    }

    /// Number of modes with `λ_n ≤ λ`.
    pub fn count_below(&self, lambda: f64) -> usize {
        self.eigenvalues.iter().take_while(|&&l| l <= lambda).count()
    }

    /// Converts any coefficient vector to the Hermite basis.
    pub fn to_hermite(&self, c: &CoeffVector) -> Result<CoeffVector> {
        match c.basis {
            BasisKind::Hermite => Ok(c.clone()),
            BasisKind::Eigen => {
                if c.len() > self.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "{} eigen-coefficients for a basis of {} modes",
                        c.len(),
                        self.len()
                    )));
                }
                let a = DVector::from_column_slice(&c.values);
                let h = self.vectors.columns(0, c.len()) * a;
                Ok(CoeffVector::hermite(h.iter().copied().collect()))
            }
        }
    }

    /// Orthogonal projection of a Hermite expansion onto the stored modes.
    pub fn project(&self, c: &CoeffVector) -> CoeffVector {
        match c.basis {
            BasisKind::Eigen => c.clone(),
            BasisKind::Hermite => {
                let vals = (0..self.len())
                    .map(|j| {
                        self.vectors
                            .column(j)
                            .iter()
                            .zip(&c.values)
                            .map(|(a, b)| a * b)
                            .sum()
                    })
                    .collect();
                CoeffVector::eigen(vals)
            }
        }
    }

    /// Largest index `r` such that `λ_0, …, λ_r` all move by less than
    /// [`RELIABILITY_TOL`] (relative) when `N` grows by 25%.
    pub fn reliability_index(&self) -> Result<Option<usize>> {
        let bigger = (self.n as f64 * 1.25).ceil() as usize;
        let other = EigenBasis::compute(self.params, bigger, ModeRequest::Count(self.len()))?;
        let mut last = None;
        for (i, (a, b)) in self.eigenvalues.iter().zip(other.eigenvalues()).enumerate() {
            if ((a - b) / a).abs() < RELIABILITY_TOL {
                last = Some(i);
            } else {
                break;
            }
        }
        Ok(last)
    }

    /// Number of reliable modes (`reliability_index + 1`).
    pub fn reliable_len(&self) -> Result<usize> {
        Ok(self.reliability_index()?.map_or(0, |r| r + 1))
    }
}

/// Pointwise values of a coefficient vector on `grid`.
pub fn evaluate(basis: &EigenBasis, coeffs: &CoeffVector, grid: &[f64]) -> Result<Vec<f64>> {
    let h = basis.to_hermite(coeffs)?;
    if !h.is_finite() {
        return Err(Error::InvalidParameter {
            name: "coeffs",
            reason: "non-finite coefficient".into(),
        });
    }
    Ok(evaluate_hermite(&h.values, grid))
}

/// Pointwise values of a Hermite expansion.
pub fn evaluate_hermite(coeffs: &[f64], grid: &[f64]) -> Vec<f64> {
    let mut buf = vec![0.0; coeffs.len()];
    grid.iter()
        .map(|&x| {
            hermite::hermite_functions(x, &mut buf);
            hermite::dot(coeffs, &buf)
        })
        .collect()
}

/// `∂^β` applied to a Hermite expansion; the result is `β` entries longer.
pub fn derivative_coeffs(coeffs: &CoeffVector, order: usize) -> Result<CoeffVector> {
    if coeffs.basis != BasisKind::Hermite {
        return Err(Error::DimensionMismatch(
            "derivatives act on Hermite coefficients; convert eigen-coefficients first".into(),
        ));
    }
    Ok(CoeffVector::hermite(hermite::derivative_n(&coeffs.values, order)))
}
