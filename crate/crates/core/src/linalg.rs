//! Centering, second-moment matrices, a cyclic Jacobi eigensolver and subspace
//! projections. This is the closed-form PCA side; the autoencoder module is the
//! iterative side, and the theory module compares the two.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::io::EmbeddingSet;

/// Off-diagonal Frobenius norm at which the Jacobi iteration stops, relative to `||Σ||_F`.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Relative eigenvalue gap below which a spectrum is treated as having ties.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// Mean-subtracted embeddings together with the subtracted mean.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredEmbeddings {
    pub matrix: DMatrix<f64>,
    pub mean: DVector<f64>,
}

impl CenteredEmbeddings {
    pub fn from_matrix(x: &DMatrix<f64>) -> Self {
        let count = x.ncols().max(1) as f64;
        let mean = x.column_sum() / count;
        let mut matrix = x.clone();
        for mut col in matrix.column_iter_mut() {
            col -= &mean;
        }
        Self { matrix, mean }
    }

    /// `X' + mean 1ᵀ`, the original matrix.
    pub fn restore(&self) -> DMatrix<f64> {
        let mut out = self.matrix.clone();
        for mut col in out.column_iter_mut() {
            col += &self.mean;
        }
        out
    }
}

pub fn center(set: &EmbeddingSet) -> CenteredEmbeddings {
    CenteredEmbeddings::from_matrix(set.matrix())
}

/// Unnormalized second moment `X' X'ᵀ`, symmetrized to remove rounding skew.
pub fn covariance(c: &CenteredEmbeddings) -> DMatrix<f64> {
    second_moment(&c.matrix)
}

pub fn second_moment(x: &DMatrix<f64>) -> DMatrix<f64> {
    let sigma = x * x.transpose();
    (&sigma + sigma.transpose()) * 0.5
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    /// Sorted descending.
    pub eigenvalues: DVector<f64>,
    /// Column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: DMatrix<f64>,
    /// Jacobi sweeps used.
    pub sweeps: usize,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Smallest gap between consecutive eigenvalues (`inf` for a 1x1 matrix).
    pub fn min_gap(&self) -> f64 {
        self.eigenvalues
            .as_slice()
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(f64::INFINITY, f64::min)
    }

    /// True when two eigenvalues coincide to within `TIE_TOLERANCE * λ₁`; the
    /// eigenvectors of tied eigenvalues are then only defined up to rotation.
    pub fn has_ties(&self) -> bool {
        let top = self.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.min_gap() < TIE_TOLERANCE * top
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.sum()
    }

    /// `U_I` for 0-based indices.
    pub fn select(&self, indices: &[usize]) -> Result<DMatrix<f64>> {
        validate_indices(indices, self.dim())?;
        Ok(self.eigenvectors.select_columns(indices))
    }

    /// `U_p`, the top-`p` eigenvectors.
    pub fn top(&self, p: usize) -> Result<DMatrix<f64>> {
        if p == 0 || p > self.dim() {
            return Err(Error::arg(format!("top-p requires 1 <= p <= {}, got {p}", self.dim())));
        }
        Ok(self.eigenvectors.columns(0, p).into_owned())
    }

    /// `U_p U_pᵀ`.
    pub fn top_projector(&self, p: usize) -> Result<DMatrix<f64>> {
        let u = self.top(p)?;
        Ok(&u * u.transpose())
    }
}

fn validate_indices(indices: &[usize], n: usize) -> Result<()> {
    if indices.is_empty() {
        return Err(Error::arg("index set must not be empty"));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
        return Err(Error::arg(format!("index {bad} out of range for dimension {n}")));
    }
    if indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg("indices must be strictly increasing"));
    }
    Ok(())
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[i * n + j] * a[i * n + j];
            }
        }
    }
    sum.sqrt()
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Eigenvalues come back in descending order. Each eigenvector is sign-fixed so
/// that its largest-magnitude entry is positive (lowest index wins ties), which
/// makes the output a deterministic function of the input.
pub fn eigendecompose(sigma: &DMatrix<f64>) -> Result<EigenDecomposition> {
    let n = sigma.nrows();
    if n == 0 || sigma.ncols() != n {
        return Err(Error::arg(format!(
            "eigendecomposition needs a non-empty square matrix, got {}x{}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let scale = sigma.amax().max(1.0);
    let skew = (sigma - sigma.transpose()).amax();
    if skew > 1e-9 * scale {
        return Err(Error::arg(format!("matrix is not symmetric (max skew {skew:e})")));
    }
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }

    // Row-major working copies.
    let mut a: Vec<f64> = (0..n * n).map(|k| sigma[(k / n, k % n)]).collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let target = JACOBI_TOLERANCE * sigma.norm();
    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a, n);
        if off <= target {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::Numeric(format!(
                "Jacobi iteration did not converge in {JACOBI_MAX_SWEEPS} sweeps \
                 (off-diagonal residual {off:e}, target {target:e})"
            )));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // A <- A J
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                // A <- Jᵀ A
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                // V <- V J
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps equal eigenvalues in index order.
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));

    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| a[i * n + i]));
    let mut eigenvectors = DMatrix::from_fn(n, n, |r, c| v[r * n + order[c]]);
    for mut col in eigenvectors.column_iter_mut() {
        let mut best = 0;
        for k in 1..n {
            if col[k].abs() > col[best].abs() {
                best = k;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }

    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
        sweeps,
    })
}

/// Coordinates `U_Iᵀ X'` of the centered data in the selected eigenvectors (0-based indices).
pub fn project_subspace(c: &CenteredEmbeddings, eig: &EigenDecomposition, indices: &[usize]) -> Result<DMatrix<f64>> {
    if eig.dim() != c.matrix.nrows() {
        return Err(Error::arg(format!(
            "eigenbasis has dimension {} but embeddings have {}",
            eig.dim(),
            c.matrix.nrows()
        )));
    }
    let u = eig.select(indices)?;
    Ok(u.tr_mul(&c.matrix))
}

/// Orthogonal projector `M (MᵀM)⁻¹ Mᵀ` onto the column space of a full-column-rank `M`.
pub fn column_projector(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = m.tr_mul(m);
    let inv = gram
        .try_inverse()
        .ok_or_else(|| Error::Numeric("projector requires a full-column-rank matrix".into()))?;
    Ok(m * inv * m.transpose())
}

/// Orthonormal basis of the column space of `m` via modified Gram-Schmidt (full rank assumed).
pub fn orthonormal_columns(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut q = m.clone();
    for j in 0..q.ncols() {
        for i in 0..j {
            let proj = q.column(i).dot(&q.column(j));
            let qi = q.column(i).into_owned();
            q.column_mut(j).axpy(-proj, &qi, 1.0);
        }
        let norm = q.column(j).norm();
        if norm <= 1e-12 * m.column(j).norm().max(f64::MIN_POSITIVE) || norm == 0.0 {
            return Err(Error::Numeric(format!("column {j} is linearly dependent")));
        }
        q.column_mut(j).scale_mut(1.0 / norm);
    }
    Ok(q)
}

/// Principal angles (radians, ascending) between the column spaces of `a` and `b`.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::arg("principal angles need matrices with equal row counts"));
    }
    let qa = orthonormal_columns(a)?;
    let qb = orthonormal_columns(b)?;
    let cross = qa.tr_mul(&qb);
    // Singular values of QaᵀQb are the cosines; take them from the symmetric product.
    let gram = cross.tr_mul(&cross);
    let eig = eigendecompose(&((&gram + gram.transpose()) * 0.5))?;
    let mut angles: Vec<f64> = eig
        .eigenvalues
        .iter()
        .take(qa.ncols().min(qb.ncols()))
        .map(|&s2| s2.clamp(0.0, 1.0).sqrt().acos())
        .collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

/// Frobenius norm of `a - b`.
pub fn frobenius_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}
