use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::kernel::{symmetrize, GaussState, GaussianKernel};
use crate::error::Result;

/// Support of a Gaussian: the affine subspace `offset + span(basis)`.
///
/// `basis` has orthonormal columns spanning the range of the covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSupport {
    basis: DMatrix<f64>,
    offset: DVector<f64>,
}

impl AffineSupport {
    /// Eigenvectors of the covariance with eigenvalue above `rank_tol`, in
    /// decreasing eigenvalue order, each signed so that its largest-magnitude
    /// component is positive.
    pub fn of(p: &GaussState, rank_tol: f64) -> Result<Self> {
        let n = p.cod_dim();
        let offset = p.mean().clone();
        if n == 0 {
            return Ok(Self {
                basis: DMatrix::zeros(0, 0),
                offset,
            });
        }
        let eig = SymmetricEigen::new(symmetrize(p.cov()));
        let mut order: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > rank_tol).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let mut basis = DMatrix::zeros(n, order.len());
        for (k, &i) in order.iter().enumerate() {
            let mut v = eig.eigenvectors.column(i).into_owned();
            let mut lead = 0;
            for j in 1..n {
                if v[j].abs() > v[lead].abs() + 1e-12 {
                    lead = j;
                }
            }
            if v[lead] < 0.0 {
                v = -v;
            }
            basis.set_column(k, &v);
        }
        Ok(Self { basis, offset })
    }

    pub fn full(n: usize) -> Self {
        Self {
            basis: DMatrix::identity(n, n),
            offset: DVector::zeros(n),
        }
    }

    pub fn from_parts(basis: DMatrix<f64>, offset: DVector<f64>) -> Self {
        Self { basis, offset }
    }

    pub fn base_dim(&self) -> usize {
        self.offset.len()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    /// `u ↦ B u + offset`.
    pub fn inclusion(&self) -> GaussianKernel {
        let n = self.base_dim();
        GaussianKernel::raw(self.basis.clone(), self.offset.clone(), DMatrix::zeros(n, n))
    }

    /// `x ↦ Bᵀ (x - offset)`.
    pub fn retraction(&self) -> GaussianKernel {
        let k = self.rank();
        let bt = self.basis.transpose();
        let b = -(&bt * &self.offset);
        GaussianKernel::raw(bt, b, DMatrix::zeros(k, k))
    }

    /// Block-diagonal basis, stacked offsets.
    pub fn tensor(&self, other: &AffineSupport) -> AffineSupport {
        let (n1, k1) = self.basis.shape();
        let (n2, k2) = other.basis.shape();
        let mut basis = DMatrix::zeros(n1 + n2, k1 + k2);
        basis.view_mut((0, 0), (n1, k1)).copy_from(&self.basis);
        basis.view_mut((n1, k1), (n2, k2)).copy_from(&other.basis);
        let mut offset = DVector::zeros(n1 + n2);
        offset.rows_mut(0, n1).copy_from(&self.offset);
        offset.rows_mut(n1, n2).copy_from(&other.offset);
        AffineSupport { basis, offset }
    }
}
