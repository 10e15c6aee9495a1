use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Noise covariances must be symmetric within this tolerance.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Smallest eigenvalue accepted for a noise covariance.
pub const PSD_TOL: f64 = 1e-10;

/// `x ↦ M x + ε`, `ε ~ N(b, S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    m: DMatrix<f64>,
    b: DVector<f64>,
    s: DMatrix<f64>,
}

/// A Gaussian distribution `N(b, S)`: a kernel with zero-dimensional input.
pub type GaussState = GaussianKernel;

pub(crate) fn symmetrize(s: &DMatrix<f64>) -> DMatrix<f64> {
    (s + s.transpose()) * 0.5
}

pub(crate) fn min_eigenvalue(s: &DMatrix<f64>) -> f64 {
    if s.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(s))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

impl GaussianKernel {
    pub fn new(m: DMatrix<f64>, b: DVector<f64>, s: DMatrix<f64>) -> Result<Self> {
        let k = Self::from_parts(m, b, s)?;
        k.validate()?;
        Ok(k)
    }

    fn from_parts(m: DMatrix<f64>, b: DVector<f64>, s: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                op: "gaussian offset",
                left: n,
                right: b.len(),
            });
        }
        if s.nrows() != n || s.ncols() != n {
            return Err(Error::DimensionMismatch {
                op: "gaussian covariance",
                left: n,
                right: s.nrows().max(s.ncols()),
            });
        }
        Ok(Self { m, b, s })
    }

    /// Builds without the PSD check and symmetrizes the covariance.
    pub(crate) fn raw(m: DMatrix<f64>, b: DVector<f64>, s: DMatrix<f64>) -> Self {
        let s = symmetrize(&s);
        Self { m, b, s }
    }

    pub fn state(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<GaussState> {
        let n = mean.len();
        Self::new(DMatrix::zeros(n, 0), mean, cov)
    }

    /// Deterministic affine map `x ↦ M x + b`.
    pub fn affine(m: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let n = m.nrows();
        Self::new(m, b, DMatrix::zeros(n, n))
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = self.m.iter().chain(self.b.iter()).chain(self.s.iter()).all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidKernel("non-finite entry".into()));
        }
        let asym = (&self.s - self.s.transpose()).abs().max();
        if self.s.nrows() > 0 && asym > SYMMETRY_TOL {
            return Err(Error::InvalidKernel(format!(
                "noise covariance not symmetric (deviation {asym:e})"
            )));
        }
        let lo = min_eigenvalue(&self.s);
        if lo < -PSD_TOL {
            return Err(Error::InvalidKernel(format!(
                "noise covariance not positive semidefinite (eigenvalue {lo:e})"
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn noise(&self) -> &DMatrix<f64> {
        &self.s
    }

    /// Mean of a state.
    pub fn mean(&self) -> &DVector<f64> {
        &self.b
    }

    /// Covariance of a state.
    pub fn cov(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn dom_dim(&self) -> usize {
        self.m.ncols()
    }

    pub fn cod_dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn is_state(&self) -> bool {
        self.dom_dim() == 0
    }

    pub fn identity(n: usize) -> Self {
        Self::raw(DMatrix::identity(n, n), DVector::zeros(n), DMatrix::zeros(n, n))
    }

    /// `f` then `g`: `(M₂M₁, M₂b₁ + b₂, M₂S₁M₂ᵀ + S₂)`.
    pub fn compose(&self, g: &GaussianKernel) -> Result<GaussianKernel> {
        if self.cod_dim() != g.dom_dim() {
            return Err(Error::DimensionMismatch {
                op: "compose",
                left: self.cod_dim(),
                right: g.dom_dim(),
            });
        }
        Ok(Self::raw(
            &g.m * &self.m,
            &g.m * &self.b + &g.b,
            &g.m * &self.s * g.m.transpose() + &g.s,
        ))
    }

    /// Block-diagonal tensor.
    pub fn tensor(&self, g: &GaussianKernel) -> GaussianKernel {
        let (r1, c1) = self.m.shape();
        let (r2, c2) = g.m.shape();
        let mut m = DMatrix::zeros(r1 + r2, c1 + c2);
        m.view_mut((0, 0), (r1, c1)).copy_from(&self.m);
        m.view_mut((r1, c1), (r2, c2)).copy_from(&g.m);
        let mut s = DMatrix::zeros(r1 + r2, r1 + r2);
        s.view_mut((0, 0), (r1, r1)).copy_from(&self.s);
        s.view_mut((r1, r1), (r2, r2)).copy_from(&g.s);
        let mut b = DVector::zeros(r1 + r2);
        b.rows_mut(0, r1).copy_from(&self.b);
        b.rows_mut(r1, r2).copy_from(&g.b);
        Self::raw(m, b, s)
    }

    pub fn copy(n: usize) -> Self {
        let mut m = DMatrix::zeros(2 * n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
            m[(n + i, i)] = 1.0;
        }
        Self::raw(m, DVector::zeros(2 * n), DMatrix::zeros(2 * n, 2 * n))
    }

    pub fn delete(n: usize) -> Self {
        Self::raw(DMatrix::zeros(0, n), DVector::zeros(0), DMatrix::zeros(0, 0))
    }

    /// `(a, b) ↦ (b, a)` on `R^p ⊕ R^q`.
    pub fn swap(p: usize, q: usize) -> Self {
        let n = p + q;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..q {
            m[(i, p + i)] = 1.0;
        }
        for i in 0..p {
            m[(q + i, i)] = 1.0;
        }
        Self::raw(m, DVector::zeros(n), DMatrix::zeros(n, n))
    }

    pub fn max_abs_diff(&self, other: &GaussianKernel) -> Result<f64> {
        if self.m.shape() != other.m.shape() {
            return Err(Error::DimensionMismatch {
                op: "compare",
                left: self.m.len(),
                right: other.m.len(),
            });
        }
        let d = |a: &DMatrix<f64>, b: &DMatrix<f64>| if a.is_empty() { 0.0 } else { (a - b).abs().max() };
        let db = if self.b.is_empty() { 0.0 } else { (&self.b - &other.b).abs().max() };
        Ok(d(&self.m, &other.m).max(db).max(d(&self.s, &other.s)))
    }
}
