//! The Gauss backend: Euclidean spaces and affine maps with Gaussian noise.
//!
//! Inversion uses the conjugate-Gaussian update. For a prior `N(μ, Σ)` and a
//! kernel `(M, b, S)` the gain is `K = Σ Mᵀ (M Σ Mᵀ + S)⁺` and the inverse is
//! `(K, μ - K(Mμ + b), Σ - K M Σ)`. The pseudo-inverse keeps this total when
//! the observation covariance is singular.

mod kernel;
mod support;

pub use kernel::{GaussState, GaussianKernel, PSD_TOL, SYMMETRY_TOL};
pub use support::AffineSupport;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::backend::{CategoryBackend, SupportedInverse};
use crate::error::{Error, Result};
use crate::lens::InvertOptions;
use crate::object::BackendTag;

/// Singular values (or eigenvalues) at or below this are treated as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Which factorization computes the pseudo-inverse in the gain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum PseudoInverse {
    Svd,
    /// Every input is a symmetric PSD covariance, where the self-adjoint
    /// solver is markedly more accurate than nalgebra's SVD.
    #[default]
    SymmetricEigen,
}

fn pinv(c: &DMatrix<f64>, method: PseudoInverse) -> Result<DMatrix<f64>> {
    let n = c.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    match method {
        PseudoInverse::Svd => {
            let inv = c
                .clone()
                .pseudo_inverse(cutoff(c))
                .map_err(|e| Error::InvalidKernel(e.to_string()))?;
            // nalgebra's SVD occasionally loses accuracy on nearly singular
            // inputs. The two Penrose identities catch that and the eigen
            // route takes over.
            let (sc, si) = (c.abs().max().max(1.0), inv.abs().max().max(1.0));
            if (c * &inv * c - c).abs().max() <= 1e-12 * sc && (&inv * c * &inv - &inv).abs().max() <= 1e-12 * si {
                Ok(inv)
            } else {
                Ok(eigen_pinv(c))
            }
        }
        PseudoInverse::SymmetricEigen => Ok(eigen_pinv(c)),
    }
}

/// `RANK_TOL`, scaled up for covariances with large eigenvalues so that
/// directions near the rounding floor count as null.
fn cutoff(c: &DMatrix<f64>) -> f64 {
    let top = c.diagonal().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    RANK_TOL * top
}

fn eigen_pinv(c: &DMatrix<f64>) -> DMatrix<f64> {
    let tol = cutoff(c);
    let eig = SymmetricEigen::new(kernel::symmetrize(c));
    let inv = eig.eigenvalues.map(|l| if l > tol { 1.0 / l } else { 0.0 });
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&inv) * v.transpose()
}

fn check_prior(f: &GaussianKernel, p: &GaussState) -> Result<()> {
    if !p.is_state() {
        return Err(Error::DegeneratePrior(format!(
            "expected a state, got a kernel with input dimension {}",
            p.dom_dim()
        )));
    }
    if p.cod_dim() != f.dom_dim() {
        return Err(Error::DimensionMismatch {
            op: "prior",
            left: p.cod_dim(),
            right: f.dom_dim(),
        });
    }
    Ok(())
}

pub fn pushforward(f: &GaussianKernel, p: &GaussState) -> Result<GaussState> {
    check_prior(f, p)?;
    p.compose(f)
}

pub fn bayes_invert(f: &GaussianKernel, p: &GaussState) -> Result<GaussianKernel> {
    bayes_invert_with(f, p, PseudoInverse::default())
}

pub fn bayes_invert_with(f: &GaussianKernel, p: &GaussState, method: PseudoInverse) -> Result<GaussianKernel> {
    check_prior(f, p)?;
    let mu = p.mean();
    let sigma = p.cov();
    let m = f.matrix();
    let c = m * sigma * m.transpose() + f.noise();
    let gain = sigma * m.transpose() * pinv(&c, method)?;
    let b = mu - &gain * (m * mu + f.offset());
    let s = sigma - &gain * m * sigma;
    Ok(GaussianKernel::raw(gain, b, s))
}

pub fn support_of(p: &GaussState, rank_tol: f64) -> Result<AffineSupport> {
    if !p.is_state() {
        return Err(Error::DegeneratePrior("support of a non-state".into()));
    }
    AffineSupport::of(p, rank_tol)
}

/// `r_cod ∘ h ∘ i_dom`.
pub fn restrict(h: &GaussianKernel, s_dom: &AffineSupport, s_cod: &AffineSupport) -> Result<GaussianKernel> {
    s_dom.inclusion().compose(h)?.compose(&s_cod.retraction())
}

/// `i_cod ∘ g ∘ r_dom`.
pub fn include(g: &GaussianKernel, s_dom: &AffineSupport, s_cod: &AffineSupport) -> Result<GaussianKernel> {
    s_dom.retraction().compose(g)?.compose(&s_cod.inclusion())
}

pub fn bayes_invert_supported(f: &GaussianKernel, p: &GaussState, rank_tol: f64) -> Result<SupportedInverse<Gauss>> {
    bayes_invert_supported_with(f, p, rank_tol, PseudoInverse::default())
}

pub fn bayes_invert_supported_with(
    f: &GaussianKernel,
    p: &GaussState,
    rank_tol: f64,
    method: PseudoInverse,
) -> Result<SupportedInverse<Gauss>> {
    let q = pushforward(f, p)?;
    let sp = support_of(p, rank_tol)?;
    let sq = support_of(&q, rank_tol)?;
    let h = bayes_invert_with(f, p, method)?;
    Ok(SupportedInverse {
        kernel: restrict(&h, &sq, &sp)?,
        dom_support: sq,
        cod_support: sp,
    })
}

/// Mean and covariance of a state on `X ⊗ Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointGaussian {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl JointGaussian {
    pub fn max_abs_diff(&self, other: &JointGaussian) -> f64 {
        if self.mean.is_empty() {
            return 0.0;
        }
        (&self.mean - &other.mean)
            .abs()
            .max()
            .max((&self.cov - &other.cov).abs().max())
    }
}

fn assemble(mx: &DVector<f64>, my: &DVector<f64>, cxx: &DMatrix<f64>, cxy: &DMatrix<f64>, cyy: &DMatrix<f64>) -> JointGaussian {
    let (n, m) = (mx.len(), my.len());
    let mut mean = DVector::zeros(n + m);
    mean.rows_mut(0, n).copy_from(mx);
    mean.rows_mut(n, m).copy_from(my);
    let mut cov = DMatrix::zeros(n + m, n + m);
    cov.view_mut((0, 0), (n, n)).copy_from(cxx);
    cov.view_mut((0, n), (n, m)).copy_from(cxy);
    cov.view_mut((n, 0), (m, n)).copy_from(&cxy.transpose());
    cov.view_mut((n, n), (m, m)).copy_from(cyy);
    JointGaussian { mean, cov }
}

/// Law of `(x, f(x))` for `x ~ p`.
pub fn forward_joint(f: &GaussianKernel, p: &GaussState) -> Result<JointGaussian> {
    check_prior(f, p)?;
    let (mu, sigma, m) = (p.mean(), p.cov(), f.matrix());
    let my = m * mu + f.offset();
    let cxy = sigma * m.transpose();
    let cyy = m * sigma * m.transpose() + f.noise();
    Ok(assemble(mu, &my, sigma, &cxy, &cyy))
}

/// Law of `(finv(y), y)` for `y ~ q`, laid out on `X ⊗ Y`.
pub fn backward_joint(finv: &GaussianKernel, q: &GaussState) -> Result<JointGaussian> {
    check_prior(finv, q)?;
    let (mu, c, k) = (q.mean(), q.cov(), finv.matrix());
    let mx = k * mu + finv.offset();
    let cxx = k * c * k.transpose() + finv.noise();
    let cxy = k * c;
    Ok(assemble(&mx, mu, &cxx, &cxy, c))
}

pub fn almost_equal(f: &GaussianKernel, g: &GaussianKernel, p: &GaussState, tol: f64) -> Result<bool> {
    Ok(almost_equal_residual(f, g, p)? <= tol)
}

/// Largest gap between the joints of `p` with `f` and with `g`.
pub fn almost_equal_residual(f: &GaussianKernel, g: &GaussianKernel, p: &GaussState) -> Result<f64> {
    if f.matrix().shape() != g.matrix().shape() {
        return Err(Error::DimensionMismatch {
            op: "almost_equal",
            left: f.cod_dim(),
            right: g.cod_dim(),
        });
    }
    Ok(forward_joint(f, p)?.max_abs_diff(&forward_joint(g, p)?))
}

pub fn inversion_residual(f: &GaussianKernel, finv: &GaussianKernel, p: &GaussState) -> Result<f64> {
    let q = pushforward(f, p)?;
    if finv.dom_dim() != f.cod_dim() || finv.cod_dim() != f.dom_dim() {
        return Err(Error::DimensionMismatch {
            op: "inversion_residual",
            left: finv.dom_dim(),
            right: f.cod_dim(),
        });
    }
    Ok(forward_joint(f, p)?.max_abs_diff(&backward_joint(finv, &q)?))
}

fn block_offsets(p: &GaussState, sizes: &[usize]) -> Result<Vec<usize>> {
    let total: usize = sizes.iter().sum();
    if total != p.cod_dim() || !p.is_state() {
        return Err(Error::DimensionMismatch {
            op: "marginals",
            left: total,
            right: p.cod_dim(),
        });
    }
    Ok(sizes
        .iter()
        .scan(0, |acc, &s| {
            let start = *acc;
            *acc += s;
            Some(start)
        })
        .collect())
}

pub fn marginals(p: &GaussState, sizes: &[usize]) -> Result<Vec<GaussState>> {
    let starts = block_offsets(p, sizes)?;
    Ok(starts
        .iter()
        .zip(sizes)
        .map(|(&a, &n)| {
            GaussianKernel::raw(
                DMatrix::zeros(n, 0),
                p.mean().rows(a, n).into_owned(),
                p.cov().view((a, a), (n, n)).into_owned(),
            )
        })
        .collect())
}

/// Largest cross-covariance between distinct blocks.
pub fn product_deviation(p: &GaussState, sizes: &[usize]) -> Result<f64> {
    let starts = block_offsets(p, sizes)?;
    let block_of = |i: usize| starts.iter().rposition(|&s| s <= i).unwrap_or(0);
    let n = p.cod_dim();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if sizes[block_of(i)] > 0 && block_of(i) != block_of(j) {
                worst = worst.max(p.cov()[(i, j)].abs());
            }
        }
    }
    Ok(worst)
}

/// The Gauss Markov category.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gauss {
    /// Eigenvalue floor for support computations.
    pub rank_tol: f64,
    pub pinv: PseudoInverse,
}

impl Default for Gauss {
    fn default() -> Self {
        Self {
            rank_tol: RANK_TOL,
            pinv: PseudoInverse::default(),
        }
    }
}

impl CategoryBackend for Gauss {
    type Kernel = GaussianKernel;
    type Support = AffineSupport;

    const TAG: BackendTag = BackendTag::Gauss;

    fn dom_size(&self, k: &GaussianKernel) -> usize {
        k.dom_dim()
    }

    fn cod_size(&self, k: &GaussianKernel) -> usize {
        k.cod_dim()
    }

    fn identity(&self, size: usize) -> GaussianKernel {
        GaussianKernel::identity(size)
    }

    fn compose(&self, f: &GaussianKernel, g: &GaussianKernel) -> Result<GaussianKernel> {
        f.compose(g)
    }

    fn tensor(&self, f: &GaussianKernel, g: &GaussianKernel) -> Result<GaussianKernel> {
        Ok(f.tensor(g))
    }

    fn copy(&self, size: usize) -> Result<GaussianKernel> {
        Ok(GaussianKernel::copy(size))
    }

    fn delete(&self, size: usize) -> GaussianKernel {
        GaussianKernel::delete(size)
    }

    fn swap(&self, a: usize, b: usize) -> Result<GaussianKernel> {
        Ok(GaussianKernel::swap(a, b))
    }

    fn validate_state(&self, p: &GaussianKernel) -> Result<()> {
        if !p.is_state() {
            return Err(Error::DegeneratePrior(format!(
                "expected a state, got input dimension {}",
                p.dom_dim()
            )));
        }
        p.validate().map_err(|e| Error::DegeneratePrior(e.to_string()))
    }

    fn bayes_invert(&self, f: &GaussianKernel, p: &GaussianKernel, _opts: &InvertOptions) -> Result<GaussianKernel> {
        bayes_invert_with(f, p, self.pinv)
    }

    fn support_of(&self, p: &GaussianKernel, tol: f64) -> Result<AffineSupport> {
        support_of(p, tol.max(self.rank_tol))
    }

    fn support_size(&self, s: &AffineSupport) -> usize {
        s.rank()
    }

    fn support_base_size(&self, s: &AffineSupport) -> usize {
        s.base_dim()
    }

    fn tensor_supports(&self, a: &AffineSupport, b: &AffineSupport) -> Result<AffineSupport> {
        Ok(a.tensor(b))
    }

    fn restrict(&self, h: &GaussianKernel, s_dom: &AffineSupport, s_cod: &AffineSupport) -> Result<GaussianKernel> {
        restrict(h, s_dom, s_cod)
    }

    fn include(&self, g: &GaussianKernel, s_dom: &AffineSupport, s_cod: &AffineSupport) -> Result<GaussianKernel> {
        include(g, s_dom, s_cod)
    }

    fn almost_equal_residual(&self, f: &GaussianKernel, g: &GaussianKernel, p: &GaussianKernel) -> Result<f64> {
        almost_equal_residual(f, g, p)
    }

    fn inversion_residual(&self, f: &GaussianKernel, finv: &GaussianKernel, p: &GaussianKernel) -> Result<f64> {
        inversion_residual(f, finv, p)
    }

    fn max_abs_diff(&self, f: &GaussianKernel, g: &GaussianKernel) -> Result<f64> {
        f.max_abs_diff(g)
    }

    fn marginals(&self, p: &GaussianKernel, sizes: &[usize]) -> Result<Vec<GaussianKernel>> {
        marginals(p, sizes)
    }

    fn product_deviation(&self, p: &GaussianKernel, sizes: &[usize]) -> Result<f64> {
        product_deviation(p, sizes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(m: f64, b: f64, s: f64) -> GaussianKernel {
        GaussianKernel::new(
            DMatrix::from_element(1, 1, m),
            DVector::from_element(1, b),
            DMatrix::from_element(1, 1, s),
        )
        .unwrap()
    }

    fn std_normal() -> GaussState {
        GaussianKernel::state(DVector::zeros(1), DMatrix::identity(1, 1)).unwrap()
    }

    #[test]
    fn conjugate_unit_noise() {
        let inv = bayes_invert(&scalar(1.0, 0.0, 1.0), &std_normal()).unwrap();
        assert!((inv.matrix()[(0, 0)] - 0.5).abs() < 1e-12);
        assert!(inv.offset()[0].abs() < 1e-12);
        assert!((inv.noise()[(0, 0)] - 0.5).abs() < 1e-12);
        assert!(inversion_residual(&scalar(1.0, 0.0, 1.0), &inv, &std_normal()).unwrap() < 1e-12);
    }

    #[test]
    fn invertible_deterministic_map() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, -1.0]);
        let f = GaussianKernel::affine(m.clone(), b.clone()).unwrap();
        let p = GaussianKernel::state(DVector::from_vec(vec![0.3, 0.1]), DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])).unwrap();
        let inv = bayes_invert(&f, &p).unwrap();
        let minv = m.try_inverse().unwrap();
        assert!((inv.matrix() - &minv).abs().max() < 1e-10);
        assert!((inv.offset() + &minv * b).abs().max() < 1e-10);
        assert!(inv.noise().abs().max() < 1e-10);
    }

    #[test]
    fn delete_inverts_to_prior() {
        let p = GaussianKernel::state(DVector::from_vec(vec![1.0, 2.0]), DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 3.0])).unwrap();
        let inv = bayes_invert(&GaussianKernel::delete(2), &p).unwrap();
        assert!(inv.max_abs_diff(&p).unwrap() < 1e-15);
    }

    #[test]
    fn copy_support_is_the_diagonal() {
        let q = pushforward(&GaussianKernel::copy(1), &std_normal()).unwrap();
        let s = support_of(&q, RANK_TOL).unwrap();
        assert_eq!(s.rank(), 1);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.basis()[(0, 0)] - r).abs() < 1e-12 && (s.basis()[(1, 0)] - r).abs() < 1e-12);

        let inv = bayes_invert_supported(&GaussianKernel::copy(1), &std_normal(), RANK_TOL).unwrap();
        assert_eq!(inv.kernel.matrix().shape(), (1, 1));
        // composing the supported copy with its supported inverse gives the identity
        let copy_r = restrict(&GaussianKernel::copy(1), &inv.cod_support, &inv.dom_support).unwrap();
        let round = copy_r.compose(&inv.kernel).unwrap();
        assert!(round.max_abs_diff(&GaussianKernel::identity(1)).unwrap() < 1e-8);
    }

    #[test]
    fn support_extremes() {
        let full = GaussianKernel::state(DVector::from_vec(vec![1.0, 0.0]), DMatrix::identity(2, 2)).unwrap();
        let s = support_of(&full, RANK_TOL).unwrap();
        assert!((s.basis() - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-12);
        let dirac = GaussianKernel::state(DVector::from_vec(vec![1.0, 2.0]), DMatrix::zeros(2, 2)).unwrap();
        let s = support_of(&dirac, RANK_TOL).unwrap();
        assert_eq!(s.rank(), 0);
        let inc = s.inclusion();
        assert_eq!(inc.offset(), dirac.mean());
    }

    #[test]
    fn almost_equal_ignores_null_directions() {
        let p = GaussianKernel::state(DVector::zeros(2), DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]))).unwrap();
        let f = GaussianKernel::affine(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), DVector::zeros(1)).unwrap();
        let g = GaussianKernel::affine(DMatrix::from_row_slice(1, 2, &[1.0, 5.0]), DVector::zeros(1)).unwrap();
        assert!(almost_equal(&f, &g, &p, 1e-12).unwrap());
        let full = GaussianKernel::state(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        assert!(!almost_equal(&f, &g, &full, 1e-12).unwrap());
    }

    #[test]
    fn pseudo_inverse_branches_agree_when_supported() {
        // observation is a deterministic copy of a rank-deficient prior
        let p = GaussianKernel::state(
            DVector::from_vec(vec![0.5, -1.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
        )
        .unwrap();
        let f = GaussianKernel::affine(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]), DVector::zeros(2)).unwrap();
        let a = bayes_invert_supported_with(&f, &p, RANK_TOL, PseudoInverse::Svd).unwrap();
        let b = bayes_invert_supported_with(&f, &p, RANK_TOL, PseudoInverse::SymmetricEigen).unwrap();
        assert!(a.kernel.max_abs_diff(&b.kernel).unwrap() < 1e-8);
    }
}
