//! The contract a concrete Markov category implements.

use std::fmt::Debug;

use crate::error::Result;
use crate::lens::InvertOptions;
use crate::object::BackendTag;

/// Structural identities are checked at this tolerance.
pub const STRUCTURAL_TOL: f64 = 1e-12;
/// Laws that involve a division (Bayes' rule) are checked at this tolerance.
pub const INVERSION_TOL: f64 = 1e-9;
/// Default threshold separating support points from numerical zeros.
pub const SUPPORT_TOL: f64 = 1e-12;

/// A Bayesian inverse typed between support objects.
///
/// `dom_support` is the support of the pushforward (the observation side);
/// `cod_support` is the support of the prior.
#[derive(Debug, Clone)]
pub struct SupportedInverse<B: CategoryBackend> {
    pub kernel: B::Kernel,
    pub dom_support: B::Support,
    pub cod_support: B::Support,
}

/// A Markov category with Bayesian inverses and support objects.
///
/// States are kernels out of the unit, so they share the kernel type. Sizes
/// are cardinalities (FinStoch) or dimensions (Gauss). `compose(f, g)` means
/// "f then g".
pub trait CategoryBackend: Clone + Debug + Send + Sync + 'static {
    type Kernel: Clone + Debug + Send + Sync + 'static;
    type Support: Clone + Debug + PartialEq + Send + Sync + 'static;

    const TAG: BackendTag;

    fn dom_size(&self, k: &Self::Kernel) -> usize;
    fn cod_size(&self, k: &Self::Kernel) -> usize;

    /// Size of the monoidal unit.
    fn unit_size(&self) -> usize {
        match Self::TAG {
            BackendTag::FinStoch => 1,
            BackendTag::Gauss => 0,
        }
    }

    fn identity(&self, size: usize) -> Self::Kernel;
    fn compose(&self, f: &Self::Kernel, g: &Self::Kernel) -> Result<Self::Kernel>;
    fn tensor(&self, f: &Self::Kernel, g: &Self::Kernel) -> Result<Self::Kernel>;
    fn copy(&self, size: usize) -> Result<Self::Kernel>;
    fn delete(&self, size: usize) -> Self::Kernel;
    fn swap(&self, a: usize, b: usize) -> Result<Self::Kernel>;

    /// The unique state on the unit.
    fn unit_state(&self) -> Self::Kernel {
        self.identity(self.unit_size())
    }

    fn pushforward(&self, f: &Self::Kernel, p: &Self::Kernel) -> Result<Self::Kernel> {
        self.compose(p, f)
    }

    /// Rejects kernels that are not valid states.
    fn validate_state(&self, p: &Self::Kernel) -> Result<()>;

    fn bayes_invert(
        &self,
        f: &Self::Kernel,
        p: &Self::Kernel,
        opts: &InvertOptions,
    ) -> Result<Self::Kernel>;

    fn support_of(&self, p: &Self::Kernel, tol: f64) -> Result<Self::Support>;
    fn support_size(&self, s: &Self::Support) -> usize;
    fn support_base_size(&self, s: &Self::Support) -> usize;
    fn tensor_supports(&self, a: &Self::Support, b: &Self::Support) -> Result<Self::Support>;

    /// `r ∘ h ∘ i`: cuts `h` down to a kernel between support objects.
    fn restrict(
        &self,
        h: &Self::Kernel,
        s_dom: &Self::Support,
        s_cod: &Self::Support,
    ) -> Result<Self::Kernel>;

    /// `i ∘ g ∘ r`: extends a kernel between supports to the ambient objects.
    fn include(
        &self,
        g: &Self::Kernel,
        s_dom: &Self::Support,
        s_cod: &Self::Support,
    ) -> Result<Self::Kernel>;

    /// Bayesian inverse of `f` at `p`, restricted to prescribed supports of
    /// `p` (`sp`) and of the pushforward (`sq`).
    fn invert_restricted(
        &self,
        f: &Self::Kernel,
        p: &Self::Kernel,
        sp: &Self::Support,
        sq: &Self::Support,
        opts: &InvertOptions,
    ) -> Result<Self::Kernel> {
        let h = self.bayes_invert(f, p, opts)?;
        self.restrict(&h, sq, sp)
    }

    fn bayes_invert_supported(
        &self,
        f: &Self::Kernel,
        p: &Self::Kernel,
        tol: f64,
    ) -> Result<SupportedInverse<Self>> {
        let q = self.pushforward(f, p)?;
        let sp = self.support_of(p, tol)?;
        let sq = self.support_of(&q, tol)?;
        let opts = InvertOptions {
            support_tol: tol,
            ..InvertOptions::default()
        };
        let kernel = self.invert_restricted(f, p, &sp, &sq, &opts)?;
        Ok(SupportedInverse {
            kernel,
            dom_support: sq,
            cod_support: sp,
        })
    }

    /// `f ≈_p g`: the joints of `p` with `f` and with `g` agree within `tol`.
    fn almost_equal(
        &self,
        f: &Self::Kernel,
        g: &Self::Kernel,
        p: &Self::Kernel,
        tol: f64,
    ) -> Result<bool> {
        Ok(self.almost_equal_residual(f, g, p)? <= tol)
    }

    /// The largest gap that `almost_equal` compares against its tolerance.
    fn almost_equal_residual(&self, f: &Self::Kernel, g: &Self::Kernel, p: &Self::Kernel) -> Result<f64>;

    /// Largest discrepancy between the two sides of the Bayesian-inverse
    /// equation: the joint of `p` and `f` against the joint of `f∘p` and `finv`.
    fn inversion_residual(
        &self,
        f: &Self::Kernel,
        finv: &Self::Kernel,
        p: &Self::Kernel,
    ) -> Result<f64>;

    /// Elementwise distance between parallel kernels.
    fn max_abs_diff(&self, f: &Self::Kernel, g: &Self::Kernel) -> Result<f64>;

    /// Marginals of a state on a tensor of factors with the given sizes.
    fn marginals(&self, p: &Self::Kernel, sizes: &[usize]) -> Result<Vec<Self::Kernel>>;

    /// Distance of a joint state from the product of its marginals.
    fn product_deviation(&self, p: &Self::Kernel, sizes: &[usize]) -> Result<f64>;

    /// Tensor of the kernels of one layer.
    fn layer_kernel(&self, cells: &[Self::Kernel]) -> Result<Self::Kernel> {
        let mut acc = self.identity(self.unit_size());
        for c in cells {
            acc = self.tensor(&acc, c)?;
        }
        Ok(acc)
    }

    /// `k` followed by the layer made of `cells`.
    fn apply_layer(&self, k: &Self::Kernel, cells: &[Self::Kernel]) -> Result<Self::Kernel> {
        self.compose(k, &self.layer_kernel(cells)?)
    }

    /// Monolithic supported inverse of a whole layer at `p`.
    fn invert_layer(
        &self,
        cells: &[Self::Kernel],
        p: &Self::Kernel,
        sp: &Self::Support,
        sq: &Self::Support,
        opts: &InvertOptions,
    ) -> Result<Self::Kernel> {
        let f = self.layer_kernel(cells)?;
        self.invert_restricted(&f, p, sp, sq, opts)
    }
}
