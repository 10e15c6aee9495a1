//! Bayesian lenses: a forward kernel paired with a prior-indexed backward map.
//!
//! Backward maps are closures over states rather than tables, since even a
//! finite object has a continuum of priors. They must be pure.

use std::fmt;
use std::sync::Arc;

use crate::backend::{CategoryBackend, SupportedInverse, INVERSION_TOL, SUPPORT_TOL};
use crate::error::{Error, Result};
use crate::finstoch::ZeroFillPolicy;

/// Knobs for inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvertOptions {
    pub zero_policy: ZeroFillPolicy,
    /// Tolerance of the independence check behind `factorize`.
    pub tol: f64,
    /// Mass (or eigenvalue) threshold for support objects.
    pub support_tol: f64,
    /// Invert layers cell by cell when the incoming state is a product.
    pub factorize: bool,
}

impl Default for InvertOptions {
    fn default() -> Self {
        Self {
            zero_policy: ZeroFillPolicy::Uniform,
            tol: INVERSION_TOL,
            support_tol: SUPPORT_TOL,
            factorize: false,
        }
    }
}

impl InvertOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.support_tol >= 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        Ok(())
    }
}

type Backward<B> = Arc<dyn Fn(&<B as CategoryBackend>::Kernel) -> Result<<B as CategoryBackend>::Kernel> + Send + Sync>;
type SupportedBackward<B> = Arc<dyn Fn(&<B as CategoryBackend>::Kernel) -> Result<SupportedInverse<B>> + Send + Sync>;

fn check_state<B: CategoryBackend>(backend: &B, forward: &B::Kernel, p: &B::Kernel) -> Result<()> {
    if backend.dom_size(p) != backend.unit_size() {
        return Err(Error::DegeneratePrior("prior must be a state".into()));
    }
    if backend.cod_size(p) != backend.dom_size(forward) {
        return Err(Error::DimensionMismatch {
            op: "lens prior",
            left: backend.cod_size(p),
            right: backend.dom_size(forward),
        });
    }
    Ok(())
}

/// A forward kernel `X → Y` with backward kernels `Y → X` indexed by priors on `X`.
#[derive(Clone)]
pub struct BayesianLens<B: CategoryBackend> {
    backend: B,
    forward: B::Kernel,
    backward: Backward<B>,
}

impl<B: CategoryBackend> fmt::Debug for BayesianLens<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BayesianLens").field("forward", &self.forward).finish_non_exhaustive()
    }
}

impl<B: CategoryBackend> BayesianLens<B> {
    pub fn new<F>(backend: B, forward: B::Kernel, backward: F) -> Self
    where
        F: Fn(&B::Kernel) -> Result<B::Kernel> + Send + Sync + 'static,
    {
        Self {
            backend,
            forward,
            backward: Arc::new(backward),
        }
    }

    pub fn identity(backend: B, size: usize) -> Self {
        let id = backend.identity(size);
        let b = backend.clone();
        Self::new(backend, id, move |_| Ok(b.identity(size)))
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn forward(&self) -> &B::Kernel {
        &self.forward
    }

    pub fn backward(&self, p: &B::Kernel) -> Result<B::Kernel> {
        check_state(&self.backend, &self.forward, p)?;
        (self.backward)(p)
    }

    /// `self` then `next`; the backward at `p` runs `next` at the pushforward
    /// of `p`, then `self` at `p`.
    pub fn compose(&self, next: &BayesianLens<B>) -> Result<BayesianLens<B>> {
        let forward = self.backend.compose(&self.forward, &next.forward)?;
        let (l1, l2) = (self.clone(), next.clone());
        Ok(Self::new(self.backend.clone(), forward, move |p| {
            let b1 = l1.backward(p)?;
            let q = l1.backend.pushforward(&l1.forward, p)?;
            let b2 = l2.backward(&q)?;
            l1.backend.compose(&b2, &b1)
        }))
    }

    /// Forward tensor; backward tensors the two backwards at the marginals.
    pub fn tensor(&self, other: &BayesianLens<B>) -> Result<BayesianLens<B>> {
        let b = &self.backend;
        let forward = b.tensor(&self.forward, &other.forward)?;
        let sizes = [b.dom_size(&self.forward), b.dom_size(&other.forward)];
        let (l1, l2) = (self.clone(), other.clone());
        Ok(Self::new(b.clone(), forward, move |p| {
            let m = l1.backend.marginals(p, &sizes)?;
            l1.backend.tensor(&l1.backward(&m[0])?, &l2.backward(&m[1])?)
        }))
    }
}

/// The inversion functor: `f` with its Bayesian inverses.
pub fn inversion_functor_t<B: CategoryBackend>(f: B::Kernel, backend: B, opts: InvertOptions) -> BayesianLens<B> {
    let g = f.clone();
    let b = backend.clone();
    BayesianLens::new(backend, f, move |p| b.bayes_invert(&g, p, &opts))
}

/// A lens whose backward kernels run between support objects.
#[derive(Clone)]
pub struct DependentBayesianLens<B: CategoryBackend> {
    backend: B,
    forward: B::Kernel,
    backward: SupportedBackward<B>,
}

impl<B: CategoryBackend> fmt::Debug for DependentBayesianLens<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DependentBayesianLens").field("forward", &self.forward).finish_non_exhaustive()
    }
}

impl<B: CategoryBackend> DependentBayesianLens<B> {
    pub fn new<F>(backend: B, forward: B::Kernel, backward: F) -> Self
    where
        F: Fn(&B::Kernel) -> Result<SupportedInverse<B>> + Send + Sync + 'static,
    {
        Self {
            backend,
            forward,
            backward: Arc::new(backward),
        }
    }

    pub fn identity(backend: B, size: usize, support_tol: f64) -> Self {
        let id = backend.identity(size);
        let b = backend.clone();
        Self::new(backend, id, move |p| {
            let s = b.support_of(p, support_tol)?;
            let n = b.support_size(&s);
            Ok(SupportedInverse {
                kernel: b.identity(n),
                dom_support: s.clone(),
                cod_support: s,
            })
        })
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn forward(&self) -> &B::Kernel {
        &self.forward
    }

    pub fn backward(&self, p: &B::Kernel) -> Result<SupportedInverse<B>> {
        check_state(&self.backend, &self.forward, p)?;
        (self.backward)(p)
    }

    pub fn compose(&self, next: &DependentBayesianLens<B>) -> Result<DependentBayesianLens<B>> {
        let forward = self.backend.compose(&self.forward, &next.forward)?;
        let (l1, l2) = (self.clone(), next.clone());
        Ok(Self::new(self.backend.clone(), forward, move |p| {
            let b = &l1.backend;
            let first = l1.backward(p)?;
            let q = b.pushforward(&l1.forward, p)?;
            let second = l2.backward(&q)?;
            let mid = bridge(b, &second.cod_support, &first.dom_support)?;
            let kernel = match mid {
                Some(m) => b.compose(&b.compose(&second.kernel, &m)?, &first.kernel)?,
                None => b.compose(&second.kernel, &first.kernel)?,
            };
            Ok(SupportedInverse {
                kernel,
                dom_support: second.dom_support,
                cod_support: first.cod_support,
            })
        }))
    }

    /// Forgets the supports: backward kernels are extended along `i ∘ g ∘ r`.
    pub fn to_lens(&self) -> BayesianLens<B> {
        let l = self.clone();
        BayesianLens::new(self.backend.clone(), self.forward.clone(), move |p| {
            let s = l.backward(p)?;
            l.backend.include(&s.kernel, &s.dom_support, &s.cod_support)
        })
    }
}

/// Kernel from support `from` to support `to` of the same ambient object, or
/// `None` when they already coincide.
pub(crate) fn bridge<B: CategoryBackend>(b: &B, from: &B::Support, to: &B::Support) -> Result<Option<B::Kernel>> {
    if from == to {
        return Ok(None);
    }
    let id = b.identity(b.support_base_size(from));
    b.restrict(&id, from, to).map(Some)
}

/// The exact inversion functor: `f` with its inverses between supports.
pub fn exact_inversion_functor<B: CategoryBackend>(f: B::Kernel, backend: B, support_tol: f64) -> DependentBayesianLens<B> {
    let g = f.clone();
    let b = backend.clone();
    DependentBayesianLens::new(backend, f, move |p| b.bayes_invert_supported(&g, p, support_tol))
}

/// Outcome of checking the Bayesian-inverse equation for a lens at a prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LawReport {
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

pub fn check_lens_law<B: CategoryBackend>(lens: &BayesianLens<B>, p: &B::Kernel, tol: f64) -> Result<LawReport> {
    let finv = lens.backward(p)?;
    let residual = lens.backend.inversion_residual(&lens.forward, &finv, p)?;
    Ok(LawReport {
        residual,
        tol,
        pass: residual <= tol,
    })
}
