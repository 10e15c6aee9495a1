//! Inverting a diagram layer by layer.
//!
//! The diagram is normalized into layers. Each layer becomes a dependent lens
//! and the lenses are composed, so the backward of the whole diagram at a
//! prior threads pushforwards forward and composes layer inverses backward.

use crate::backend::{CategoryBackend, SupportedInverse};
use crate::error::Result;
use crate::eval::{cell_kernel, check_bindings, evaluate, Bindings};
use crate::expr::{typecheck, KernelExpr, Signature};
use crate::lens::{bridge, DependentBayesianLens, InvertOptions};
use crate::normal::{normalize, Cell, Layer};
use crate::object::Profile;

/// How a layer is inverted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerRule {
    /// Only identities and swaps: the inverse is the inverse permutation.
    Structural,
    /// A lone delete: the inverse is the incoming prior.
    Delete,
    /// A lone copy: the inverse projects the diagonal back.
    Copy,
    /// Anything else: Bayes' rule on the whole layer, or cell by cell when
    /// the prior factorizes and factorizing is enabled.
    Mixed,
}

pub fn classify(layer: &[Cell]) -> LayerRule {
    match layer {
        [Cell::Delete(_)] => LayerRule::Delete,
        [Cell::Copy(_)] => LayerRule::Copy,
        _ if layer.iter().all(Cell::is_structural) => LayerRule::Structural,
        _ => LayerRule::Mixed,
    }
}

fn inverse_cell(c: &Cell) -> Cell {
    match c {
        Cell::Swap(a, b) => Cell::Swap(b.clone(), a.clone()),
        other => other.clone(),
    }
}

fn profile_size<B: CategoryBackend>(p: &Profile) -> Result<usize> {
    p.size(B::TAG)
}

struct LayerData<B: CategoryBackend> {
    rule: LayerRule,
    cells: Vec<B::Kernel>,
    /// Per-cell input sizes, for the independence check.
    sizes: Vec<usize>,
    /// Kernel used by the structural and copy rules.
    special: Option<B::Kernel>,
    forward: B::Kernel,
    parts: Vec<Cell>,
}

impl<B: CategoryBackend> LayerData<B> {
    fn new(layer: &[Cell], b: &B, bindings: &Bindings<B::Kernel>) -> Result<Self> {
        let cells = layer
            .iter()
            .map(|c| cell_kernel(c, b, bindings))
            .collect::<Result<Vec<_>>>()?;
        Self::from_kernels(layer, cells, b)
    }

    fn from_kernels(layer: &[Cell], cells: Vec<B::Kernel>, b: &B) -> Result<Self> {
        let rule = classify(layer);
        let sizes = layer
            .iter()
            .map(|c| profile_size::<B>(&c.dom()))
            .collect::<Result<Vec<_>>>()?;
        let special = match rule {
            LayerRule::Structural => {
                let inv = layer
                    .iter()
                    .map(|c| cell_kernel(&inverse_cell(c), b, &Bindings::new()))
                    .collect::<Result<Vec<_>>>()?;
                Some(b.layer_kernel(&inv)?)
            }
            LayerRule::Copy => {
                let n = sizes[0];
                Some(b.tensor(&b.identity(n), &b.delete(n))?)
            }
            _ => None,
        };
        let forward = b.layer_kernel(&cells)?;
        Ok(Self {
            rule,
            cells,
            sizes,
            special,
            forward,
            parts: layer.to_vec(),
        })
    }

    fn invert(&self, b: &B, p: &B::Kernel, opts: &InvertOptions) -> Result<SupportedInverse<B>> {
        let q = b.pushforward(&self.forward, p)?;
        let sp = b.support_of(p, opts.support_tol)?;
        let sq = b.support_of(&q, opts.support_tol)?;
        let kernel = match self.rule {
            LayerRule::Structural | LayerRule::Copy => {
                let k = self.special.as_ref().expect("special kernel built for this rule");
                b.restrict(k, &sq, &sp)?
            }
            LayerRule::Delete => b.restrict(p, &sq, &sp)?,
            LayerRule::Mixed => {
                if opts.factorize && self.cells.len() > 1 && b.product_deviation(p, &self.sizes)? <= opts.tol {
                    self.invert_factorized(b, p, &sp, &sq, opts)?
                } else {
                    b.invert_layer(&self.cells, p, &sp, &sq, opts)?
                }
            }
        };
        Ok(SupportedInverse {
            kernel,
            dom_support: sq,
            cod_support: sp,
        })
    }

    /// Inverts each cell at its marginal and tensors the results.
    fn invert_factorized(
        &self,
        b: &B,
        p: &B::Kernel,
        sp: &B::Support,
        sq: &B::Support,
        opts: &InvertOptions,
    ) -> Result<B::Kernel> {
        let marginals = b.marginals(p, &self.sizes)?;
        let mut acc: Option<SupportedInverse<B>> = None;
        for ((cell, k), m) in self.parts.iter().zip(&self.cells).zip(&marginals) {
            let single = LayerData::from_kernels(std::slice::from_ref(cell), vec![k.clone()], b)?;
            let inv = single.invert(b, m, opts)?;
            acc = Some(match acc {
                None => inv,
                Some(a) => SupportedInverse {
                    kernel: b.tensor(&a.kernel, &inv.kernel)?,
                    dom_support: b.tensor_supports(&a.dom_support, &inv.dom_support)?,
                    cod_support: b.tensor_supports(&a.cod_support, &inv.cod_support)?,
                },
            });
        }
        let acc = acc.expect("layer has at least two cells");
        let mut k = acc.kernel;
        if let Some(m) = bridge(b, sq, &acc.dom_support)? {
            k = b.compose(&m, &k)?;
        }
        if let Some(m) = bridge(b, &acc.cod_support, sp)? {
            k = b.compose(&k, &m)?;
        }
        Ok(k)
    }
}

/// The dependent lens of one layer.
pub fn layer_lens<B: CategoryBackend>(
    layer: &Layer,
    backend: &B,
    bindings: &Bindings<B::Kernel>,
    opts: InvertOptions,
) -> Result<DependentBayesianLens<B>> {
    let data = LayerData::new(layer, backend, bindings)?;
    let forward = data.forward.clone();
    let b = backend.clone();
    Ok(DependentBayesianLens::new(backend.clone(), forward, move |p| data.invert(&b, p, &opts)))
}

/// Composes the layer lenses of the normal form of `expr`.
pub fn compile_lens<B: CategoryBackend>(
    expr: &KernelExpr,
    sig: &Signature,
    backend: &B,
    bindings: &Bindings<B::Kernel>,
    opts: InvertOptions,
) -> Result<DependentBayesianLens<B>> {
    opts.validate()?;
    typecheck(expr, sig)?;
    check_bindings(sig, backend, bindings)?;
    let nf = normalize(expr, sig)?;
    let mut lenses = nf.layers.iter().map(|l| layer_lens(l, backend, bindings, opts));
    let Some(first) = lenses.next() else {
        let n = nf.dom.size(B::TAG)?;
        return Ok(DependentBayesianLens::identity(backend.clone(), n, opts.support_tol));
    };
    lenses.try_fold(first?, |acc, l| acc.compose(&l?))
}

/// A compiled inverse together with its value at one prior.
#[derive(Debug, Clone)]
pub struct Inversion<B: CategoryBackend> {
    pub lens: DependentBayesianLens<B>,
    pub inverse: SupportedInverse<B>,
    pub layers: usize,
}

/// Inverts `expr` at `prior` through the layered chain rule.
pub fn invert_expr<B: CategoryBackend>(
    expr: &KernelExpr,
    sig: &Signature,
    prior: &B::Kernel,
    backend: &B,
    bindings: &Bindings<B::Kernel>,
    opts: InvertOptions,
) -> Result<Inversion<B>> {
    backend.validate_state(prior)?;
    let layers = normalize(expr, sig)?.len();
    let lens = compile_lens(expr, sig, backend, bindings, opts)?;
    let inverse = lens.backward(prior)?;
    Ok(Inversion { lens, inverse, layers })
}

/// The supported inverse of the evaluated diagram, computed in one step.
pub fn invert_monolithic<B: CategoryBackend>(
    expr: &KernelExpr,
    sig: &Signature,
    prior: &B::Kernel,
    backend: &B,
    bindings: &Bindings<B::Kernel>,
    opts: InvertOptions,
) -> Result<SupportedInverse<B>> {
    opts.validate()?;
    typecheck(expr, sig)?;
    backend.validate_state(prior)?;
    let f = evaluate(expr, backend, bindings)?;
    backend.bayes_invert_supported(&f, prior, opts.support_tol)
}

/// `f ≈_p g` within `tol`.
pub fn almost_equal<B: CategoryBackend>(f: &B::Kernel, g: &B::Kernel, p: &B::Kernel, backend: &B, tol: f64) -> Result<bool> {
    backend.almost_equal(f, g, p, tol)
}
