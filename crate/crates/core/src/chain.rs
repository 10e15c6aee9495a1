//! Learning the transition parameter of a Markov chain from a state trace.
//!
//! The trace kernel `Θ → S^⊗n` starts the chain at `s`, copies `Θ` into every
//! transition and copies each intermediate state once into the output. An
//! observed trace is a single index of `S^⊗n`; the posterior over `Θ` is the
//! corresponding row of the supported inverse.

use crate::backend::{SupportedInverse, SUPPORT_TOL};
use crate::error::{Error, Result};
use crate::eval::{evaluate, Bindings};
use crate::expr::{KernelExpr, Signature};
use crate::finstoch::{self, support_of, FinState, FinStoch, FinSupport, StochasticMatrix};
use crate::invert::{compile_lens, invert_monolithic};
use crate::lens::InvertOptions;
use crate::object::{ObjectRef, Profile};

/// How a posterior is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Layer by layer through the normal form.
    Compositional,
    /// Bayes' rule on the evaluated trace kernel.
    Monolithic,
}

impl Method {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "compositional" => Some(Self::Compositional),
            "monolithic" => Some(Self::Monolithic),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Compositional => "compositional",
            Self::Monolithic => "monolithic",
        }
    }
}

/// A chain on `S` whose transitions depend on a parameter in `Θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChainModel {
    /// Rows indexed by `s * |Θ| + θ`.
    pub transition: StochasticMatrix,
    pub initial: FinState,
    pub prior: FinState,
}

impl MarkovChainModel {
    pub fn new(transition: StochasticMatrix, initial: FinState, prior: FinState) -> Result<Self> {
        for (what, k) in [("initial", &initial), ("prior", &prior)] {
            if k.dom_card() != 1 {
                return Err(Error::DegeneratePrior(format!("{what} must be a state")));
            }
            k.validate()?;
        }
        transition.validate()?;
        let s = initial.cod_card();
        let theta = prior.cod_card();
        if transition.cod_card() != s {
            return Err(Error::DimensionMismatch {
                op: "transition codomain",
                left: transition.cod_card(),
                right: s,
            });
        }
        if transition.dom_card() != s * theta {
            return Err(Error::DimensionMismatch {
                op: "transition domain",
                left: transition.dom_card(),
                right: s * theta,
            });
        }
        Ok(Self {
            transition,
            initial,
            prior,
        })
    }

    pub fn state_card(&self) -> usize {
        self.initial.cod_card()
    }

    pub fn theta_card(&self) -> usize {
        self.prior.cod_card()
    }

    pub fn state_object(&self) -> ObjectRef {
        ObjectRef::finite("S", self.state_card()).expect("cardinality checked at construction")
    }

    pub fn theta_object(&self) -> ObjectRef {
        ObjectRef::finite("Θ", self.theta_card()).expect("cardinality checked at construction")
    }

    /// `t : S⊗Θ → S` and `s : I → S`.
    pub fn signature(&self) -> Signature {
        let (s, th) = (self.state_object(), self.theta_object());
        let mut sig = Signature::new();
        sig.insert("t", Profile::new([s.clone(), th]), s.clone().into());
        sig.insert("s", Profile::unit(), s.into());
        sig
    }

    pub fn bindings(&self) -> Bindings<StochasticMatrix> {
        let mut b = Bindings::new();
        b.insert("t".into(), self.transition.clone());
        b.insert("s".into(), self.initial.clone());
        b
    }

    /// `s(s₁) ∏ t(s_{k+1} | s_k, θ)`, computed directly.
    pub fn likelihood(&self, trace: &[usize], theta: usize) -> f64 {
        let Some((&first, rest)) = trace.split_first() else {
            return 0.0;
        };
        let mut acc = self.initial.get(0, first);
        let mut prev = first;
        for &next in rest {
            acc *= self.transition.get(prev * self.theta_card() + theta, next);
            prev = next;
        }
        acc
    }
}

/// A chain whose states are seen through `observation : S → O`.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    pub chain: MarkovChainModel,
    pub observation: StochasticMatrix,
}

impl HmmModel {
    pub fn new(chain: MarkovChainModel, observation: StochasticMatrix) -> Result<Self> {
        observation.validate()?;
        if observation.dom_card() != chain.state_card() {
            return Err(Error::DimensionMismatch {
                op: "observation domain",
                left: observation.dom_card(),
                right: chain.state_card(),
            });
        }
        Ok(Self { chain, observation })
    }

    pub fn obs_card(&self) -> usize {
        self.observation.cod_card()
    }

    pub fn obs_object(&self) -> ObjectRef {
        ObjectRef::finite("O", self.obs_card()).expect("cardinality checked at construction")
    }

    pub fn signature(&self) -> Signature {
        let mut sig = self.chain.signature();
        sig.insert("o", self.chain.state_object().into(), self.obs_object().into());
        sig
    }

    pub fn bindings(&self) -> Bindings<StochasticMatrix> {
        let mut b = self.chain.bindings();
        b.insert("o".into(), self.observation.clone());
        b
    }
}

fn ids(x: &ObjectRef, n: usize) -> impl Iterator<Item = KernelExpr> + '_ {
    (0..n).map(|_| KernelExpr::Id(x.clone()))
}

/// The unrolled chain without the final delete: `Θ → S^⊗n ⊗ Θ`.
fn unrolled(s: &ObjectRef, th: &ObjectRef, n: usize) -> Vec<KernelExpr> {
    let mut steps = vec![KernelExpr::par([KernelExpr::state("s"), KernelExpr::Id(th.clone())])];
    for k in 1..n {
        // wires: k-1 finished outputs, the current state, Θ
        steps.push(KernelExpr::par(
            ids(s, k - 1).chain([KernelExpr::Copy(s.clone()), KernelExpr::Copy(th.clone())]),
        ));
        steps.push(KernelExpr::par(
            ids(s, k).chain([KernelExpr::gen("t"), KernelExpr::Id(th.clone())]),
        ));
    }
    steps
}

/// The trace kernel `f_n : Θ → S^⊗n`.
pub fn build_trace_expr(model: &MarkovChainModel, n: usize) -> Result<KernelExpr> {
    if n == 0 {
        return Err(Error::InvalidArgument("trace length must be at least 1".into()));
    }
    let (s, th) = (model.state_object(), model.theta_object());
    let mut steps = unrolled(&s, &th, n);
    steps.push(KernelExpr::par(ids(&s, n).chain([KernelExpr::Delete(th)])));
    Ok(KernelExpr::Seq(steps))
}

/// The trace kernel with every output wire passed through `o`: `Θ → O^⊗n`.
pub fn build_hmm_expr(model: &HmmModel, n: usize) -> Result<KernelExpr> {
    if n == 0 {
        return Err(Error::InvalidArgument("trace length must be at least 1".into()));
    }
    let (s, th) = (model.chain.state_object(), model.chain.theta_object());
    let mut steps = unrolled(&s, &th, n);
    steps.push(KernelExpr::par(
        (0..n).map(|_| KernelExpr::gen("o")).chain([KernelExpr::Delete(th)]),
    ));
    Ok(KernelExpr::Seq(steps))
}

/// Row-major index of a trace in `X^⊗n`.
pub fn trace_index(trace: &[usize], card: usize) -> Result<usize> {
    if trace.is_empty() {
        return Err(Error::InvalidArgument("empty trace".into()));
    }
    trace.iter().try_fold(0usize, |acc, &x| {
        if x >= card {
            return Err(Error::InvalidArgument(format!("trace entry {x} out of range 0..{card}")));
        }
        acc.checked_mul(card)
            .and_then(|a| a.checked_add(x))
            .ok_or(Error::ObjectTooLarge)
    })
}

/// A posterior over `Θ`, carried by the support of the prior.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    /// Support of the prior; the posterior lives on it.
    pub support: FinSupport,
    /// State on the support object.
    pub state: FinState,
    /// Pushforward mass of the observation.
    pub evidence: f64,
    pub method: Method,
}

impl Posterior {
    /// The posterior as a state on the whole of `Θ`.
    pub fn on_base(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.support.base_card()];
        for (i, v) in self.state.row(0) {
            out[self.support.indices()[i]] = v;
        }
        out
    }

    /// The support of the posterior itself, in base indices.
    pub fn posterior_support(&self, tol: f64) -> Result<FinSupport> {
        support_of(&StochasticMatrix::state(self.on_base())?, tol)
    }
}

fn read_row(inv: &SupportedInverse<FinStoch>, obs: usize, q: &FinState, method: Method) -> Result<Posterior> {
    let Some(j) = inv.dom_support.local(obs) else {
        return Err(Error::ZeroMassObservation { index: obs });
    };
    let state = StochasticMatrix::from_sparse_rows(inv.kernel.cod_card(), vec![inv.kernel.row(j).collect()])?;
    Ok(Posterior {
        support: inv.cod_support.clone(),
        state,
        evidence: q.get(0, obs),
        method,
    })
}

/// A posterior with the evaluated diagram and the inverse it was read from.
#[derive(Debug, Clone)]
pub struct DiagramPosterior {
    pub posterior: Posterior,
    pub kernel: StochasticMatrix,
    pub inverse: SupportedInverse<FinStoch>,
}

impl DiagramPosterior {
    /// Residual of the inverse-law check for the inverse, extended to the
    /// ambient objects.
    pub fn law_residual(&self, prior: &FinState) -> Result<f64> {
        let inc = finstoch::include(&self.inverse.kernel, &self.inverse.dom_support, &self.inverse.cod_support)?;
        finstoch::inversion_residual(&self.kernel, &inc, prior)
    }
}

/// Posterior on the domain of `expr` after observing output index `obs`.
pub fn infer_diagram(
    expr: &KernelExpr,
    sig: &Signature,
    bindings: &Bindings<StochasticMatrix>,
    prior: &FinState,
    obs: usize,
    method: Method,
) -> Result<DiagramPosterior> {
    let opts = InvertOptions::default();
    let kernel = evaluate(expr, &FinStoch, bindings)?;
    let q = prior.compose(&kernel)?;
    if obs >= q.cod_card() {
        return Err(Error::InvalidArgument(format!(
            "observation {obs} out of range for {} outcomes",
            q.cod_card()
        )));
    }
    if q.get(0, obs) <= SUPPORT_TOL {
        return Err(Error::ZeroMassObservation { index: obs });
    }
    let inverse = match method {
        Method::Monolithic => invert_monolithic(expr, sig, prior, &FinStoch, bindings, opts)?,
        Method::Compositional => compile_lens(expr, sig, &FinStoch, bindings, opts)?.backward(prior)?,
    };
    let posterior = read_row(&inverse, obs, &q, method)?;
    Ok(DiagramPosterior {
        posterior,
        kernel,
        inverse,
    })
}

/// `P(Θ | trace)`.
pub fn posterior_parameters(model: &MarkovChainModel, trace: &[usize], method: Method) -> Result<Posterior> {
    let obs = trace_index(trace, model.state_card())?;
    let expr = build_trace_expr(model, trace.len())?;
    Ok(infer_diagram(&expr, &model.signature(), &model.bindings(), &model.prior, obs, method)?.posterior)
}

/// `P(Θ | observations)` for a hidden chain.
pub fn posterior_parameters_hmm(model: &HmmModel, trace: &[usize], method: Method) -> Result<Posterior> {
    let obs = trace_index(trace, model.obs_card())?;
    let expr = build_hmm_expr(model, trace.len())?;
    Ok(infer_diagram(&expr, &model.signature(), &model.bindings(), &model.chain.prior, obs, method)?.posterior)
}

/// Transition family where state is kept with probability `stay[θ]`.
pub fn sticky_transition(state_card: usize, stay: &[f64]) -> Result<StochasticMatrix> {
    let theta = stay.len();
    let mut rows = Vec::with_capacity(state_card * theta);
    for s in 0..state_card {
        for &p in stay {
            let other = if state_card > 1 { (1.0 - p) / (state_card - 1) as f64 } else { 0.0 };
            rows.push((0..state_card).map(|x| if x == s { p } else { other }).collect());
        }
    }
    StochasticMatrix::from_rows(rows)
}
