//! Compositional Bayesian inversion over two Markov categories.
//!
//! Diagrams ([`KernelExpr`]) are typechecked, normalized into layers and
//! evaluated against a backend: [`finstoch`] (finite sets, stochastic
//! matrices) or [`gauss`] (Euclidean spaces, affine maps with Gaussian noise).
//! [`invert_expr`] inverts a diagram layer by layer by composing dependent
//! Bayesian lenses, whose backward kernels run between support objects.

pub mod backend;
pub mod chain;
pub mod error;
pub mod eval;
pub mod expr;
pub mod finstoch;
pub mod gauss;
pub mod invert;
pub mod lens;
pub mod normal;
pub mod object;

pub use backend::{CategoryBackend, SupportedInverse, INVERSION_TOL, STRUCTURAL_TOL, SUPPORT_TOL};
pub use error::{Error, Result};
pub use eval::{check_bindings, evaluate, evaluate_normal_form, Bindings};
pub use expr::{typecheck, GenType, KernelExpr, Signature};
pub use finstoch::{FinState, FinStoch, FinSupport, StochasticMatrix, ZeroFillPolicy};
pub use gauss::{AffineSupport, Gauss, GaussState, GaussianKernel};
pub use invert::{compile_lens, invert_expr, invert_monolithic, Inversion};
pub use lens::{
    check_lens_law, exact_inversion_functor, inversion_functor_t, BayesianLens, DependentBayesianLens,
    InvertOptions, LawReport,
};
pub use normal::{normalize, Cell, NormalForm};
pub use object::{BackendTag, ObjectKind, ObjectRef, Profile};
