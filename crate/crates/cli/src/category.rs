//! What the commands need from a backend beyond the engine's own contract.

use bayeslens_core::finstoch::{FinStoch, StochasticMatrix};
use bayeslens_core::gauss::{self, Gauss, GaussianKernel};
use bayeslens_core::{CategoryBackend, Error as CoreError, ObjectRef, Result as CoreResult, SupportedInverse};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::error::CliError;
use crate::model::{RawGenerator, RawObject};
use crate::output::num;

pub trait Category: CategoryBackend + Default {
    const NAME: &'static str;
    /// Tolerances of the three lawcheck suites.
    const LAW_TOL: f64;
    const CHAIN_TOL: f64;
    const SECTION_TOL: f64;

    fn object(name: &str, raw: RawObject) -> Result<ObjectRef, CliError>;
    fn kernel(raw: &RawGenerator, dom: usize, cod: usize) -> CoreResult<Self::Kernel>;
    /// Extra fields of a generator's check line.
    fn diagnostics(k: &Self::Kernel) -> Map<String, Value>;
    fn inline_prior(v: &Value) -> CoreResult<Self::Kernel>;
    fn random_prior(rng: &mut ChaCha8Rng, n: usize) -> Self::Kernel;
    /// A deliberately wrong replacement for an inverse, for exercising the
    /// failure path of the law checks.
    fn corrupt(&self, k: &Self::Kernel) -> Self::Kernel;
    /// Distance between two supported inverses of the same kernel at the same
    /// prior, whose pushforward is `q`.
    fn supported_gap(&self, a: &SupportedInverse<Self>, b: &SupportedInverse<Self>, q: &Self::Kernel) -> CoreResult<f64>;
}

fn dims(op: &'static str, left: usize, right: usize) -> CoreError {
    CoreError::DimensionMismatch { op, left, right }
}

fn dense(rows: &[Vec<f64>], r: usize, c: usize, op: &'static str) -> CoreResult<DMatrix<f64>> {
    // an empty list stands for a matrix with no rows or no columns
    if rows.is_empty() && (r == 0 || c == 0) {
        return Ok(DMatrix::zeros(r, c));
    }
    if rows.len() != r {
        return Err(dims(op, rows.len(), r));
    }
    if let Some(bad) = rows.iter().find(|row| row.len() != c) {
        return Err(dims(op, bad.len(), c));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl Category for FinStoch {
    const NAME: &'static str = "finstoch";
    const LAW_TOL: f64 = 1e-9;
    const CHAIN_TOL: f64 = 1e-9;
    const SECTION_TOL: f64 = 1e-12;

    fn object(name: &str, raw: RawObject) -> Result<ObjectRef, CliError> {
        if raw.dim.is_some() {
            return Err(CliError::Parse(format!("object `{name}`: finite objects take `card` or `labels`")));
        }
        let obj = match (raw.card, raw.labels) {
            (_, Some(labels)) if raw.card.is_some_and(|c| c != labels.len()) => {
                return Err(CliError::Parse(format!(
                    "object `{name}`: {} labels for cardinality {}",
                    labels.len(),
                    raw.card.unwrap_or_default()
                )))
            }
            (_, Some(labels)) => ObjectRef::finite_labeled(name, labels),
            (Some(card), None) => ObjectRef::finite(name, card),
            (None, None) => return Err(CliError::Parse(format!("object `{name}`: missing `card`"))),
        };
        obj.map_err(|source| CliError::Core {
            context: Some(format!("object {name}")),
            source,
        })
    }

    fn kernel(raw: &RawGenerator, dom: usize, cod: usize) -> CoreResult<StochasticMatrix> {
        if raw.m.is_some() || raw.b.is_some() || raw.s.is_some() {
            return Err(CoreError::InvalidKernel("finite generators are given by `rows`".into()));
        }
        let rows = raw
            .rows
            .as_ref()
            .ok_or_else(|| CoreError::InvalidKernel("missing `rows`".into()))?;
        if rows.len() != dom {
            return Err(dims("generator rows", rows.len(), dom));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != cod) {
            return Err(dims("generator columns", bad.len(), cod));
        }
        StochasticMatrix::from_rows(rows.clone())
    }

    fn diagnostics(k: &StochasticMatrix) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("shape".into(), json!([k.dom_card(), k.cod_card()]));
        m.insert("row_sum_residual".into(), num(k.row_sum_residual()));
        m
    }

    fn inline_prior(v: &Value) -> CoreResult<StochasticMatrix> {
        let probs: Vec<f64> = serde_json::from_value(v.clone())
            .map_err(|e| CoreError::InvalidArgument(format!("inline prior must be a list of probabilities: {e}")))?;
        StochasticMatrix::state(probs)
    }

    fn random_prior(rng: &mut ChaCha8Rng, n: usize) -> StochasticMatrix {
        let mut w: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.05..1.0) })
            .collect();
        if w.iter().all(|&x| x == 0.0) {
            w[rng.gen_range(0..n)] = 1.0;
        }
        let total: f64 = w.iter().sum();
        StochasticMatrix::state(w.into_iter().map(|x| x / total).collect()).expect("normalized weights")
    }

    fn corrupt(&self, k: &StochasticMatrix) -> StochasticMatrix {
        StochasticMatrix::constant(k.dom_card(), &StochasticMatrix::uniform(k.cod_card()))
    }

    fn supported_gap(
        &self,
        a: &SupportedInverse<Self>,
        b: &SupportedInverse<Self>,
        _q: &StochasticMatrix,
    ) -> CoreResult<f64> {
        if a.dom_support != b.dom_support || a.cod_support != b.cod_support {
            return Ok(f64::INFINITY);
        }
        a.kernel.max_abs_diff(&b.kernel)
    }
}

impl Category for Gauss {
    const NAME: &'static str = "gauss";
    const LAW_TOL: f64 = 1e-8;
    const CHAIN_TOL: f64 = 1e-8;
    const SECTION_TOL: f64 = 1e-10;

    fn object(name: &str, raw: RawObject) -> Result<ObjectRef, CliError> {
        match raw {
            RawObject {
                dim: Some(d),
                card: None,
                labels: None,
            } => Ok(ObjectRef::euclidean(name, d)),
            _ => Err(CliError::Parse(format!("object `{name}`: Euclidean objects take only `dim`"))),
        }
    }

    fn kernel(raw: &RawGenerator, dom: usize, cod: usize) -> CoreResult<GaussianKernel> {
        if raw.rows.is_some() {
            return Err(CoreError::InvalidKernel("Gaussian generators are given by `M`, `b` and `S`".into()));
        }
        let m = match &raw.m {
            Some(rows) => dense(rows, cod, dom, "generator M")?,
            None if dom == 0 => DMatrix::zeros(cod, 0),
            None => return Err(CoreError::InvalidKernel("missing `M`".into())),
        };
        let b = match &raw.b {
            Some(b) if b.len() != cod => return Err(dims("generator b", b.len(), cod)),
            Some(b) => DVector::from_column_slice(b),
            None => DVector::zeros(cod),
        };
        let s = match &raw.s {
            Some(rows) => dense(rows, cod, cod, "generator S")?,
            None => DMatrix::zeros(cod, cod),
        };
        GaussianKernel::new(m, b, s)
    }

    fn diagnostics(k: &GaussianKernel) -> Map<String, Value> {
        let s = k.noise();
        let asym = if s.is_empty() { 0.0 } else { (s - s.transpose()).abs().max() };
        let lo = if s.is_empty() {
            0.0
        } else {
            s.clone().symmetric_eigen().eigenvalues.min()
        };
        let mut m = Map::new();
        m.insert("shape".into(), json!([k.cod_dim(), k.dom_dim()]));
        m.insert("symmetry_residual".into(), num(asym));
        m.insert("min_noise_eigenvalue".into(), num(lo));
        m
    }

    fn inline_prior(v: &Value) -> CoreResult<GaussianKernel> {
        #[derive(serde::Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Inline {
            mean: Vec<f64>,
            cov: Option<Vec<Vec<f64>>>,
        }
        let parsed: Inline = match v {
            // a bare vector is a point mass
            Value::Array(_) => Inline {
                mean: serde_json::from_value(v.clone())
                    .map_err(|e| CoreError::InvalidArgument(format!("inline prior: {e}")))?,
                cov: None,
            },
            _ => serde_json::from_value(v.clone())
                .map_err(|e| CoreError::InvalidArgument(format!("inline prior needs `mean` and `cov`: {e}")))?,
        };
        let n = parsed.mean.len();
        let cov = match &parsed.cov {
            Some(rows) => dense(rows, n, n, "prior covariance")?,
            None => DMatrix::zeros(n, n),
        };
        GaussianKernel::state(DVector::from_vec(parsed.mean), cov)
    }

    fn random_prior(rng: &mut ChaCha8Rng, n: usize) -> GaussianKernel {
        let rank = rng.gen_range(0..=n);
        let q = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)).qr().q();
        let spectrum = DVector::from_fn(n, |i, _| if i < rank { rng.gen_range(0.2..2.0) } else { 0.0 });
        let c = &q * DMatrix::from_diagonal(&spectrum) * q.transpose();
        let mean = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        GaussianKernel::state(mean, (&c + c.transpose()) * 0.5).expect("constructed PSD")
    }

    fn corrupt(&self, k: &GaussianKernel) -> GaussianKernel {
        let shifted = k.offset().add_scalar(1.0);
        GaussianKernel::new(k.matrix().clone(), shifted, k.noise().clone()).expect("shift keeps validity")
    }

    fn supported_gap(&self, a: &SupportedInverse<Self>, b: &SupportedInverse<Self>, q: &GaussianKernel) -> CoreResult<f64> {
        let ia = gauss::include(&a.kernel, &a.dom_support, &a.cod_support)?;
        let ib = gauss::include(&b.kernel, &b.dom_support, &b.cod_support)?;
        gauss::almost_equal_residual(&ia, &ib, q)
    }
}
