//! The FinStoch backend: finite sets and row-stochastic matrices.
//!
//! Bayesian inversion is exact: `f♯(x | y) = p(x) f(y | x) / q(y)` with
//! `q = f∘p`. Observations with no pushforward mass are filled according to a
//! [`ZeroFillPolicy`]; the supported variant never needs one.

mod matrix;
mod support;

pub use matrix::{FinState, StochasticMatrix, ROW_SUM_TOL};
pub use support::FinSupport;

use matrix::merge_entries;

use crate::backend::{CategoryBackend, SupportedInverse, SUPPORT_TOL};
use crate::error::{Error, Result};
use crate::lens::InvertOptions;
use crate::object::BackendTag;

/// Pushforward mass at or below this is treated as zero by [`bayes_invert`].
pub const ZERO_MASS_TOL: f64 = 1e-12;

/// How [`bayes_invert`] fills rows for observations of zero probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroFillPolicy {
    #[default]
    Uniform,
    Error,
    FirstIndex,
}

impl ZeroFillPolicy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "uniform" => Some(Self::Uniform),
            "error" => Some(Self::Error),
            "first" | "first-index" => Some(Self::FirstIndex),
            _ => None,
        }
    }

    pub const ALL: [ZeroFillPolicy; 3] = [Self::Uniform, Self::Error, Self::FirstIndex];
}

fn expect_state(p: &FinState) -> Result<()> {
    if p.dom_card() != 1 {
        return Err(Error::DegeneratePrior(format!(
            "expected a state, got a kernel with {} rows",
            p.dom_card()
        )));
    }
    Ok(())
}

fn check_prior(f: &StochasticMatrix, p: &FinState) -> Result<()> {
    expect_state(p)?;
    if p.cod_card() != f.dom_card() {
        return Err(Error::DimensionMismatch {
            op: "prior",
            left: p.cod_card(),
            right: f.dom_card(),
        });
    }
    Ok(())
}

pub fn pushforward(f: &StochasticMatrix, p: &FinState) -> Result<FinState> {
    check_prior(f, p)?;
    p.compose(f)
}

/// Joint entries `(y, x, p(x) f(y|x))`, sorted by `(y, x)`.
fn joint_by_observation<R>(p: &FinState, mut row_of: R) -> Vec<(usize, usize, f64)>
where
    R: FnMut(usize, &mut Vec<(usize, f64)>),
{
    let mut joint = Vec::new();
    let mut buf = Vec::new();
    for (x, px) in p.row(0) {
        buf.clear();
        row_of(x, &mut buf);
        joint.extend(buf.iter().map(|&(y, v)| (y, x, px * v)));
    }
    joint.sort_by_key(|a| (a.0, a.1));
    joint.retain(|e| e.2 != 0.0);
    joint
}

/// Groups of the sorted joint sharing one observation.
fn observation_groups(joint: &[(usize, usize, f64)]) -> impl Iterator<Item = &[(usize, usize, f64)]> {
    joint.chunk_by(|a, b| a.0 == b.0)
}

/// Bayesian inverse of `f` at `p`, total on every observation.
pub fn bayes_invert(
    f: &StochasticMatrix,
    p: &FinState,
    policy: ZeroFillPolicy,
) -> Result<StochasticMatrix> {
    check_prior(f, p)?;
    let joint = joint_by_observation(p, |x, buf| buf.extend(f.row(x)));
    let dom = f.dom_card();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); f.cod_card()];
    let mut massive = vec![false; f.cod_card()];
    for group in observation_groups(&joint) {
        let y = group[0].0;
        let q: f64 = group.iter().map(|e| e.2).sum();
        if q > ZERO_MASS_TOL {
            massive[y] = true;
            rows[y] = group.iter().map(|e| (e.1, e.2 / q)).collect();
        }
    }
    for (y, row) in rows.iter_mut().enumerate() {
        if massive[y] {
            continue;
        }
        *row = match policy {
            ZeroFillPolicy::Uniform => {
                let w = 1.0 / dom as f64;
                (0..dom).map(|x| (x, w)).collect()
            }
            ZeroFillPolicy::FirstIndex => vec![(0, 1.0)],
            ZeroFillPolicy::Error => return Err(Error::ZeroMassObservation { index: y }),
        };
    }
    Ok(StochasticMatrix::from_sparse_unchecked(dom, rows))
}

pub fn support_of(p: &FinState, tol: f64) -> Result<FinSupport> {
    FinSupport::of(p, tol)
}

/// `r_cod ∘ h ∘ i_dom`.
pub fn restrict(h: &StochasticMatrix, s_dom: &FinSupport, s_cod: &FinSupport) -> Result<StochasticMatrix> {
    if h.dom_card() != s_dom.base_card() {
        return Err(Error::DimensionMismatch {
            op: "restrict",
            left: h.dom_card(),
            right: s_dom.base_card(),
        });
    }
    if h.cod_card() != s_cod.base_card() {
        return Err(Error::DimensionMismatch {
            op: "restrict",
            left: h.cod_card(),
            right: s_cod.base_card(),
        });
    }
    let k = s_cod.len();
    let rows = s_dom
        .indices()
        .iter()
        .map(|&x| {
            let mut row = Vec::new();
            for (y, v) in h.row(x) {
                match s_cod.local(y) {
                    Some(j) => row.push((j, v)),
                    None => row.extend((0..k).map(|j| (j, v / k as f64))),
                }
            }
            row
        })
        .collect();
    Ok(StochasticMatrix::from_sparse_unchecked(k, rows))
}

/// `i_cod ∘ g ∘ r_dom`.
pub fn include(g: &StochasticMatrix, s_dom: &FinSupport, s_cod: &FinSupport) -> Result<StochasticMatrix> {
    if g.dom_card() != s_dom.len() {
        return Err(Error::DimensionMismatch {
            op: "include",
            left: g.dom_card(),
            right: s_dom.len(),
        });
    }
    if g.cod_card() != s_cod.len() {
        return Err(Error::DimensionMismatch {
            op: "include",
            left: g.cod_card(),
            right: s_cod.len(),
        });
    }
    let lift = |k: usize| -> Vec<(usize, f64)> {
        g.row(k).map(|(j, v)| (s_cod.indices()[j], v)).collect()
    };
    let w = 1.0 / s_dom.len() as f64;
    let mut average = Vec::new();
    for k in 0..g.dom_card() {
        average.extend(lift(k).into_iter().map(|(c, v)| (c, v * w)));
    }
    merge_entries(&mut average);
    let rows = (0..s_dom.base_card())
        .map(|x| match s_dom.local(x) {
            Some(k) => lift(k),
            None => average.clone(),
        })
        .collect();
    Ok(StochasticMatrix::from_sparse_unchecked(s_cod.base_card(), rows))
}

/// Inverse of `f` at `p` computed directly between prescribed supports.
///
/// Prior mass that falls outside `sp` is pushed through the retraction, so
/// the result equals `restrict(bayes_invert(f, p, _), sq, sp)` for any fill
/// policy.
fn invert_between<R>(p: &FinState, row_of: R, sp: &FinSupport, sq: &FinSupport) -> Result<StochasticMatrix>
where
    R: FnMut(usize, &mut Vec<(usize, f64)>),
{
    let joint = joint_by_observation(p, row_of);
    let k = sp.len();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); sq.len()];
    for group in observation_groups(&joint) {
        let Some(j) = sq.local(group[0].0) else { continue };
        let q: f64 = group.iter().map(|e| e.2).sum();
        let row = &mut rows[j];
        for &(_, x, v) in group {
            match sp.local(x) {
                Some(i) => row.push((i, v / q)),
                None => row.extend((0..k).map(|i| (i, v / q / k as f64))),
            }
        }
    }
    if let Some(j) = rows.iter().position(Vec::is_empty) {
        return Err(Error::ZeroMassObservation {
            index: sq.indices()[j],
        });
    }
    Ok(StochasticMatrix::from_sparse_unchecked(k, rows))
}

/// The unique Bayesian inverse between `supp(f∘p)` and `supp(p)`.
pub fn bayes_invert_supported(f: &StochasticMatrix, p: &FinState, tol: f64) -> Result<SupportedInverse<FinStoch>> {
    let q = pushforward(f, p)?;
    let sp = support_of(p, tol)?;
    let sq = support_of(&q, tol)?;
    let kernel = invert_between(p, |x, buf| buf.extend(f.row(x)), &sp, &sq)?;
    Ok(SupportedInverse {
        kernel,
        dom_support: sq,
        cod_support: sp,
    })
}

pub fn almost_equal(f: &StochasticMatrix, g: &StochasticMatrix, p: &FinState, tol: f64) -> Result<bool> {
    Ok(almost_equal_residual(f, g, p)? <= tol)
}

/// Largest `p(x) |f(y|x) - g(y|x)|`.
pub fn almost_equal_residual(f: &StochasticMatrix, g: &StochasticMatrix, p: &FinState) -> Result<f64> {
    check_prior(f, p)?;
    if g.dom_card() != f.dom_card() || g.cod_card() != f.cod_card() {
        return Err(Error::DimensionMismatch {
            op: "almost_equal",
            left: f.cod_card(),
            right: g.cod_card(),
        });
    }
    let mut worst = 0.0f64;
    for (x, px) in p.row(0) {
        let mut entries: Vec<(usize, f64)> = f.row(x).collect();
        entries.extend(g.row(x).map(|(y, v)| (y, -v)));
        merge_entries(&mut entries);
        worst = entries.iter().fold(worst, |w, e| w.max((px * e.1).abs()));
    }
    Ok(worst)
}

/// Max elementwise gap between `p(x) f(y|x)` and `q(y) finv(x|y)`.
pub fn inversion_residual(f: &StochasticMatrix, finv: &StochasticMatrix, p: &FinState) -> Result<f64> {
    check_prior(f, p)?;
    if finv.dom_card() != f.cod_card() || finv.cod_card() != f.dom_card() {
        return Err(Error::DimensionMismatch {
            op: "inversion_residual",
            left: finv.dom_card(),
            right: f.cod_card(),
        });
    }
    let q = p.compose(f)?;
    let ny = f.cod_card();
    let mut entries: Vec<(usize, f64)> = Vec::new();
    for (x, px) in p.row(0) {
        entries.extend(f.row(x).map(|(y, v)| (x * ny + y, px * v)));
    }
    for (y, qy) in q.row(0) {
        entries.extend(finv.row(y).map(|(x, v)| (x * ny + y, -qy * v)));
    }
    entries.sort_by_key(|e| e.0);
    Ok(entries
        .chunk_by(|a, b| a.0 == b.0)
        .map(|g| g.iter().map(|e| e.1).sum::<f64>().abs())
        .fold(0.0, f64::max))
}

/// Splits a flat index into per-factor digits (row-major).
fn digits(mut x: usize, sizes: &[usize], out: &mut [usize]) {
    for (d, &n) in out.iter_mut().zip(sizes).rev() {
        *d = x % n;
        x /= n;
    }
}

pub fn marginals(p: &FinState, sizes: &[usize]) -> Result<Vec<FinState>> {
    expect_state(p)?;
    let total = sizes.iter().try_fold(1usize, |a, &s| a.checked_mul(s)).ok_or(Error::ObjectTooLarge)?;
    if total != p.cod_card() {
        return Err(Error::DimensionMismatch {
            op: "marginals",
            left: total,
            right: p.cod_card(),
        });
    }
    let mut acc: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n]).collect();
    let mut d = vec![0; sizes.len()];
    for (x, v) in p.row(0) {
        digits(x, sizes, &mut d);
        for (m, &i) in acc.iter_mut().zip(&d) {
            m[i] += v;
        }
    }
    Ok(acc
        .into_iter()
        .map(|m| {
            let cols = m.len();
            StochasticMatrix::from_sparse_unchecked(
                cols,
                vec![m.into_iter().enumerate().filter(|e| e.1 != 0.0).collect()],
            )
        })
        .collect())
}

/// Largest gap between `p` and the product of its marginals.
///
/// Returns infinity when the product of marginal supports is too large to
/// enumerate.
pub fn product_deviation(p: &FinState, sizes: &[usize]) -> Result<f64> {
    const MAX_ENUMERATION: usize = 1 << 21;
    let margs = marginals(p, sizes)?;
    let supports: Vec<Vec<(usize, f64)>> = margs.iter().map(|m| m.row(0).collect()).collect();
    let count = supports
        .iter()
        .try_fold(1usize, |a, s| a.checked_mul(s.len()))
        .unwrap_or(usize::MAX);
    if count > MAX_ENUMERATION {
        return Ok(f64::INFINITY);
    }
    let mut product: Vec<(usize, f64)> = vec![(0, 1.0)];
    for (s, &n) in supports.iter().zip(sizes) {
        product = product
            .iter()
            .flat_map(|&(i, v)| s.iter().map(move |&(j, w)| (i * n + j, v * w)))
            .collect();
    }
    let mut entries: Vec<(usize, f64)> = p.row(0).collect();
    entries.extend(product.into_iter().map(|(i, v)| (i, -v)));
    entries.sort_by_key(|e| e.0);
    Ok(entries
        .chunk_by(|a, b| a.0 == b.0)
        .map(|g| g.iter().map(|e| e.1).sum::<f64>().abs())
        .fold(0.0, f64::max))
}

/// Row `x` of the tensor of `cells`, without materializing the tensor.
fn layer_row(cells: &[StochasticMatrix], ins: &[usize], x: usize, d: &mut [usize], out: &mut Vec<(usize, f64)>) {
    digits(x, ins, d);
    out.clear();
    out.push((0, 1.0));
    let mut next = Vec::new();
    for (c, &dc) in cells.iter().zip(d.iter()) {
        next.clear();
        let n = c.cod_card();
        for &(y, v) in out.iter() {
            next.extend(c.row(dc).map(|(yc, w)| (y * n + yc, v * w)));
        }
        std::mem::swap(out, &mut next);
    }
}

struct LayerShape {
    ins: Vec<usize>,
    out_card: usize,
}

fn layer_shape(cells: &[StochasticMatrix]) -> Result<LayerShape> {
    let ins: Vec<usize> = cells.iter().map(StochasticMatrix::dom_card).collect();
    let out_card = cells
        .iter()
        .try_fold(1usize, |a, c| a.checked_mul(c.cod_card()))
        .ok_or(Error::ObjectTooLarge)?;
    ins.iter().try_fold(1usize, |a, &s| a.checked_mul(s)).ok_or(Error::ObjectTooLarge)?;
    Ok(LayerShape { ins, out_card })
}

fn push_rows(k: &StochasticMatrix, cells: &[StochasticMatrix]) -> Result<StochasticMatrix> {
    let shape = layer_shape(cells)?;
    let in_card: usize = shape.ins.iter().product();
    if k.cod_card() != in_card {
        return Err(Error::DimensionMismatch {
            op: "apply_layer",
            left: k.cod_card(),
            right: in_card,
        });
    }
    let mut d = vec![0; cells.len()];
    let mut buf = Vec::new();
    let rows = (0..k.dom_card())
        .map(|r| {
            let mut row = Vec::new();
            for (x, v) in k.row(r) {
                layer_row(cells, &shape.ins, x, &mut d, &mut buf);
                row.extend(buf.iter().map(|&(y, w)| (y, v * w)));
            }
            row
        })
        .collect();
    Ok(StochasticMatrix::from_sparse_unchecked(shape.out_card, rows))
}

/// The FinStoch Markov category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FinStoch;

impl CategoryBackend for FinStoch {
    type Kernel = StochasticMatrix;
    type Support = FinSupport;

    const TAG: BackendTag = BackendTag::FinStoch;

    fn dom_size(&self, k: &StochasticMatrix) -> usize {
        k.dom_card()
    }

    fn cod_size(&self, k: &StochasticMatrix) -> usize {
        k.cod_card()
    }

    fn identity(&self, size: usize) -> StochasticMatrix {
        StochasticMatrix::identity(size)
    }

    fn compose(&self, f: &StochasticMatrix, g: &StochasticMatrix) -> Result<StochasticMatrix> {
        f.compose(g)
    }

    fn tensor(&self, f: &StochasticMatrix, g: &StochasticMatrix) -> Result<StochasticMatrix> {
        f.tensor(g)
    }

    fn copy(&self, size: usize) -> Result<StochasticMatrix> {
        StochasticMatrix::copy(size)
    }

    fn delete(&self, size: usize) -> StochasticMatrix {
        StochasticMatrix::delete(size)
    }

    fn swap(&self, a: usize, b: usize) -> Result<StochasticMatrix> {
        StochasticMatrix::swap(a, b)
    }

    fn validate_state(&self, p: &StochasticMatrix) -> Result<()> {
        expect_state(p)?;
        p.validate().map_err(|e| Error::DegeneratePrior(e.to_string()))
    }

    fn bayes_invert(&self, f: &StochasticMatrix, p: &StochasticMatrix, opts: &InvertOptions) -> Result<StochasticMatrix> {
        bayes_invert(f, p, opts.zero_policy)
    }

    fn support_of(&self, p: &StochasticMatrix, tol: f64) -> Result<FinSupport> {
        support_of(p, tol)
    }

    fn support_size(&self, s: &FinSupport) -> usize {
        s.len()
    }

    fn support_base_size(&self, s: &FinSupport) -> usize {
        s.base_card()
    }

    fn tensor_supports(&self, a: &FinSupport, b: &FinSupport) -> Result<FinSupport> {
        a.tensor(b)
    }

    fn restrict(&self, h: &StochasticMatrix, s_dom: &FinSupport, s_cod: &FinSupport) -> Result<StochasticMatrix> {
        restrict(h, s_dom, s_cod)
    }

    fn include(&self, g: &StochasticMatrix, s_dom: &FinSupport, s_cod: &FinSupport) -> Result<StochasticMatrix> {
        include(g, s_dom, s_cod)
    }

    fn invert_restricted(
        &self,
        f: &StochasticMatrix,
        p: &StochasticMatrix,
        sp: &FinSupport,
        sq: &FinSupport,
        _opts: &InvertOptions,
    ) -> Result<StochasticMatrix> {
        check_prior(f, p)?;
        invert_between(p, |x, buf| buf.extend(f.row(x)), sp, sq)
    }

    fn bayes_invert_supported(&self, f: &StochasticMatrix, p: &StochasticMatrix, tol: f64) -> Result<SupportedInverse<Self>> {
        bayes_invert_supported(f, p, tol)
    }

    fn almost_equal_residual(&self, f: &StochasticMatrix, g: &StochasticMatrix, p: &StochasticMatrix) -> Result<f64> {
        almost_equal_residual(f, g, p)
    }

    fn inversion_residual(&self, f: &StochasticMatrix, finv: &StochasticMatrix, p: &StochasticMatrix) -> Result<f64> {
        inversion_residual(f, finv, p)
    }

    fn max_abs_diff(&self, f: &StochasticMatrix, g: &StochasticMatrix) -> Result<f64> {
        f.max_abs_diff(g)
    }

    fn marginals(&self, p: &StochasticMatrix, sizes: &[usize]) -> Result<Vec<StochasticMatrix>> {
        marginals(p, sizes)
    }

    fn product_deviation(&self, p: &StochasticMatrix, sizes: &[usize]) -> Result<f64> {
        product_deviation(p, sizes)
    }

    fn apply_layer(&self, k: &StochasticMatrix, cells: &[StochasticMatrix]) -> Result<StochasticMatrix> {
        push_rows(k, cells)
    }

    fn invert_layer(
        &self,
        cells: &[StochasticMatrix],
        p: &StochasticMatrix,
        sp: &FinSupport,
        sq: &FinSupport,
        _opts: &InvertOptions,
    ) -> Result<StochasticMatrix> {
        expect_state(p)?;
        let shape = layer_shape(cells)?;
        let mut d = vec![0; cells.len()];
        invert_between(p, |x, buf| layer_row(cells, &shape.ins, x, &mut d, buf), sp, sq)
    }
}

impl FinStoch {
    /// Default support threshold.
    pub const SUPPORT_TOL: f64 = SUPPORT_TOL;
}
