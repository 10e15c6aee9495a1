//! Shared generators and independent reference computations for tests.
#![allow(dead_code)]

use bayeslens_core::{
    BackendTag, Bindings, GaussianKernel, KernelExpr, ObjectRef, Profile, Signature, StochasticMatrix,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Probability vector with roughly `zero_rate` exact zeros (never all zero).
pub fn random_probs(rng: &mut impl Rng, n: usize, zero_rate: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| if rng.gen_bool(zero_rate) { 0.0 } else { rng.gen_range(0.05..1.0) })
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        v[rng.gen_range(0..n)] = 1.0;
    }
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

pub fn random_rows(rng: &mut impl Rng, rows: usize, cols: usize, zero_rate: f64) -> Vec<Vec<f64>> {
    (0..rows).map(|_| random_probs(rng, cols, zero_rate)).collect()
}

pub fn random_kernel(rng: &mut impl Rng, rows: usize, cols: usize, zero_rate: f64) -> StochasticMatrix {
    StochasticMatrix::from_rows(random_rows(rng, rows, cols, zero_rate)).unwrap()
}

pub fn random_state(rng: &mut impl Rng, n: usize, zero_rate: f64) -> StochasticMatrix {
    StochasticMatrix::state(random_probs(rng, n, zero_rate)).unwrap()
}

pub fn random_matrix(rng: &mut impl Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.5..1.5))
}

/// Rank-`k` PSD matrix with nonzero eigenvalues in [0.2, 2] on a random
/// orthonormal basis. Products `AᵀA` of random matrices are sometimes
/// conditioned near 1e10, which no double-precision law check survives.
pub fn random_psd(rng: &mut impl Rng, n: usize, k: usize) -> DMatrix<f64> {
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let q = random_matrix(rng, n, n).qr().q();
    let spectrum = DVector::from_fn(n, |i, _| if i < k { rng.gen_range(0.2..2.0) } else { 0.0 });
    let c = &q * DMatrix::from_diagonal(&spectrum) * q.transpose();
    (&c + c.transpose()) * 0.5
}

/// `r × c` matrix with singular values in [0.2, 2] or exactly zero.
pub fn random_map(rng: &mut impl Rng, r: usize, c: usize) -> DMatrix<f64> {
    if r == 0 || c == 0 {
        return DMatrix::zeros(r, c);
    }
    let u = random_matrix(rng, r, r).qr().q();
    let v = random_matrix(rng, c, c).qr().q();
    let s = DMatrix::from_fn(r, c, |i, j| {
        if i == j && rng.gen_bool(0.85) {
            rng.gen_range(0.2..2.0)
        } else {
            0.0
        }
    });
    u * s * v.transpose()
}

pub fn random_gauss_kernel(rng: &mut impl Rng, dom: usize, cod: usize) -> GaussianKernel {
    let k = rng.gen_range(0..=cod);
    let b = DVector::from_fn(cod, |_, _| rng.gen_range(-1.0..1.0));
    GaussianKernel::new(random_map(rng, cod, dom), b, random_psd(rng, cod, k)).unwrap()
}

pub fn random_gauss_state(rng: &mut impl Rng, n: usize, full_rank: bool) -> GaussianKernel {
    let k = if full_rank { n } else { rng.gen_range(0..=n) };
    let mut cov = random_psd(rng, n, k);
    if full_rank {
        cov += DMatrix::identity(n, n) * 0.1;
    }
    let mean = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    GaussianKernel::state(mean, cov).unwrap()
}

// ---- dense reference computations ----

pub fn dense_matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..m)
                .map(|j| row.iter().zip(b).map(|(x, brow)| x * brow[j]).sum())
                .collect()
        })
        .collect()
}

pub fn dense_kron(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for ra in a {
        for rb in b {
            out.push(ra.iter().flat_map(|x| rb.iter().map(move |y| x * y)).collect());
        }
    }
    out
}

pub fn dense_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            assert_eq!(x.len(), y.len());
            x.iter().zip(y).map(|(u, v)| (u - v).abs())
        })
        .fold(0.0, f64::max)
}

/// Joint table `p(x) f(y|x)`, indexed `[x][y]`.
pub fn joint_table(f: &[Vec<f64>], p: &[f64]) -> Vec<Vec<f64>> {
    f.iter().zip(p).map(|(row, px)| row.iter().map(|v| px * v).collect()).collect()
}

/// Bayes' rule by enumeration; `None` rows for zero-mass observations.
pub fn oracle_inverse(f: &[Vec<f64>], p: &[f64]) -> Vec<Option<Vec<f64>>> {
    let joint = joint_table(f, p);
    let ny = f[0].len();
    (0..ny)
        .map(|y| {
            let q: f64 = joint.iter().map(|r| r[y]).sum();
            (q > 1e-12).then(|| joint.iter().map(|r| r[y] / q).collect())
        })
        .collect()
}

pub fn pushforward_dense(f: &[Vec<f64>], p: &[f64]) -> Vec<f64> {
    let ny = f[0].len();
    (0..ny).map(|y| f.iter().zip(p).map(|(r, px)| px * r[y]).sum()).collect()
}

// ---- random well-typed diagrams ----

/// Builds random diagrams over a fixed pool of objects, binding fresh
/// generators as it goes.
pub struct DiagramGen<'a, K, R: Rng> {
    pub rng: R,
    pub pool: Vec<ObjectRef>,
    pub sig: Signature,
    pub bindings: Bindings<K>,
    pub max_wires: usize,
    tag: BackendTag,
    make: Box<dyn FnMut(&mut R, usize, usize) -> K + 'a>,
    fresh: usize,
}

impl<'a, K, R: Rng> DiagramGen<'a, K, R> {
    pub fn new(rng: R, pool: Vec<ObjectRef>, make: impl FnMut(&mut R, usize, usize) -> K + 'a) -> Self {
        let tag = pool[0].tag();
        Self {
            tag,
            rng,
            pool,
            sig: Signature::new(),
            bindings: Bindings::new(),
            max_wires: 3,
            make: Box::new(make),
            fresh: 0,
        }
    }

    fn random_profile(&mut self, max: usize) -> Profile {
        let n = self.rng.gen_range(1..=max.max(1));
        Profile::new((0..n).map(|_| self.pool[self.rng.gen_range(0..self.pool.len())].clone()))
    }

    fn generator(&mut self, dom: &Profile, state: bool) -> (KernelExpr, Profile) {
        let cod = self.random_profile(2);
        self.generator_to(dom, cod, state)
    }

    fn generator_to(&mut self, dom: &Profile, cod: Profile, state: bool) -> (KernelExpr, Profile) {
        let name = format!("g{}", self.fresh);
        self.fresh += 1;
        let (d, c) = (self.size(dom), self.size(&cod));
        let k = (self.make)(&mut self.rng, d, c);
        self.sig.insert(name.clone(), dom.clone(), cod.clone());
        self.bindings.insert(name.clone(), k);
        let e = if state { KernelExpr::State(name) } else { KernelExpr::Gen(name) };
        (e, cod)
    }

    fn leaf(&mut self, dom: &Profile) -> (KernelExpr, Profile) {
        let w = dom.wires();
        match (w.len(), self.rng.gen_range(0..5)) {
            (0, _) => self.generator(dom, true),
            (1, 0) => (KernelExpr::Id(w[0].clone()), dom.clone()),
            (1, 1) if w.len() < self.max_wires => {
                (KernelExpr::Copy(w[0].clone()), Profile::new([w[0].clone(), w[0].clone()]))
            }
            (1, 2) => (KernelExpr::Delete(w[0].clone()), Profile::unit()),
            (2, 0 | 1) => (
                KernelExpr::Swap(w[0].clone(), w[1].clone()),
                Profile::new([w[1].clone(), w[0].clone()]),
            ),
            _ => self.generator(dom, false),
        }
    }

    fn shrink(&mut self, dom: &Profile) -> (KernelExpr, Profile) {
        let one = self.random_profile(1);
        self.generator_to(dom, one, dom.is_empty())
    }

    fn size(&self, p: &Profile) -> usize {
        match self.tag {
            BackendTag::Gauss => p.wires().iter().map(ObjectRef::size).sum(),
            BackendTag::FinStoch => p.wires().iter().map(ObjectRef::size).product(),
        }
    }

    /// A random diagram out of `dom` with nesting depth at most `depth`.
    pub fn expr(&mut self, dom: &Profile, depth: usize) -> (KernelExpr, Profile) {
        let choice = if depth == 0 { 0 } else { self.rng.gen_range(0..3) };
        match choice {
            1 => {
                let n = self.rng.gen_range(2..=3);
                let mut children = Vec::new();
                let mut cur = dom.clone();
                for _ in 0..n {
                    let (e, c) = self.expr(&cur, depth - 1);
                    children.push(e);
                    cur = c;
                }
                (KernelExpr::Seq(children), cur)
            }
            2 if dom.len() >= 2 => {
                let cut = self.rng.gen_range(1..dom.len());
                let (l, lc) = self.expr(&dom.slice(0, cut), depth - 1);
                let (r, rc) = self.expr(&dom.slice(cut, dom.len()), depth - 1);
                let cod = lc.tensor(&rc);
                if cod.len() > self.max_wires + 1 {
                    return self.shrink(dom);
                }
                (KernelExpr::par([l, r]), cod)
            }
            _ => {
                let (e, c) = self.leaf(dom);
                if c.len() > self.max_wires {
                    return self.shrink(dom);
                }
                (e, c)
            }
        }
    }
}

/// False when the pushforward covariance has an eigenvalue in the band where
/// its numerical rank is ambiguous. There the joints of a Gaussian inverse
/// cannot be reproduced to 1e-8 in double precision by any method.
pub fn well_posed(f: &GaussianKernel, p: &GaussianKernel) -> bool {
    let q = bayeslens_core::gauss::pushforward(f, p).unwrap();
    let c = q.cov();
    if c.nrows() == 0 {
        return true;
    }
    let scale = c.abs().max().max(1.0);
    c.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .all(|&l| l <= 1e-12 * scale || l >= 1e-6 * scale)
}

/// `well_posed` at every layer of the normal form of `e`, with the prior
/// pushed forward layer by layer.
pub fn diagram_well_posed(
    e: &bayeslens_core::KernelExpr,
    sig: &bayeslens_core::Signature,
    bindings: &bayeslens_core::Bindings<GaussianKernel>,
    p: &GaussianKernel,
) -> bool {
    use bayeslens_core::{eval::cell_kernel, CategoryBackend, Gauss};
    let b = Gauss::default();
    let nf = bayeslens_core::normalize(e, sig).unwrap();
    let mut cur = p.clone();
    for layer in &nf.layers {
        let cells: Vec<_> = layer.iter().map(|c| cell_kernel(c, &b, bindings).unwrap()).collect();
        let k = b.layer_kernel(&cells).unwrap();
        if !well_posed(&k, &cur) {
            return false;
        }
        cur = bayeslens_core::gauss::pushforward(&k, &cur).unwrap();
    }
    true
}
