use crate::error::{Error, Result};

use super::matrix::{FinState, StochasticMatrix};

/// Support of a finite distribution, realized as an index subset.
///
/// The inclusion sends support point `k` to `indices[k]`. The retraction is
/// the identity on support points and uniform over the support elsewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinSupport {
    base_card: usize,
    indices: Vec<usize>,
}

impl FinSupport {
    pub fn new(base_card: usize, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptySupport { tol: 0.0 });
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) || indices.iter().any(|&i| i >= base_card) {
            return Err(Error::InvalidArgument(
                "support indices must be strictly increasing and in range".into(),
            ));
        }
        Ok(Self { base_card, indices })
    }

    /// `{x : p(x) > tol}`.
    pub fn of(p: &FinState, tol: f64) -> Result<Self> {
        if p.dom_card() != 1 {
            return Err(Error::DegeneratePrior(format!(
                "expected a state, got a kernel with {} rows",
                p.dom_card()
            )));
        }
        let indices: Vec<usize> = p.row(0).filter(|e| e.1 > tol).map(|e| e.0).collect();
        if indices.is_empty() {
            return Err(Error::EmptySupport { tol });
        }
        Ok(Self {
            base_card: p.cod_card(),
            indices,
        })
    }

    pub fn full(card: usize) -> Self {
        Self {
            base_card: card,
            indices: (0..card).collect(),
        }
    }

    pub fn base_card(&self) -> usize {
        self.base_card
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Position of a base index inside the support.
    pub fn local(&self, x: usize) -> Option<usize> {
        self.indices.binary_search(&x).ok()
    }

    pub fn inclusion(&self) -> StochasticMatrix {
        StochasticMatrix::from_sparse_unchecked(
            self.base_card,
            self.indices.iter().map(|&x| vec![(x, 1.0)]).collect(),
        )
    }

    pub fn retraction(&self) -> StochasticMatrix {
        let k = self.indices.len();
        let w = 1.0 / k as f64;
        let spread: Vec<(usize, f64)> = (0..k).map(|j| (j, w)).collect();
        let rows = (0..self.base_card)
            .map(|x| match self.local(x) {
                Some(j) => vec![(j, 1.0)],
                None => spread.clone(),
            })
            .collect();
        StochasticMatrix::from_sparse_unchecked(k, rows)
    }

    /// Supports multiply under the row-major pairing.
    pub fn tensor(&self, other: &FinSupport) -> Result<FinSupport> {
        let base = self
            .base_card
            .checked_mul(other.base_card)
            .ok_or(Error::ObjectTooLarge)?;
        let mut indices = Vec::with_capacity(self.len() * other.len());
        for &a in &self.indices {
            for &b in &other.indices {
                indices.push(a * other.base_card + b);
            }
        }
        Ok(FinSupport {
            base_card: base,
            indices,
        })
    }
}
