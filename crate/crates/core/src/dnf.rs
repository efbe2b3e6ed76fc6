//! Positive-literal DNF for `P_x` over hyperedge encodings.
//!
//! For each satisfying assignment `b` of `P` the term is the conjunction of
//! `z_{j·n+l}` over all `(j, l)` with `x_l ≠ b_j`. On an encoding `z^S` the term
//! holds iff every slice `j` puts its zero at a vertex `l` with `x_l = b_j`,
//! that is iff `x_S = b`.

use serde::{Deserialize, Serialize};

use crate::encoding::BitVector;
use crate::error::{invalid, Error, Result};
use crate::prg::Predicate;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DnfFormula {
    terms: Vec<Vec<usize>>,
}

impl DnfFormula {
    /// Sorts and deduplicates each term and drops duplicate terms.
    pub fn new(terms: Vec<Vec<usize>>, dim: usize) -> Result<Self> {
        let mut out: Vec<Vec<usize>> = Vec::with_capacity(terms.len());
        for mut t in terms {
            t.sort_unstable();
            t.dedup();
            if let Some(&i) = t.iter().find(|&&i| i >= dim) {
                return Err(invalid(format!("literal {i} outside dimension {dim}")));
            }
            if !out.contains(&t) {
                out.push(t);
            }
        }
        Ok(Self { terms: out })
    }

    pub fn terms(&self) -> &[Vec<usize>] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

pub fn compile_predicate_dnf(p: &Predicate, x: &BitVector, n: usize) -> Result<DnfFormula> {
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: x.len(),
        });
    }
    let k = p.k();
    let terms = p
        .satisfying_assignments()
        .into_iter()
        .map(|b| {
            let mut term = Vec::new();
            for (j, &bj) in b.iter().enumerate() {
                term.extend((0..n).filter(|&l| x.get(l) != bj).map(|l| j * n + l));
            }
            term
        })
        .collect();
    DnfFormula::new(terms, k * n)
}

/// Empty term is true, empty formula is false.
pub fn eval_dnf(psi: &DnfFormula, z: &BitVector) -> Result<u8> {
    if let Some(&i) = psi.terms.iter().flatten().find(|&&i| i >= z.len()) {
        return Err(invalid(format!(
            "literal {i} outside input of length {}",
            z.len()
        )));
    }
    Ok(u8::from(
        psi.terms.iter().any(|t| t.iter().all(|&i| z.get(i) == 1)),
    ))
}
