//! Multi-indices and finite index sets.
//!
//! A multi-index m = (m_1, ..., m_K) labels one mixture component; the set of
//! active components is an [`IndexSet`]. Mixture supports grow by translation
//! when an observation arrives and by downward closure ("lower sets") when the
//! filter propagates through the death process, so those two operations plus
//! the coordinatewise partial order are the whole interface.
//!
//! Sets iterate in lexicographic order, which makes every downstream
//! computation (weight accumulation, table construction, trace output)
//! deterministic.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

/// A point of Z_+^K, K >= 1. Ordering is lexicographic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex {
    coords: Vec<u64>,
}

impl MultiIndex {
    /// Builds a multi-index from its coordinates. At least one coordinate is
    /// required; there is no zero-dimensional index.
    pub fn new(coords: Vec<u64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter(
                "multi-index needs at least one coordinate".into(),
            ));
        }
        Ok(Self { coords })
    }

    /// The zero index of dimension `dim`.
    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[u64] {
        &self.coords
    }

    pub fn coord(&self, j: usize) -> u64 {
        self.coords[j]
    }

    /// |m| = m_1 + ... + m_K.
    pub fn magnitude(&self) -> u64 {
        self.coords.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }

    /// Coordinatewise partial order: self <= other in every coordinate.
    pub fn leq(&self, other: &Self) -> Result<bool> {
        self.check_dim(other)?;
        Ok(self
            .coords
            .iter()
            .zip(&other.coords)
            .all(|(a, b)| a <= b))
    }

    /// Coordinatewise sum.
    pub fn plus(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// Coordinatewise difference; errors unless `other` <= self.
    pub fn minus(&self, other: &Self) -> Result<Self> {
        if !other.leq(self)? {
            return Err(Error::NotDominated {
                origin: self.to_string(),
                target: other.to_string(),
            });
        }
        Ok(Self {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// Size of the lower set of this single index: prod_j (m_j + 1).
    pub fn lower_size(&self) -> u128 {
        self.coords.iter().map(|&c| c as u128 + 1).product()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (j, c) in self.coords.iter().enumerate() {
            if j > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A finite set of multi-indices of one common dimension, iterated in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    dim: usize,
    set: BTreeSet<MultiIndex>,
}

impl IndexSet {
    /// An empty set of the given dimension.
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "index set needs dimension at least 1".into(),
            ));
        }
        Ok(Self {
            dim,
            set: BTreeSet::new(),
        })
    }

    /// The set {m}.
    pub fn singleton(m: MultiIndex) -> Self {
        let dim = m.dim();
        let mut set = BTreeSet::new();
        set.insert(m);
        Self { dim, set }
    }

    /// Collects indices into a set, checking that dimensions agree.
    /// Duplicates collapse silently.
    pub fn from_indices<I: IntoIterator<Item = MultiIndex>>(indices: I) -> Result<Self> {
        let mut iter = indices.into_iter();
        let first = iter.next().ok_or(Error::EmptyIndexSet)?;
        let mut out = Self::singleton(first);
        for m in iter {
            out.insert(m)?;
        }
        Ok(out)
    }

    /// Inserts an index; `Ok(true)` when it was not already present.
    pub fn insert(&mut self, m: MultiIndex) -> Result<bool> {
        if m.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: m.dim(),
            });
        }
        Ok(self.set.insert(m))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn contains(&self, m: &MultiIndex) -> bool {
        self.set.contains(m)
    }

    /// Lexicographic iteration.
    pub fn iter(&self) -> impl Iterator<Item = &MultiIndex> {
        self.set.iter()
    }

    /// The downward closure G(set) = { n : n <= m for some m in the set }.
    ///
    /// Errors on an empty input; the closure of nothing is not meaningful for
    /// a probability support. Idempotent and monotone in the input.
    pub fn lower_set(&self) -> Result<IndexSet> {
        if self.set.is_empty() {
            return Err(Error::EmptyIndexSet);
        }
        let mut out = IndexSet::new(self.dim)?;
        for m in &self.set {
            let mut cursor = vec![0u64; self.dim];
            loop {
                out.set.insert(MultiIndex {
                    coords: cursor.clone(),
                });
                // Odometer step through the box [0, m_1] x ... x [0, m_K].
                let mut j = self.dim;
                loop {
                    if j == 0 {
                        break;
                    }
                    j -= 1;
                    if cursor[j] < m.coords[j] {
                        cursor[j] += 1;
                        break;
                    }
                    cursor[j] = 0;
                    if j == 0 {
                        j = usize::MAX;
                        break;
                    }
                }
                if j == usize::MAX {
                    break;
                }
            }
        }
        Ok(out)
    }

    /// The translate { n + m : n in the set }.
    pub fn translate(&self, m: &MultiIndex) -> Result<IndexSet> {
        if m.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: m.dim(),
            });
        }
        let mut out = IndexSet::new(self.dim)?;
        for n in &self.set {
            out.set.insert(n.plus(m)?);
        }
        Ok(out)
    }

    /// The coordinatewise maximum over the set, the smallest box corner
    /// dominating every element. Errors on an empty set.
    pub fn envelope(&self) -> Result<MultiIndex> {
        if self.set.is_empty() {
            return Err(Error::EmptyIndexSet);
        }
        let mut top = vec![0u64; self.dim];
        for m in &self.set {
            for (t, &c) in top.iter_mut().zip(&m.coords) {
                *t = (*t).max(c);
            }
        }
        MultiIndex::new(top)
    }
}

impl<'a> IntoIterator for &'a IndexSet {
    type Item = &'a MultiIndex;
    type IntoIter = std::collections::btree_set::Iter<'a, MultiIndex>;

    fn into_iter(self) -> Self::IntoIter {
        self.set.iter()
    }
}
