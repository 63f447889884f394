//! Sorted position multisets and the range/diameter primitives.

use serde::Serialize;

use crate::{CoreError, Scalar};

/// Closed interval `[lo, hi]` on the line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Interval {
    pub lo: Scalar,
    pub hi: Scalar,
}

impl Interval {
    pub fn new(lo: Scalar, hi: Scalar) -> Self {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    pub fn contains(&self, x: &Scalar) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn width(&self) -> Scalar {
        &self.hi - &self.lo
    }

    pub fn center(&self) -> Scalar {
        Scalar::midpoint(&self.lo, &self.hi)
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Multiset of positions kept as an ascending list. Indices are 1-based to
/// match `P_1(t) <= ... <= P_n(t)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize)]
pub struct PositionMultiset {
    values: Vec<Scalar>,
}

impl PositionMultiset {
    pub fn from_unsorted(mut values: Vec<Scalar>) -> Self {
        values.sort();
        PositionMultiset { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[Scalar] {
        &self.values
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Scalar> {
        self.values.iter()
    }

    pub fn min(&self) -> Result<&Scalar, CoreError> {
        self.values.first().ok_or(CoreError::EmptyMultiset)
    }

    pub fn max(&self) -> Result<&Scalar, CoreError> {
        self.values.last().ok_or(CoreError::EmptyMultiset)
    }

    pub fn range(&self) -> Result<Interval, CoreError> {
        Ok(Interval::new(self.min()?.clone(), self.max()?.clone()))
    }

    pub fn diam(&self) -> Result<Scalar, CoreError> {
        Ok(self.max()? - self.min()?)
    }

    /// The `k`-th smallest element, counting repetitions, with `k` 1-based.
    pub fn kth(&self, k: usize) -> Result<&Scalar, CoreError> {
        if k == 0 || k > self.values.len() {
            return Err(CoreError::IndexOutOfRange {
                k,
                len: self.values.len(),
            });
        }
        Ok(&self.values[k - 1])
    }

    pub fn multiplicity(&self, x: &Scalar) -> usize {
        self.first_index_of(x)
            .map(|first| self.last_index_of(x).unwrap() - first + 1)
            .unwrap_or(0)
    }

    pub fn contains(&self, x: &Scalar) -> bool {
        self.values.binary_search(x).is_ok()
    }

    /// 1-based index of the first element equal to `x`.
    pub fn first_index_of(&self, x: &Scalar) -> Option<usize> {
        let idx = self.values.partition_point(|v| v < x);
        (idx < self.values.len() && &self.values[idx] == x).then_some(idx + 1)
    }

    /// 1-based index of the last element equal to `x`.
    pub fn last_index_of(&self, x: &Scalar) -> Option<usize> {
        let idx = self.values.partition_point(|v| v <= x);
        (idx > 0 && &self.values[idx - 1] == x).then_some(idx)
    }

    /// Contiguous sub-multiset `{P_lo, ..., P_hi}` (1-based, inclusive).
    pub fn slice(&self, lo: usize, hi: usize) -> Result<PositionMultiset, CoreError> {
        self.kth(lo)?;
        self.kth(hi)?;
        if lo > hi {
            return Err(CoreError::IndexOutOfRange { k: lo, len: hi });
        }
        Ok(PositionMultiset {
            values: self.values[lo - 1..hi].to_vec(),
        })
    }

    pub fn union(&self, other: &PositionMultiset) -> PositionMultiset {
        let mut values = Vec::with_capacity(self.len() + other.len());
        let (mut a, mut b) = (self.values.iter().peekable(), other.values.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(x), Some(y)) if x <= y => values.push(a.next().unwrap().clone()),
                (Some(_), Some(_)) => values.push(b.next().unwrap().clone()),
                (Some(_), None) => values.push(a.next().unwrap().clone()),
                (None, Some(_)) => values.push(b.next().unwrap().clone()),
                (None, None) => break,
            }
        }
        PositionMultiset { values }
    }

    pub fn translated(&self, offset: &Scalar) -> PositionMultiset {
        PositionMultiset {
            values: self.values.iter().map(|v| v + offset).collect(),
        }
    }

    /// Image under `x -> -x`.
    pub fn reflected(&self) -> PositionMultiset {
        PositionMultiset {
            values: self.values.iter().rev().map(|v| -v).collect(),
        }
    }
}

impl FromIterator<Scalar> for PositionMultiset {
    fn from_iter<I: IntoIterator<Item = Scalar>>(iter: I) -> Self {
        PositionMultiset::from_unsorted(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a PositionMultiset {
    type Item = &'a Scalar;
    type IntoIter = std::slice::Iter<'a, Scalar>;

    fn into_iter(self) -> Self::IntoIter {
        self.values.iter()
    }
}

impl std::fmt::Display for PositionMultiset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("{")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("}")
    }
}
