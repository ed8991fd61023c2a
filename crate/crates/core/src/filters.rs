//! Vocabulary filters: top-k, nucleus (top-p), top-1-controlled, their joint
//! combination and the dynamic pruning rule that reconciles top1ctrl with the
//! IQR bands.
//!
//! Every filter keeps the argmax, so a [`CandidateSet`] is never empty.

use std::collections::HashSet;
use std::ops::Deref;

use serde::Serialize;

use crate::dist::{Distribution, TokenId};
use crate::error::{invalid, Error, Result};
use crate::iqr_ip::{Band, IqrPartition};

/// Ordered, nonempty subset of a distribution's ids (source canonical order).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CandidateSet(Vec<TokenId>);

impl CandidateSet {
    pub fn new(ids: Vec<TokenId>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::EmptyInput("candidate set"));
        }
        let unique: HashSet<_> = ids.iter().collect();
        if unique.len() != ids.len() {
            return Err(Error::Inconsistent("candidate set contains duplicate ids".into()));
        }
        Ok(CandidateSet(ids))
    }

    pub fn ids(&self) -> &[TokenId] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<TokenId> {
        self.0
    }

    pub fn to_set(&self) -> HashSet<TokenId> {
        self.0.iter().copied().collect()
    }

    pub fn is_subset_of(&self, other: &[TokenId]) -> bool {
        let other: HashSet<TokenId> = other.iter().copied().collect();
        self.0.iter().all(|id| other.contains(id))
    }

    /// Members of `self` that are also in `other`, in `self`'s order.
    pub fn intersect(&self, other: &[TokenId]) -> Vec<TokenId> {
        let other: HashSet<TokenId> = other.iter().copied().collect();
        self.0.iter().copied().filter(|id| other.contains(id)).collect()
    }
}

impl Deref for CandidateSet {
    type Target = [TokenId];

    fn deref(&self) -> &[TokenId] {
        &self.0
    }
}

impl AsRef<[TokenId]> for CandidateSet {
    fn as_ref(&self) -> &[TokenId] {
        &self.0
    }
}

fn prefix(dist: &Distribution, len: usize) -> CandidateSet {
    CandidateSet(dist.ids()[..len.clamp(1, dist.len())].to_vec())
}

pub fn top_k_set(dist: &Distribution, k: usize) -> Result<CandidateSet> {
    if k == 0 {
        return Err(invalid("k", "top-k requires k >= 1"));
    }
    Ok(prefix(dist, k))
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid("p", format!("{p} is outside (0, 1]")));
    }
    Ok(())
}

/// Candidates whose inclusive cdf is at most `p`; the argmax is always kept.
pub fn top_p_set(dist: &Distribution, p: f64) -> Result<CandidateSet> {
    check_p(p)?;
    if p == 1.0 {
        // accumulated rounding may push the last cdf a hair above 1
        return Ok(prefix(dist, dist.len()));
    }
    let mut cdf = 0.0;
    let kept = dist
        .probs()
        .iter()
        .take_while(|&&prob| {
            cdf += prob;
            cdf <= p
        })
        .count();
    Ok(prefix(dist, kept))
}

fn check_n(n: f64) -> Result<()> {
    if !(n >= 1.0) || n.is_nan() {
        return Err(invalid("n", format!("top1ctrl requires n >= 1, got {n}")));
    }
    Ok(())
}

/// Indices of `values` with value >= max(values) / n.
pub fn top1ctrl_indices(values: &[f64], n: f64) -> Result<Vec<usize>> {
    check_n(n)?;
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let threshold = max / n;
    Ok(values.iter().enumerate().filter(|(_, &v)| v >= threshold).map(|(i, _)| i).collect())
}

pub fn top1ctrl_set(dist: &Distribution, n: f64) -> Result<CandidateSet> {
    let kept = top1ctrl_indices(dist.probs(), n)?;
    // canonical order makes the kept indices a prefix
    Ok(prefix(dist, kept.len()))
}

/// V^k ∩ V^p. Both are prefixes of the canonical order, so the result is the shorter one.
pub fn joint_filter(dist: &Distribution, k: usize, p: f64) -> Result<CandidateSet> {
    let by_k = top_k_set(dist, k)?;
    let by_p = top_p_set(dist, p)?;
    Ok(if by_k.len() <= by_p.len() { by_k } else { by_p })
}

/// Reconciles the top1ctrl set `vn` with the IQR bands computed on `k0`.
///
/// When `vn` lies entirely inside VeryHigh ∪ High the whole upper band pair is
/// kept (Medium and Low are dropped); otherwise the result is `k0 ∩ vn`.
pub fn dynamic_prune(partition: &IqrPartition, k0: &CandidateSet, vn: &CandidateSet) -> Result<CandidateSet> {
    if partition.len() != k0.len() || !k0.iter().all(|&id| partition.band_of(id).is_some()) {
        return Err(Error::Inconsistent("partition was not computed on the supplied candidate set".into()));
    }
    let upper: Vec<TokenId> = k0
        .iter()
        .copied()
        .filter(|&id| matches!(partition.band_of(id), Some(Band::VeryHigh | Band::High)))
        .collect();
    let result = if vn.is_subset_of(&upper) { upper } else { k0.intersect(vn) };
    CandidateSet::new(result)
        .map_err(|_| Error::Inconsistent("pruning produced an empty candidate set".into()))
}
