//! Finite next-token distributions and the primitives shared by every stage:
//! normalization, value quantiles, entropy and seeded inverse-CDF sampling.
//!
//! A [`Distribution`] is always stored in canonical order: descending
//! probability, ties broken by ascending token id. Every filter and the
//! inverse-CDF sampler rely on that order, which makes truncation and
//! sampling deterministic.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TokenId = u32;

/// Distance from 1 within which a weight vector is treated as already
/// normalized. Keeps `normalize` idempotent bit-for-bit.
const NORMALIZED_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct Distribution {
    ids: Vec<TokenId>,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDistribution {
    ids: Vec<TokenId>,
    probs: Vec<f64>,
}

impl TryFrom<RawDistribution> for Distribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        normalize(&raw.probs, &raw.ids)
    }
}

impl From<Distribution> for RawDistribution {
    fn from(d: Distribution) -> Self {
        RawDistribution { ids: d.ids, probs: d.probs }
    }
}

fn canonical_sort(pairs: &mut [(TokenId, f64)]) {
    pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

/// Builds a distribution proportional to `weights`. Zero weights are dropped.
pub fn normalize(weights: &[f64], ids: &[TokenId]) -> Result<Distribution> {
    if weights.len() != ids.len() {
        return Err(Error::LengthMismatch { ids: ids.len(), weights: weights.len() });
    }
    let mut seen = HashSet::with_capacity(ids.len());
    for &id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id));
        }
    }
    let mut pairs = Vec::with_capacity(ids.len());
    for (&id, &w) in ids.iter().zip(weights) {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidWeight { id, value: w });
        }
        if w > 0.0 {
            pairs.push((id, w));
        }
    }
    if pairs.is_empty() {
        return Err(Error::AllZeroWeights);
    }
    canonical_sort(&mut pairs);
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    if (total - 1.0).abs() > NORMALIZED_TOLERANCE {
        for p in &mut pairs {
            p.1 /= total;
        }
        // division can collapse neighbouring weights into a tie
        canonical_sort(&mut pairs);
    }
    Ok(Distribution::from_sorted_pairs(pairs))
}

impl Distribution {
    fn from_sorted_pairs(pairs: Vec<(TokenId, f64)>) -> Self {
        let (ids, probs) = pairs.into_iter().unzip();
        Distribution { ids, probs }
    }

    /// Re-sorts already-normalized pairs without touching their values.
    pub(crate) fn from_probs_unscaled(mut pairs: Vec<(TokenId, f64)>) -> Self {
        canonical_sort(&mut pairs);
        Self::from_sorted_pairs(pairs)
    }

    pub fn from_weights(ids: &[TokenId], weights: &[f64]) -> Result<Self> {
        normalize(weights, ids)
    }

    pub fn point_mass(id: TokenId) -> Self {
        Distribution { ids: vec![id], probs: vec![1.0] }
    }

    pub fn uniform(ids: &[TokenId]) -> Result<Self> {
        normalize(&vec![1.0; ids.len()], ids)
    }

    pub fn ids(&self) -> &[TokenId] {
        &self.ids
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    /// Always false for a constructed distribution; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TokenId, f64)> + '_ {
        self.ids.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn argmax(&self) -> TokenId {
        self.ids[0]
    }

    pub fn max_prob(&self) -> f64 {
        self.probs[0]
    }

    pub fn prob_of(&self, id: TokenId) -> Option<f64> {
        self.ids.iter().position(|&x| x == id).map(|i| self.probs[i])
    }

    /// 1-based rank in canonical order.
    pub fn rank_of(&self, id: TokenId) -> Option<usize> {
        self.ids.iter().position(|&x| x == id).map(|i| i + 1)
    }

    pub fn contains(&self, id: TokenId) -> bool {
        self.ids.contains(&id)
    }

    /// Renormalizes the distribution onto `keep`. Every kept id must be in the support.
    pub fn restrict(&self, keep: &[TokenId]) -> Result<Distribution> {
        let wanted: HashSet<TokenId> = keep.iter().copied().collect();
        if wanted.len() != keep.len() {
            let mut seen = HashSet::new();
            let dup = keep.iter().find(|&&id| !seen.insert(id)).copied().unwrap_or_default();
            return Err(Error::DuplicateId(dup));
        }
        let mut ids = Vec::with_capacity(keep.len());
        let mut weights = Vec::with_capacity(keep.len());
        for (id, p) in self.iter() {
            if wanted.contains(&id) {
                ids.push(id);
                weights.push(p);
            }
        }
        if ids.len() != keep.len() {
            let missing = keep.iter().find(|id| !self.contains(**id)).copied().unwrap_or_default();
            return Err(Error::NotInSupport(missing));
        }
        normalize(&weights, &ids)
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        let mut ascending = self.probs.clone();
        ascending.reverse();
        quantile_sorted(&ascending, q)
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        entropy_of(&self.probs)
    }
}

/// q-quantile of ascending `values` by linear interpolation between closest ranks.
pub fn quantile_sorted(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(crate::error::invalid("q", format!("{q} is outside [0, 1]")));
    }
    let h = (values.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    if lo + 1 >= values.len() {
        return Ok(values[values.len() - 1]);
    }
    Ok(values[lo] + (h - lo as f64) * (values[lo + 1] - values[lo]))
}

pub fn quantile(dist: &Distribution, q: f64) -> Result<f64> {
    dist.quantile(q)
}

pub fn entropy(dist: &Distribution) -> f64 {
    dist.entropy()
}

pub(crate) fn entropy_of(probs: &[f64]) -> f64 {
    let h: f64 = probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
    h.max(0.0)
}

/// Seeded random stream. The same seed yields the same draws on every platform.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    draws: u64,
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState { seed, draws: 0, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of uniforms consumed so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Uniform draw on [0, 1).
    pub fn next_uniform(&mut self) -> f64 {
        self.draws += 1;
        self.inner.gen::<f64>()
    }
}

/// Inverse-CDF draw over the canonical order. Consumes exactly one uniform.
pub fn sample_token(dist: &Distribution, rng: &mut RngState) -> TokenId {
    let u = rng.next_uniform();
    let mut cdf = 0.0;
    for (id, p) in dist.iter() {
        cdf += p;
        if u < cdf {
            return id;
        }
    }
    // rounding left the total a hair under u
    dist.ids[dist.len() - 1]
}
