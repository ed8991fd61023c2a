//! Naive reference implementations and random instance generators shared by
//! the integration tests. Nothing here calls into the filtering or partition
//! code it is used to check.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use iqrip::dist::{normalize, Distribution, TokenId};
use iqrip::iqr_ip::Band;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Positive weights with a random shape: flat, exponential (Dirichlet(1)) or
/// heavily skewed, optionally quantized to force ties.
pub fn random_weights(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let shape = rng.gen_range(0..4);
    let gamma = rng.gen_range(1.0..8.0);
    (0..len)
        .map(|_| {
            let u: f64 = rng.gen_range(1e-9..1.0);
            match shape {
                0 => 1.0 + 0.1 * u,
                1 => -u.ln(),
                2 => u.powf(gamma),
                _ => (u * 6.0).ceil(),
            }
        })
        .collect()
}

/// A random distribution over shuffled ids drawn from `0..4*len`.
pub fn random_dist(rng: &mut ChaCha8Rng, len: usize) -> Distribution {
    let mut ids: Vec<TokenId> = (0..(4 * len) as TokenId).collect();
    ids.shuffle(rng);
    ids.truncate(len);
    normalize(&random_weights(rng, len), &ids).unwrap()
}

/// Pairs in descending probability, ties by ascending id.
pub fn sorted_pairs(d: &Distribution) -> Vec<(TokenId, f64)> {
    let mut v: Vec<(TokenId, f64)> = d.ids().iter().copied().zip(d.probs().iter().copied()).collect();
    v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    v
}

pub fn set(ids: &[TokenId]) -> BTreeSet<TokenId> {
    ids.iter().copied().collect()
}

/// The k most probable candidates.
pub fn naive_top_k(d: &Distribution, k: usize) -> BTreeSet<TokenId> {
    sorted_pairs(d).into_iter().take(k).map(|x| x.0).collect()
}

/// Candidates whose inclusive cdf is at most p, plus the argmax.
pub fn naive_top_p(d: &Distribution, p: f64) -> BTreeSet<TokenId> {
    let pairs = sorted_pairs(d);
    if p >= 1.0 {
        return pairs.iter().map(|x| x.0).collect();
    }
    let mut out = BTreeSet::new();
    let mut cdf = 0.0;
    for (i, (id, prob)) in pairs.iter().enumerate() {
        cdf += prob;
        if cdf <= p || i == 0 {
            out.insert(*id);
        }
    }
    out
}

/// Candidates with probability at least max / n.
pub fn naive_top1ctrl(d: &Distribution, n: f64) -> BTreeSet<TokenId> {
    let max = d.probs().iter().copied().fold(0.0, f64::max);
    d.iter().filter(|&(_, p)| p >= max / n).map(|(id, _)| id).collect()
}

/// Linear interpolation between closest ranks on an ascending copy.
pub fn naive_quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (v.len() - 1) as f64;
    let below = pos.floor() as usize;
    let above = pos.ceil() as usize;
    let frac = pos - below as f64;
    if below == above {
        v[below]
    } else {
        v[below] + frac * (v[above] - v[below])
    }
}

/// The band rule transcribed inequality by inequality, plus the small-set rule and a
/// VeryLow band below the lower fence.
pub fn naive_bands(d: &Distribution, rho: f64) -> HashMap<TokenId, Band> {
    let values: Vec<f64> = d.probs().to_vec();
    let q1 = naive_quantile(&values, 0.25);
    let q3 = naive_quantile(&values, 0.75);
    let iqr = q3 - q1;
    let small = values.len() < 4;
    d.iter()
        .map(|(id, p)| {
            let band = if !small && p >= q3 + rho * iqr {
                Band::VeryHigh
            } else if (small || q3 + rho * iqr > p) && p >= q3 {
                Band::High
            } else if q3 > p && p >= q1 {
                Band::Medium
            } else if q1 > p && p >= q1 - rho * iqr {
                Band::Low
            } else {
                Band::VeryLow
            };
            (id, band)
        })
        .collect()
}

/// Dynamic pruning on plain sets.
pub fn naive_prune(
    bands: &HashMap<TokenId, Band>,
    k0: &BTreeSet<TokenId>,
    vn: &BTreeSet<TokenId>,
) -> BTreeSet<TokenId> {
    let upper: BTreeSet<TokenId> = k0
        .iter()
        .copied()
        .filter(|id| matches!(bands[id], Band::VeryHigh | Band::High))
        .collect();
    if vn.is_subset(&upper) {
        upper
    } else {
        k0.intersection(vn).copied().collect()
    }
}

/// `d` restricted to `keep` and renormalized, as an id → probability map.
pub fn naive_restrict(d: &Distribution, keep: &BTreeSet<TokenId>) -> HashMap<TokenId, f64> {
    let total: f64 = d.iter().filter(|(id, _)| keep.contains(id)).map(|(_, p)| p).sum();
    d.iter().filter(|(id, _)| keep.contains(id)).map(|(id, p)| (id, p / total)).collect()
}

/// The filtered distribution on K1 with no permutation, built from the naive pieces.
pub fn naive_plain_k1(raw: &Distribution, k: usize, p: f64, n: f64, rho: f64) -> HashMap<TokenId, f64> {
    let k0: BTreeSet<TokenId> = naive_top_k(raw, k).intersection(&naive_top_p(raw, p)).copied().collect();
    let on_k0 = normalize(
        &k0.iter().map(|id| raw.prob_of(*id).unwrap()).collect::<Vec<_>>(),
        &k0.iter().copied().collect::<Vec<_>>(),
    )
    .unwrap();
    let bands = naive_bands(&on_k0, rho);
    let k1 = naive_prune(&bands, &k0, &naive_top1ctrl(raw, n));
    naive_restrict(raw, &k1)
}

/// Σ p ln(p/q), accumulated with compensated summation.
pub fn naive_kl(p: &HashMap<TokenId, f64>, q: &HashMap<TokenId, f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    let mut ids: Vec<&TokenId> = p.keys().collect();
    ids.sort();
    for id in ids {
        let a = p[id];
        if a > 0.0 {
            let term = a * (a / q[id]).ln() - c;
            let t = sum + term;
            c = (t - sum) - term;
            sum = t;
        }
    }
    sum
}

pub fn as_map(d: &Distribution) -> HashMap<TokenId, f64> {
    d.iter().collect()
}
