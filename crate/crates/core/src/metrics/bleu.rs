//! Self-BLEU: every sample is scored as a hypothesis against the others.
//!
//! BLEU here uses uniform n-gram weights, clipped counts against the maximum
//! reference count, the closest-reference brevity penalty and an additive
//! epsilon on zero matches.

use std::collections::HashMap;

use rayon::prelude::*;

use super::Sample;
use crate::dist::TokenId;
use crate::error::{invalid, Error, Result};

pub const SMOOTHING_EPSILON: f64 = 1e-9;

type NgramCounts<'a> = HashMap<&'a [TokenId], u32>;

fn ngram_counts(tokens: &[TokenId], n: usize) -> NgramCounts<'_> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    counts
}

/// Per-sample n-gram tables for orders `1..=max_n`.
struct Indexed<'a> {
    len: usize,
    orders: Vec<NgramCounts<'a>>,
}

impl<'a> Indexed<'a> {
    fn new(tokens: &'a [TokenId], max_n: usize) -> Self {
        Indexed { len: tokens.len(), orders: (1..=max_n).map(|n| ngram_counts(tokens, n)).collect() }
    }
}

fn bleu_indexed(hyp: &Indexed<'_>, refs: &[&Indexed<'_>], max_n: usize) -> f64 {
    let mut log_precision = 0.0;
    for n in 1..=max_n {
        let hyp_counts = &hyp.orders[n - 1];
        let total: u32 = hyp_counts.values().sum();
        let clipped: u32 = hyp_counts
            .iter()
            .map(|(g, &c)| {
                let max_ref = refs.iter().map(|r| r.orders[n - 1].get(g).copied().unwrap_or(0)).max().unwrap_or(0);
                c.min(max_ref)
            })
            .sum();
        let precision = if total == 0 {
            SMOOTHING_EPSILON
        } else if clipped == 0 {
            SMOOTHING_EPSILON / total as f64
        } else {
            clipped as f64 / total as f64
        };
        log_precision += precision.ln() / max_n as f64;
    }

    let c = hyp.len;
    let r = refs
        .iter()
        .map(|x| x.len)
        .min_by_key(|&len| (len.abs_diff(c), len))
        .unwrap_or(c);
    let brevity = if c == 0 {
        0.0
    } else if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    brevity * log_precision.exp()
}

/// Corpus BLEU of one hypothesis against a set of references.
pub fn bleu(hypothesis: &[TokenId], references: &[&[TokenId]], max_ngram: usize) -> Result<f64> {
    if max_ngram == 0 {
        return Err(invalid("max_ngram", "must be >= 1"));
    }
    if references.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let hyp = Indexed::new(hypothesis, max_ngram);
    let refs: Vec<Indexed<'_>> = references.iter().map(|r| Indexed::new(r, max_ngram)).collect();
    let refs: Vec<&Indexed<'_>> = refs.iter().collect();
    Ok(bleu_indexed(&hyp, &refs, max_ngram))
}

/// Mean BLEU of each sample against `ref_count` others (the following ones,
/// cyclically), or against all others when `ref_count` is 0.
pub fn self_bleu(samples: &[Sample], max_ngram: usize, ref_count: usize) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: samples.len() });
    }
    if max_ngram == 0 {
        return Err(invalid("max_ngram", "must be >= 1"));
    }
    let indexed: Vec<Indexed<'_>> = samples.iter().map(|s| Indexed::new(&s.tokens, max_ngram)).collect();
    let n = samples.len();
    let take = if ref_count == 0 { n - 1 } else { ref_count.min(n - 1) };
    let scores: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let refs: Vec<&Indexed<'_>> = (1..=take).map(|j| &indexed[(i + j) % n]).collect();
            bleu_indexed(&indexed[i], &refs, max_ngram)
        })
        .collect();
    Ok(scores.iter().sum::<f64>() / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(tokens: Vec<TokenId>) -> Sample {
        Sample { tokens, ..Default::default() }
    }

    #[test]
    fn identical_samples_score_one() {
        let t: Vec<TokenId> = (0..50).map(|i| i % 17).collect();
        let corpus = vec![s(t.clone()), s(t.clone()), s(t)];
        assert_eq!(self_bleu(&corpus, 4, 0).unwrap(), 1.0);
        assert_eq!(self_bleu(&corpus, 5, 1).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_vocabularies_score_zero() {
        let corpus: Vec<Sample> = (0..4).map(|k| s((0..40).map(|i| k * 1000 + i).collect())).collect();
        let b = self_bleu(&corpus, 4, 0).unwrap();
        assert!(b < 1e-9, "{b}");
    }

    #[test]
    fn needs_two_samples() {
        assert_eq!(
            self_bleu(&[s(vec![1, 2, 3])], 4, 0),
            Err(Error::InsufficientSamples { needed: 2, got: 1 })
        );
    }

    #[test]
    fn hand_computed_bigram_bleu() {
        // hyp "a b c d", ref "a b x d": unigram 3/4, bigram 1/3; equal lengths, no penalty
        let b = bleu(&[1, 2, 3, 4], &[&[1, 2, 9, 4]], 2).unwrap();
        assert!((b - (0.75f64 * (1.0 / 3.0)).sqrt()).abs() < 1e-12);
        // shorter hypothesis pays exp(1 - r/c)
        let b = bleu(&[1, 2], &[&[1, 2, 3, 4]], 1).unwrap();
        assert!((b - (1.0f64 - 2.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn order_invariant_and_sensitive_to_diversity() {
        let a: Vec<TokenId> = (0..30).collect();
        let b: Vec<TokenId> = (0..30).map(|i| if i % 3 == 0 { 500 + i } else { i }).collect();
        let c: Vec<TokenId> = (10..40).collect();
        let forward = self_bleu(&[s(a.clone()), s(b.clone()), s(c.clone())], 4, 0).unwrap();
        let backward = self_bleu(&[s(c.clone()), s(a.clone()), s(b.clone())], 4, 0).unwrap();
        assert!((forward - backward).abs() < 1e-12);

        let dup = self_bleu(&[s(a.clone()), s(a.clone()), s(b.clone())], 4, 0).unwrap();
        let replaced = self_bleu(&[s(a.clone()), s((900..930).collect()), s(b)], 4, 0).unwrap();
        assert!(replaced < dup);
    }
}
