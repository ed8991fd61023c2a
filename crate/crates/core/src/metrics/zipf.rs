use std::collections::HashMap;

use super::Sample;
use crate::dist::TokenId;
use crate::error::{Error, Result};

/// Negated least-squares slope of ln(frequency) against ln(rank), over every
/// nonzero frequency. Ranks are ordinal, so tied frequencies take consecutive ranks.
pub fn zipf_fit(frequencies: &[u64]) -> Result<f64> {
    let mut freqs: Vec<u64> = frequencies.iter().copied().filter(|&f| f > 0).collect();
    if freqs.len() < 2 {
        return Err(Error::UndefinedFit(freqs.len()));
    }
    freqs.sort_unstable_by(|a, b| b.cmp(a));
    let n = freqs.len() as f64;
    let xs: Vec<f64> = (1..=freqs.len()).map(|r| (r as f64).ln()).collect();
    let ys: Vec<f64> = freqs.iter().map(|&f| (f as f64).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    Ok(0.0 - sxy / sxx)
}

pub fn token_frequencies(samples: &[Sample]) -> Vec<u64> {
    let mut counts: HashMap<TokenId, u64> = HashMap::new();
    for t in samples.iter().flat_map(|s| s.tokens.iter()) {
        *counts.entry(*t).or_insert(0) += 1;
    }
    counts.into_values().collect()
}

/// Zipf coefficient of the pooled corpus.
pub fn zipf_coefficient(samples: &[Sample]) -> Result<f64> {
    if samples.iter().all(|s| s.tokens.is_empty()) {
        return Err(Error::EmptyInput("corpus"));
    }
    zipf_fit(&token_frequencies(samples))
}
