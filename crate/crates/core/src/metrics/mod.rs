//! Corpus statistics used to compare decoding methods: perplexity, Self-BLEU,
//! Zipf coefficient, windowed repetition entropy and loop spans.

mod bleu;
mod repetition;
mod zipf;

pub use bleu::{bleu, self_bleu, SMOOTHING_EPSILON};
pub use repetition::{
    detect_loops, extract_trajectories, h_rep, sample_h_rep, window_entropies, LoopSpan, Trajectory,
    TrajectoryPoint, DEFAULT_LOOP_THRESHOLD, DEFAULT_MIN_COUNT, DEFAULT_WINDOW,
};
pub use zipf::{token_frequencies, zipf_coefficient, zipf_fit};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{Distribution, TokenId};
use crate::error::{Error, Result};
use crate::lm::LanguageModel;

/// One generated continuation. `logprobs` are the scorer's log probabilities
/// of each token given `prompt` and the preceding tokens.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub tokens: Vec<TokenId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprobs: Option<Vec<f64>>,
    /// Log probability under the truncated, unpermuted step distribution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filtered_logprobs: Option<Vec<f64>>,
    /// Log probability under the distribution the token was drawn from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampled_logprobs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prompt: Vec<TokenId>,
    /// The model's raw next-token distribution at every step.
    #[serde(default, rename = "dists", skip_serializing_if = "Option::is_none")]
    pub step_distributions: Option<Vec<Distribution>>,
}

impl Sample {
    pub fn validate(&self, index: usize) -> Result<()> {
        let n = self.tokens.len();
        let check = |field: &'static str, len: Option<usize>| match len {
            Some(len) if len != n => Err(Error::SampleShape { sample: index, tokens: n, field, len }),
            _ => Ok(()),
        };
        check("logprobs", self.logprobs.as_ref().map(Vec::len))?;
        check("filtered_logprobs", self.filtered_logprobs.as_ref().map(Vec::len))?;
        check("sampled_logprobs", self.sampled_logprobs.as_ref().map(Vec::len))?;
        check("dists", self.step_distributions.as_ref().map(Vec::len))
    }
}

/// exp of the mean per-token negative log likelihood under `model`.
pub fn perplexity<M: LanguageModel + ?Sized>(model: &M, samples: &[Sample]) -> Result<f64> {
    let per_sample: Vec<Result<(f64, usize)>> = samples
        .par_iter()
        .enumerate()
        .map(|(s, sample)| {
            let mut context = sample.prompt.clone();
            let mut nll = 0.0;
            for (pos, &t) in sample.tokens.iter().enumerate() {
                let p = model.next_distribution(&context).prob_of(t).unwrap_or(0.0);
                if p <= 0.0 {
                    return Err(Error::ZeroProbability { sample: s, position: pos, token: t });
                }
                nll -= p.ln();
                context.push(t);
            }
            Ok((nll, sample.tokens.len()))
        })
        .collect();
    let (mut nll, mut count) = (0.0, 0usize);
    for r in per_sample {
        let (a, b) = r?;
        nll += a;
        count += b;
    }
    if count == 0 {
        return Err(Error::EmptyInput("corpus"));
    }
    Ok((nll / count as f64).exp())
}

/// Perplexity from the scores stored with each sample.
pub fn perplexity_from_logprobs(samples: &[Sample]) -> Result<f64> {
    let (mut nll, mut count) = (0.0, 0usize);
    for (i, s) in samples.iter().enumerate() {
        s.validate(i)?;
        let lp = s.logprobs.as_ref().ok_or(Error::EmptyInput("sample logprobs"))?;
        nll -= lp.iter().sum::<f64>();
        count += lp.len();
    }
    if count == 0 {
        return Err(Error::EmptyInput("corpus"));
    }
    Ok((nll / count as f64).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub window: usize,
    pub loop_threshold: f64,
    /// References per hypothesis for Self-BLEU; 0 means all other samples.
    pub ref_count: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { window: DEFAULT_WINDOW, loop_threshold: DEFAULT_LOOP_THRESHOLD, ref_count: 0 }
    }
}

/// Corpus statistics. Self-BLEU needs two samples and the Zipf fit two
/// distinct tokens; they are `None` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub samples: usize,
    pub tokens: usize,
    pub perplexity: f64,
    pub self_bleu4: Option<f64>,
    pub self_bleu5: Option<f64>,
    pub zipf: Option<f64>,
    /// Mean over samples of each sample's mean windowed entropy.
    pub h_rep: f64,
    pub loop_spans: Vec<LoopSpan>,
}

impl MetricsReport {
    /// Builds a report with an externally computed perplexity.
    pub fn with_perplexity(samples: &[Sample], perplexity: f64, opts: &ReportOptions) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("corpus"));
        }
        for (i, s) in samples.iter().enumerate() {
            s.validate(i)?;
        }
        let per_sample: Vec<Result<(f64, Vec<(usize, usize)>)>> = samples
            .par_iter()
            .map(|s| {
                Ok((
                    sample_h_rep(&s.tokens, opts.window)?,
                    detect_loops(&s.tokens, opts.window, opts.loop_threshold)?,
                ))
            })
            .collect();
        let mut h_sum = 0.0;
        let mut loop_spans = Vec::new();
        for (i, r) in per_sample.into_iter().enumerate() {
            let (h, spans) = r?;
            h_sum += h;
            loop_spans.extend(spans.into_iter().map(|(start, end)| LoopSpan { sample: i, start, end }));
        }
        let optional = |r: Result<f64>| match r {
            Ok(v) => Ok(Some(v)),
            Err(Error::InsufficientSamples { .. } | Error::UndefinedFit(_)) => Ok(None),
            Err(e) => Err(e),
        };
        Ok(MetricsReport {
            samples: samples.len(),
            tokens: samples.iter().map(|s| s.tokens.len()).sum(),
            perplexity,
            self_bleu4: optional(self_bleu(samples, 4, opts.ref_count))?,
            self_bleu5: optional(self_bleu(samples, 5, opts.ref_count))?,
            zipf: optional(zipf_coefficient(samples))?,
            h_rep: h_sum / samples.len() as f64,
            loop_spans,
        })
    }

    pub fn compute<M: LanguageModel + ?Sized>(model: &M, samples: &[Sample], opts: &ReportOptions) -> Result<Self> {
        let ppl = perplexity(model, samples)?;
        Self::with_perplexity(samples, ppl, opts)
    }
}
