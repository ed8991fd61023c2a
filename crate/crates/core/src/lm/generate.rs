use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LanguageModel;
use crate::dist::{sample_token, Distribution, RngState, TokenId};
use crate::error::{Error, Result};
use crate::iqr_ip::SamplerConfig;
use crate::metrics::Sample;
use crate::sampler::{decode_step, Method, StepOutput};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub sample: Sample,
    pub config: SamplerConfig,
    pub method: Method,
}

/// Samples up to `cfg.max_len` tokens after `prompt`, seeded by `cfg.seed`.
///
/// Each step records the chosen token's log probability under the raw model
/// (`logprobs`), under the truncated distribution before permutation
/// (`filtered_logprobs`) and under the distribution it was drawn from
/// (`sampled_logprobs`).
pub fn generate<M: LanguageModel + ?Sized>(
    model: &M,
    cfg: &SamplerConfig,
    method: Method,
    prompt: &[TokenId],
    record_dists: bool,
) -> Result<GenerationRecord> {
    cfg.validate()?;
    let sample = generate_with(model, cfg, prompt, record_dists, |raw| decode_step(raw, cfg, method))?;
    Ok(GenerationRecord { sample, config: cfg.clone(), method })
}

/// Generation loop with a caller-supplied step transformation.
pub fn generate_with<M, F>(
    model: &M,
    cfg: &SamplerConfig,
    prompt: &[TokenId],
    record_dists: bool,
    mut step: F,
) -> Result<Sample>
where
    M: LanguageModel + ?Sized,
    F: FnMut(&Distribution) -> Result<StepOutput>,
{
    if prompt.is_empty() {
        return Err(Error::EmptyInput("prompt"));
    }
    let mut rng = RngState::new(cfg.seed);
    let mut context = prompt.to_vec();
    let mut tokens = Vec::with_capacity(cfg.max_len);
    let mut logprobs = Vec::with_capacity(cfg.max_len);
    let mut filtered_logprobs = Vec::with_capacity(cfg.max_len);
    let mut sampled_logprobs = Vec::with_capacity(cfg.max_len);
    let mut dists = Vec::new();

    for _ in 0..cfg.max_len {
        let raw = model.next_distribution(&context);
        let out = step(&raw)?;
        let t = sample_token(&out.sampling, &mut rng);
        let lp = |d: &Distribution| d.prob_of(t).map_or(f64::NEG_INFINITY, f64::ln);
        logprobs.push(lp(&raw));
        filtered_logprobs.push(lp(&out.filtered));
        sampled_logprobs.push(lp(&out.sampling));
        if record_dists {
            dists.push(raw);
        }
        tokens.push(t);
        context.push(t);
    }

    Ok(Sample {
        tokens,
        logprobs: Some(logprobs),
        filtered_logprobs: Some(filtered_logprobs),
        sampled_logprobs: Some(sampled_logprobs),
        prompt: prompt.to_vec(),
        step_distributions: record_dists.then_some(dists),
    })
}

/// `count` samples with seeds `cfg.seed + i`, generated in parallel and returned in order.
pub fn generate_batch<M: LanguageModel + ?Sized>(
    model: &M,
    cfg: &SamplerConfig,
    method: Method,
    prompt: &[TokenId],
    count: usize,
    record_dists: bool,
) -> Result<Vec<Sample>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let cfg = SamplerConfig { seed: cfg.seed.wrapping_add(i), ..cfg.clone() };
            generate(model, &cfg, method, prompt, record_dists).map(|r| r.sample)
        })
        .collect()
}
