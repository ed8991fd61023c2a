//! Interpolated add-alpha n-gram model.
//!
//! For a context seen at level `j` (the last `j` tokens) with `T` continuations:
//!
//! `p_j(t | ctx) = λ (c(ctx, t) + α) / (T + α V) + (1 − λ) p_{j−1}(t | shorter ctx)`
//!
//! An unseen context falls back to `p_{j−1}` unchanged. Level 0 is the add-alpha
//! unigram.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::corpus::default_prompt_ids;
use super::vocab::Vocab;
use super::LanguageModel;
use crate::dist::{normalize, Distribution, TokenId};
use crate::error::{invalid, Error, Result};

pub const MODEL_FORMAT: &str = "iqrip-ngram";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NgramConfig {
    pub order: usize,
    pub alpha: f64,
    pub lambda: f64,
}

impl Default for NgramConfig {
    fn default() -> Self {
        NgramConfig { order: 3, alpha: 0.01, lambda: 0.8 }
    }
}

impl NgramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order < 2 {
            return Err(invalid("order", format!("must be >= 2, got {}", self.order)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha", format!("must be > 0, got {}", self.alpha)));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(invalid("lambda", format!("must be in (0, 1), got {}", self.lambda)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Continuations {
    total: u64,
    /// Sorted by token id.
    next: Vec<(TokenId, u64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    config: NgramConfig,
    vocab: Vocab,
    /// `levels[j]` maps length-`j` contexts to their continuation counts.
    levels: Vec<HashMap<Vec<TokenId>, Continuations>>,
    prompt: Vec<TokenId>,
}

impl ToyModel {
    pub fn train(corpus: &[TokenId], vocab: Vocab, config: NgramConfig) -> Result<Self> {
        config.validate()?;
        if corpus.len() < config.order {
            return Err(Error::CorpusTooShort { len: corpus.len(), order: config.order });
        }
        if let Some(&bad) = corpus.iter().find(|&&t| t as usize >= vocab.len()) {
            return Err(Error::NotInSupport(bad));
        }
        let mut levels = Vec::with_capacity(config.order);
        for j in 0..config.order {
            let mut counts: HashMap<Vec<TokenId>, BTreeMap<TokenId, u64>> = HashMap::new();
            for i in j..corpus.len() {
                *counts.entry(corpus[i - j..i].to_vec()).or_default().entry(corpus[i]).or_insert(0) += 1;
            }
            levels.push(
                counts
                    .into_iter()
                    .map(|(ctx, next)| {
                        let next: Vec<(TokenId, u64)> = next.into_iter().collect();
                        (ctx, Continuations { total: next.iter().map(|x| x.1).sum(), next })
                    })
                    .collect(),
            );
        }
        let prompt = default_prompt_ids(&vocab, corpus);
        Ok(ToyModel { config, vocab, levels, prompt })
    }

    /// Tokenizes `text` on whitespace and trains on it.
    pub fn train_text(text: &str, lowercase: bool, config: NgramConfig) -> Result<Self> {
        let (vocab, ids) = Vocab::build(text, lowercase);
        Self::train(&ids, vocab, config)
    }

    pub fn config(&self) -> NgramConfig {
        self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn order(&self) -> usize {
        self.config.order
    }

    /// `DEFAULT_PROMPT` if the vocabulary covers it, else the corpus's first sentence.
    pub fn default_prompt(&self) -> &[TokenId] {
        &self.prompt
    }

    /// Number of continuations observed after the last `len` tokens of `context`.
    pub fn context_total(&self, context: &[TokenId], len: usize) -> u64 {
        if len > context.len() || len >= self.levels.len() {
            return 0;
        }
        self.levels[len].get(&context[context.len() - len..]).map_or(0, |c| c.total)
    }

    /// Unnormalized-free probability vector indexed by token id.
    pub fn next_probs(&self, context: &[TokenId]) -> Vec<f64> {
        let v = self.vocab.len();
        let NgramConfig { alpha, lambda, .. } = self.config;
        let denom = |total: u64| total as f64 + alpha * v as f64;

        let uni = &self.levels[0][&Vec::new()];
        let mut probs = vec![alpha / denom(uni.total); v];
        for &(t, c) in &uni.next {
            probs[t as usize] = (c as f64 + alpha) / denom(uni.total);
        }

        for j in 1..self.config.order.min(context.len() + 1) {
            let Some(cont) = self.levels[j].get(&context[context.len() - j..]) else { break };
            let d = denom(cont.total);
            let floor = lambda * alpha / d;
            let mut counted = cont.next.iter().peekable();
            for (t, p) in probs.iter_mut().enumerate() {
                let mut top = floor;
                if let Some(&&(id, c)) = counted.peek() {
                    if id as usize == t {
                        top = lambda * (c as f64 + alpha) / d;
                        counted.next();
                    }
                }
                *p = top + (1.0 - lambda) * *p;
            }
        }
        probs
    }

    pub fn to_file(&self) -> ModelFile {
        let levels = self
            .levels
            .iter()
            .map(|level| {
                let mut entries: Vec<ContextEntry> = level
                    .iter()
                    .map(|(ctx, c)| ContextEntry { ctx: ctx.clone(), next: c.next.clone() })
                    .collect();
                entries.sort_by(|a, b| a.ctx.cmp(&b.ctx));
                entries
            })
            .collect();
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            config: self.config,
            lowercase: self.vocab.lowercase(),
            vocab: self.vocab.words().to_vec(),
            prompt: self.prompt.clone(),
            levels,
        }
    }

    pub fn from_file(file: ModelFile) -> Result<Self> {
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!(
                "expected {MODEL_FORMAT} v{MODEL_VERSION}, found {} v{}",
                file.format, file.version
            )));
        }
        file.config.validate()?;
        if file.levels.len() != file.config.order {
            return Err(Error::ModelFormat(format!(
                "{} count levels for an order-{} model",
                file.levels.len(),
                file.config.order
            )));
        }
        let vocab = Vocab::from_words(&file.vocab, file.lowercase)?;
        let mut levels = Vec::with_capacity(file.levels.len());
        for (j, entries) in file.levels.into_iter().enumerate() {
            let mut level = HashMap::with_capacity(entries.len());
            for e in entries {
                if e.ctx.len() != j {
                    return Err(Error::ModelFormat(format!("context of length {} in level {j}", e.ctx.len())));
                }
                if e.ctx.iter().chain(e.next.iter().map(|x| &x.0)).any(|&t| t as usize >= vocab.len()) {
                    return Err(Error::ModelFormat(format!("token id out of range in level {j}")));
                }
                if !e.next.windows(2).all(|w| w[0].0 < w[1].0) {
                    return Err(Error::ModelFormat(format!("unsorted continuations in level {j}")));
                }
                let total = e.next.iter().map(|x| x.1).sum();
                level.insert(e.ctx, Continuations { total, next: e.next });
            }
            levels.push(level);
        }
        if !levels[0].contains_key(&Vec::new()) {
            return Err(Error::ModelFormat("missing unigram counts".into()));
        }
        if file.prompt.is_empty() || file.prompt.iter().any(|&t| t as usize >= vocab.len()) {
            return Err(Error::ModelFormat("missing or out-of-range default prompt".into()));
        }
        Ok(ToyModel { config: file.config, vocab, levels, prompt: file.prompt })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("model file serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s).map_err(|e| Error::ModelFormat(e.to_string()))?;
        Self::from_file(file)
    }
}

impl LanguageModel for ToyModel {
    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn next_distribution(&self, context: &[TokenId]) -> Distribution {
        let probs = self.next_probs(context);
        let ids: Vec<TokenId> = (0..probs.len() as TokenId).collect();
        normalize(&probs, &ids).expect("smoothed probabilities are positive")
    }
}

/// On-disk model: a config header followed by the count tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub config: NgramConfig,
    pub lowercase: bool,
    pub vocab: Vec<String>,
    pub prompt: Vec<TokenId>,
    pub levels: Vec<Vec<ContextEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextEntry {
    pub ctx: Vec<TokenId>,
    pub next: Vec<(TokenId, u64)>,
}
