use super::ngram::{NgramConfig, ToyModel};
use super::vocab::Vocab;
use crate::dist::TokenId;
use crate::error::Result;

/// Grammar-generated prose with a recurring refrain and a public-domain poem.
pub const BUNDLED_CORPUS: &str = include_str!("../../data/corpus.txt");

pub const DEFAULT_PROMPT: &str = "she walks in beauty";

/// Trigram, alpha 0.01, lambda 0.8, lowercased, on the bundled corpus.
pub fn default_model() -> Result<ToyModel> {
    ToyModel::train_text(BUNDLED_CORPUS, true, NgramConfig::default())
}

fn ends_sentence(word: &str) -> bool {
    word.ends_with(['.', '!', '?'])
}

/// `DEFAULT_PROMPT` when every word is known, otherwise the first sentence of `corpus`.
pub fn default_prompt(vocab: &Vocab, corpus: &str) -> Result<Vec<TokenId>> {
    if let Ok(ids) = vocab.encode(DEFAULT_PROMPT) {
        return Ok(ids);
    }
    let mut words = Vec::new();
    for w in corpus.split_whitespace() {
        words.push(w);
        if ends_sentence(w) {
            break;
        }
    }
    vocab.encode(&words.join(" "))
}

/// Same rule on an already encoded corpus.
pub(crate) fn default_prompt_ids(vocab: &Vocab, corpus: &[TokenId]) -> Vec<TokenId> {
    if let Ok(ids) = vocab.encode(DEFAULT_PROMPT) {
        return ids;
    }
    let end = corpus
        .iter()
        .position(|&t| vocab.word(t).is_some_and(ends_sentence))
        .map_or(corpus.len(), |i| i + 1);
    corpus[..end].to_vec()
}
