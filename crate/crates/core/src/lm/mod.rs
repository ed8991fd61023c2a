//! Word-level n-gram model, generation loop and experiment driver.

mod corpus;
mod experiment;
mod generate;
mod ngram;
mod vocab;

pub use corpus::{default_model, default_prompt, BUNDLED_CORPUS, DEFAULT_PROMPT};
pub use experiment::{run_cell, run_experiment, Cell, CellResult};
pub use generate::{generate, generate_batch, generate_with, GenerationRecord};
pub use ngram::{ContextEntry, ModelFile, NgramConfig, ToyModel, MODEL_FORMAT, MODEL_VERSION};
pub use vocab::Vocab;

use crate::dist::{Distribution, TokenId};

/// Anything that maps a context to a next-token distribution.
pub trait LanguageModel: Sync {
    fn vocab_size(&self) -> usize;

    fn next_distribution(&self, context: &[TokenId]) -> Distribution;
}
