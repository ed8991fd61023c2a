use std::collections::HashMap;

use crate::dist::TokenId;
use crate::error::{Error, Result};

/// Word table. Ids are assigned in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, TokenId>,
    lowercase: bool,
}

impl Vocab {
    pub fn from_words<S: AsRef<str>>(words: &[S], lowercase: bool) -> Result<Self> {
        let mut v = Vocab { words: Vec::new(), index: HashMap::new(), lowercase };
        for w in words {
            let w = v.fold(w.as_ref());
            if v.index.contains_key(&w) {
                return Err(Error::ModelFormat(format!("duplicate vocabulary entry {w:?}")));
            }
            v.insert(w);
        }
        Ok(v)
    }

    /// Whitespace-tokenizes `text`, returning the vocabulary and the encoded corpus.
    pub fn build(text: &str, lowercase: bool) -> (Self, Vec<TokenId>) {
        let mut v = Vocab { words: Vec::new(), index: HashMap::new(), lowercase };
        let ids = text
            .split_whitespace()
            .map(|w| {
                let w = v.fold(w);
                match v.index.get(&w) {
                    Some(&id) => id,
                    None => v.insert(w),
                }
            })
            .collect();
        (v, ids)
    }

    fn fold(&self, w: &str) -> String {
        if self.lowercase {
            w.to_lowercase()
        } else {
            w.to_string()
        }
    }

    fn insert(&mut self, w: String) -> TokenId {
        let id = self.words.len() as TokenId;
        self.index.insert(w.clone(), id);
        self.words.push(w);
        id
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn lowercase(&self) -> bool {
        self.lowercase
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, word: &str) -> Option<TokenId> {
        self.index.get(&self.fold(word)).copied()
    }

    pub fn word(&self, id: TokenId) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn encode(&self, text: &str) -> Result<Vec<TokenId>> {
        text.split_whitespace().map(|w| self.id(w).ok_or_else(|| Error::UnknownWord(w.to_string()))).collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter().map(|&id| self.word(id).unwrap_or("<unk>")).collect::<Vec<_>>().join(" ")
    }
}
