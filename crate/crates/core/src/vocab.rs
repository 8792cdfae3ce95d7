use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TokenId = u32;

/// End-of-sequence is always token 0.
pub const EOS: TokenId = 0;
pub const EOS_TOKEN: &str = "</s>";

/// Integer-coded alphabet. Index 0 is always `</s>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocab {
    /// Builds a vocabulary from the non-EOS words, in order.
    pub fn new<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tokens = vec![EOS_TOKEN.to_string()];
        tokens.extend(words.into_iter().map(Into::into));
        Self::from_tokens(tokens)
    }

    /// Builds a vocabulary from the full token list, which must begin with `</s>`.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.first().map(String::as_str) != Some(EOS_TOKEN) {
            return Err(Error::MissingEos);
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::ReservedToken(t.clone()));
            }
            if index.insert(t.clone(), i as TokenId).is_some() {
                return Err(Error::DuplicateToken(t.clone()));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Always false: a vocabulary holds at least `</s>`.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    /// Encodes whitespace-separated words. `</s>` is rejected.
    pub fn encode(&self, text: &str) -> Result<Vec<TokenId>> {
        text.split_whitespace()
            .map(|w| match self.id(w) {
                Some(EOS) => Err(Error::EosInSequence),
                Some(id) => Ok(id),
                None => Err(Error::UnknownToken(w.to_string())),
            })
            .collect()
    }

    pub fn render(&self, seq: &[TokenId]) -> String {
        seq.iter()
            .map(|&id| self.token(id).unwrap_or("<?>"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Checks that every id is in range and none is EOS.
    pub fn check_sequence(&self, seq: &[TokenId]) -> Result<()> {
        for &id in seq {
            if id as usize >= self.len() {
                return Err(Error::InvalidToken { id, size: self.len() });
            }
            if id == EOS {
                return Err(Error::EosInSequence);
            }
        }
        Ok(())
    }
}

impl TryFrom<Vec<String>> for Vocab {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        Self::from_tokens(tokens)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}
