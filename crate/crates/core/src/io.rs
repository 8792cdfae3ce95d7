//! Model files and distribution files.
//!
//! Models are stored as a JSON object `{"kind", "vocab", "params"}`. Kinds:
//!
//! - `explicit`: `params.entries` is a list of `[probability, "tok tok …"]`
//!   pairs with exact rational probabilities;
//! - `mixture`: `params.epsilon` plus `clean` and `noise` components, each
//!   either `{"uniform": [sequences]}` or `{"entries": [[p, sequence], …]}`;
//! - `ngram`: the trained counts;
//! - `length_family`: `params.q`, `params.branching`, `params.length`.
//!
//! Distributions are tab-separated `probability<TAB>tokens` lines, with
//! probabilities as decimals or `p/q`. Blank lines and `#` comments are
//! skipped; an empty token field is the empty sequence.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::AutoregressiveModel;
use crate::ngram::{NgramModel, NgramParams, NgramState};
use crate::prob::{self, Prob};
use crate::synthetic::{build_mixture, ExplicitDistribution, LengthFamilyModel, MixtureSpec, TrieModel};
use crate::vocab::{TokenId, Vocab};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    kind: String,
    vocab: Vocab,
    params: Value,
}

#[derive(Debug, Serialize, Deserialize)]
struct ExplicitParams {
    entries: Vec<(String, String)>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Component {
    Uniform { uniform: Vec<String> },
    Entries { entries: Vec<(String, String)> },
}

#[derive(Debug, Deserialize)]
struct MixtureParams {
    epsilon: String,
    clean: Component,
    noise: Component,
}

#[derive(Debug, Serialize, Deserialize)]
struct FamilyParams {
    q: f64,
    branching: usize,
    length: usize,
}

fn parse_entries(vocab: &Vocab, entries: &[(String, String)]) -> Result<ExplicitDistribution> {
    let parsed = entries
        .iter()
        .map(|(p, s)| Ok((vocab.encode(s)?, prob::parse_prob(p)?)))
        .collect::<Result<Vec<_>>>()?;
    ExplicitDistribution::new(vocab.clone(), parsed)
}

fn component(vocab: &Vocab, c: &Component) -> Result<ExplicitDistribution> {
    match c {
        Component::Uniform { uniform } => {
            let seqs = uniform.iter().map(|s| vocab.encode(s)).collect::<Result<Vec<_>>>()?;
            ExplicitDistribution::uniform(vocab.clone(), seqs)
        }
        Component::Entries { entries } => parse_entries(vocab, entries),
    }
}

/// Any model that can be read from a file.
#[derive(Debug, Clone)]
pub enum LoadedModel {
    Explicit(TrieModel),
    Ngram(NgramModel),
    LengthFamily(LengthFamilyModel),
}

impl LoadedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            LoadedModel::Explicit(_) => "explicit",
            LoadedModel::Ngram(_) => "ngram",
            LoadedModel::LengthFamily(_) => "length_family",
        }
    }

    pub fn distribution(&self) -> Option<&ExplicitDistribution> {
        match self {
            LoadedModel::Explicit(m) => Some(m.distribution()),
            _ => None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        let vocab = file.vocab;
        match file.kind.as_str() {
            "explicit" => {
                let p: ExplicitParams = serde_json::from_value(file.params)?;
                Ok(Self::Explicit(TrieModel::new(parse_entries(&vocab, &p.entries)?)))
            }
            "mixture" => {
                let p: MixtureParams = serde_json::from_value(file.params)?;
                let spec = MixtureSpec {
                    clean: component(&vocab, &p.clean)?,
                    noise: component(&vocab, &p.noise)?,
                    epsilon: prob::parse_prob(&p.epsilon)?,
                };
                Ok(Self::Explicit(TrieModel::new(build_mixture(&spec)?)))
            }
            "ngram" => {
                let p: NgramParams = serde_json::from_value(file.params)?;
                Ok(Self::Ngram(NgramModel::from_params(vocab, p)?))
            }
            "length_family" => {
                let p: FamilyParams = serde_json::from_value(file.params)?;
                let m = LengthFamilyModel::new(p.q, p.branching, p.length)?;
                if m.vocab() != &vocab {
                    return Err(Error::VocabMismatch);
                }
                Ok(Self::LengthFamily(m))
            }
            other => Err(Error::Json(format!("unknown model kind {other:?}"))),
        }
    }

    /// Canonical JSON; mixtures are written as their explicit distribution.
    pub fn to_json(&self) -> Result<String> {
        let params = match self {
            LoadedModel::Explicit(m) => serde_json::to_value(ExplicitParams {
                entries: m
                    .distribution()
                    .entries()
                    .iter()
                    .map(|(s, p)| (prob::format_prob(p), m.vocab().render(s)))
                    .collect(),
            })?,
            LoadedModel::Ngram(m) => serde_json::to_value(m.params())?,
            LoadedModel::LengthFamily(m) => serde_json::to_value(FamilyParams {
                q: m.q(),
                branching: m.branching(),
                length: m.length(),
            })?,
        };
        let file = ModelFile {
            kind: self.kind().into(),
            vocab: self.vocab().clone(),
            params,
        };
        Ok(serde_json::to_string(&file)? + "\n")
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Loads a model file; `.tsv` files are read as distributions.
pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let text = read_text(path)?;
    if path.extension().is_some_and(|e| e == "tsv") {
        Ok(LoadedModel::Explicit(TrieModel::new(parse_distribution(&text)?)))
    } else {
        LoadedModel::from_json(&text)
    }
}

/// Parses a distribution file. The vocabulary is the sorted set of tokens used.
pub fn parse_distribution(text: &str) -> Result<ExplicitDistribution> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (p, seq) = line.split_once('\t').unwrap_or((line, ""));
        let p = prob::parse_prob(p).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        let words: Vec<String> = seq.split_whitespace().map(str::to_string).collect();
        rows.push((line_no, p, words));
    }
    let mut words: Vec<&String> = rows.iter().flat_map(|(_, _, w)| w).collect();
    words.sort();
    words.dedup();
    let vocab = Vocab::new(words.into_iter().cloned())?;
    let mut entries: Vec<(Vec<TokenId>, Prob)> = Vec::with_capacity(rows.len());
    for (line, p, w) in rows {
        let seq = vocab.encode(&w.join(" ")).map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        entries.push((seq, p));
    }
    ExplicitDistribution::new(vocab, entries)
}

pub fn format_distribution(dist: &ExplicitDistribution) -> String {
    dist.entries()
        .iter()
        .map(|(s, p)| format!("{}\t{}\n", prob::format_prob(p), dist.vocab().render(s)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AnyState {
    Trie(u32),
    Ngram(NgramState),
    Depth(u32),
}

#[derive(Debug, Clone)]
pub enum AnyDelta {
    Trie(u32),
    Ngram(TokenId),
    Depth,
}

impl AutoregressiveModel for LoadedModel {
    type State = AnyState;
    type Delta = AnyDelta;

    fn vocab(&self) -> &Vocab {
        match self {
            LoadedModel::Explicit(m) => m.vocab(),
            LoadedModel::Ngram(m) => m.vocab(),
            LoadedModel::LengthFamily(m) => m.vocab(),
        }
    }

    fn max_len(&self) -> usize {
        match self {
            LoadedModel::Explicit(m) => m.max_len(),
            LoadedModel::Ngram(m) => m.max_len(),
            LoadedModel::LengthFamily(m) => m.max_len(),
        }
    }

    fn initial_state(&self) -> AnyState {
        match self {
            LoadedModel::Explicit(m) => AnyState::Trie(m.initial_state()),
            LoadedModel::Ngram(m) => AnyState::Ngram(m.initial_state()),
            LoadedModel::LengthFamily(m) => AnyState::Depth(m.initial_state()),
        }
    }

    fn step(&self, state: AnyState, token: TokenId) -> AnyState {
        match (self, state) {
            (LoadedModel::Explicit(m), AnyState::Trie(s)) => AnyState::Trie(m.step(s, token)),
            (LoadedModel::Ngram(m), AnyState::Ngram(s)) => AnyState::Ngram(m.step(s, token)),
            (LoadedModel::LengthFamily(m), AnyState::Depth(s)) => AnyState::Depth(m.step(s, token)),
            _ => panic!("state from a different model"),
        }
    }

    fn log_probs(&self, state: &AnyState) -> Vec<f64> {
        match (self, state) {
            (LoadedModel::Explicit(m), AnyState::Trie(s)) => m.log_probs(s),
            (LoadedModel::Ngram(m), AnyState::Ngram(s)) => m.log_probs(s),
            (LoadedModel::LengthFamily(m), AnyState::Depth(s)) => m.log_probs(s),
            _ => panic!("state from a different model"),
        }
    }

    fn delta(&self, state: &AnyState) -> AnyDelta {
        match (self, state) {
            (LoadedModel::Explicit(m), AnyState::Trie(s)) => AnyDelta::Trie(m.delta(s)),
            (LoadedModel::Ngram(m), AnyState::Ngram(s)) => AnyDelta::Ngram(m.delta(s)),
            (LoadedModel::LengthFamily(_), AnyState::Depth(_)) => AnyDelta::Depth,
            _ => panic!("state from a different model"),
        }
    }

    fn rebuild(&self, base: Option<&AnyState>, deltas: &[&AnyDelta]) -> AnyState {
        match self {
            LoadedModel::Explicit(m) => {
                let base = base.map(|b| match b {
                    AnyState::Trie(s) => s,
                    _ => panic!("state from a different model"),
                });
                let ds: Vec<&u32> = deltas
                    .iter()
                    .map(|d| match d {
                        AnyDelta::Trie(s) => s,
                        _ => panic!("delta from a different model"),
                    })
                    .collect();
                AnyState::Trie(m.rebuild(base, &ds))
            }
            LoadedModel::Ngram(m) => {
                let base = base.map(|b| match b {
                    AnyState::Ngram(s) => s,
                    _ => panic!("state from a different model"),
                });
                let ds: Vec<&TokenId> = deltas
                    .iter()
                    .map(|d| match d {
                        AnyDelta::Ngram(t) => t,
                        _ => panic!("delta from a different model"),
                    })
                    .collect();
                AnyState::Ngram(m.rebuild(base, &ds))
            }
            LoadedModel::LengthFamily(m) => {
                let base = match base {
                    Some(AnyState::Depth(d)) => *d,
                    Some(_) => panic!("state from a different model"),
                    None => m.initial_state(),
                };
                AnyState::Depth(base + deltas.len() as u32)
            }
        }
    }

    fn state_bytes(&self, state: &AnyState) -> usize {
        match state {
            AnyState::Ngram(_) => std::mem::size_of::<AnyState>() + self.ngram_context_bytes(),
            _ => std::mem::size_of::<AnyState>(),
        }
    }
}

impl LoadedModel {
    fn ngram_context_bytes(&self) -> usize {
        match self {
            LoadedModel::Ngram(m) => (m.order() - 1) * std::mem::size_of::<TokenId>(),
            _ => 0,
        }
    }
}
