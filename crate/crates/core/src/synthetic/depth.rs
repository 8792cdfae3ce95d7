//! Models whose next-token distribution depends only on the current depth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::AutoregressiveModel;
use crate::vocab::{TokenId, Vocab, EOS};

/// One next-token log-probability row per depth; the last row forces EOS.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthModel {
    vocab: Vocab,
    rows: Vec<Vec<f64>>,
    forced: Vec<f64>,
}

impl DepthModel {
    /// `rows[d]` is the distribution after `d` tokens. A forced-EOS row is
    /// appended after the last one given.
    pub fn new(vocab: Vocab, rows: Vec<Vec<f64>>) -> Result<Self> {
        for (d, row) in rows.iter().enumerate() {
            if row.len() != vocab.len() {
                return Err(Error::LengthMismatch {
                    left: row.len(),
                    right: vocab.len(),
                });
            }
            let total: f64 = row.iter().map(|lp| lp.exp()).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!("row {d} sums to {total}")));
            }
        }
        let mut forced = vec![f64::NEG_INFINITY; vocab.len()];
        forced[EOS as usize] = 0.0;
        Ok(Self { vocab, rows, forced })
    }

    /// A chain of `depth` steps where token `a` has probability 1−2·slip and
    /// both `b` and EOS have probability `slip`. With a small slip, exact
    /// search walks straight down the `a` chain and prunes everything else.
    pub fn greedy_chain(depth: usize, slip: f64) -> Result<Self> {
        if !(slip > 0.0 && slip < 0.5) {
            return Err(Error::InvalidConfig(format!("slip {slip} outside (0, 0.5)")));
        }
        let row = vec![slip.ln(), (1.0 - 2.0 * slip).ln(), slip.ln()];
        Self::new(Vocab::new(["a", "b"])?, vec![row; depth])
    }

    /// A complete binary tree: two equiprobable tokens until `depth`, then EOS.
    pub fn binary_tree(depth: usize) -> Result<Self> {
        let half = 0.5f64.ln();
        Self::new(
            Vocab::new(["a", "b"])?,
            vec![vec![f64::NEG_INFINITY, half, half]; depth],
        )
    }
}

impl AutoregressiveModel for DepthModel {
    type State = u32;
    type Delta = ();

    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn max_len(&self) -> usize {
        self.rows.len()
    }

    fn initial_state(&self) -> u32 {
        0
    }

    fn step(&self, state: u32, _token: TokenId) -> u32 {
        state + 1
    }

    fn log_probs(&self, state: &u32) -> Vec<f64> {
        self.rows.get(*state as usize).unwrap_or(&self.forced).clone()
    }

    fn delta(&self, _state: &u32) {}

    fn rebuild(&self, base: Option<&u32>, deltas: &[&()]) -> u32 {
        base.copied().unwrap_or(0) + deltas.len() as u32
    }
}

/// The empty output with mass `q` mixed with a uniform clean set of
/// `branching^length` sequences of exactly `length` tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthFamilyModel {
    q: f64,
    branching: usize,
    length: usize,
    model: DepthModel,
}

impl LengthFamilyModel {
    pub fn new(q: f64, branching: usize, length: usize) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidConfig(format!("q = {q} outside (0, 1)")));
        }
        if branching < 2 {
            return Err(Error::InvalidConfig("branching must be at least 2".into()));
        }
        let vocab = Vocab::new((1..=branching).map(|i| format!("w{i}")))?;
        let uniform = -(branching as f64).ln();
        let rows = (0..length)
            .map(|d| {
                let mut row = vec![uniform; branching + 1];
                if d == 0 {
                    row[0] = q.ln();
                    row[1..].fill((1.0 - q).ln() + uniform);
                } else {
                    row[0] = f64::NEG_INFINITY;
                }
                row
            })
            .collect();
        Ok(Self {
            q,
            branching,
            length,
            model: DepthModel::new(vocab, rows)?,
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn length(&self) -> usize {
        self.length
    }

    /// Whether the empty output strictly beats every clean sequence.
    pub fn empty_is_modal(&self) -> bool {
        self.length == 0 || (1.0 - self.q) / (self.branching as f64).powi(self.length as i32) < self.q
    }
}

impl AutoregressiveModel for LengthFamilyModel {
    type State = u32;
    type Delta = ();

    fn vocab(&self) -> &Vocab {
        self.model.vocab()
    }

    fn max_len(&self) -> usize {
        self.model.max_len()
    }

    fn initial_state(&self) -> u32 {
        0
    }

    fn step(&self, state: u32, token: TokenId) -> u32 {
        self.model.step(state, token)
    }

    fn log_probs(&self, state: &u32) -> Vec<f64> {
        self.model.log_probs(state)
    }

    fn delta(&self, _state: &u32) {}

    fn rebuild(&self, base: Option<&u32>, deltas: &[&()]) -> u32 {
        self.model.rebuild(base, deltas)
    }
}

/// One model per length in `lengths`, all with empty mass `q`.
pub fn length_family(q: f64, branching: usize, lengths: &[usize]) -> Result<Vec<LengthFamilyModel>> {
    lengths
        .iter()
        .map(|&l| LengthFamilyModel::new(q, branching, l))
        .collect()
}

/// A sweep of length-family models. For replicate `i` of `n` at length `L`,
/// q = q0 · L^(−decay) · spread^(i/(n−1) − 1/2), so the per-length geometric
/// mean of q is exactly q0 · L^(−decay).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    #[serde(default = "default_label")]
    pub label: String,
    pub branching: usize,
    pub lengths: Vec<usize>,
    pub q0: f64,
    #[serde(default)]
    pub decay: f64,
    #[serde(default = "one_usize")]
    pub replicates: usize,
    #[serde(default = "one_f64")]
    pub spread: f64,
}

fn default_label() -> String {
    "family".into()
}

fn one_usize() -> usize {
    1
}

fn one_f64() -> f64 {
    1.0
}

#[derive(Debug, Clone)]
pub struct FamilyMember {
    pub label: String,
    pub length: usize,
    pub replicate: usize,
    pub model: LengthFamilyModel,
}

impl FamilySpec {
    pub fn q_for(&self, length: usize, replicate: usize) -> f64 {
        let offset = if self.replicates > 1 {
            replicate as f64 / (self.replicates - 1) as f64 - 0.5
        } else {
            0.0
        };
        self.q0 * (length.max(1) as f64).powf(-self.decay) * self.spread.powf(offset)
    }

    pub fn instantiate(&self) -> Result<Vec<FamilyMember>> {
        if self.replicates == 0 || self.lengths.is_empty() {
            return Err(Error::InvalidConfig("family needs lengths and replicates".into()));
        }
        let mut out = Vec::with_capacity(self.lengths.len() * self.replicates);
        for &length in &self.lengths {
            for replicate in 0..self.replicates {
                let q = self.q_for(length, replicate);
                out.push(FamilyMember {
                    label: self.label.clone(),
                    length,
                    replicate,
                    model: LengthFamilyModel::new(q, self.branching, length)?,
                });
            }
        }
        Ok(out)
    }
}
