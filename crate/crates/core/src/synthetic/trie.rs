use num_traits::Zero;

use crate::model::AutoregressiveModel;
use crate::prob::{self, Prob};
use crate::synthetic::distribution::ExplicitDistribution;
use crate::vocab::{TokenId, Vocab, EOS};

const NO_CHILD: u32 = u32::MAX;

/// Trie state: a node index, or [`TrieModel::DEAD`] for prefixes outside the
/// support.
pub type TrieState = u32;

#[derive(Debug, Clone)]
struct Node {
    children: Vec<u32>,
    log_probs: Vec<f64>,
}

/// Exact autoregressive form of an [`ExplicitDistribution`]:
/// P(x_t | x_<t) = mass(prefix·x_t) / mass(prefix) and
/// P(EOS | x) = P(x) / mass(x).
#[derive(Debug, Clone)]
pub struct TrieModel {
    dist: ExplicitDistribution,
    nodes: Vec<Node>,
    max_len: usize,
    dead: Vec<f64>,
}

impl TrieModel {
    /// State reached through a zero-probability token. Its only continuation is EOS.
    pub const DEAD: TrieState = u32::MAX;

    pub fn new(dist: ExplicitDistribution) -> Self {
        let v = dist.vocab().len();
        let mut children: Vec<Vec<u32>> = vec![vec![NO_CHILD; v]];
        let mut mass: Vec<Prob> = vec![Prob::zero()];
        let mut end: Vec<Prob> = vec![Prob::zero()];
        for (seq, p) in dist.entries() {
            let mut node = 0usize;
            mass[0] += p;
            for &tok in seq {
                let next = children[node][tok as usize];
                node = if next == NO_CHILD {
                    let id = children.len();
                    children.push(vec![NO_CHILD; v]);
                    mass.push(Prob::zero());
                    end.push(Prob::zero());
                    children[node][tok as usize] = id as u32;
                    id
                } else {
                    next as usize
                };
                mass[node] += p;
            }
            end[node] += p;
        }
        let nodes = children
            .into_iter()
            .enumerate()
            .map(|(i, kids)| {
                let ln_ratio = |num: &Prob| prob::ln_prob(&(num / &mass[i]));
                let mut log_probs = vec![f64::NEG_INFINITY; v];
                log_probs[EOS as usize] = ln_ratio(&end[i]);
                for (tok, &child) in kids.iter().enumerate() {
                    if child != NO_CHILD {
                        log_probs[tok] = ln_ratio(&mass[child as usize]);
                    }
                }
                Node {
                    children: kids,
                    log_probs,
                }
            })
            .collect();
        let mut dead = vec![f64::NEG_INFINITY; v];
        dead[EOS as usize] = 0.0;
        Self {
            max_len: dist.max_len(),
            dist,
            nodes,
            dead,
        }
    }

    pub fn distribution(&self) -> &ExplicitDistribution {
        &self.dist
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

impl AutoregressiveModel for TrieModel {
    type State = TrieState;
    type Delta = TrieState;

    fn vocab(&self) -> &Vocab {
        self.dist.vocab()
    }

    fn max_len(&self) -> usize {
        self.max_len
    }

    fn initial_state(&self) -> TrieState {
        0
    }

    fn step(&self, state: TrieState, token: TokenId) -> TrieState {
        if state == Self::DEAD {
            return Self::DEAD;
        }
        match self.nodes[state as usize].children.get(token as usize) {
            Some(&c) if c != NO_CHILD => c,
            _ => Self::DEAD,
        }
    }

    fn log_probs(&self, state: &TrieState) -> Vec<f64> {
        if *state == Self::DEAD {
            return self.dead.clone();
        }
        self.nodes[*state as usize].log_probs.clone()
    }

    fn delta(&self, state: &TrieState) -> TrieState {
        *state
    }

    fn rebuild(&self, base: Option<&TrieState>, deltas: &[&TrieState]) -> TrieState {
        deltas.last().map(|d| **d).or(base.copied()).unwrap_or(0)
    }
}
