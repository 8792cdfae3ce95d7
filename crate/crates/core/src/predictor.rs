//! Prefix attribute predictors: estimates of P(A(x) = a | prefix, candidate).
//!
//! A predictor scores the *completed* output's attribute given a prefix and one
//! candidate next token. Remaining-length predictors report a distribution
//! over the 24 classes of [`bucket_of`].

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{sample_from, AutoregressiveModel};
use crate::vocab::{TokenId, EOS};

pub const LENGTH_CLASSES: usize = 24;

/// Remaining-length class: 0–16 are singletons; 17–32 in four groups of four;
/// 33–64 in two groups of sixteen; 65 and above in one class.
pub fn bucket_of(remaining: usize) -> usize {
    match remaining {
        0..=16 => remaining,
        17..=32 => 17 + (remaining - 17) / 4,
        33..=64 => 21 + (remaining - 33) / 16,
        _ => 23,
    }
}

/// Inclusive bounds of a class; `None` for the open-ended top class.
pub fn bucket_range(class: usize) -> (usize, Option<usize>) {
    match class {
        0..=16 => (class, Some(class)),
        17..=20 => {
            let lo = 17 + 4 * (class - 17);
            (lo, Some(lo + 3))
        }
        21 | 22 => {
            let lo = 33 + 16 * (class - 21);
            (lo, Some(lo + 15))
        }
        _ => (65, None),
    }
}

pub trait AttributePredictor<M: AutoregressiveModel>: Send + Sync {
    fn num_classes(&self) -> usize;

    /// Log-probabilities of every class for the output completed from
    /// `prefix` extended by `candidate`. `state` is the model state after
    /// `prefix`. A candidate of EOS means the output is exactly `prefix`.
    fn class_log_probs(&self, prefix: &[TokenId], state: &M::State, candidate: TokenId) -> Vec<f64>;

    fn log_prob(&self, class: usize, prefix: &[TokenId], state: &M::State, candidate: TokenId) -> Result<f64> {
        self.check_class(class)?;
        Ok(self.class_log_probs(prefix, state, candidate)[class])
    }

    fn check_class(&self, class: usize) -> Result<()> {
        if class < self.num_classes() {
            Ok(())
        } else {
            Err(Error::PredictorDomain {
                class,
                classes: self.num_classes(),
            })
        }
    }
}

fn one_hot(classes: usize, hot: usize) -> Vec<f64> {
    let mut v = vec![f64::NEG_INFINITY; classes];
    v[hot] = 0.0;
    v
}

/// The same class distribution regardless of input.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantPredictor {
    log_probs: Vec<f64>,
}

impl ConstantPredictor {
    pub fn new(log_probs: Vec<f64>) -> Self {
        Self { log_probs }
    }

    pub fn uniform(classes: usize) -> Self {
        Self::new(vec![-(classes as f64).ln(); classes])
    }
}

impl<M: AutoregressiveModel> AttributePredictor<M> for ConstantPredictor {
    fn num_classes(&self) -> usize {
        self.log_probs.len()
    }

    fn class_log_probs(&self, _: &[TokenId], _: &M::State, _: TokenId) -> Vec<f64> {
        self.log_probs.clone()
    }
}

/// Exact remaining-length distribution computed by dynamic programming over
/// every reachable model state:
/// P(r | s) = P(EOS | s) if r = 0, else Σ_v P(v | s) · P(r − 1 | step(s, v)).
pub struct ExactLengthPredictor<'a, M: AutoregressiveModel> {
    model: &'a M,
    horizon: usize,
    table: HashMap<M::State, Vec<f64>>,
}

impl<'a, M: AutoregressiveModel> ExactLengthPredictor<'a, M> {
    pub fn new(model: &'a M, horizon: usize) -> Result<Self> {
        if model.max_len() > horizon {
            return Err(Error::HorizonTooSmall {
                horizon,
                required: model.max_len(),
            });
        }
        let mut p = Self {
            model,
            horizon,
            table: HashMap::new(),
        };
        p.fill(model.initial_state());
        Ok(p)
    }

    fn compute(&self, state: &M::State, lookup: &mut dyn FnMut(M::State) -> Vec<f64>) -> Vec<f64> {
        let lps = self.model.log_probs(state);
        let mut dist = vec![0.0; self.horizon + 1];
        dist[0] = lps[EOS as usize].exp();
        for (tok, &lp) in lps.iter().enumerate().skip(1) {
            if lp == f64::NEG_INFINITY {
                continue;
            }
            let p = lp.exp();
            let below = lookup(self.model.step(state.clone(), tok as TokenId));
            for r in 0..self.horizon {
                dist[r + 1] += p * below[r];
            }
        }
        dist
    }

    fn fill(&mut self, state: M::State) -> Vec<f64> {
        if let Some(d) = self.table.get(&state) {
            return d.clone();
        }
        let lps = self.model.log_probs(&state);
        let mut dist = vec![0.0; self.horizon + 1];
        dist[0] = lps[EOS as usize].exp();
        for (tok, &lp) in lps.iter().enumerate().skip(1) {
            if lp == f64::NEG_INFINITY {
                continue;
            }
            let p = lp.exp();
            let below = self.fill(self.model.step(state.clone(), tok as TokenId));
            for r in 0..self.horizon {
                dist[r + 1] += p * below[r];
            }
        }
        self.table.insert(state, dist.clone());
        dist
    }

    /// P(exactly r more tokens before EOS | state), r = 0..=horizon.
    pub fn remaining_distribution(&self, state: &M::State) -> Vec<f64> {
        match self.table.get(state) {
            Some(d) => d.clone(),
            None => {
                let mut lookup = |s: M::State| self.remaining_distribution(&s);
                self.compute(state, &mut lookup)
            }
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn states(&self) -> usize {
        self.table.len()
    }
}

impl<M: AutoregressiveModel> AttributePredictor<M> for ExactLengthPredictor<'_, M> {
    fn num_classes(&self) -> usize {
        LENGTH_CLASSES
    }

    fn class_log_probs(&self, _prefix: &[TokenId], state: &M::State, candidate: TokenId) -> Vec<f64> {
        if candidate == EOS {
            return one_hot(LENGTH_CLASSES, 0);
        }
        let dist = self.remaining_distribution(&self.model.step(state.clone(), candidate));
        let mut mass = [0.0f64; LENGTH_CLASSES];
        for (r, p) in dist.iter().enumerate() {
            mass[bucket_of(r)] += p;
        }
        let within: f64 = dist.iter().sum();
        mass[LENGTH_CLASSES - 1] += (1.0 - within).max(0.0);
        mass.iter().map(|m| m.ln()).collect()
    }
}

/// Estimates class frequencies by rolling out completions, with add-one
/// smoothing over classes. Each query draws from generators seeded by
/// (seed, prefix, candidate) and the rollout index, so results are identical
/// across runs and across sequential or parallel execution.
pub struct MonteCarloPredictor<'a, M, F> {
    model: &'a M,
    classes: usize,
    attribute: F,
    samples: usize,
    seed: u64,
    exec: Exec,
}

impl<'a, M, F> MonteCarloPredictor<'a, M, F>
where
    M: AutoregressiveModel,
    F: Fn(&[TokenId], usize) -> usize + Send + Sync,
{
    /// `attribute(output, fixed)` maps a completed output to its class;
    /// `fixed` is how many leading tokens were given rather than sampled.
    pub fn new(model: &'a M, classes: usize, attribute: F, samples: usize, seed: u64) -> Result<Self> {
        if samples == 0 || classes == 0 {
            return Err(Error::InvalidConfig("samples and classes must be at least 1".into()));
        }
        Ok(Self {
            model,
            classes,
            attribute,
            samples,
            seed,
            exec: Exec::Sequential,
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    fn query_seed(&self, prefix: &[TokenId], candidate: TokenId) -> u64 {
        let mut h = self.seed ^ 0x51_7c_c1_b7_27_22_0a_95;
        for &t in prefix.iter().chain(std::iter::once(&candidate)) {
            h = splitmix(h ^ u64::from(t));
        }
        splitmix(h ^ prefix.len() as u64)
    }
}

type RemainingFn = fn(&[TokenId], usize) -> usize;

impl<'a, M: AutoregressiveModel> MonteCarloPredictor<'a, M, RemainingFn> {
    /// Remaining-length classes, estimated by rollouts.
    pub fn remaining_length(model: &'a M, samples: usize, seed: u64) -> Result<Self> {
        fn remaining(out: &[TokenId], fixed: usize) -> usize {
            bucket_of(out.len() - fixed)
        }
        Self::new(model, LENGTH_CLASSES, remaining as RemainingFn, samples, seed)
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl<M, F> AttributePredictor<M> for MonteCarloPredictor<'_, M, F>
where
    M: AutoregressiveModel,
    F: Fn(&[TokenId], usize) -> usize + Send + Sync,
{
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn class_log_probs(&self, prefix: &[TokenId], state: &M::State, candidate: TokenId) -> Vec<f64> {
        let mut fixed = prefix.to_vec();
        let start = if candidate == EOS {
            None
        } else {
            fixed.push(candidate);
            Some(self.model.step(state.clone(), candidate))
        };
        let query = self.query_seed(prefix, candidate);
        let budget = self.model.max_len().saturating_sub(fixed.len());
        let classes = self.exec.map_range(self.samples, |i| {
            let cls = match &start {
                None => (self.attribute)(&fixed, fixed.len()),
                Some(s) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(query);
                    rng.set_stream(i as u64);
                    let tail = sample_from(self.model, s.clone(), &mut rng, budget);
                    let mut out = fixed.clone();
                    out.extend_from_slice(&tail.tokens);
                    (self.attribute)(&out, fixed.len())
                }
            };
            cls.min(self.classes - 1)
        });
        let mut counts = vec![1.0f64; self.classes];
        for c in classes {
            counts[c] += 1.0;
        }
        let ln_total = ((self.samples + self.classes) as f64).ln();
        counts.iter().map(|c| c.ln() - ln_total).collect()
    }
}

/// Binary attribute "the output starts with `target`": class 0 if it does,
/// class 1 otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstTokenPredictor {
    target: TokenId,
    prior: f64,
}

impl FirstTokenPredictor {
    pub fn new<M: AutoregressiveModel>(model: &M, target: TokenId) -> Result<Self> {
        model.vocab().check_sequence(&[target])?;
        let prior = model.log_probs(&model.initial_state())[target as usize];
        Ok(Self { target, prior })
    }

    pub fn target(&self) -> TokenId {
        self.target
    }

    /// ln P(x_1 = target) under the model, the attribute probability before
    /// any token is chosen.
    pub fn prior_log_prob(&self) -> f64 {
        self.prior
    }
}

impl<M: AutoregressiveModel> AttributePredictor<M> for FirstTokenPredictor {
    fn num_classes(&self) -> usize {
        2
    }

    fn class_log_probs(&self, prefix: &[TokenId], _: &M::State, candidate: TokenId) -> Vec<f64> {
        let first = prefix.first().copied().or((candidate != EOS).then_some(candidate));
        one_hot(2, usize::from(first != Some(self.target)))
    }
}
