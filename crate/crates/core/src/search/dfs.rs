use crate::model::{ranked_tokens, AutoregressiveModel, Hypothesis};
use crate::search::{ModeResult, SearchOptions, SearchStats, TIE_TOLERANCE};
use crate::vocab::{TokenId, EOS};

/// Per-node storage on the active path. With the cache enabled a node keeps
/// only its own delta until its second child is about to be expanded; the
/// full state is then rebuilt from the deltas back up to the nearest ancestor
/// holding one, and retained for the remaining children.
struct Frame<S, D> {
    delta: Option<D>,
    full: Option<S>,
}

pub(crate) struct Dfs<'m, M: AutoregressiveModel> {
    model: &'m M,
    opts: SearchOptions,
    /// Only completions of exactly this length count.
    target: Option<usize>,
    best: f64,
    argmax: Vec<Hypothesis>,
    stats: SearchStats,
    frames: Vec<Frame<M::State, M::Delta>>,
    tokens: Vec<TokenId>,
    cached_states: usize,
    cached_bytes: usize,
    aborted: bool,
    truncated: bool,
}

impl<'m, M: AutoregressiveModel> Dfs<'m, M> {
    pub(crate) fn new(model: &'m M, opts: SearchOptions, target: Option<usize>) -> Self {
        Self {
            model,
            opts,
            target,
            best: f64::NEG_INFINITY,
            argmax: Vec::new(),
            stats: SearchStats::default(),
            frames: Vec::new(),
            tokens: Vec::new(),
            cached_states: 0,
            cached_bytes: 0,
            aborted: false,
            truncated: false,
        }
    }

    pub(crate) fn run(mut self) -> ModeResult {
        let root = self.model.initial_state();
        self.expand(root, 0.0);
        ModeResult {
            argmax: self.argmax,
            exhausted: !self.aborted && !self.truncated,
            stats: self.stats,
        }
    }

    fn bound(&self) -> f64 {
        if self.opts.prune {
            self.best - TIE_TOLERANCE
        } else {
            f64::NEG_INFINITY
        }
    }

    fn consider(&mut self, logprob: f64) {
        self.stats.completes_considered += 1;
        if logprob == f64::NEG_INFINITY || logprob < self.best - TIE_TOLERANCE {
            return;
        }
        if logprob > self.best + TIE_TOLERANCE {
            self.argmax.clear();
        }
        self.best = self.best.max(logprob);
        let floor = self.best - TIE_TOLERANCE;
        self.argmax.retain(|h| h.logprob >= floor);
        let hyp = Hypothesis {
            tokens: self.tokens.clone(),
            logprob,
            complete: true,
        };
        let at = self.argmax.partition_point(|h| h.tokens < hyp.tokens);
        self.argmax.insert(at, hyp);
        self.argmax.truncate(self.opts.tie_cap.max(1));
    }

    fn hold(&mut self, states: usize, bytes: usize) {
        self.cached_states += states;
        self.cached_bytes += bytes;
        self.stats.peak_cached_states = self.stats.peak_cached_states.max(self.cached_states);
        self.stats.peak_cached_bytes = self.stats.peak_cached_bytes.max(self.cached_bytes);
    }

    fn release(&mut self, frame: &Frame<M::State, M::Delta>) {
        if let Some(d) = &frame.delta {
            self.cached_states -= 1;
            self.cached_bytes -= self.model.delta_bytes(d);
        }
        if let Some(s) = &frame.full {
            self.cached_states -= 1;
            self.cached_bytes -= self.model.state_bytes(s);
        }
    }

    /// Full state of the top frame, rebuilt from ancestor deltas if needed.
    fn top_full_state(&mut self) -> M::State {
        let top = self.frames.len() - 1;
        if self.frames[top].full.is_none() {
            let anchor = (0..top).rev().find(|&j| self.frames[j].full.is_some());
            let first = anchor.map_or(0, |j| j + 1);
            let deltas: Vec<&M::Delta> = self.frames[first..=top]
                .iter()
                .filter_map(|f| f.delta.as_ref())
                .collect();
            let base = anchor.and_then(|j| self.frames[j].full.as_ref());
            let state = self.model.rebuild(base, &deltas);
            self.stats.full_state_rebuilds += 1;
            self.hold(1, self.model.state_bytes(&state));
            self.frames[top].full = Some(state);
        }
        self.frames[top].full.clone().expect("full state present")
    }

    fn expand(&mut self, state: M::State, logprob: f64) {
        if self.stats.nodes_expanded >= self.opts.budget.max_nodes as u64 {
            self.aborted = true;
            return;
        }
        self.stats.nodes_expanded += 1;
        let depth = self.tokens.len();
        let lps = self.model.log_probs(&state);

        let (eos_allowed, may_extend) = match self.target {
            None => (true, true),
            Some(len) => (depth == len, depth < len),
        };
        if eos_allowed {
            self.consider(logprob + lps[EOS as usize]);
        }
        if !may_extend {
            return;
        }
        let children: Vec<TokenId> = ranked_tokens(&lps).into_iter().filter(|&t| t != EOS).collect();
        if children.is_empty() {
            return;
        }
        if depth >= self.opts.budget.max_depth {
            self.truncated = true;
            return;
        }

        let mut frame = Frame {
            delta: None,
            full: None,
        };
        let mut working = None;
        if self.opts.cache {
            if depth > 0 {
                let d = self.model.delta(&state);
                self.hold(1, self.model.delta_bytes(&d));
                frame.delta = Some(d);
            }
            working = Some(state);
        } else {
            self.hold(1, self.model.state_bytes(&state));
            frame.full = Some(state);
        }
        self.frames.push(frame);

        for (i, &tok) in children.iter().enumerate() {
            if self.aborted {
                break;
            }
            let child_lp = logprob + lps[tok as usize];
            if child_lp < self.bound() {
                self.stats.prunes += (children.len() - i) as u64;
                break;
            }
            debug_assert!(child_lp <= logprob + 1e-12, "extension raised log-probability");
            let parent = match working.take() {
                Some(s) => s,
                None => self.top_full_state(),
            };
            let child = self.model.step(parent, tok);
            self.tokens.push(tok);
            self.expand(child, child_lp);
            self.tokens.pop();
        }

        let frame = self.frames.pop().expect("frame pushed above");
        self.release(&frame);
    }
}
