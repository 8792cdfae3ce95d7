//! End-to-end acceptance checks. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{anyhow, ensure, Result};
use mapsearch::beam::{beam_search, conditional_beam, length_constrained_beam, BeamConfig, BeamEntry, Target};
use mapsearch::io::{load_model, LoadedModel};
use mapsearch::model::sample_from;
use mapsearch::predictor::{bucket_of, ConstantPredictor, ExactLengthPredictor, LENGTH_CLASSES};
use mapsearch::prob::{self, ratio, Prob};
use mapsearch::search::{enumerate, global_mode_with, length_conditional_mode_with, SearchBudget, SearchOptions};
use mapsearch::synthetic::{
    count_typos, critical_epsilon, numbered_variants, random_distribution, typo_channel, DepthModel,
    ExplicitDistribution, TrieModel,
};
use mapsearch::{sequence_log_prob, AutoregressiveModel, Error, TokenId, Vocab};
use mapsearch_cli::commands::{train_ngram, TrainArgs};
use mapsearch_cli::figures;
use mapsearch_cli::winrate::{self, Setting, WinrateArgs};
use mapsearch_cli::Ctx;
use num_bigint::BigUint;
use num_traits::One;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

fn corpus(count: u64) -> Vec<ExplicitDistribution> {
    (0..count)
        .map(|seed| random_distribution(&mut ChaCha8Rng::seed_from_u64(seed), 4, 5, 8))
        .collect()
}

/// Best exact probability among sequences passing `keep`, with every
/// sequence attaining it.
fn brute_argmax(dist: &ExplicitDistribution, keep: impl Fn(&[TokenId]) -> bool) -> Option<(Prob, Vec<Vec<TokenId>>)> {
    let best = dist
        .entries()
        .iter()
        .filter(|(s, _)| keep(s))
        .map(|(_, p)| p)
        .max()?
        .clone();
    let seqs = dist
        .entries()
        .iter()
        .filter(|(s, p)| keep(s) && **p == best)
        .map(|(s, _)| s.clone())
        .collect();
    Some((best, seqs))
}

fn opts(prune: bool) -> SearchOptions {
    SearchOptions {
        prune,
        tie_cap: 64,
        ..SearchOptions::default()
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Result<String>) -> Result<String> {
    let t = Instant::now();
    let note = f()?;
    let took = t.elapsed();
    ensure!(took < limit, "took {took:?}, limit {limit:?}");
    Ok(format!("{note} in {took:.2?}"))
}

fn noise_threshold() -> Result<String> {
    let big = BigUint::one() << 100;
    let t = Instant::now();
    let small = critical_epsilon(20u32, 10u32)?;
    let huge = critical_epsilon(big, 10u32)?;
    let took = t.elapsed();
    ensure!(small.exact == ratio(1, 3), "got {}", small.exact);
    ensure!((huge.value / 7.9e-30 - 1.0).abs() < 0.01, "got {}", huge.value);
    ensure!(took < Duration::from_millis(1), "took {took:?}");
    Ok(format!("1/3 exactly, {:.3e} for N=2^100, in {took:.2?}", huge.value))
}

fn global_mode_oracle() -> Result<String> {
    timed(Duration::from_secs(10), || {
        let dists = corpus(60);
        for (i, dist) in dists.iter().enumerate() {
            let (best, seqs) = brute_argmax(dist, |_| true).ok_or_else(|| anyhow!("empty distribution"))?;
            let model = TrieModel::new(dist.clone());
            let pruned = global_mode_with(&model, &opts(true));
            let full = global_mode_with(&model, &opts(false));
            ensure!(pruned.exhausted && full.exhausted, "search not exhausted on #{i}");
            ensure!(
                (pruned.logprob() - prob::ln_prob(&best)).abs() <= 1e-12,
                "log-prob off on #{i}"
            );
            let got: Vec<_> = pruned.argmax.iter().map(|h| h.tokens.clone()).collect();
            ensure!(got == seqs, "argmax differs on #{i}");
            ensure!(pruned.argmax == full.argmax, "pruning changed the result on #{i}");
            ensure!(
                pruned.stats.nodes_expanded <= full.stats.nodes_expanded,
                "pruning expanded more nodes on #{i}"
            );
        }
        Ok(format!("{} distributions", dists.len()))
    })
}

fn conditional_mode_oracle() -> Result<String> {
    timed(Duration::from_secs(30), || {
        let dists = corpus(60);
        let mut infeasible = 0;
        for (i, dist) in dists.iter().enumerate() {
            let model = TrieModel::new(dist.clone());
            for len in 0..=5 {
                match (
                    brute_argmax(dist, |s| s.len() == len),
                    length_conditional_mode_with(&model, len, &opts(true)),
                ) {
                    (None, Err(Error::NoFeasibleSequence { .. })) => infeasible += 1,
                    (Some((best, seqs)), Ok(r)) => {
                        ensure!(
                            (r.logprob() - prob::ln_prob(&best)).abs() <= 1e-12,
                            "#{i} L={len}: log-prob off"
                        );
                        let got: Vec<_> = r.argmax.iter().map(|h| h.tokens.clone()).collect();
                        ensure!(got == seqs, "#{i} L={len}: argmax differs");
                    }
                    (o, g) => return Err(anyhow!("#{i} L={len}: oracle {o:?} vs search {g:?}")),
                }
            }
        }
        Ok(format!(
            "{} distributions x 6 lengths, {infeasible} infeasible",
            dists.len()
        ))
    })
}

fn mode_flip() -> Result<String> {
    let mut notes = Vec::new();
    for (file, noise, clean) in [
        ("mixture_eps030.json", 0, 20),
        ("mixture_eps036.json", 10, 0),
        ("mixture_eps1_3.json", 10, 20),
    ] {
        let LoadedModel::Explicit(m) = load_model(&assets().join(file))? else {
            return Err(anyhow!("{file} is not an explicit model"));
        };
        let is_noise = |h: &mapsearch::Hypothesis| m.vocab().render(&h.tokens).starts_with("zz");
        let r = global_mode_with(&m, &opts(true));
        ensure!(r.exhausted, "{file}: search not exhausted");
        let dfs_noise = r.argmax.iter().filter(|h| is_noise(h)).count();
        ensure!(
            (dfs_noise, r.argmax.len() - dfs_noise) == (noise, clean),
            "{file}: DFS found {dfs_noise} noise of {}",
            r.argmax.len()
        );
        let all = enumerate(&m, m.max_len(), 1_000_000)?;
        let top: Vec<_> = all.iter().take_while(|h| h.logprob >= all[0].logprob - 1e-12).collect();
        let enum_noise = top.iter().filter(|h| is_noise(h)).count();
        ensure!(
            (enum_noise, top.len() - enum_noise) == (noise, clean),
            "{file}: enumeration found {enum_noise} noise of {}",
            top.len()
        );
        notes.push(format!("{file}: {}-way", top.len()));
    }
    Ok(notes.join(", "))
}

fn typo_channel_check() -> Result<String> {
    let words = ["the", "cat", "sat", "on", "mats"];
    let vocab = Vocab::new(words)?;
    let clean = ExplicitDistribution::uniform(vocab.clone(), vec![vocab.encode("the cat sat on mats")?])?;
    let variants = numbered_variants(words, 3);
    let noisy = typo_channel(&clean, &ratio(1, 5), &variants)?;
    let model = TrieModel::new(noisy);
    let r = global_mode_with(&model, &SearchOptions::default());
    let best = r.best().ok_or_else(|| anyhow!("no mode"))?;
    ensure!(
        count_typos(model.vocab(), &best.tokens, &variants) == 0,
        "mode has typos"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = 100_000;
    let total: usize = (0..n)
        .map(|_| {
            count_typos(
                model.vocab(),
                &sample_from(&model, model.initial_state(), &mut rng, 10).tokens,
                &variants,
            )
        })
        .sum();
    let mean = total as f64 / n as f64;
    ensure!((mean - 1.0).abs() <= 0.05, "mean errors {mean}");
    Ok(format!("mode error-free, mean sampled errors {mean:.4}"))
}

fn figure_pattern() -> Result<String> {
    let specs = figures::read_specs(&assets().join("length_family_spec.json"))?;
    let rows = figures::report(&Ctx::default(), &specs, SearchBudget::default())?;
    ensure!(rows.len() >= 2, "too few rows");
    ensure!(
        rows.iter().all(|r| r.frac_exhausted == 1.0),
        "some searches hit the budget"
    );
    let rate: Vec<f64> = rows.iter().map(|r| r.frac_empty_mode).collect();
    let geo: Vec<f64> = rows.iter().map(|r| r.geomean_p_empty).collect();
    ensure!(
        rate.windows(2).all(|w| w[0] <= w[1]),
        "empty-mode rate not monotone: {rate:?}"
    );
    ensure!(
        *rate.last().unwrap() == 1.0,
        "empty-mode rate ends at {}",
        rate.last().unwrap()
    );
    ensure!(
        geo.windows(2).all(|w| w[0] > w[1]),
        "geomean not strictly decreasing: {geo:?}"
    );
    Ok(format!(
        "rate {:.3} -> 1, geomean P(empty) {:.2e} -> {:.2e} over {} bins",
        rate[0],
        geo[0],
        geo.last().unwrap(),
        rows.len()
    ))
}

fn key(entries: &[BeamEntry]) -> Vec<(Vec<TokenId>, u64)> {
    entries
        .iter()
        .map(|e| (e.hypothesis.tokens.clone(), e.hypothesis.logprob.to_bits()))
        .collect()
}

fn conditional_beam_check() -> Result<String> {
    let mut models: Vec<TrieModel> = corpus(60).into_iter().map(TrieModel::new).collect();
    for file in ["demo_distribution.tsv", "mixture_eps030.json", "mixture_eps036.json"] {
        if let LoadedModel::Explicit(m) = load_model(&assets().join(file))? {
            models.push(m);
        }
    }
    let constant = ConstantPredictor::new(vec![-0.2, -1.1, -3.0]);
    let mut checked = 0;
    for (i, model) in models.iter().enumerate() {
        let dist = model.distribution();
        let exact = ExactLengthPredictor::new(model, model.max_len())?;
        let cfg = BeamConfig::new(dist.len(), model.vocab().len(), 1.0)?;
        for len in 0..=model.max_len() {
            let out = conditional_beam(model, &exact, Target::Length(len), &cfg);
            match (brute_argmax(dist, |s| s.len() == len), out) {
                (None, Err(Error::NoFeasibleSequence { .. })) => {}
                (Some((best, seqs)), Ok(out)) => {
                    let top = &out[0].hypothesis;
                    ensure!(
                        (top.logprob - prob::ln_prob(&best)).abs() <= 1e-12,
                        "model {i} L={len}: not the mode"
                    );
                    ensure!(seqs.contains(&top.tokens), "model {i} L={len}: wrong sequence");
                    checked += 1;
                }
                (o, g) => return Err(anyhow!("model {i} L={len}: oracle {o:?} vs beam {g:?}")),
            }
        }
        for beam in [1, 3] {
            let cfg = BeamConfig::new(beam, model.vocab().len(), 1.0)?;
            let plain = beam_search(model, &cfg)?;
            for class in 0..3 {
                let guided = conditional_beam(model, &constant, Target::Class(class), &cfg)?;
                ensure!(
                    key(&plain) == key(&guided),
                    "model {i} B={beam}: constant guidance changed output"
                );
            }
        }
    }
    Ok(format!(
        "{checked} conditional modes on {} models, constant guidance = plain",
        models.len()
    ))
}

/// Arbitrary values in [−10, 0] depending on the query.
struct Adversary;

impl<M: AutoregressiveModel> mapsearch::predictor::AttributePredictor<M> for Adversary {
    fn num_classes(&self) -> usize {
        LENGTH_CLASSES
    }

    fn class_log_probs(&self, prefix: &[TokenId], _: &M::State, candidate: TokenId) -> Vec<f64> {
        let mut h = 0x9e37_79b9_7f4a_7c15u64;
        for &t in prefix.iter().chain([&candidate]) {
            h = (h ^ u64::from(t)).wrapping_mul(0x100_0000_01b3).rotate_left(17);
        }
        (0..LENGTH_CLASSES)
            .map(|c| -10.0 * ((h.rotate_left(c as u32 * 5) % 10_007) as f64 / 10_006.0))
            .collect()
    }
}

fn telescoping() -> Result<String> {
    let bigram = load_model(&assets().join("bigram.json"))?;
    let mut entries = 0;
    let mut check = |model: &dyn Fn(&[TokenId]) -> mapsearch::Result<f64>, out: Vec<BeamEntry>| -> Result<()> {
        for e in out {
            let lp = model(&e.hypothesis.tokens)?;
            ensure!(
                (e.hypothesis.logprob - lp).abs() <= 1e-12,
                "stored {} vs {lp}",
                e.hypothesis.logprob
            );
            entries += 1;
        }
        Ok(())
    };
    for alpha in [0.5, 1.0, 4.0] {
        for beam in [1, 5, 20] {
            let cfg = BeamConfig::new(beam, 100, alpha)?;
            for target in [
                Target::Class(0),
                Target::Class(7),
                Target::Length(6),
                Target::Length(11),
            ] {
                let out = conditional_beam(&bigram, &Adversary, target, &cfg)?;
                check(&|t: &[TokenId]| sequence_log_prob(&bigram, t, true), out)?;
            }
        }
    }
    for dist in corpus(30) {
        let model = TrieModel::new(dist);
        let cfg = BeamConfig::new(4, 4, 1.0)?;
        let out = conditional_beam(&model, &Adversary, Target::Class(2), &cfg)?;
        check(&|t: &[TokenId]| sequence_log_prob(&model, t, true), out)?;
    }
    Ok(format!("{entries} surviving entries"))
}

fn winrate_harness() -> Result<String> {
    let ctx = Ctx::default();
    let lengths: Vec<Setting> = (4..=12).map(Setting::Length).collect();
    let args = WinrateArgs::new(assets().join("bigram.json"), lengths.clone(), vec![5, 20]);
    let rows = winrate::table(&ctx, &args)?;
    ensure!(rows.len() == 18, "{} rows", rows.len());
    for r in &rows {
        let sum = r.frac_a + r.frac_tie + r.frac_b;
        ensure!(
            (sum - 1.0).abs() < 1e-12,
            "row L={} B={} sums to {sum}",
            r.length_ratio_or_l,
            r.beam_size
        );
    }

    let dir = tempfile::tempdir()?;
    let sub = dir.path().join("sub.json");
    train_ngram(
        &ctx,
        &TrainArgs {
            corpus: assets().join("corpus.txt"),
            order: 2,
            alpha: 0.0,
            max_len: 12,
            chars: false,
            lines: Some(3),
            out: sub.clone(),
        },
    )?;
    let model = load_model(&sub)?;
    let support = enumerate(&model, model.max_len(), 1_000_000)?.len();
    ensure!(support <= 64, "sub-model support {support} exceeds the beam");
    let wide = winrate::table(&ctx, &WinrateArgs::new(&sub, lengths, vec![64]))?;
    ensure!(wide.iter().all(|r| r.frac_tie == 1.0), "B=64 rows not all ties");
    let exact = ExactLengthPredictor::new(&model, model.max_len())?;
    let cfg = BeamConfig::new(64, 100, 1.0)?;
    for len in 4..=12 {
        let a = conditional_beam(&model, &exact, Target::Length(len), &cfg);
        let b = length_constrained_beam(&model, len, &cfg);
        match (a, b) {
            (Ok(a), Ok(b)) => ensure!(
                a[0].hypothesis.tokens == b[0].hypothesis.tokens,
                "L={len}: outputs differ"
            ),
            (Err(Error::NoFeasibleSequence { .. }), Err(Error::NoFeasibleSequence { .. })) => {}
            (a, b) => return Err(anyhow!("L={len}: {a:?} vs {b:?}")),
        }
    }
    Ok(format!(
        "18 rows sum to 1; B=64 all ties on a {support}-sequence sub-model"
    ))
}

fn cache_heuristic() -> Result<String> {
    let chain = DepthModel::greedy_chain(100, 0.01)?;
    let r = global_mode_with(&chain, &SearchOptions::default());
    ensure!(
        r.exhausted && r.best().map(|h| h.len()) == Some(100),
        "chain mode wrong"
    );
    ensure!(r.stats.peak_cached_states <= 105, "peak {}", r.stats.peak_cached_states);
    ensure!(
        r.stats.full_state_rebuilds == 0,
        "rebuilds {}",
        r.stats.full_state_rebuilds
    );

    let tree = DepthModel::binary_tree(10)?;
    let mut rebuilds = 0;
    for prune in [false, true] {
        let run = |cache| {
            global_mode_with(
                &tree,
                &SearchOptions {
                    prune,
                    cache,
                    ..SearchOptions::default()
                },
            )
        };
        let (on, off) = (run(true), run(false));
        ensure!(on.argmax == off.argmax, "cache changed the result");
        ensure!(
            on.stats.nodes_expanded == off.stats.nodes_expanded,
            "cache changed the search"
        );
        if !prune {
            // all 1023 internal nodes expand their second child
            ensure!(on.stats.nodes_expanded == 2047, "expanded {}", on.stats.nodes_expanded);
            ensure!(
                on.stats.full_state_rebuilds == 1023,
                "rebuilds {}",
                on.stats.full_state_rebuilds
            );
            rebuilds = on.stats.full_state_rebuilds;
        }
    }
    Ok(format!(
        "chain peak {} states, 0 rebuilds; tree {rebuilds} rebuilds for 1023 second children",
        r.stats.peak_cached_states
    ))
}

fn bucketing() -> Result<String> {
    let table: Vec<(usize, usize)> = (0..=16)
        .map(|r| (r, r))
        .chain([(17, 20), (21, 24), (25, 28), (29, 32), (33, 48), (49, 64), (65, 200)])
        .collect();
    ensure!(
        table.len() == LENGTH_CLASSES && LENGTH_CLASSES == 24,
        "{LENGTH_CLASSES} classes"
    );
    for (class, &(lo, hi)) in table.iter().enumerate() {
        for r in lo..=hi {
            ensure!(bucket_of(r) == class, "bucket_of({r}) = {}, want {class}", bucket_of(r));
        }
    }
    let seen: std::collections::BTreeSet<usize> = (0..=200).map(bucket_of).collect();
    ensure!(seen.len() == 24, "only {} classes reached", seen.len());
    ensure!((0..200).all(|r| bucket_of(r) <= bucket_of(r + 1)), "not monotone");
    ensure!(bucket_of(usize::MAX) == 23, "not total");
    Ok("24 classes on 0..=200".into())
}

type Check = fn() -> Result<String>;

fn main() {
    let criteria: [(&str, Check); 11] = [
        ("noise threshold", noise_threshold),
        ("global mode oracle", global_mode_oracle),
        ("length-conditional mode oracle", conditional_mode_oracle),
        ("mode flip at threshold", mode_flip),
        ("typo channel", typo_channel_check),
        ("empty-mode figures pattern", figure_pattern),
        ("conditional beam correctness", conditional_beam_check),
        ("telescoping scores", telescoping),
        ("winrate harness", winrate_harness),
        ("cache heuristic", cache_heuristic),
        ("bucketing", bucketing),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err(anyhow!("panicked")));
        match outcome {
            Ok(note) => println!("criterion {:>2} PASS  {name}: {note}", i + 1),
            Err(e) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {e:#}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
