use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use mapsearch::beam::{beam_search, conditional_beam, length_constrained_beam, BeamConfig, BeamEntry, Target};
use mapsearch::io::{self, LoadedModel};
use mapsearch::model::Prompted;
use mapsearch::ngram::NgramModel;
use mapsearch::predictor::{ConstantPredictor, ExactLengthPredictor, FirstTokenPredictor, MonteCarloPredictor};
use mapsearch::prob;
use mapsearch::search::{
    enumerate, global_mode_with, length_conditional_mode_with, ModeResult, SearchBudget, SearchOptions,
};
use mapsearch::{AutoregressiveModel, Error, TokenId};
use serde_json::json;

use crate::manifest::{write_report, RunManifest};
use crate::table::{self, log2, num, show};
use crate::{Ctx, Format};

pub const ORACLE_LIMIT: usize = 10_000_000;

pub fn load(path: &Path) -> Result<LoadedModel> {
    io::load_model(path).with_context(|| format!("loading {}", path.display()))
}

#[derive(Debug, Clone)]
pub struct SearchArgs {
    pub model: PathBuf,
    pub max_nodes: usize,
    pub max_depth: Option<usize>,
    pub tie_cap: usize,
    pub prune: bool,
    pub cache: bool,
    pub allow_partial: bool,
    pub out: Option<PathBuf>,
}

impl SearchArgs {
    pub fn new(model: impl Into<PathBuf>) -> Self {
        let d = SearchOptions::default();
        Self {
            model: model.into(),
            max_nodes: d.budget.max_nodes,
            max_depth: None,
            tie_cap: d.tie_cap,
            prune: true,
            cache: true,
            allow_partial: false,
            out: None,
        }
    }

    fn options(&self) -> Result<SearchOptions> {
        Ok(SearchOptions {
            budget: SearchBudget::new(self.max_nodes, self.max_depth.unwrap_or(usize::MAX))?,
            prune: self.prune,
            cache: self.cache,
            tie_cap: self.tie_cap,
        })
    }

    fn config(&self, length: Option<usize>) -> serde_json::Value {
        json!({
            "length": length,
            "max_nodes": self.max_nodes,
            "max_depth": self.max_depth,
            "tie_cap": self.tie_cap,
            "prune": self.prune,
            "cache": self.cache,
        })
    }
}

/// Exact global mode.
pub fn mode(ctx: &Ctx, args: &SearchArgs) -> Result<String> {
    let model = load(&args.model)?;
    let manifest = RunManifest::start("mode", args.model.display().to_string(), args.config(None), ctx.seed);
    let result = global_mode_with(&model, &args.options()?);
    finish_mode(ctx, args, &model, result, manifest)
}

/// Exact mode among outputs of exactly `length` tokens.
pub fn cond_mode(ctx: &Ctx, args: &SearchArgs, length: usize) -> Result<String> {
    let model = load(&args.model)?;
    let manifest = RunManifest::start(
        "cond-mode",
        args.model.display().to_string(),
        args.config(Some(length)),
        ctx.seed,
    );
    let result = length_conditional_mode_with(&model, length, &args.options()?)?;
    finish_mode(ctx, args, &model, result, manifest)
}

const MODE_HEADER: [&str; 9] = [
    "sequence",
    "length",
    "logprob",
    "exhausted",
    "nodes_expanded",
    "prunes",
    "completes_considered",
    "full_state_rebuilds",
    "peak_cached_states",
];

fn finish_mode(
    ctx: &Ctx,
    args: &SearchArgs,
    model: &LoadedModel,
    result: ModeResult,
    manifest: RunManifest,
) -> Result<String> {
    if !result.exhausted && !args.allow_partial {
        return Err(Error::BudgetExceeded.into());
    }
    let vocab = model.vocab();
    let s = &result.stats;
    let rows: Vec<Vec<String>> = result
        .argmax
        .iter()
        .map(|h| {
            vec![
                show(vocab, &h.tokens),
                h.len().to_string(),
                num(h.logprob),
                result.exhausted.to_string(),
                s.nodes_expanded.to_string(),
                s.prunes.to_string(),
                s.completes_considered.to_string(),
                s.full_state_rebuilds.to_string(),
                s.peak_cached_states.to_string(),
            ]
        })
        .collect();
    let csv = table::csv(&MODE_HEADER, &rows)?;
    let manifest = manifest.finish();
    if let Some(out) = &args.out {
        write_report(out, &csv, &manifest)?;
    }
    Ok(match ctx.format {
        Format::Csv => csv,
        Format::Json => {
            let argmax: Vec<_> = result
                .argmax
                .iter()
                .map(|h| json!({"sequence": show(vocab, &h.tokens), "tokens": h.tokens, "logprob": h.logprob}))
                .collect();
            let body = json!({
                "argmax": argmax,
                "exhausted": result.exhausted,
                "stats": result.stats,
                "manifest": manifest,
            });
            serde_json::to_string_pretty(&body)? + "\n"
        }
        Format::Text => {
            let mut out = String::new();
            match result.best() {
                None => out.push_str("mode: none found\n"),
                Some(h) => {
                    out.push_str(&format!("mode: {}\n", show(vocab, &h.tokens)));
                    out.push_str(&format!("length: {}\n", h.len()));
                    out.push_str(&format!(
                        "logprob: {} (ln) {} (log2)\n",
                        num(h.logprob),
                        num(log2(h.logprob))
                    ));
                }
            }
            if result.argmax.len() > 1 {
                out.push_str(&format!("ties: {}\n", result.argmax.len()));
                for h in &result.argmax {
                    out.push_str(&format!("  {}\n", show(vocab, &h.tokens)));
                }
            }
            out.push_str(&format!("exhausted: {}\n", result.exhausted));
            out.push_str(&format!(
                "nodes_expanded: {} prunes: {} completes_considered: {} full_state_rebuilds: {} peak_cached_states: {}\n",
                s.nodes_expanded, s.prunes, s.completes_considered, s.full_state_rebuilds, s.peak_cached_states
            ));
            out
        }
    })
}

/// One listed sequence of the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub tokens: Vec<TokenId>,
    /// Exact rational where the model is explicit, decimal otherwise.
    pub probability: String,
    pub logprob: f64,
}

/// Every complete sequence with positive probability, most probable first,
/// equal probabilities in token order.
pub fn oracle_rows(model: &LoadedModel, max_len: Option<usize>, limit: usize) -> Result<Vec<OracleRow>> {
    if let Some(dist) = model.distribution() {
        let cap = max_len.unwrap_or(usize::MAX);
        let mut rows: Vec<_> = dist.entries().iter().filter(|(s, _)| s.len() <= cap).collect();
        rows.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
        return Ok(rows
            .into_iter()
            .map(|(s, p)| OracleRow {
                tokens: s.clone(),
                probability: prob::format_prob(p),
                logprob: prob::ln_prob(p),
            })
            .collect());
    }
    let cap = max_len.unwrap_or(model.max_len());
    Ok(enumerate(model, cap, limit)?
        .into_iter()
        .map(|h| OracleRow {
            probability: num(h.logprob.exp()),
            logprob: h.logprob,
            tokens: h.tokens,
        })
        .collect())
}

pub fn oracle(
    ctx: &Ctx,
    model_path: &Path,
    max_len: Option<usize>,
    limit: usize,
    out: Option<&Path>,
) -> Result<String> {
    let model = load(model_path)?;
    let manifest = RunManifest::start(
        "oracle",
        model_path.display().to_string(),
        json!({"max_len": max_len, "limit": limit}),
        ctx.seed,
    );
    let rows = oracle_rows(&model, max_len, limit)?;
    let vocab = model.vocab();
    let header = ["rank", "sequence", "length", "probability", "logprob"];
    let cells: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                (i + 1).to_string(),
                show(vocab, &r.tokens),
                r.tokens.len().to_string(),
                r.probability.clone(),
                num(r.logprob),
            ]
        })
        .collect();
    let csv = table::csv(&header, &cells)?;
    let manifest = manifest.finish();
    if let Some(out) = out {
        write_report(out, &csv, &manifest)?;
    }
    Ok(match ctx.format {
        Format::Csv => csv,
        Format::Text => table::text(&header, &cells),
        Format::Json => {
            let rows: Vec<_> = rows
                .iter()
                .map(
                    |r| json!({"sequence": show(vocab, &r.tokens), "probability": r.probability, "logprob": r.logprob}),
                )
                .collect();
            serde_json::to_string_pretty(&json!({"rows": rows, "manifest": manifest}))? + "\n"
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Plain,
    Constrained,
    Conditional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredictorKind {
    /// Exact remaining-length distribution by dynamic programming.
    ExactLength,
    /// Remaining-length classes estimated by rollouts.
    MonteCarlo,
    /// "Output starts with --target-token" (class 0) or not (class 1).
    FirstToken,
    /// Uniform over --classes classes; ranks exactly like plain search.
    Uniform,
}

#[derive(Debug, Clone)]
pub struct BeamArgs {
    pub model: PathBuf,
    pub method: Method,
    pub length: Option<usize>,
    pub predictor: PredictorKind,
    pub class: usize,
    pub classes: usize,
    pub target_token: Option<String>,
    pub prompt: Option<String>,
    pub beam: usize,
    pub k: usize,
    pub alpha: f64,
    pub samples: usize,
    pub out: Option<PathBuf>,
}

impl BeamArgs {
    pub fn new(model: impl Into<PathBuf>, method: Method) -> Self {
        Self {
            model: model.into(),
            method,
            length: None,
            predictor: PredictorKind::ExactLength,
            class: 0,
            classes: 2,
            target_token: None,
            prompt: None,
            beam: 5,
            k: mapsearch::beam::DEFAULT_TOP_K,
            alpha: 1.0,
            samples: 1000,
            out: None,
        }
    }
}

/// Runs the requested beam search on `model`.
pub fn run_beam<M: AutoregressiveModel>(ctx: &Ctx, model: &M, args: &BeamArgs) -> Result<Vec<BeamEntry>> {
    let cfg = BeamConfig::new(args.beam, args.k, args.alpha)?;
    let need_length = || args.length.context("this method needs --length");
    let entries = match args.method {
        Method::Plain => beam_search(model, &cfg)?,
        Method::Constrained => length_constrained_beam(model, need_length()?, &cfg)?,
        Method::Conditional => match args.predictor {
            PredictorKind::ExactLength => {
                let p = ExactLengthPredictor::new(model, model.max_len())?;
                conditional_beam(model, &p, Target::Length(need_length()?), &cfg)?
            }
            PredictorKind::MonteCarlo => {
                let p = MonteCarloPredictor::remaining_length(model, args.samples, ctx.seed)?.with_exec(ctx.exec);
                conditional_beam(model, &p, Target::Length(need_length()?), &cfg)?
            }
            PredictorKind::FirstToken => {
                let word = args
                    .target_token
                    .as_deref()
                    .context("first-token needs --target-token")?;
                let id = model.vocab().id(word).ok_or_else(|| Error::UnknownToken(word.into()))?;
                let p = FirstTokenPredictor::new(model, id)?;
                conditional_beam(model, &p, Target::Class(args.class), &cfg)?
            }
            PredictorKind::Uniform => {
                let p = ConstantPredictor::uniform(args.classes);
                conditional_beam(model, &p, Target::Class(args.class), &cfg)?
            }
        },
    };
    Ok(entries)
}

pub fn beam(ctx: &Ctx, args: &BeamArgs) -> Result<String> {
    if args.method == Method::Conditional
        && matches!(args.predictor, PredictorKind::ExactLength | PredictorKind::MonteCarlo)
        && args.length.is_none()
    {
        bail!("--method conditional with a length predictor needs --length");
    }
    let model = load(&args.model)?;
    let manifest = RunManifest::start(
        "beam",
        args.model.display().to_string(),
        json!({
            "method": format!("{:?}", args.method).to_lowercase(),
            "length": args.length,
            "predictor": format!("{:?}", args.predictor),
            "class": args.class,
            "target_token": args.target_token,
            "prompt": args.prompt,
            "beam": args.beam,
            "k": args.k,
            "alpha": args.alpha,
            "samples": args.samples,
        }),
        ctx.seed,
    );
    let prompt = match &args.prompt {
        Some(p) => model.vocab().encode(p)?,
        None => Vec::new(),
    };
    let prompted = Prompted::new(&model, prompt)?;
    let entries = run_beam(ctx, &prompted, args)?;
    let vocab = model.vocab();
    let header = ["rank", "sequence", "length", "logprob", "guidance"];
    let rows: Vec<Vec<String>> = entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            vec![
                (i + 1).to_string(),
                show(vocab, &e.hypothesis.tokens),
                e.hypothesis.len().to_string(),
                num(e.hypothesis.logprob),
                num(e.guidance),
            ]
        })
        .collect();
    let csv = table::csv(&header, &rows)?;
    let manifest = manifest.finish();
    if let Some(out) = &args.out {
        write_report(out, &csv, &manifest)?;
    }
    Ok(match ctx.format {
        Format::Csv => csv,
        Format::Text => {
            let mut out = String::new();
            for (i, e) in entries.iter().enumerate() {
                let h = &e.hypothesis;
                out.push_str(&format!(
                    "{}\t{}\t{} (ln) {} (log2)",
                    i + 1,
                    show(vocab, &h.tokens),
                    num(h.logprob),
                    num(log2(h.logprob))
                ));
                if args.method == Method::Conditional {
                    out.push_str(&format!("\tguidance {}", num(e.guidance)));
                }
                out.push('\n');
            }
            out
        }
        Format::Json => {
            let rows: Vec<_> = entries
                .iter()
                .map(|e| {
                    json!({
                        "sequence": show(vocab, &e.hypothesis.tokens),
                        "tokens": e.hypothesis.tokens,
                        "logprob": e.hypothesis.logprob,
                        "guidance": e.guidance,
                    })
                })
                .collect();
            serde_json::to_string_pretty(&json!({"hypotheses": rows, "manifest": manifest}))? + "\n"
        }
    })
}

#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub corpus: PathBuf,
    pub order: usize,
    pub alpha: f64,
    pub max_len: usize,
    pub chars: bool,
    /// Keep only the first this many corpus lines.
    pub lines: Option<usize>,
    pub out: PathBuf,
}

pub fn train_ngram(ctx: &Ctx, args: &TrainArgs) -> Result<String> {
    let text = io::read_text(&args.corpus)?;
    let text: String = match args.lines {
        Some(n) => text.lines().take(n).flat_map(|l| [l, "\n"]).collect(),
        None => text,
    };
    let model = NgramModel::train_text(&text, args.order, args.alpha, args.max_len, args.chars)?;
    let summary = json!({
        "order": model.order(),
        "vocab": model.vocab().len(),
        "contexts": model.context_count(),
        "max_len": model.max_len(),
        "out": args.out.display().to_string(),
    });
    let lm = LoadedModel::Ngram(model);
    io::write_text(&args.out, &lm.to_json()?)?;
    Ok(match ctx.format {
        Format::Json => serde_json::to_string_pretty(&summary)? + "\n",
        _ => format!(
            "trained order-{} model: {} tokens, {} contexts, max length {} -> {}\n",
            summary["order"],
            summary["vocab"],
            summary["contexts"],
            summary["max_len"],
            args.out.display()
        ),
    })
}
