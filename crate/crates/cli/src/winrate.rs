//! Paired comparison of length-conditional and length-constrained beam
//! search over a set of inputs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mapsearch::beam::{
    conditional_beam, length_constrained_beam, winrate_scores, BeamConfig, BeamEntry, Target, Winrate, EXPERIMENT_TOP_K,
};
use mapsearch::io::{self, LoadedModel};
use mapsearch::model::Prompted;
use mapsearch::predictor::{AttributePredictor, ExactLengthPredictor, MonteCarloPredictor};
use mapsearch::{AutoregressiveModel, Error, TokenId};
use serde::Serialize;
use serde_json::json;

use crate::commands::{load, PredictorKind};
use crate::manifest::{write_report, RunManifest};
use crate::table::{self, num};
use crate::{Ctx, Format};

pub const METHOD_A: &str = "conditional";
pub const METHOD_B: &str = "constrained";

/// Target lengths: fixed, or a ratio of each input's reference length.
#[derive(Debug, Clone, PartialEq)]
pub enum Setting {
    Length(usize),
    Ratio(f64),
}

impl Setting {
    fn label(&self) -> String {
        match self {
            Setting::Length(l) => l.to_string(),
            Setting::Ratio(r) => num(*r),
        }
    }

    fn target(&self, reference: Option<usize>) -> usize {
        match self {
            Setting::Length(l) => *l,
            Setting::Ratio(r) => (r * reference.unwrap_or(0) as f64).round().max(0.0) as usize,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WinrateArgs {
    pub model: PathBuf,
    /// Prompts, one per line; a single empty prompt when absent.
    pub inputs: Option<PathBuf>,
    /// Reference lengths, one per input; required for ratio settings.
    pub references: Option<PathBuf>,
    pub settings: Vec<Setting>,
    pub beams: Vec<usize>,
    pub k: usize,
    pub alpha: f64,
    pub predictor: PredictorKind,
    pub samples: usize,
    pub out: Option<PathBuf>,
}

impl WinrateArgs {
    pub fn new(model: impl Into<PathBuf>, settings: Vec<Setting>, beams: Vec<usize>) -> Self {
        Self {
            model: model.into(),
            inputs: None,
            references: None,
            settings,
            beams,
            k: EXPERIMENT_TOP_K,
            alpha: 1.0,
            predictor: PredictorKind::ExactLength,
            samples: 1000,
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WinrateRow {
    pub length_ratio_or_l: String,
    pub method_a: String,
    pub method_b: String,
    pub frac_a: f64,
    pub frac_tie: f64,
    pub frac_b: f64,
    pub beam_size: usize,
    pub k: usize,
    pub alpha: f64,
}

pub const HEADER: [&str; 9] = [
    "length_ratio_or_L",
    "method_a",
    "method_b",
    "frac_a",
    "frac_tie",
    "frac_b",
    "beam_size",
    "k",
    "alpha",
];

impl WinrateRow {
    fn cells(&self) -> Vec<String> {
        vec![
            self.length_ratio_or_l.clone(),
            self.method_a.clone(),
            self.method_b.clone(),
            num(self.frac_a),
            num(self.frac_tie),
            num(self.frac_b),
            self.beam_size.to_string(),
            self.k.to_string(),
            num(self.alpha),
        ]
    }
}

fn read_inputs(model: &LoadedModel, path: Option<&Path>) -> Result<Vec<Vec<TokenId>>> {
    let Some(path) = path else {
        return Ok(vec![Vec::new()]);
    };
    let text = io::read_text(path)?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            model
                .vocab()
                .encode(line)
                .map_err(|e| Error::Parse {
                    line: i + 1,
                    msg: e.to_string(),
                })
                .with_context(|| format!("reading {}", path.display()))
        })
        .collect()
}

fn read_references(path: &Path, count: usize) -> Result<Vec<usize>> {
    let text = io::read_text(path)?;
    let refs = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<usize>().map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if refs.len() != count {
        return Err(Error::LengthMismatch {
            left: refs.len(),
            right: count,
        }
        .into());
    }
    Ok(refs)
}

/// Top log-likelihood of a run, −∞ when no output of the length exists.
fn best(result: mapsearch::Result<Vec<BeamEntry>>) -> Result<(f64, Option<Vec<TokenId>>)> {
    match result {
        Ok(entries) => Ok(entries.first().map_or((f64::NEG_INFINITY, None), |e| {
            (e.hypothesis.logprob, Some(e.hypothesis.tokens.clone()))
        })),
        Err(Error::NoFeasibleSequence { .. }) => Ok((f64::NEG_INFINITY, None)),
        Err(e) => Err(e.into()),
    }
}

/// Per input: (conditional, constrained) scores for every (beam, setting) cell.
fn run_input<M: AutoregressiveModel>(
    model: &M,
    targets: &[usize],
    args: &WinrateArgs,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    match args.predictor {
        PredictorKind::ExactLength => {
            let p = ExactLengthPredictor::new(model, model.max_len())?;
            cells(model, &p, targets, args)
        }
        PredictorKind::MonteCarlo => {
            let p = MonteCarloPredictor::remaining_length(model, args.samples, seed)?;
            cells(model, &p, targets, args)
        }
        other => bail!("winrate needs a length predictor, not {other:?}"),
    }
}

fn cells<M: AutoregressiveModel, P: AttributePredictor<M>>(
    model: &M,
    predictor: &P,
    targets: &[usize],
    args: &WinrateArgs,
) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(args.beams.len() * targets.len());
    for &b in &args.beams {
        let cfg = BeamConfig::new(b, args.k, args.alpha)?;
        for &len in targets {
            let (a, tokens) = best(conditional_beam(model, predictor, Target::Length(len), &cfg))?;
            if let Some(t) = &tokens {
                if t.len() != len {
                    bail!("conditional output has length {} instead of {len}", t.len());
                }
            }
            let (c, _) = best(length_constrained_beam(model, len, &cfg))?;
            out.push((a, c));
        }
    }
    Ok(out)
}

pub fn table(ctx: &Ctx, args: &WinrateArgs) -> Result<Vec<WinrateRow>> {
    if args.settings.is_empty() || args.beams.is_empty() {
        bail!("winrate needs at least one length or ratio and one beam size");
    }
    let model = load(&args.model)?;
    let inputs = read_inputs(&model, args.inputs.as_deref())?;
    let ratios = args.settings.iter().any(|s| matches!(s, Setting::Ratio(_)));
    let refs = match (&args.references, ratios) {
        (Some(p), _) => Some(read_references(p, inputs.len())?),
        (None, true) => bail!("length ratios need --references"),
        (None, false) => None,
    };

    let per_input = ctx.exec.map_range(inputs.len(), |i| -> Result<Vec<(f64, f64)>> {
        let prompted = Prompted::new(&model, inputs[i].clone())?;
        let reference = refs.as_ref().map(|r| r[i]);
        let targets: Vec<usize> = args.settings.iter().map(|s| s.target(reference)).collect();
        run_input(&prompted, &targets, args, ctx.seed.wrapping_add(i as u64))
    });
    let per_input = per_input.into_iter().collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (bi, &b) in args.beams.iter().enumerate() {
        for (si, setting) in args.settings.iter().enumerate() {
            let cell = bi * args.settings.len() + si;
            let a: Vec<f64> = per_input.iter().map(|v| v[cell].0).collect();
            let c: Vec<f64> = per_input.iter().map(|v| v[cell].1).collect();
            let Winrate {
                frac_a,
                frac_tie,
                frac_b,
            } = winrate_scores(&a, &c)?;
            rows.push(WinrateRow {
                length_ratio_or_l: setting.label(),
                method_a: METHOD_A.into(),
                method_b: METHOD_B.into(),
                frac_a,
                frac_tie,
                frac_b,
                beam_size: b,
                k: args.k,
                alpha: args.alpha,
            });
        }
    }
    Ok(rows)
}

pub fn winrate(ctx: &Ctx, args: &WinrateArgs) -> Result<String> {
    let manifest = RunManifest::start(
        "winrate",
        args.model.display().to_string(),
        json!({
            "inputs": args.inputs,
            "references": args.references,
            "settings": args.settings.iter().map(Setting::label).collect::<Vec<_>>(),
            "ratios": args.settings.iter().any(|s| matches!(s, Setting::Ratio(_))),
            "beams": args.beams,
            "k": args.k,
            "alpha": args.alpha,
            "predictor": format!("{:?}", args.predictor),
            "samples": args.samples,
        }),
        ctx.seed,
    );
    let rows = table(ctx, args)?;
    let cells: Vec<Vec<String>> = rows.iter().map(WinrateRow::cells).collect();
    let csv = table::csv(&HEADER, &cells)?;
    let manifest = manifest.finish();
    if let Some(out) = &args.out {
        write_report(out, &csv, &manifest)?;
    }
    Ok(match ctx.format {
        Format::Csv => csv,
        Format::Text => table::text(&HEADER, &cells),
        Format::Json => serde_json::to_string_pretty(&json!({"rows": rows, "manifest": manifest}))? + "\n",
    })
}
