use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use mapsearch::exec::Exec;
use mapsearch::search::{SearchBudget, DEFAULT_MAX_NODES, DEFAULT_TIE_CAP};
use mapsearch_cli::commands::{self, BeamArgs, Method, PredictorKind, SearchArgs, TrainArgs};
use mapsearch_cli::winrate::{self, Setting, WinrateArgs};
use mapsearch_cli::{exit_code, figures, Ctx, Format};

#[derive(Parser)]
#[command(
    name = "mapsearch",
    version,
    about = "Exact and beam mode search over sequence models"
)]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 1 runs sequentially. Defaults to all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SearchFlags {
    /// Model file (.json) or distribution file (.tsv).
    model: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_NODES)]
    max_nodes: usize,
    #[arg(long)]
    max_depth: Option<usize>,
    /// Maximum number of tied modes reported.
    #[arg(long, default_value_t = DEFAULT_TIE_CAP)]
    tie_cap: usize,
    #[arg(long)]
    no_prune: bool,
    #[arg(long)]
    no_cache: bool,
    /// Report the best sequence found when the budget runs out.
    #[arg(long)]
    allow_partial: bool,
    /// Also write the result as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SearchFlags {
    fn args(self) -> SearchArgs {
        SearchArgs {
            model: self.model,
            max_nodes: self.max_nodes,
            max_depth: self.max_depth,
            tie_cap: self.tie_cap,
            prune: !self.no_prune,
            cache: !self.no_cache,
            allow_partial: self.allow_partial,
            out: self.out,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Exact global mode.
    Mode(SearchFlags),
    /// Exact mode among outputs of a fixed length.
    CondMode {
        #[command(flatten)]
        search: SearchFlags,
        #[arg(long)]
        length: usize,
    },
    /// Plain, length-constrained or attribute-conditional beam search.
    Beam {
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Plain)]
        method: Method,
        #[arg(long)]
        length: Option<usize>,
        #[arg(long, value_enum, default_value_t = PredictorKind::ExactLength)]
        predictor: PredictorKind,
        /// Attribute class for class predictors.
        #[arg(long, default_value_t = 0)]
        class: usize,
        /// Class count of the uniform predictor.
        #[arg(long, default_value_t = 2)]
        classes: usize,
        #[arg(long)]
        target_token: Option<String>,
        /// Tokens forced before decoding starts.
        #[arg(long)]
        prompt: Option<String>,
        #[arg(long, default_value_t = 5)]
        beam: usize,
        #[arg(long, default_value_t = mapsearch::beam::DEFAULT_TOP_K)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Rollouts per Monte Carlo query.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search winrate of conditional vs constrained beam search.
    Winrate {
        model: PathBuf,
        /// Target lengths, e.g. 4,5,6.
        #[arg(long, value_delimiter = ',', conflicts_with = "length_ratios")]
        lengths: Vec<usize>,
        /// Target lengths as multiples of --references.
        #[arg(long, value_delimiter = ',')]
        length_ratios: Vec<f64>,
        /// Prompts, one per line.
        #[arg(long)]
        inputs: Option<PathBuf>,
        /// Reference lengths, one per input line.
        #[arg(long)]
        references: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "5,20")]
        beam: Vec<usize>,
        #[arg(long, default_value_t = mapsearch::beam::EXPERIMENT_TOP_K)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = PredictorKind::ExactLength)]
        predictor: PredictorKind,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Empty-mode rate and geometric-mean P(empty) by length for a model family.
    ReplicateFigures {
        spec: PathBuf,
        out_dir: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_NODES)]
        max_nodes: usize,
    },
    /// Lists every complete sequence with its probability.
    Oracle {
        model: PathBuf,
        #[arg(long)]
        max_len: Option<usize>,
        /// Most prefixes to visit before giving up.
        #[arg(long, default_value_t = commands::ORACLE_LIMIT)]
        limit: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trains an add-alpha n-gram model from a corpus, one sequence per line.
    TrainNgram {
        corpus: PathBuf,
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = mapsearch::ngram::DEFAULT_MAX_LEN)]
        max_len: usize,
        /// Split lines into characters instead of words.
        #[arg(long)]
        chars: bool,
        /// Use only the first N lines.
        #[arg(long)]
        lines: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exec_for(workers: Option<usize>) -> Result<Exec> {
    match workers {
        Some(0) => bail!("--workers must be at least 1"),
        Some(1) => Ok(Exec::Sequential),
        #[cfg(feature = "parallel")]
        Some(n) => {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
            Ok(Exec::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(Exec::Sequential),
        None => Ok(Exec::default()),
    }
}

fn run(cli: Cli) -> Result<String> {
    let ctx = Ctx {
        seed: cli.seed,
        exec: exec_for(cli.workers)?,
        format: cli.format,
    };
    match cli.command {
        Command::Mode(flags) => commands::mode(&ctx, &flags.args()),
        Command::CondMode { search, length } => commands::cond_mode(&ctx, &search.args(), length),
        Command::Beam {
            model,
            method,
            length,
            predictor,
            class,
            classes,
            target_token,
            prompt,
            beam,
            k,
            alpha,
            samples,
            out,
        } => {
            if matches!(method, Method::Constrained) && length.is_none() {
                bail!("--method constrained needs --length");
            }
            let args = BeamArgs {
                model,
                method,
                length,
                predictor,
                class,
                classes,
                target_token,
                prompt,
                beam,
                k,
                alpha,
                samples,
                out,
            };
            commands::beam(&ctx, &args)
        }
        Command::Winrate {
            model,
            lengths,
            length_ratios,
            inputs,
            references,
            beam,
            k,
            alpha,
            predictor,
            samples,
            out,
        } => {
            let settings: Vec<Setting> = if length_ratios.is_empty() {
                lengths.into_iter().map(Setting::Length).collect()
            } else {
                length_ratios.into_iter().map(Setting::Ratio).collect()
            };
            let args = WinrateArgs {
                inputs,
                references,
                k,
                alpha,
                predictor,
                samples,
                out,
                ..WinrateArgs::new(model, settings, beam)
            };
            winrate::winrate(&ctx, &args)
        }
        Command::ReplicateFigures {
            spec,
            out_dir,
            max_nodes,
        } => figures::replicate(&ctx, &spec, &out_dir, SearchBudget::new(max_nodes, usize::MAX)?),
        Command::Oracle {
            model,
            max_len,
            limit,
            out,
        } => commands::oracle(&ctx, &model, max_len, limit, out.as_deref()),
        Command::TrainNgram {
            corpus,
            order,
            alpha,
            max_len,
            chars,
            lines,
            out,
        } => commands::train_ngram(
            &ctx,
            &TrainArgs {
                corpus,
                order,
                alpha,
                max_len,
                chars,
                lines,
                out,
            },
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
