//! Command implementations behind the `mapsearch` binary.
//!
//! Every command returns its rendered stdout as a `String`; files named with
//! `--out` are written as CSV with a `.manifest.json` beside them. Errors
//! carry a [`mapsearch::Error`] where one applies, which [`exit_code`] maps to
//! the process status.

pub mod commands;
pub mod figures;
pub mod manifest;
pub mod table;
pub mod winrate;

use clap::ValueEnum;
use mapsearch::exec::Exec;
use mapsearch::Error;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;
pub const EXIT_ENUMERATION: i32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Csv,
    Json,
}

/// Settings shared by every command.
#[derive(Debug, Clone, Copy)]
pub struct Ctx {
    pub seed: u64,
    pub exec: Exec,
    pub format: Format,
}

impl Default for Ctx {
    fn default() -> Self {
        Self {
            seed: 0,
            exec: Exec::default(),
            format: Format::Text,
        }
    }
}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(Error::BudgetExceeded) => EXIT_BUDGET,
        Some(Error::NoFeasibleSequence { .. }) => EXIT_INFEASIBLE,
        Some(Error::EnumerationLimit { .. }) => EXIT_ENUMERATION,
        _ => EXIT_USAGE,
    }
}
