use serde::Serialize;

use crate::exec::Exec;
use crate::model::AutoregressiveModel;
use crate::search::{global_mode, SearchBudget};
use crate::vocab::EOS;

pub struct EmptyModeInput<M> {
    pub label: String,
    pub length_bin: usize,
    pub model: M,
}

/// One (label, length bin) group of models.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub label: String,
    pub length_bin: usize,
    /// Fraction of models whose mode (or best-so-far) is the empty sequence.
    pub frac_empty_mode: f64,
    /// exp(mean ln P(EOS | start)).
    pub geomean_p_empty: f64,
    pub frac_exhausted: f64,
    pub models: usize,
}

impl ReportRow {
    pub const CSV_HEADER: &'static str = "label,length_bin,frac_empty_mode,geomean_p_empty,frac_exhausted";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.label, self.length_bin, self.frac_empty_mode, self.geomean_p_empty, self.frac_exhausted
        )
    }
}

/// Runs exact search on every model and aggregates per (label, length bin),
/// rows in order of first appearance.
pub fn empty_mode_report<M: AutoregressiveModel>(
    inputs: &[EmptyModeInput<M>],
    budget: SearchBudget,
    exec: Exec,
) -> Vec<ReportRow> {
    let per_model = exec.map(inputs, |input| {
        let result = global_mode(&input.model, budget);
        let ln_empty = input.model.log_probs(&input.model.initial_state())[EOS as usize];
        (result.is_empty_mode(), ln_empty, result.exhausted)
    });

    let mut rows: Vec<(ReportRow, f64)> = Vec::new();
    for (input, (empty, ln_empty, exhausted)) in inputs.iter().zip(per_model) {
        let at = rows
            .iter()
            .position(|(r, _)| r.label == input.label && r.length_bin == input.length_bin)
            .unwrap_or_else(|| {
                rows.push((
                    ReportRow {
                        label: input.label.clone(),
                        length_bin: input.length_bin,
                        frac_empty_mode: 0.0,
                        geomean_p_empty: 0.0,
                        frac_exhausted: 0.0,
                        models: 0,
                    },
                    0.0,
                ));
                rows.len() - 1
            });
        let (row, ln_sum) = &mut rows[at];
        row.models += 1;
        row.frac_empty_mode += f64::from(u8::from(empty));
        row.frac_exhausted += f64::from(u8::from(exhausted));
        *ln_sum += ln_empty;
    }
    rows.into_iter()
        .map(|(mut row, ln_sum)| {
            let n = row.models as f64;
            row.frac_empty_mode /= n;
            row.frac_exhausted /= n;
            row.geomean_p_empty = (ln_sum / n).exp();
            row
        })
        .collect()
}
