use std::path::Path;

use anyhow::{Context, Result};
use mapsearch::io;
use mapsearch::search::{empty_mode_report, EmptyModeInput, ReportRow, SearchBudget};
use mapsearch::synthetic::FamilySpec;
use serde::Deserialize;
use serde_json::json;

use crate::manifest::{write_report, RunManifest};
use crate::table::{self, num};
use crate::{Ctx, Format};

#[derive(Deserialize)]
#[serde(untagged)]
enum SpecFile {
    One(FamilySpec),
    Many(Vec<FamilySpec>),
}

pub fn read_specs(path: &Path) -> Result<Vec<FamilySpec>> {
    let text = io::read_text(path)?;
    let file: SpecFile = serde_json::from_str(&text)
        .map_err(mapsearch::Error::from)
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(match file {
        SpecFile::One(s) => vec![s],
        SpecFile::Many(v) => v,
    })
}

pub fn report(ctx: &Ctx, specs: &[FamilySpec], budget: SearchBudget) -> Result<Vec<ReportRow>> {
    let mut inputs = Vec::new();
    for spec in specs {
        for m in spec.instantiate()? {
            inputs.push(EmptyModeInput {
                label: m.label,
                length_bin: m.length,
                model: m.model,
            });
        }
    }
    Ok(empty_mode_report(&inputs, budget, ctx.exec))
}

/// Writes `report.csv`, `empty_mode_rate.csv` and `geomean_p_empty.csv`
/// (each with a manifest) into `out_dir`.
pub fn replicate(ctx: &Ctx, spec_path: &Path, out_dir: &Path, budget: SearchBudget) -> Result<String> {
    let specs = read_specs(spec_path)?;
    let manifest = RunManifest::start(
        "replicate-figures",
        spec_path.display().to_string(),
        json!({"specs": specs, "max_nodes": budget.max_nodes}),
        ctx.seed,
    );
    let rows = report(ctx, &specs, budget)?;
    let manifest = manifest.finish();
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let cells = |cols: &[usize]| -> Vec<Vec<String>> {
        rows.iter()
            .map(|r| {
                let all = [
                    r.label.clone(),
                    r.length_bin.to_string(),
                    num(r.frac_empty_mode),
                    num(r.geomean_p_empty),
                    num(r.frac_exhausted),
                ];
                cols.iter().map(|&c| all[c].clone()).collect()
            })
            .collect()
    };
    let header: Vec<&str> = ReportRow::CSV_HEADER.split(',').collect();
    let pick = |cols: &[usize]| cols.iter().map(|&c| header[c]).collect::<Vec<_>>();
    let outputs = [
        ("report.csv", vec![0, 1, 2, 3, 4]),
        ("empty_mode_rate.csv", vec![0, 1, 2, 4]),
        ("geomean_p_empty.csv", vec![0, 1, 3, 4]),
    ];
    let mut full = String::new();
    for (name, cols) in &outputs {
        let csv = table::csv(&pick(cols), &cells(cols))?;
        write_report(&out_dir.join(name), &csv, &manifest)?;
        if cols.len() == 5 {
            full = csv;
        }
    }
    Ok(match ctx.format {
        Format::Csv => full,
        Format::Text => table::text(&header, &cells(&[0, 1, 2, 3, 4])),
        Format::Json => serde_json::to_string_pretty(&json!({"rows": rows, "manifest": manifest}))? + "\n",
    })
}
