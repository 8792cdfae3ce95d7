//! Row rendering shared by the commands.

use anyhow::Result;
use mapsearch::{TokenId, Vocab, EOS_TOKEN};

/// Tokens followed by `</s>`; the empty output renders as `</s>` alone.
pub fn show(vocab: &Vocab, tokens: &[TokenId]) -> String {
    if tokens.is_empty() {
        EOS_TOKEN.to_string()
    } else {
        format!("{} {EOS_TOKEN}", vocab.render(tokens))
    }
}

/// Shortest round-trip form, so reruns print byte-identical numbers.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn log2(ln: f64) -> f64 {
    ln / std::f64::consts::LN_2
}

pub fn csv(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = ::csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Tab-separated text with a header line.
pub fn text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join("\t");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}
