//! File plumbing: reading corpora, vocabularies, and networks with path
//! context on every error, and writing reports whose headers echo the
//! resolved configuration.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use pgbn_core::corpus::{parse_bow, CountMatrix, Vocabulary};
use pgbn_core::model::{Hyperparams, Network};
use pgbn_core::serialize::{read_network, write_network, LoadedNetwork};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn load_corpus(path: &Path) -> Result<CountMatrix> {
    let text = read_text(path)?;
    parse_bow(&text).with_context(|| format!("parsing corpus {}", path.display()))
}

/// One term per line; blank lines are not allowed so indices stay aligned.
pub fn load_vocab(path: &Path) -> Result<Vocabulary> {
    let text = read_text(path)?;
    let terms: Vec<String> = text.lines().map(|l| l.trim().to_string()).collect();
    if terms.iter().any(|t| t.is_empty()) {
        bail!("vocabulary {} contains an empty line", path.display());
    }
    Ok(Vocabulary::new(terms))
}

/// Load a network, forwarding any parser warnings to standard error.
pub fn load_network(path: &Path) -> Result<LoadedNetwork> {
    let text = read_text(path)?;
    let loaded =
        read_network(&text).with_context(|| format!("parsing network {}", path.display()))?;
    for w in &loaded.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(loaded)
}

pub fn save_network(
    path: &Path,
    network: &Network,
    hyper: Option<&Hyperparams>,
    comments: &[String],
) -> Result<()> {
    let refs: Vec<&str> = comments.iter().map(|s| s.as_str()).collect();
    let text = write_network(network, hyper, &refs)
        .with_context(|| format!("serializing network for {}", path.display()))?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Render `key=value` configuration-echo lines. The first line names the
/// command and tool version; artifacts embed these as `# ` comments.
pub fn echo_lines(command: &str, pairs: &[(&str, String)]) -> Vec<String> {
    let mut lines = vec![format!("pgbn {command} v{}", env!("CARGO_PKG_VERSION"))];
    for (k, v) in pairs {
        lines.push(format!("{k}={v}"));
    }
    lines
}

/// Join a numeric list for an echo value: `a,b,c`.
pub fn join_list<T: std::fmt::Display>(vals: &[T]) -> String {
    let mut out = String::new();
    for (i, v) in vals.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v}");
    }
    out
}

pub fn display_path(path: &Path) -> String {
    path.display().to_string()
}

pub fn display_opt_path(path: Option<&Path>) -> String {
    path.map_or_else(|| "-".to_string(), display_path)
}

/// A line-oriented artifact: comment header first, then content lines.
pub struct Report {
    lines: Vec<String>,
}

impl Report {
    pub fn new(header: &[String]) -> Self {
        Report { lines: header.iter().map(|l| format!("# {l}")).collect() }
    }

    pub fn push(&mut self, line: String) {
        self.lines.push(line);
    }

    pub fn comment(&mut self, line: &str) {
        self.lines.push(format!("# {line}"));
    }

    /// Write to `path`, or to standard output when `path` is `-`.
    pub fn write(self, path: &Path) -> Result<()> {
        let body: String = self.lines.iter().map(|l| format!("{l}\n")).collect();
        if path.as_os_str() == "-" {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes()).context("writing report to standard output")?;
            Ok(())
        } else {
            fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
            Ok(())
        }
    }
}

/// Resolve term `v` to a printable name: the vocabulary entry when one is
/// loaded, else the 0-based index itself.
pub fn term_name(vocab: Option<&Vocabulary>, v: usize) -> String {
    match vocab {
        Some(voc) => voc.term(v).to_string(),
        None => v.to_string(),
    }
}
