//! Versioned plain-text persistence for trained networks.
//!
//! The format is line-oriented UTF-8. The first content line names the
//! format and version (`pgbn-network 1`); lines starting with `#` are
//! comments (the command-line front end uses them to echo the run
//! configuration); every other line is `key value...`. Loading matrices
//! are stored one column per line under a `phi` header, and the file ends
//! with an explicit `end` line so truncation is detectable. Floats are
//! written with the shortest representation that parses back to the exact
//! same value, so a save/load round trip reproduces the network bit for
//! bit. Unknown keys are skipped with a warning, which lets older readers
//! open files produced by newer writers.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::model::{Hyperparams, Network, NetworkKind};

/// Result of parsing a network file.
#[derive(Debug, Clone)]
pub struct LoadedNetwork {
    pub network: Network,
    /// Training hyperparameters, when the file records them.
    pub hyper: Option<Hyperparams>,
    /// Non-fatal oddities encountered while parsing, one message per line
    /// (currently: unknown fields that were skipped).
    pub warnings: Vec<String>,
}

const FORMAT_NAME: &str = "pgbn-network";
const FORMAT_VERSION: u64 = 1;

fn kind_name(kind: NetworkKind) -> &'static str {
    match kind {
        NetworkKind::LastSample => "last-sample",
        NetworkKind::RunningMean => "running-mean",
    }
}

/// Render `network` (with optional hyperparameters and free-form comment
/// lines) in the versioned text format. Refuses networks that fail
/// [`Network::validate`], so every written file parses back cleanly.
pub fn write_network(
    network: &Network,
    hyper: Option<&Hyperparams>,
    comments: &[&str],
) -> Result<String> {
    network.validate()?;
    if let Some(h) = hyper {
        h.validate()?;
    }
    let mut out = String::new();
    let _ = writeln!(out, "{FORMAT_NAME} {FORMAT_VERSION}");
    for c in comments {
        for line in c.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    let _ = writeln!(out, "kind {}", kind_name(network.kind));
    let _ = write!(out, "widths");
    for w in &network.widths {
        let _ = write!(out, " {w}");
    }
    out.push('\n');
    let _ = writeln!(out, "gamma0 {}", network.gamma0);
    let _ = writeln!(out, "c0 {}", network.c0);
    let _ = write!(out, "r");
    for v in &network.r {
        let _ = write!(out, " {v}");
    }
    out.push('\n');
    if let Some(med) = &network.c_medians {
        let _ = write!(out, "c-medians");
        for v in med {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    if let Some(h) = hyper {
        let _ = write!(out, "hyper-eta");
        for v in &h.eta {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
        let _ = writeln!(out, "hyper-a0 {}", h.a0);
        let _ = writeln!(out, "hyper-b0 {}", h.b0);
        let _ = writeln!(out, "hyper-e0 {}", h.e0);
        let _ = writeln!(out, "hyper-f0 {}", h.f0);
        let _ = writeln!(out, "hyper-k1max {}", h.k1_max);
        let _ = writeln!(out, "hyper-tmax {}", h.t_max);
        let _ = write!(out, "hyper-burn");
        for v in &h.b_iters {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
        let _ = write!(out, "hyper-collect");
        for v in &h.c_iters {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    for (i, phi) in network.phi.iter().enumerate() {
        let _ = writeln!(out, "phi {} {} {}", i + 1, phi.rows(), phi.cols());
        for col in phi.cols_iter() {
            let mut first = true;
            for v in col {
                if !first {
                    out.push(' ');
                }
                let _ = write!(out, "{v}");
                first = false;
            }
            out.push('\n');
        }
    }
    out.push_str("end\n");
    Ok(out)
}

fn perr(line: usize, msg: impl core::fmt::Display) -> Error {
    Error::Parse { line, msg: msg.to_string() }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    let v: f64 =
        tok.parse().map_err(|_| perr(line, format_args!("expected a number, got `{tok}`")))?;
    if !v.is_finite() {
        return Err(perr(line, "numbers must be finite"));
    }
    Ok(v)
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse().map_err(|_| perr(line, format_args!("expected a nonnegative integer, got `{tok}`")))
}

fn parse_f64_list(toks: &[&str], line: usize) -> Result<Vec<f64>> {
    toks.iter().map(|t| parse_f64(t, line)).collect()
}

fn parse_usize_list(toks: &[&str], line: usize) -> Result<Vec<usize>> {
    toks.iter().map(|t| parse_usize(t, line)).collect()
}

/// Tracks one field that may appear at most once.
struct Slot<T> {
    name: &'static str,
    value: Option<T>,
}

impl<T> Slot<T> {
    fn new(name: &'static str) -> Self {
        Slot { name, value: None }
    }

    fn set(&mut self, value: T, line: usize) -> Result<()> {
        if self.value.is_some() {
            return Err(perr(line, format_args!("duplicate field `{}`", self.name)));
        }
        self.value = Some(value);
        Ok(())
    }

    fn take_required(&mut self, end_line: usize) -> Result<T> {
        self.value.take().ok_or_else(|| perr(end_line, format_args!("missing field `{}`", self.name)))
    }
}

/// Parse a network file produced by [`write_network`]. Unknown fields are
/// collected as warnings instead of errors; structural problems (bad
/// version, truncation, dimension clashes, loading columns off the
/// simplex) are errors.
pub fn read_network(text: &str) -> Result<LoadedNetwork> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut content =
        core::iter::from_fn(|| {
            for (n, raw) in lines.by_ref() {
                let t = raw.trim();
                if !t.is_empty() && !t.starts_with('#') {
                    return Some((n, t));
                }
            }
            None
        });

    let (first_no, first) = content.next().ok_or_else(|| perr(1, "empty file"))?;
    let mut head = first.split_whitespace();
    if head.next() != Some(FORMAT_NAME) {
        return Err(perr(first_no, format_args!("expected a `{FORMAT_NAME}` header")));
    }
    let version = head
        .next()
        .and_then(|v| v.parse::<u64>().ok())
        .ok_or_else(|| perr(first_no, "missing format version"))?;
    if version != FORMAT_VERSION {
        return Err(perr(
            first_no,
            format_args!("unsupported format version {version} (this reader handles {FORMAT_VERSION})"),
        ));
    }

    let mut warnings = Vec::new();
    let mut kind = Slot::new("kind");
    let mut widths = Slot::new("widths");
    let mut gamma0 = Slot::new("gamma0");
    let mut c0 = Slot::new("c0");
    let mut r = Slot::new("r");
    let mut c_medians = Slot::new("c-medians");
    let mut h_eta = Slot::new("hyper-eta");
    let mut h_a0 = Slot::new("hyper-a0");
    let mut h_b0 = Slot::new("hyper-b0");
    let mut h_e0 = Slot::new("hyper-e0");
    let mut h_f0 = Slot::new("hyper-f0");
    let mut h_k1max = Slot::new("hyper-k1max");
    let mut h_tmax = Slot::new("hyper-tmax");
    let mut h_burn = Slot::new("hyper-burn");
    let mut h_collect = Slot::new("hyper-collect");
    let mut phis: Vec<Mat> = Vec::new();
    let mut ended_at = None;

    while let Some((no, line)) = content.next() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let (key, rest) = toks.split_first().expect("content lines are nonempty");
        match *key {
            "end" => {
                ended_at = Some(no);
                break;
            }
            "kind" => {
                let k = match rest {
                    ["last-sample"] => NetworkKind::LastSample,
                    ["running-mean"] => NetworkKind::RunningMean,
                    _ => return Err(perr(no, "kind must be `last-sample` or `running-mean`")),
                };
                kind.set(k, no)?;
            }
            "widths" => {
                let w = parse_usize_list(rest, no)?;
                if w.len() < 2 {
                    return Err(perr(no, "widths needs the term count and at least one layer"));
                }
                widths.set(w, no)?;
            }
            "gamma0" | "c0" | "hyper-a0" | "hyper-b0" | "hyper-e0" | "hyper-f0" => {
                let [tok] = rest else {
                    return Err(perr(no, format_args!("`{key}` takes exactly one value")));
                };
                let v = parse_f64(tok, no)?;
                match *key {
                    "gamma0" => gamma0.set(v, no)?,
                    "c0" => c0.set(v, no)?,
                    "hyper-a0" => h_a0.set(v, no)?,
                    "hyper-b0" => h_b0.set(v, no)?,
                    "hyper-e0" => h_e0.set(v, no)?,
                    _ => h_f0.set(v, no)?,
                }
            }
            "hyper-k1max" | "hyper-tmax" => {
                let [tok] = rest else {
                    return Err(perr(no, format_args!("`{key}` takes exactly one value")));
                };
                let v = parse_usize(tok, no)?;
                if *key == "hyper-k1max" {
                    h_k1max.set(v, no)?;
                } else {
                    h_tmax.set(v, no)?;
                }
            }
            "r" => r.set(parse_f64_list(rest, no)?, no)?,
            "c-medians" => c_medians.set(parse_f64_list(rest, no)?, no)?,
            "hyper-eta" => h_eta.set(parse_f64_list(rest, no)?, no)?,
            "hyper-burn" => h_burn.set(parse_usize_list(rest, no)?, no)?,
            "hyper-collect" => h_collect.set(parse_usize_list(rest, no)?, no)?,
            "phi" => {
                let [t, rows, cols] = rest else {
                    return Err(perr(no, "phi header is `phi <layer> <rows> <cols>`"));
                };
                let t = parse_usize(t, no)?;
                let rows = parse_usize(rows, no)?;
                let cols = parse_usize(cols, no)?;
                if t != phis.len() + 1 {
                    return Err(perr(
                        no,
                        format_args!("phi layers must appear in order; expected layer {}", phis.len() + 1),
                    ));
                }
                if rows == 0 || cols == 0 {
                    return Err(perr(no, "phi dimensions must be positive"));
                }
                let mut mat = Mat::zeros(rows, cols);
                for k in 0..cols {
                    let (dno, dline) = content
                        .next()
                        .ok_or_else(|| perr(no, "file ends inside a phi block"))?;
                    let vals: Vec<&str> = dline.split_whitespace().collect();
                    if vals.len() != rows {
                        return Err(perr(
                            dno,
                            format_args!("expected {rows} numbers in this phi column, got {}", vals.len()),
                        ));
                    }
                    for (v, tok) in mat.col_mut(k).iter_mut().zip(&vals) {
                        *v = parse_f64(tok, dno)?;
                    }
                }
                phis.push(mat);
            }
            _ => warnings.push(format!("line {no}: unknown field `{key}` ignored")),
        }
    }
    let end_line = ended_at.ok_or_else(|| perr(text.lines().count(), "missing `end` line; file truncated?"))?;

    let widths = widths.take_required(end_line)?;
    let depth = widths.len() - 1;
    if phis.len() != depth {
        return Err(perr(
            end_line,
            format_args!("widths describe {depth} layers but the file holds {} phi blocks", phis.len()),
        ));
    }
    for (t, phi) in phis.iter().enumerate() {
        if phi.rows() != widths[t] || phi.cols() != widths[t + 1] {
            return Err(perr(
                end_line,
                format_args!("phi layer {} is {}x{}, widths say {}x{}", t + 1, phi.rows(), phi.cols(), widths[t], widths[t + 1]),
            ));
        }
    }
    let network = Network {
        widths,
        phi: phis,
        r: r.take_required(end_line)?,
        gamma0: gamma0.take_required(end_line)?,
        c0: c0.take_required(end_line)?,
        c_medians: c_medians.value.take(),
        kind: kind.value.take().unwrap_or(NetworkKind::LastSample),
    };
    network.validate()?;

    let hyper_fields = [
        h_eta.value.is_some(),
        h_a0.value.is_some(),
        h_b0.value.is_some(),
        h_e0.value.is_some(),
        h_f0.value.is_some(),
        h_k1max.value.is_some(),
        h_tmax.value.is_some(),
        h_burn.value.is_some(),
        h_collect.value.is_some(),
    ];
    let hyper = if hyper_fields.iter().all(|&p| p) {
        let h = Hyperparams {
            eta: h_eta.value.take().expect("checked"),
            a0: h_a0.value.take().expect("checked"),
            b0: h_b0.value.take().expect("checked"),
            e0: h_e0.value.take().expect("checked"),
            f0: h_f0.value.take().expect("checked"),
            k1_max: h_k1max.value.take().expect("checked"),
            t_max: h_tmax.value.take().expect("checked"),
            b_iters: h_burn.value.take().expect("checked"),
            c_iters: h_collect.value.take().expect("checked"),
        };
        h.validate()?;
        Some(h)
    } else if hyper_fields.iter().any(|&p| p) {
        return Err(perr(end_line, "incomplete hyperparameter block: all hyper-* fields are required once any appears"));
    } else {
        None
    };

    Ok(LoadedNetwork { network, hyper, warnings })
}
