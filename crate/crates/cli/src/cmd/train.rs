//! `pgbn train`: layer-wise Gibbs training over a bag-of-words corpus.
//! Emits one network file per depth (`<stem>.t<depth>.pgbn`) and a progress
//! log whose lines are stable `key=value` records.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use pgbn_core::corpus::{filter_vocab, Vocabulary};
use pgbn_core::model::Hyperparams;
use pgbn_core::structure::{train_layerwise, ProgressEvent, TrainOptions};
use pgbn_core::StreamRng;

use crate::args::TrainArgs;
use crate::io::{
    display_opt_path, display_path, echo_lines, join_list, load_corpus, load_vocab, read_text,
    save_network,
};

pub fn run(args: TrainArgs) -> Result<()> {
    let mut corpus = load_corpus(&args.corpus)?;
    let mut vocab = match &args.vocab {
        Some(path) => {
            let v = load_vocab(path)?;
            if v.len() != corpus.n_terms() {
                bail!(
                    "vocabulary {} has {} terms but the corpus declares {}",
                    path.display(),
                    v.len(),
                    corpus.n_terms()
                );
            }
            Some(v)
        }
        None => None,
    };

    // Optional vocabulary reduction before any sampling.
    let mut dropped_terms = 0usize;
    if args.min_count > 0 || args.stopwords.is_some() {
        let stop_indices = match &args.stopwords {
            Some(path) => {
                let Some(v) = &vocab else {
                    bail!("--stopwords needs --vocab to resolve terms");
                };
                let text = read_text(path)?;
                let mut indices = Vec::new();
                for word in text.lines().map(str::trim).filter(|w| !w.is_empty()) {
                    if let Some(i) = v.terms().iter().position(|t| t == word) {
                        indices.push(i);
                    }
                }
                indices
            }
            None => Vec::new(),
        };
        let table = vocab.unwrap_or_else(|| Vocabulary::numbered(corpus.n_terms()));
        let before = corpus.n_terms();
        let (filtered, kept) = filter_vocab(&corpus, &table, &stop_indices, args.min_count)
            .context("filtering the vocabulary")?;
        dropped_terms = before - kept.len();
        corpus = filtered;
        vocab = Some(kept);
    }
    let _ = vocab; // Only needed for filtering; training is index-based.

    let mut hyper = Hyperparams {
        k1_max: args.k1max,
        t_max: args.tmax,
        b_iters: args.burn.clone(),
        c_iters: args.collect.clone(),
        ..Hyperparams::default()
    };
    hyper = args.prior.apply(hyper);
    hyper.validate().context("checking hyperparameters")?;

    let opts =
        TrainOptions { sampler: args.sampler.options(), kind: args.posterior.kind() };
    let report_out = args
        .report_out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.log", args.model_out.display())));

    let echo = echo_lines(
        "train",
        &[
            ("corpus", display_path(&args.corpus)),
            ("vocab", display_opt_path(args.vocab.as_deref())),
            ("model-out", display_path(&args.model_out)),
            ("report-out", display_path(&report_out)),
            ("eta", join_list(&hyper.eta)),
            ("a0", hyper.a0.to_string()),
            ("b0", hyper.b0.to_string()),
            ("e0", hyper.e0.to_string()),
            ("f0", hyper.f0.to_string()),
            ("k1max", hyper.k1_max.to_string()),
            ("tmax", hyper.t_max.to_string()),
            ("burn", join_list(&hyper.b_iters)),
            ("collect", join_list(&hyper.c_iters)),
            ("sampler", args.sampler.name().to_string()),
            ("posterior", args.posterior.name().to_string()),
            ("min-count", args.min_count.to_string()),
            ("stopwords", display_opt_path(args.stopwords.as_deref())),
            ("seed", args.common.seed.to_string()),
            ("workers", args.common.workers.to_string()),
        ],
    );

    let log_file = File::create(&report_out)
        .with_context(|| format!("creating {}", report_out.display()))?;
    let mut log = BufWriter::new(log_file);
    for line in &echo {
        writeln!(log, "# {line}").context("writing the log header")?;
    }
    writeln!(
        log,
        "corpus-terms={} corpus-docs={} corpus-tokens={} dropped-terms={dropped_terms}",
        corpus.n_terms(),
        corpus.n_docs(),
        corpus.total()
    )
    .context("writing the log header")?;

    let mut rng = StreamRng::new(args.common.seed, 0);
    let mut log_err: Option<std::io::Error> = None;
    let stack = {
        let mut progress = |event: ProgressEvent<'_>| {
            if log_err.is_some() {
                return;
            }
            let line = match event {
                ProgressEvent::Sweep { depth, iter, total: _, burning, k_top, report } => {
                    format!(
                        "depth={depth} iter={iter} K_T={k_top} phase={} totals={} ll={}",
                        if burning { "burn" } else { "collect" },
                        join_list(&report.layer_totals),
                        report.ll_proxy,
                    )
                }
                ProgressEvent::Pruned { depth, removed, k_top } => {
                    format!("depth={depth} pruned={removed} K_T={k_top}")
                }
                ProgressEvent::DepthDone { depth, widths } => {
                    format!("depth={depth} done widths={}", join_list(widths))
                }
            };
            if let Err(e) = writeln!(log, "{line}") {
                log_err = Some(e);
            }
        };
        train_layerwise(&corpus, &hyper, &opts, &mut rng, &mut progress)
            .context("training")?
    };
    if let Some(e) = log_err {
        return Err(e).with_context(|| format!("writing {}", report_out.display()));
    }
    log.flush().with_context(|| format!("writing {}", report_out.display()))?;

    for network in &stack.networks {
        let depth = network.depth();
        let path = PathBuf::from(format!("{}.t{depth}.pgbn", args.model_out.display()));
        let mut comments = echo.clone();
        comments.push(format!("depth={depth}"));
        comments.push(format!("widths={}", join_list(&network.widths)));
        save_network(&path, network, Some(&hyper), &comments)?;
        println!("wrote {} widths={}", path.display(), join_list(&network.widths));
    }
    println!("wrote {}", report_out.display());
    Ok(())
}
