//! `pgbn generate`: simulate documents from a trained network and report
//! each one's heaviest terms, with an optional bag-of-words file of the
//! realized counts.

use anyhow::{bail, Context, Result};
use pgbn_core::corpus::{write_bow, CountMatrix};
use pgbn_core::eval::generate_documents;
use pgbn_core::StreamRng;

use crate::args::GenerateArgs;
use crate::io::{
    display_opt_path, display_path, echo_lines, join_list, load_network, load_vocab, term_name,
    Report,
};

pub fn run(args: GenerateArgs) -> Result<()> {
    if args.docs == 0 {
        bail!("--docs must be at least 1");
    }
    let loaded = load_network(&args.model_in)?;
    let network = loaded.network;
    let vocab = match &args.vocab {
        Some(path) => {
            let v = load_vocab(path)?;
            if v.len() != network.n_terms() {
                bail!(
                    "vocabulary {} has {} terms but the network was trained on {}",
                    path.display(),
                    v.len(),
                    network.n_terms()
                );
            }
            Some(v)
        }
        None => None,
    };
    if let Some(sched) = &args.c_sched {
        if sched.len() != network.depth() {
            bail!(
                "--c-sched needs {} values (c^(2)..c^(T+1)) for this network",
                network.depth()
            );
        }
    }

    let mut rng = StreamRng::new(args.common.seed, 0);
    let docs = generate_documents(
        &network,
        args.c_sched.as_deref(),
        args.docs,
        args.top_m.min(network.n_terms()),
        &mut rng,
    )
    .context("simulating documents")?;

    let sched_echo = match &args.c_sched {
        Some(s) => join_list(s),
        None => network
            .c_medians
            .as_ref()
            .map_or_else(|| "-".to_string(), |m| format!("medians:{}", join_list(m))),
    };
    let echo = echo_lines(
        "generate",
        &[
            ("model-in", display_path(&args.model_in)),
            ("vocab", display_opt_path(args.vocab.as_deref())),
            ("docs", args.docs.to_string()),
            ("top-m", args.top_m.to_string()),
            ("c-sched", sched_echo),
            ("counts-out", display_opt_path(args.counts_out.as_deref())),
            ("seed", args.common.seed.to_string()),
            ("workers", args.common.workers.to_string()),
        ],
    );
    let mut out = Report::new(&echo);
    out.comment("per document: expected token total, then `term:rate` ranked by rate");
    for (j, doc) in docs.iter().enumerate() {
        let expected: f64 = doc.rates.iter().sum();
        let realized: u64 = doc.counts.iter().map(|&(_, c)| u64::from(c)).sum();
        let ranked = doc
            .top_terms
            .iter()
            .map(|&(v, w)| format!("{}:{w}", term_name(vocab.as_ref(), v)))
            .collect::<Vec<_>>()
            .join(",");
        out.push(format!("doc={j} expected-tokens={expected} tokens={realized} top={ranked}"));
    }
    let to_file = args.report_out.as_os_str() != "-";
    out.write(&args.report_out)?;

    if let Some(path) = &args.counts_out {
        let count_docs: Vec<Vec<(u32, u32)>> = docs.iter().map(|d| d.counts.clone()).collect();
        let matrix = CountMatrix::from_docs(network.n_terms(), count_docs)
            .context("assembling the simulated counts")?;
        std::fs::write(path, write_bow(&matrix))
            .with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {} ({} documents, {} tokens)", path.display(), matrix.n_docs(), matrix.total());
    }
    if to_file {
        println!("wrote {}", args.report_out.display());
    }
    Ok(())
}
