//! `pgbn eval`: mask each document's tokens into a training and a held-out
//! share, infer on the training share, and report per-held-out-word
//! perplexity.

use anyhow::{bail, Context, Result};
use pgbn_core::corpus::mask_tokens;
use pgbn_core::eval::{heldout_perplexity, HeldoutMethod};
use pgbn_core::model::Hyperparams;
use pgbn_core::StreamRng;

use crate::args::EvalArgs;
use crate::io::{display_path, echo_lines, load_corpus, load_network, Report};

pub fn run(args: EvalArgs) -> Result<()> {
    if !(args.train_fraction > 0.0 && args.train_fraction < 1.0) {
        bail!("--train-fraction must lie strictly between 0 and 1");
    }
    if args.thin == 0 {
        bail!("--thin must be at least 1");
    }
    let samples = args.collect / args.thin;
    if samples == 0 {
        bail!("--collect/--thin gives no samples; raise --collect or lower --thin");
    }
    let corpus = load_corpus(&args.corpus)?;
    let loaded = load_network(&args.model_in)?;
    if corpus.n_terms() != loaded.network.n_terms() {
        bail!(
            "corpus has {} terms but the network was trained on {}",
            corpus.n_terms(),
            loaded.network.n_terms()
        );
    }
    let hyper = args.prior.apply(loaded.hyper.unwrap_or_else(Hyperparams::default));
    hyper.validate().context("checking hyperparameters")?;

    let method = if args.frozen_phi {
        HeldoutMethod::Frozen { burn: args.burn, samples }
    } else {
        HeldoutMethod::Resample { burn: args.burn, samples, thin: args.thin }
    };

    let mut rng = StreamRng::new(args.common.seed, 0);
    let mask = mask_tokens(&corpus, args.train_fraction, &mut rng)
        .context("masking the corpus")?;
    let report = heldout_perplexity(
        &mask,
        &loaded.network,
        &hyper,
        &method,
        &args.sampler.options(),
        &mut rng,
    )
    .context("scoring the held-out tokens")?;

    let echo = echo_lines(
        "eval",
        &[
            ("corpus", display_path(&args.corpus)),
            ("model-in", display_path(&args.model_in)),
            ("train-fraction", args.train_fraction.to_string()),
            ("burn", args.burn.to_string()),
            ("collect", args.collect.to_string()),
            ("thin", args.thin.to_string()),
            ("frozen-phi", args.frozen_phi.to_string()),
            ("sampler", args.sampler.name().to_string()),
            ("eta", crate::io::join_list(&hyper.eta)),
            ("a0", hyper.a0.to_string()),
            ("b0", hyper.b0.to_string()),
            ("e0", hyper.e0.to_string()),
            ("f0", hyper.f0.to_string()),
            ("seed", args.common.seed.to_string()),
            ("workers", args.common.workers.to_string()),
        ],
    );
    let mut out = Report::new(&echo);
    out.push(format!(
        "perplexity={} heldout-tokens={} train-tokens={} samples={} floored-cells={}",
        report.perplexity,
        report.token_count,
        mask.train.total(),
        report.samples_used,
        report.floored_cells
    ));
    for (j, ll) in report.doc_log_liks.iter().enumerate() {
        out.push(format!("doc={j} heldout={} loglik={ll}", mask.heldout.doc_total(j)));
    }
    let to_file = args.report_out.as_os_str() != "-";
    out.write(&args.report_out)?;
    if to_file {
        println!(
            "perplexity={} heldout-tokens={} samples={}",
            report.perplexity, report.token_count, report.samples_used
        );
        println!("wrote {}", args.report_out.display());
    }
    Ok(())
}
