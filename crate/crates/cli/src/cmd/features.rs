//! `pgbn features`: posterior-mean factor-usage proportions per document,
//! written as tab-separated rows for downstream classifiers.

use anyhow::{bail, Context, Result};
use pgbn_core::eval::{extract_features, FeatureOptions};
use pgbn_core::model::Hyperparams;
use pgbn_core::StreamRng;

use crate::args::FeaturesArgs;
use crate::io::{display_path, echo_lines, join_list, load_corpus, load_network, Report};

pub fn run(args: FeaturesArgs) -> Result<()> {
    if args.collect == 0 {
        bail!("--collect must be at least 1");
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

    let opts = FeatureOptions { burn: args.burn, samples: args.collect };
    let mut rng = StreamRng::new(args.common.seed, 0);
    let summary = extract_features(&corpus, &loaded.network, &hyper, &opts, &mut rng)
        .context("extracting features")?;

    let echo = echo_lines(
        "features",
        &[
            ("corpus", display_path(&args.corpus)),
            ("model-in", display_path(&args.model_in)),
            ("burn", args.burn.to_string()),
            ("collect", args.collect.to_string()),
            ("eta", join_list(&hyper.eta)),
            ("a0", hyper.a0.to_string()),
            ("b0", hyper.b0.to_string()),
            ("e0", hyper.e0.to_string()),
            ("f0", hyper.f0.to_string()),
            ("seed", args.common.seed.to_string()),
            ("workers", args.common.workers.to_string()),
        ],
    );
    let k1 = summary.feature_props.rows();
    let mut out = Report::new(&echo);
    out.comment(&format!(
        "tab-separated; one row per document: doc index then {k1} factor-usage proportions"
    ));
    if !summary.empty_docs.is_empty() {
        out.comment(&format!(
            "empty documents given uniform features: {}",
            join_list(&summary.empty_docs)
        ));
    }
    for j in 0..summary.feature_props.cols() {
        let mut row = j.to_string();
        for &v in summary.feature_props.col(j) {
            row.push('\t');
            row.push_str(&v.to_string());
        }
        out.push(row);
    }
    let to_file = args.out.as_os_str() != "-";
    out.write(&args.out)?;
    if to_file {
        println!(
            "wrote {} ({} documents x {k1} factors, {} samples each)",
            args.out.display(),
            summary.feature_props.cols(),
            summary.sample_count
        );
    }
    Ok(())
}
