//! `pgbn topics`: project every factor of every layer down to a term
//! distribution and export ranked term lists.

use anyhow::{bail, Context, Result};
use pgbn_core::eval::{project_topic, top_terms};

use crate::args::TopicsArgs;
use crate::io::{
    display_opt_path, display_path, echo_lines, load_network, load_vocab, term_name, Report,
};

pub fn run(args: TopicsArgs) -> Result<()> {
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
    let layers: Vec<usize> = match args.layer {
        Some(t) => {
            if t == 0 || t > network.depth() {
                bail!("--layer must lie in 1..={}", network.depth());
            }
            vec![t]
        }
        None => (1..=network.depth()).collect(),
    };
    let echo = echo_lines(
        "topics",
        &[
            ("model-in", display_path(&args.model_in)),
            ("vocab", display_opt_path(args.vocab.as_deref())),
            ("top-m", args.top_m.to_string()),
            (
                "layer",
                args.layer.map_or_else(|| "all".to_string(), |t| t.to_string()),
            ),
            ("seed", args.common.seed.to_string()),
            ("workers", args.common.workers.to_string()),
        ],
    );
    let mut out = Report::new(&echo);
    out.comment("factors ranked within each layer by prior mean activation");

    // Weight of each factor: push the top-layer weights down the stack;
    // at layer t the vector phi^(t+1)...phi^(T) r gives the prior mean
    // activation of each factor.
    let mut weights: Vec<Vec<f64>> = vec![Vec::new(); network.depth() + 1];
    weights[network.depth()] = network.r.clone();
    for t in (1..network.depth()).rev() {
        let phi_above = &network.phi[t];
        let above = weights[t + 1].clone();
        let mut w = vec![0.0; phi_above.rows()];
        for (k, col) in phi_above.cols_iter().enumerate() {
            let s = above[k];
            if s > 0.0 {
                for (o, &v) in w.iter_mut().zip(col) {
                    *o += v * s;
                }
            }
        }
        weights[t] = w;
    }

    let m = args.top_m.min(network.n_terms());
    for &t in &layers {
        let order = top_terms(&weights[t], weights[t].len());
        for (rank, &(k, weight)) in order.iter().enumerate() {
            let dist = project_topic(&network, t, k)
                .context("projecting a factor to the vocabulary")?;
            let terms = top_terms(&dist, m)
                .into_iter()
                .map(|(v, _)| term_name(vocab.as_ref(), v))
                .collect::<Vec<_>>()
                .join(",");
            out.push(format!(
                "rank={} layer={t} factor={k} weight={weight} terms={terms}",
                rank + 1
            ));
        }
    }
    let to_file = args.report_out.as_os_str() != "-";
    out.write(&args.report_out)?;
    if to_file {
        println!("wrote {}", args.report_out.display());
    }
    Ok(())
}
