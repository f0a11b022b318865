//! Held-out evaluation, feature extraction, and simulation on top of
//! trained networks.
//!
//! Held-out perplexity follows the usual token-split protocol: documents
//! are partitioned into a training and a held-out portion, a sampler runs
//! on the training portion, and collected posterior samples of the
//! first-layer factorization score the held-out tokens. Two sampler
//! flavours are offered: `Resample` reruns the full chain (loadings and
//! weights move), `Frozen` keeps the network fixed and runs cheap
//! per-document chains over the activations only.

use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{CountMatrix, HeldoutMask};
use crate::count_dist::{
    multinomial_split_into, sample_crt, sample_gamma, sample_poisson, GAMMA_FLOOR,
};
use crate::error::{Error, Result};
use crate::gibbs::{iteration, sample_c_t, sample_layer1, sample_p2, SamplerOptions};
use crate::mat::Mat;
use crate::math;
use crate::model::{refresh_p_col, Hyperparams, LatentState, Network, PosteriorSummary};
use crate::rng::StreamRng;

/// Probability floor applied to predictive cell probabilities before
/// taking logs.
pub const PROB_FLOOR: f64 = 1e-300;

/// How held-out documents are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeldoutMethod {
    /// Run the full Gibbs chain on the training tokens, warm-started from
    /// the given network, and collect `samples` posterior samples spaced
    /// `thin` sweeps apart after `burn` sweeps.
    Resample { burn: usize, samples: usize, thin: usize },
    /// Keep the network frozen and run an independent activation chain per
    /// document, collecting one sample per sweep after `burn` sweeps.
    Frozen { burn: usize, samples: usize },
}

impl Default for HeldoutMethod {
    fn default() -> Self {
        HeldoutMethod::Resample { burn: 200, samples: 100, thin: 1 }
    }
}

/// Outcome of a held-out evaluation.
#[derive(Debug, Clone)]
pub struct PerplexityReport {
    /// `exp(-(1/N) sum y ln p)` over held-out cells.
    pub perplexity: f64,
    /// Held-out token count `N`.
    pub token_count: u64,
    /// Posterior samples averaged into the predictive probabilities.
    pub samples_used: usize,
    /// Cells whose predictive probability hit [`PROB_FLOOR`]; a nonzero
    /// value signals numerical trouble, not a modeling result.
    pub floored_cells: usize,
    /// Per-document held-out log likelihood (zero for documents with no
    /// held-out tokens).
    pub doc_log_liks: Vec<f64>,
}

/// Turn accumulated per-cell numerators and per-document denominators into
/// a perplexity. `numer[j][i]` accumulates the unnormalized predictive
/// weight of held-out cell `i` of document `j` (aligned with
/// `heldout.doc(j)`) across `samples_used` samples; `denom[j]` accumulates
/// the matching normalizer, summed over the same samples.
pub fn perplexity_from_samples(
    heldout: &CountMatrix,
    numer: &[Vec<f64>],
    denom: &[f64],
    samples_used: usize,
) -> Result<PerplexityReport> {
    if numer.len() != heldout.n_docs() || denom.len() != heldout.n_docs() {
        return Err(Error::DimensionMismatch("accumulators vs held-out documents"));
    }
    let mut token_count = 0u64;
    let mut floored = 0usize;
    let mut total_ll = 0.0;
    let mut doc_lls = vec![0.0; heldout.n_docs()];
    for j in 0..heldout.n_docs() {
        let cells = heldout.doc(j);
        if cells.len() != numer[j].len() {
            return Err(Error::DimensionMismatch("accumulator cells vs held-out cells"));
        }
        if cells.is_empty() {
            continue;
        }
        if !(denom[j] > 0.0) || !denom[j].is_finite() {
            return Err(Error::InvalidParameter("held-out normalizer must be positive"));
        }
        let mut ll = 0.0;
        for (&(_, y), &s) in cells.iter().zip(&numer[j]) {
            let mut p = s / denom[j];
            if !(p > PROB_FLOOR) {
                p = PROB_FLOOR;
                floored += 1;
            }
            ll += f64::from(y) * math::ln(p);
            token_count += u64::from(y);
        }
        doc_lls[j] = ll;
        total_ll += ll;
    }
    let perplexity = if token_count == 0 {
        1.0
    } else {
        math::exp(-total_ll / token_count as f64)
    };
    Ok(PerplexityReport {
        perplexity,
        token_count,
        samples_used,
        floored_cells: floored,
        doc_log_liks: doc_lls,
    })
}

/// A per-document activation chain under a frozen network: the document's
/// counts are repeatedly split, pushed up through table draws, and the
/// activations and scales redrawn from their conditionals.
struct DocChain {
    /// Sparse first-layer counts `(term, count)`.
    counts: Vec<(u32, u32)>,
    /// `m[t-1][k]`: counts entering layer `t`.
    m: Vec<Vec<u32>>,
    /// `x_up[t-1][k]`: table counts leaving layer `t`.
    x_up: Vec<Vec<u32>>,
    theta: Vec<Vec<f64>>,
    /// `c[t-2] = c^(t)` for `t = 2..=T+1`.
    c: Vec<f64>,
    /// `p[t-1] = p^(t)` for `t = 1..=T+1`.
    p: Vec<f64>,
}

impl DocChain {
    fn new(doc: &[(u32, u32)], network: &Network) -> Self {
        let depth = network.depth();
        let mut chain = DocChain {
            counts: doc.to_vec(),
            m: (1..=depth).map(|t| vec![0u32; network.width(t)]).collect(),
            x_up: (1..=depth).map(|t| vec![0u32; network.width(t)]).collect(),
            theta: (1..=depth).map(|t| vec![1.0; network.width(t)]).collect(),
            c: vec![1.0; depth],
            p: vec![0.0; depth + 1],
        };
        refresh_p_col(&chain.c, &mut chain.p);
        chain
    }

    /// Gamma shapes seen by layer `t`: loadings above times activations
    /// above, or the top weights, floored for degenerate factors.
    fn shapes(&self, network: &Network, t: usize, out: &mut [f64]) {
        if t == network.depth() {
            out.copy_from_slice(&network.r);
        } else {
            network.shape_for_layer(t, Some(&self.theta[t]), out);
        }
        for o in out.iter_mut() {
            if *o < GAMMA_FLOOR {
                *o = GAMMA_FLOOR;
            }
        }
    }

    fn sweep(&mut self, network: &Network, hyper: &Hyperparams, rng: &mut StreamRng) -> Result<()> {
        let depth = network.depth();
        let mut weights = vec![0.0; network.widths.iter().skip(1).copied().max().unwrap_or(1)];
        let mut parts = vec![0u64; weights.len()];
        let mut shapes = vec![0.0; weights.len()];
        // Upward: split, then tables, layer by layer.
        for t in 1..=depth {
            let k_t = network.width(t);
            self.m[t - 1].fill(0);
            let phi = &network.phi[t - 1];
            if t == 1 {
                for &(v, x) in &self.counts {
                    for k in 0..k_t {
                        weights[k] = phi.at(v as usize, k) * self.theta[0][k];
                    }
                    multinomial_split_into(u64::from(x), &weights[..k_t], &mut parts[..k_t], rng)?;
                    for k in 0..k_t {
                        self.m[0][k] += parts[k] as u32;
                    }
                }
            } else {
                for v in 0..self.x_up[t - 2].len() {
                    let x = self.x_up[t - 2][v];
                    if x == 0 {
                        continue;
                    }
                    for k in 0..k_t {
                        weights[k] = phi.at(v, k) * self.theta[t - 1][k];
                    }
                    multinomial_split_into(u64::from(x), &weights[..k_t], &mut parts[..k_t], rng)?;
                    for k in 0..k_t {
                        self.m[t - 1][k] += parts[k] as u32;
                    }
                }
            }
            self.shapes(network, t, &mut shapes[..k_t]);
            for k in 0..k_t {
                self.x_up[t - 1][k] =
                    sample_crt(u64::from(self.m[t - 1][k]), shapes[k], rng)? as u32;
            }
        }
        // Scales.
        let m_total: u32 = self.m[0].iter().sum();
        let above_total = if depth >= 2 {
            self.theta[1].iter().sum()
        } else {
            network.r.iter().sum()
        };
        let p2 = sample_p2(f64::from(m_total), above_total, hyper.a0, hyper.b0, rng)?;
        self.c[0] = (1.0 - p2) / p2;
        for t in 3..=depth + 1 {
            let upper = if t == depth + 1 {
                network.r.iter().sum()
            } else {
                self.theta[t - 1].iter().sum()
            };
            let lower: f64 = self.theta[t - 2].iter().sum();
            self.c[t - 2] = sample_c_t(upper, lower, hyper.e0, hyper.f0, rng)?;
        }
        refresh_p_col(&self.c, &mut self.p);
        // Downward: activations, top layer first.
        for t in (1..=depth).rev() {
            let k_t = network.width(t);
            self.shapes(network, t, &mut shapes[..k_t]);
            let rate = self.c[t - 1] - math::ln_1p(-self.p[t - 1]);
            for k in 0..k_t {
                let a = (shapes[k] + f64::from(self.m[t - 1][k])).max(GAMMA_FLOOR);
                self.theta[t - 1][k] = sample_gamma(a, 1.0 / rate, rng)?;
            }
        }
        Ok(())
    }
}

/// Options for [`extract_features`].
#[derive(Debug, Clone, Copy)]
pub struct FeatureOptions {
    pub burn: usize,
    pub samples: usize,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions { burn: 100, samples: 100 }
    }
}

/// Posterior-mean first-layer activations for every document of `corpus`
/// under the frozen `network`, via independent per-document chains.
/// Documents run in parallel when the `parallel` feature is on; results are
/// identical either way.
pub fn extract_features(
    corpus: &CountMatrix,
    network: &Network,
    hyper: &Hyperparams,
    opts: &FeatureOptions,
    rng: &mut StreamRng,
) -> Result<PosteriorSummary> {
    network.validate()?;
    hyper.validate()?;
    if corpus.n_terms() != network.n_terms() {
        return Err(Error::DimensionMismatch("corpus vocabulary vs network"));
    }
    if opts.samples == 0 {
        return Err(Error::InvalidParameter("feature extraction needs at least one sample"));
    }
    let k1 = network.width(1);
    let n_docs = corpus.n_docs();
    let base = rng.fork();
    let run_doc = |j: usize| -> Result<Vec<f64>> {
        let mut sub = base.substream(0, j as u64);
        let mut chain = DocChain::new(corpus.doc(j), network);
        let mut mean = vec![0.0; k1];
        for _ in 0..opts.burn {
            chain.sweep(network, hyper, &mut sub)?;
        }
        for _ in 0..opts.samples {
            chain.sweep(network, hyper, &mut sub)?;
            for (m, &th) in mean.iter_mut().zip(&chain.theta[0]) {
                *m += th;
            }
        }
        for m in mean.iter_mut() {
            *m /= opts.samples as f64;
        }
        Ok(mean)
    };
    #[cfg(feature = "parallel")]
    let columns: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..n_docs).into_par_iter().map(run_doc).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let columns: Vec<Vec<f64>> = (0..n_docs).map(run_doc).collect::<Result<_>>()?;
    let mut theta1_mean = Mat::zeros(k1, n_docs);
    let mut feature_props = Mat::zeros(k1, n_docs);
    let mut empty_docs = Vec::new();
    for (j, col) in columns.iter().enumerate() {
        theta1_mean.col_mut(j).copy_from_slice(col);
        let props = feature_props.col_mut(j);
        if corpus.doc_total(j) == 0 {
            empty_docs.push(j);
            props.fill(1.0 / k1 as f64);
        } else {
            let total: f64 = col.iter().sum();
            if total > 0.0 {
                for (p, &v) in props.iter_mut().zip(col) {
                    *p = v / total;
                }
            } else {
                props.fill(1.0 / k1 as f64);
            }
        }
    }
    Ok(PosteriorSummary {
        theta1_mean,
        feature_props,
        phi: network.phi.clone(),
        sample_count: opts.samples,
        empty_docs,
    })
}

/// Held-out perplexity of `mask.heldout` given `mask.train`, under
/// `network` and the chosen method. See [`HeldoutMethod`].
pub fn heldout_perplexity(
    mask: &HeldoutMask,
    network: &Network,
    hyper: &Hyperparams,
    method: &HeldoutMethod,
    sampler: &SamplerOptions,
    rng: &mut StreamRng,
) -> Result<PerplexityReport> {
    network.validate()?;
    hyper.validate()?;
    if mask.train.n_terms() != network.n_terms() {
        return Err(Error::DimensionMismatch("corpus vocabulary vs network"));
    }
    if mask.train.n_docs() != mask.heldout.n_docs() {
        return Err(Error::DimensionMismatch("train vs held-out documents"));
    }
    let n_docs = mask.train.n_docs();
    let mut numer: Vec<Vec<f64>> =
        (0..n_docs).map(|j| vec![0.0; mask.heldout.doc(j).len()]).collect();
    let mut denom = vec![0.0; n_docs];
    let samples_used = match *method {
        HeldoutMethod::Resample { samples, .. } | HeldoutMethod::Frozen { samples, .. } => samples,
    };
    match *method {
        HeldoutMethod::Resample { burn, samples, thin } => {
            if samples == 0 || thin == 0 {
                return Err(Error::InvalidParameter(
                    "held-out evaluation needs samples >= 1 and thin >= 1",
                ));
            }
            let mut net = network.clone();
            let mut state = LatentState::init(&mask.train, &net, rng)?;
            for _ in 0..burn {
                iteration(&mut state, &mut net, hyper, sampler, rng)?;
            }
            for _ in 0..samples {
                for _ in 0..thin {
                    iteration(&mut state, &mut net, hyper, sampler, rng)?;
                }
                let (phi1, theta1) = sample_layer1(&state, &net, hyper.eta_for(1), rng)?;
                accumulate_sample(&mask.heldout, &phi1, &theta1, &mut numer, &mut denom);
            }
        }
        HeldoutMethod::Frozen { burn, samples } => {
            if samples == 0 {
                return Err(Error::InvalidParameter("held-out evaluation needs samples >= 1"));
            }
            let base = rng.fork();
            let k1 = network.width(1);
            let run_doc = |j: usize, cell_acc: &mut Vec<f64>, den: &mut f64| -> Result<()> {
                let mut sub = base.substream(0, j as u64);
                let mut chain = DocChain::new(mask.train.doc(j), network);
                for _ in 0..burn {
                    chain.sweep(network, hyper, &mut sub)?;
                }
                let phi1 = &network.phi[0];
                for _ in 0..samples {
                    chain.sweep(network, hyper, &mut sub)?;
                    for (acc, &(v, _)) in cell_acc.iter_mut().zip(mask.heldout.doc(j)) {
                        let mut s = 0.0;
                        for k in 0..k1 {
                            s += phi1.at(v as usize, k) * chain.theta[0][k];
                        }
                        *acc += s;
                    }
                    *den += chain.theta[0].iter().sum::<f64>();
                }
                Ok(())
            };
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                numer
                    .par_iter_mut()
                    .zip(denom.par_iter_mut())
                    .enumerate()
                    .try_for_each(|(j, (cells, den))| run_doc(j, cells, den))?;
            }
            #[cfg(not(feature = "parallel"))]
            for (j, (cells, den)) in numer.iter_mut().zip(denom.iter_mut()).enumerate() {
                run_doc(j, cells, den)?;
            }
        }
    }
    perplexity_from_samples(&mask.heldout, &numer, &denom, samples_used)
}

/// Fold one first-layer sample into the held-out accumulators. The
/// normalizer per document is the activation column sum, because loading
/// columns each sum to one.
fn accumulate_sample(
    heldout: &CountMatrix,
    phi1: &Mat,
    theta1: &Mat,
    numer: &mut [Vec<f64>],
    denom: &mut [f64],
) {
    let k1 = phi1.cols();
    for j in 0..heldout.n_docs() {
        let th = theta1.col(j);
        for (acc, &(v, _)) in numer[j].iter_mut().zip(heldout.doc(j)) {
            let mut s = 0.0;
            for k in 0..k1 {
                s += phi1.at(v as usize, k) * th[k];
            }
            *acc += s;
        }
        denom[j] += th.iter().sum::<f64>();
    }
}

/// Project factor `k` of layer `t` down to a distribution over terms by
/// applying the loading matrices below it.
pub fn project_topic(network: &Network, t: usize, k: usize) -> Result<Vec<f64>> {
    if t == 0 || t > network.depth() {
        return Err(Error::InvalidParameter("layer index out of range"));
    }
    if k >= network.width(t) {
        return Err(Error::InvalidParameter("factor index out of range"));
    }
    let mut v = vec![0.0; network.width(t)];
    v[k] = 1.0;
    for s in (1..=t).rev() {
        let phi = &network.phi[s - 1];
        let mut out = vec![0.0; phi.rows()];
        for (kk, col) in phi.cols_iter().enumerate() {
            let w = v[kk];
            if w > 0.0 {
                for (o, &p) in out.iter_mut().zip(col) {
                    *o += p * w;
                }
            }
        }
        v = out;
    }
    Ok(v)
}

/// The `m` heaviest entries of a distribution, weight-descending with ties
/// broken by index.
pub fn top_terms(dist: &[f64], m: usize) -> Vec<(usize, f64)> {
    let mut order: Vec<usize> = (0..dist.len()).collect();
    order.sort_by(|&a, &b| {
        dist[b].partial_cmp(&dist[a]).expect("weights are ordered").then(a.cmp(&b))
    });
    order.into_iter().take(m).map(|i| (i, dist[i])).collect()
}

/// One simulated document: its term intensity profile, the heaviest terms,
/// and one count realization.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedDocument {
    /// Expected count per term given the drawn activations: the length-`V`
    /// vector obtained by pushing the first-layer activations through the
    /// first loading matrix.
    pub rates: Vec<f64>,
    /// The heaviest `top_m` terms of `rates`, weight-descending with ties
    /// broken by ascending term index.
    pub top_terms: Vec<(usize, f64)>,
    /// Sparse Poisson draw `(term, count)` at the document's rates, count
    /// ascending by term index, zeros omitted.
    pub counts: Vec<(u32, u32)>,
}

/// Simulate documents from a trained network: activations are drawn down
/// the stack starting from the stored top-layer weights, then every
/// document reports its term rates, its `top_m` heaviest terms, and one
/// Poisson count realization. Per-layer scales come from `c_sched`
/// (entry `t-2` holds `c^(t)` for `t = 2..=T+1`) when given, else from the
/// scale medians recorded at training time.
pub fn generate_documents(
    network: &Network,
    c_sched: Option<&[f64]>,
    n_docs: usize,
    top_m: usize,
    rng: &mut StreamRng,
) -> Result<Vec<SimulatedDocument>> {
    network.validate()?;
    let med;
    let sched = match c_sched {
        Some(s) => s,
        None => {
            med = network
                .c_medians
                .clone()
                .ok_or(Error::InvalidParameter("network records no scales; pass some"))?;
            &med
        }
    };
    let depth = network.depth();
    if sched.len() != depth {
        return Err(Error::DimensionMismatch("c_sched length vs depth"));
    }
    if !sched.iter().all(|&c| c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter("generation scales must be positive and finite"));
    }
    let n_terms = network.n_terms();
    let mut docs = Vec::with_capacity(n_docs);
    let mut shape: Vec<f64> = Vec::new();
    let mut theta: Vec<f64> = Vec::new();
    for _ in 0..n_docs {
        // Activations flow top-down; layer t uses scale 1/c^(t+1), which at
        // the bottom equals p^(2)/(1 - p^(2)) by the c/p tie.
        for t in (1..=depth).rev() {
            let scale = 1.0 / sched[t - 1];
            shape.clear();
            shape.resize(network.width(t), 0.0);
            if t == depth {
                shape.copy_from_slice(&network.r);
            } else {
                let above = core::mem::take(&mut theta);
                network.shape_for_layer(t, Some(&above), &mut shape);
            }
            theta.clear();
            for &s in &shape {
                theta.push(sample_gamma(s, scale, rng)?);
            }
        }
        let phi1 = &network.phi[0];
        let mut rates = vec![0.0; n_terms];
        for (k, col) in phi1.cols_iter().enumerate() {
            let w = theta[k];
            if w > 0.0 {
                for (o, &p) in rates.iter_mut().zip(col) {
                    *o += p * w;
                }
            }
        }
        let mut counts = Vec::new();
        for (v, &rate) in rates.iter().enumerate() {
            let x = sample_poisson(rate, rng)?;
            if x > 0 {
                counts.push((v as u32, x as u32));
            }
        }
        docs.push(SimulatedDocument { top_terms: top_terms(&rates, top_m), rates, counts });
    }
    Ok(docs)
}

/// Empirical mean and variance-to-mean ratio of a bottom-layer count under
/// a depth-`depth` chain with a single factor per layer and identity
/// loadings: the top activation is `Gam(r, 1)`, each deeper activation is
/// gamma with the one above as shape and unit scale, the bottom one gets
/// scale `p2/(1-p2)`, and the observed count is Poisson at the bottom
/// activation. Closed forms for comparison: mean `r*p2/(1-p2)`, ratio
/// `(1+(depth-1)*p2)/(1-p2)`.
pub fn vmr_diagnostic(
    depth: usize,
    p2: f64,
    r: f64,
    n_draws: usize,
    rng: &mut StreamRng,
) -> Result<(f64, f64)> {
    if depth == 0 {
        return Err(Error::InvalidParameter("chain depth must be at least 1"));
    }
    if !(p2 > 0.0 && p2 < 1.0) {
        return Err(Error::InvalidParameter("p2 must lie strictly inside (0, 1)"));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter("r must be positive and finite"));
    }
    if n_draws < 2 {
        return Err(Error::InvalidParameter("need at least two draws"));
    }
    let bottom_scale = p2 / (1.0 - p2);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_draws {
        let mut shape = r;
        for _ in 0..depth.saturating_sub(1) {
            shape = sample_gamma(shape, 1.0, rng)?;
        }
        let lambda = sample_gamma(shape, bottom_scale, rng)?;
        let x = sample_poisson(lambda, rng)? as f64;
        sum += x;
        sum_sq += x * x;
    }
    let n = n_draws as f64;
    let mean = sum / n;
    let var = (sum_sq - n * mean * mean) / (n - 1.0);
    if mean <= 0.0 {
        return Err(Error::InvalidParameter("all draws were zero; increase r or n_draws"));
    }
    Ok((mean, var / mean))
}

/// Dispersion summary of a count corpus: document totals and the
/// variance-to-mean ratio of each term's counts across documents, averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionSummary {
    pub doc_total_mean: f64,
    pub doc_total_vmr: f64,
    /// Mean over terms (with nonzero mean) of the per-term
    /// variance-to-mean ratio across documents.
    pub term_vmr_mean: f64,
}

/// Compute [`DispersionSummary`] for `corpus`.
pub fn count_dispersion(corpus: &CountMatrix) -> DispersionSummary {
    let n_docs = corpus.n_docs().max(1) as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for j in 0..corpus.n_docs() {
        let t = corpus.doc_total(j) as f64;
        sum += t;
        sum_sq += t * t;
    }
    let mean = sum / n_docs;
    let var = (sum_sq / n_docs - mean * mean).max(0.0);
    let doc_total_vmr = if mean > 0.0 { var / mean } else { 0.0 };
    // Per-term moments across documents.
    let v = corpus.n_terms();
    let mut t_sum = vec![0.0f64; v];
    let mut t_sq = vec![0.0f64; v];
    for j in 0..corpus.n_docs() {
        for &(term, c) in corpus.doc(j) {
            let c = f64::from(c);
            t_sum[term as usize] += c;
            t_sq[term as usize] += c * c;
        }
    }
    let mut vmr_total = 0.0;
    let mut live_terms = 0usize;
    for term in 0..v {
        let m = t_sum[term] / n_docs;
        if m > 0.0 {
            let var = (t_sq[term] / n_docs - m * m).max(0.0);
            vmr_total += var / m;
            live_terms += 1;
        }
    }
    DispersionSummary {
        doc_total_mean: mean,
        doc_total_vmr,
        term_vmr_mean: if live_terms > 0 { vmr_total / live_terms as f64 } else { 0.0 },
    }
}
