//! Greedy layer-wise training with automatic factor pruning.
//!
//! Depths are trained one at a time. The first layer starts at its width
//! budget; after its burn-in, factors that carry no counts are pruned in a
//! single step, fixing the inferred width. Each subsequent layer is stacked
//! on top with a width budget equal to the width inferred below it, warm
//! starting from the previous depth's chain, and is pruned the same way at
//! the end of its own burn-in. A snapshot network is emitted per depth, so
//! one training run yields a whole family of models of increasing depth.

use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::CountMatrix;
use crate::count_dist::{sample_dirichlet_into, sample_gamma};
use crate::error::{Error, Result};
use crate::gibbs::{
    grow_up, iteration, layer1_mean_phi, sample_layer1, sample_r, IterationReport,
    SamplerOptions,
};
use crate::mat::Mat;
use crate::model::{Hyperparams, LatentState, Network, NetworkKind};
use crate::rng::StreamRng;

/// Training configuration beyond the model hyper-parameters.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrainOptions {
    pub sampler: SamplerOptions,
    /// Which posterior summary the emitted networks carry.
    pub kind: NetworkKind,
}

/// Progress notifications from [`train_layerwise`]. The core never prints;
/// callers decide what to do with these.
#[derive(Debug, Clone, Copy)]
pub enum ProgressEvent<'a> {
    /// A sweep finished. `iter` counts from 1 within the depth and runs
    /// over burn-in and collection; `burning` distinguishes the two.
    Sweep {
        depth: usize,
        iter: usize,
        total: usize,
        burning: bool,
        k_top: usize,
        report: &'a IterationReport,
    },
    /// The one-time prune at the end of a depth's burn-in.
    Pruned { depth: usize, removed: usize, k_top: usize },
    /// A depth finished and its network snapshot was emitted.
    DepthDone { depth: usize, widths: &'a [usize] },
}

/// Per-depth training record.
#[derive(Debug, Clone)]
pub struct DepthReport {
    pub depth: usize,
    /// Layer widths `[V, K_1, ..., K_T]` after pruning.
    pub widths: Vec<usize>,
    /// Top-layer factors removed by the prune step.
    pub pruned: usize,
    /// One report per sweep, burn-in first.
    pub sweeps: Vec<IterationReport>,
}

/// Everything a layer-wise run produces: one network per depth
/// (`networks[d - 1]` has depth `d`) and the matching training records.
#[derive(Debug, Clone)]
pub struct TrainedStack {
    pub networks: Vec<Network>,
    pub reports: Vec<DepthReport>,
}

impl TrainedStack {
    /// The deepest trained network.
    pub fn deepest(&self) -> &Network {
        self.networks.last().expect("training emits at least one network")
    }
}

/// Running accumulator for the mean-summary network of one depth.
struct MeanAccum {
    phi: Vec<Mat>,
    r: Vec<f64>,
    gamma0: f64,
    c0: f64,
    n: usize,
}

impl MeanAccum {
    fn new(network: &Network) -> Self {
        MeanAccum {
            phi: network
                .phi
                .iter()
                .map(|p| Mat::zeros(p.rows(), p.cols()))
                .collect(),
            r: vec![0.0; network.r.len()],
            gamma0: 0.0,
            c0: 0.0,
            n: 0,
        }
    }

    /// Fold in the current sweep. The first layer contributes its
    /// count-smoothed posterior mean rather than a fresh draw, which
    /// averages to the same place with less noise.
    fn push(&mut self, state: &LatentState, network: &Network, eta1: f64) {
        let phi1 = layer1_mean_phi(state, eta1);
        for (acc, v) in self.phi[0].data_mut().iter_mut().zip(phi1.data()) {
            *acc += v;
        }
        for t in 1..network.depth() {
            for (acc, v) in self.phi[t].data_mut().iter_mut().zip(network.phi[t].data()) {
                *acc += v;
            }
        }
        for (acc, v) in self.r.iter_mut().zip(&network.r) {
            *acc += v;
        }
        self.gamma0 += network.gamma0;
        self.c0 += network.c0;
        self.n += 1;
    }

    /// Finish the averages, renormalizing loading columns to keep them
    /// exactly stochastic.
    fn finish(mut self, template: &Network) -> Network {
        let n = self.n.max(1) as f64;
        for phi in self.phi.iter_mut() {
            for col in phi.cols_iter_mut() {
                let mut total = 0.0;
                for v in col.iter_mut() {
                    *v /= n;
                    total += *v;
                }
                if total > 0.0 {
                    for v in col.iter_mut() {
                        *v /= total;
                    }
                }
            }
        }
        Network {
            widths: template.widths.clone(),
            phi: self.phi,
            r: self.r.iter().map(|v| v / n).collect(),
            gamma0: self.gamma0 / n,
            c0: self.c0 / n,
            c_medians: None,
            kind: NetworkKind::RunningMean,
        }
    }
}

/// Median of a scratch slice (sorted in place); mean of the middle pair for
/// even lengths.
fn median_in_place(values: &mut [f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_unstable_by(|a, b| a.partial_cmp(b).expect("scale values are ordered"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Remove top-layer factors whose counts are all zero, resampling the top
/// weights under the narrowed prior. Keeps the largest-count factor when
/// every factor would otherwise go (an all-empty corpus). Returns how many
/// factors were removed.
fn prune_top(
    state: &mut LatentState,
    network: &mut Network,
    rng: &mut StreamRng,
) -> Result<usize> {
    let depth = network.depth();
    let m_top = &state.m[depth - 1];
    let k_top = m_top.rows();
    let totals: Vec<u64> = (0..k_top).map(|k| m_top.row_total(k)).collect();
    let mut keep: Vec<bool> = totals.iter().map(|&n| n > 0).collect();
    if keep.iter().all(|&k| !k) {
        let best = totals
            .iter()
            .enumerate()
            .max_by_key(|&(_, n)| n)
            .map(|(k, _)| k)
            .unwrap_or(0);
        keep[best] = true;
    }
    let removed = keep.iter().filter(|&&k| !k).count();
    if removed > 0 {
        // A factor with zero document counts also has zero table counts and
        // an all-zero split column, so dropping it removes no mass.
        network.phi[depth - 1].retain_cols(&keep);
        let mut it = keep.iter();
        network.r.retain(|_| *it.next().expect("keep covers r"));
        let new_k = k_top - removed;
        network.widths[depth] = new_k;
        state.m[depth - 1].retain_rows(&keep);
        state.x_up[depth - 1].retain_rows(&keep);
        state.theta[depth - 1].retain_rows(&keep);
        if depth >= 2 {
            state.split_phi[depth - 2].retain_cols(&keep);
        } else {
            state.term_topic.retain_cols(&keep);
            let mut it = keep.iter();
            state.topic_total.retain(|_| *it.next().expect("keep covers totals"));
            // Token factor indices shift down past the removed factors.
            let mut remap = vec![u32::MAX; k_top];
            let mut next = 0u32;
            for (k, &kept) in keep.iter().enumerate() {
                if kept {
                    remap[k] = next;
                    next += 1;
                }
            }
            for tok in state.tokens.iter_mut().flatten() {
                tok.topic = remap[tok.topic as usize];
                debug_assert!(tok.topic != u32::MAX, "token pointed at a pruned factor");
            }
        }
    }
    // The prior shape over each weight widened from gamma0 / K to
    // gamma0 / new_K; refresh the weights under the new conditional.
    let x_top = &state.x_up[depth - 1];
    let x_totals: Vec<u64> = (0..x_top.rows()).map(|k| x_top.row_total(k)).collect();
    let p_top: Vec<f64> = (0..state.n_docs()).map(|j| state.p(depth + 1, j)).collect();
    sample_r(&x_totals, network.gamma0, network.c0, &p_top, &mut network.r, rng)?;
    Ok(removed)
}

/// Build the starting network for depth one: the full width budget, flat
/// Dirichlet loadings, and unit weights and mass hyper-priors.
fn initial_network(
    n_terms: usize,
    hyper: &Hyperparams,
    rng: &mut StreamRng,
) -> Result<Network> {
    let k1 = hyper.k1_max;
    let mut phi1 = Mat::zeros(n_terms, k1);
    let conc = vec![hyper.eta_for(1); n_terms];
    for col in phi1.cols_iter_mut() {
        sample_dirichlet_into(&conc, col, rng)?;
    }
    let gamma0 = 1.0;
    let c0 = 1.0;
    let mut r = vec![0.0; k1];
    for v in r.iter_mut() {
        *v = sample_gamma(gamma0 / k1 as f64, 1.0 / c0, rng)?.max(1e-6);
    }
    Ok(Network {
        widths: vec![n_terms, k1],
        phi: vec![phi1],
        r,
        gamma0,
        c0,
        c_medians: None,
        kind: NetworkKind::LastSample,
    })
}

/// Stack a fresh top layer on `network` and extend `state` to match: the
/// new width budget equals the width inferred below, loadings start at flat
/// Dirichlet draws, activations at one, the new scale at one.
fn add_layer(
    state: &mut LatentState,
    network: &mut Network,
    hyper: &Hyperparams,
    rng: &mut StreamRng,
) -> Result<()> {
    let depth = network.depth();
    let k_below = network.width(depth);
    let n_docs = state.n_docs();
    let mut phi = Mat::zeros(k_below, k_below);
    let conc = vec![hyper.eta_for(depth + 1); k_below];
    for col in phi.cols_iter_mut() {
        sample_dirichlet_into(&conc, col, rng)?;
    }
    network.phi.push(phi);
    network.widths.push(k_below);
    for v in network.r.iter_mut() {
        *v = sample_gamma(network.gamma0 / k_below as f64, 1.0 / network.c0, rng)?.max(1e-6);
    }
    state.m.push(Mat::zeros_u32(k_below, n_docs));
    state.x_up.push(Mat::zeros_u32(k_below, n_docs));
    state.split_phi.push(Mat::zeros_u32(k_below, k_below));
    state.theta.push(Mat::filled(k_below, n_docs, 1.0));
    // The scale chains gain one level; the new entries start at one.
    let mut c_scale = Mat::zeros(depth + 1, n_docs);
    for j in 0..n_docs {
        let c_col = c_scale.col_mut(j);
        c_col[..depth].copy_from_slice(state.c_col(j));
        c_col[depth] = 1.0;
    }
    state.c_scale = c_scale;
    state.p_scale = Mat::zeros(depth + 2, n_docs);
    for j in 0..n_docs {
        state.refresh_p_chain(j);
    }
    grow_up(state, network, rng)?;
    Ok(())
}

/// Emit the snapshot network for the current depth. The first layer is
/// materialized from the token tallies (it is integrated out while the
/// chain runs); deeper loadings and the weights are the last samples.
fn snapshot(
    state: &LatentState,
    network: &Network,
    hyper: &Hyperparams,
    c_med: Vec<f64>,
    sampler: &SamplerOptions,
    rng: &mut StreamRng,
) -> Result<Network> {
    let mut snap = network.clone();
    if matches!(sampler.layer1, crate::gibbs::Layer1Mode::Collapsed) {
        let (phi1, _) = sample_layer1(state, network, hyper.eta_for(1), rng)?;
        snap.phi[0] = phi1;
    }
    snap.c_medians = Some(c_med);
    snap.kind = NetworkKind::LastSample;
    Ok(snap)
}

/// Train a stack of networks of depth `1..=hyper.t_max` on `corpus`.
///
/// The chain is carried across depths: when a layer is added, everything
/// below it keeps its state. Each depth runs `hyper.burn_for(depth)`
/// burn-in sweeps, prunes its top layer once, then runs
/// `hyper.collect_for(depth)` collection sweeps before emitting its
/// snapshot.
pub fn train_layerwise<F>(
    corpus: &CountMatrix,
    hyper: &Hyperparams,
    opts: &TrainOptions,
    rng: &mut StreamRng,
    progress: &mut F,
) -> Result<TrainedStack>
where
    F: FnMut(ProgressEvent<'_>),
{
    hyper.validate()?;
    if corpus.n_terms() == 0 {
        return Err(Error::InvalidParameter("corpus must have a vocabulary"));
    }
    let mut network = initial_network(corpus.n_terms(), hyper, rng)?;
    let mut state = LatentState::init(corpus, &network, rng)?;
    let mut networks = Vec::with_capacity(hyper.t_max);
    let mut reports = Vec::with_capacity(hyper.t_max);
    for depth in 1..=hyper.t_max {
        let burn = hyper.burn_for(depth);
        let collect = hyper.collect_for(depth);
        let total = burn + collect;
        let mut sweeps = Vec::with_capacity(total);
        for i in 1..=burn {
            let report = iteration(&mut state, &mut network, hyper, &opts.sampler, rng)?;
            progress(ProgressEvent::Sweep {
                depth,
                iter: i,
                total,
                burning: true,
                k_top: network.width(depth),
                report: &report,
            });
            sweeps.push(report);
        }
        let removed = prune_top(&mut state, &mut network, rng)?;
        progress(ProgressEvent::Pruned { depth, removed, k_top: network.width(depth) });
        let mut mean = matches!(opts.kind, NetworkKind::RunningMean)
            .then(|| MeanAccum::new(&network));
        // Per-sweep document medians of each scale, pooled by their median
        // at the end: a robust default for simulation.
        let mut c_meds: Vec<Vec<f64>> = vec![Vec::with_capacity(collect); depth];
        let mut scratch = vec![0.0; state.n_docs()];
        for i in 1..=collect {
            let report = iteration(&mut state, &mut network, hyper, &opts.sampler, rng)?;
            progress(ProgressEvent::Sweep {
                depth,
                iter: burn + i,
                total,
                burning: false,
                k_top: network.width(depth),
                report: &report,
            });
            sweeps.push(report);
            if let Some(acc) = mean.as_mut() {
                acc.push(&state, &network, hyper.eta_for(1));
            }
            for t in 2..=depth + 1 {
                for j in 0..state.n_docs() {
                    scratch[j] = state.c(t, j);
                }
                c_meds[t - 2].push(median_in_place(&mut scratch));
            }
        }
        let c_med: Vec<f64> =
            c_meds.iter_mut().map(|per_sweep| median_in_place(per_sweep)).collect();
        let emitted = match mean {
            Some(acc) => {
                let mut net = acc.finish(&network);
                net.c_medians = Some(c_med);
                net.validate()?;
                net
            }
            None => {
                let net = snapshot(&state, &network, hyper, c_med, &opts.sampler, rng)?;
                net.validate()?;
                net
            }
        };
        progress(ProgressEvent::DepthDone { depth, widths: &emitted.widths });
        networks.push(emitted);
        reports.push(DepthReport {
            depth,
            widths: network.widths.clone(),
            pruned: removed,
            sweeps,
        });
        if depth < hyper.t_max {
            add_layer(&mut state, &mut network, hyper, rng)?;
        }
    }
    Ok(TrainedStack { networks, reports })
}
