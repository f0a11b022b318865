//! Model containers: hyperparameters, the trained network (factor loadings
//! plus top-layer weights), the latent Gibbs state, posterior summaries, and
//! forward simulation of synthetic corpora.
//!
//! Layer conventions used throughout the crate: layer t has width `K_t`,
//! with `K_0 = V` terms at the bottom. `phi[t-1]` is the `K_{t-1} x K_t`
//! column-stochastic loading matrix of layer t. Activations `theta[t-1]`
//! are `K_t x J`. Scale parameters come in per-document chains: `p^(1)` is
//! the fixed bottom probability `1 - e^{-1}`, `p^(2)` pairs with
//! `c^(2) = (1-p^(2))/p^(2)`, and deeper layers carry gamma rates `c^(t)`
//! with derived probabilities `p^(t)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::count_dist::{multinomial_split_into, sample_gamma, sample_poisson};
use crate::error::{Error, Result};
use crate::corpus::CountMatrix;
use crate::mat::Mat;
use crate::math;
use crate::rng::StreamRng;

/// Tolerance for the column-stochastic check on loading matrices.
pub const COLUMN_SUM_TOL: f64 = 1e-10;

/// Bottom-layer scale probability: tokens are observed at unit exposure, so
/// `p^(1) = 1 - e^{-1}` and `-ln(1 - p^(1)) = 1`.
#[inline]
pub fn p_layer1() -> f64 {
    1.0 - math::exp(-1.0)
}

/// Prior and schedule settings shared by training, evaluation, and
/// simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// Dirichlet concentration per layer for loading columns; the last
    /// entry broadcasts to deeper layers.
    pub eta: Vec<f64>,
    /// Shape/rate pair of the top-weight mass prior and the beta prior on
    /// the second-layer probability.
    pub a0: f64,
    pub b0: f64,
    /// Shape/rate pair of the gamma priors on scale parameters.
    pub e0: f64,
    pub f0: f64,
    /// Width budget of the first layer.
    pub k1_max: usize,
    /// Depth budget.
    pub t_max: usize,
    /// Burn-in iterations per depth; the last entry broadcasts.
    pub b_iters: Vec<usize>,
    /// Collection iterations per depth; the last entry broadcasts.
    pub c_iters: Vec<usize>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            eta: vec![0.05],
            a0: 0.01,
            b0: 0.01,
            e0: 1.0,
            f0: 1.0,
            k1_max: 100,
            t_max: 1,
            b_iters: vec![500],
            c_iters: vec![500],
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if self.eta.is_empty() || !self.eta.iter().all(|&e| pos(e)) {
            return Err(Error::InvalidParameter("eta must be nonempty and positive"));
        }
        if !(pos(self.a0) && pos(self.b0) && pos(self.e0) && pos(self.f0)) {
            return Err(Error::InvalidParameter("a0, b0, e0, f0 must be positive and finite"));
        }
        if self.k1_max == 0 {
            return Err(Error::InvalidParameter("k1_max must be at least 1"));
        }
        if self.t_max == 0 {
            return Err(Error::InvalidParameter("t_max must be at least 1"));
        }
        if self.b_iters.is_empty() || self.c_iters.is_empty() {
            return Err(Error::InvalidParameter("iteration schedules must be nonempty"));
        }
        Ok(())
    }

    /// Dirichlet concentration for layer `t >= 1`.
    pub fn eta_for(&self, t: usize) -> f64 {
        debug_assert!(t >= 1);
        self.eta[(t - 1).min(self.eta.len() - 1)]
    }

    /// Burn-in iterations for depth `depth >= 1`.
    pub fn burn_for(&self, depth: usize) -> usize {
        self.b_iters[(depth - 1).min(self.b_iters.len() - 1)]
    }

    /// Collection iterations for depth `depth >= 1`.
    pub fn collect_for(&self, depth: usize) -> usize {
        self.c_iters[(depth - 1).min(self.c_iters.len() - 1)]
    }
}

/// Whether a stored network holds the final Gibbs sample or a running mean
/// over the collection window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NetworkKind {
    #[default]
    LastSample,
    RunningMean,
}

/// A trained (or constructed) network: loading matrices for every layer,
/// top-layer weights, and the global scale variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    /// `[K_0 = V, K_1, ..., K_T]`.
    pub widths: Vec<usize>,
    /// `phi[t-1]`: column-stochastic `K_{t-1} x K_t`.
    pub phi: Vec<Mat>,
    /// Top-layer weights, length `K_T`, all positive.
    pub r: Vec<f64>,
    pub gamma0: f64,
    pub c0: f64,
    /// Per-layer medians of the inferred document scales `c^(t)` for
    /// `t = 2..=T+1`, recorded at the end of training; used as default
    /// scales when simulating documents.
    pub c_medians: Option<Vec<f64>>,
    pub kind: NetworkKind,
}

impl Network {
    /// Number of layers `T`.
    pub fn depth(&self) -> usize {
        self.phi.len()
    }

    pub fn n_terms(&self) -> usize {
        self.widths[0]
    }

    /// Width `K_t` for `t in 0..=T`.
    pub fn width(&self, t: usize) -> usize {
        self.widths[t]
    }

    /// Check dimensional and stochastic invariants.
    pub fn validate(&self) -> Result<()> {
        if self.widths.len() != self.phi.len() + 1 {
            return Err(Error::DimensionMismatch("widths vs phi layers"));
        }
        if self.widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidParameter("layer widths must be positive"));
        }
        for (t, phi) in self.phi.iter().enumerate() {
            if phi.rows() != self.widths[t] || phi.cols() != self.widths[t + 1] {
                return Err(Error::DimensionMismatch("phi layer shape vs widths"));
            }
            for col in phi.cols_iter() {
                let mut sum = 0.0;
                for &v in col {
                    if !(v >= 0.0) || !v.is_finite() {
                        return Err(Error::InvalidParameter("phi entries must be nonnegative"));
                    }
                    sum += v;
                }
                if math::abs(sum - 1.0) > COLUMN_SUM_TOL {
                    return Err(Error::InvalidParameter("phi column must sum to one"));
                }
            }
        }
        if self.r.len() != *self.widths.last().expect("nonempty") {
            return Err(Error::DimensionMismatch("r length vs top width"));
        }
        if !self.r.iter().all(|&v| v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter("r entries must be positive and finite"));
        }
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite() && self.c0 > 0.0 && self.c0.is_finite())
        {
            return Err(Error::InvalidParameter("gamma0 and c0 must be positive and finite"));
        }
        if let Some(med) = &self.c_medians {
            if med.len() != self.depth() {
                return Err(Error::DimensionMismatch("c_medians length vs depth"));
            }
            if !med.iter().all(|&v| v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter("c medians must be positive and finite"));
            }
        }
        Ok(())
    }

    /// Gamma shapes for the activations of layer `t` in document `j`:
    /// `phi^(t+1) theta^(t+1)_j`, or the top weights when `t = T`.
    pub fn shape_for_layer(&self, t: usize, theta_above: Option<&[f64]>, out: &mut [f64]) {
        if t == self.depth() {
            out.copy_from_slice(&self.r);
            return;
        }
        let phi = &self.phi[t];
        let theta = theta_above.expect("inner layers need activations above");
        debug_assert_eq!(phi.cols(), theta.len());
        debug_assert_eq!(phi.rows(), out.len());
        out.fill(0.0);
        for (k, col) in phi.cols_iter().enumerate() {
            let w = theta[k];
            if w > 0.0 {
                for (o, &v) in out.iter_mut().zip(col) {
                    *o += v * w;
                }
            }
        }
    }
}

/// One token instance: its term and its current first-layer factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    pub term: u32,
    pub topic: u32,
}

/// Full latent state of a Gibbs chain over a fixed corpus.
///
/// Count bookkeeping, layer by layer (J documents, depth T):
///
/// - `tokens[j]`: the document's token instances with factor assignments.
/// - `term_topic` (`V x K_1`), `topic_total` (`K_1`): token tallies by term
///   and factor, the collapsed-layer sufficient statistics.
/// - `m[t-1]` (`K_t x J`): latent counts sent from layer t to layer t+1.
/// - `x_up[t-1]` (`K_t x J`): table counts drawn at layer t+1 from `m[t-1]`.
/// - `split_phi[t-2]` (`K_{t-1} x K_t`): split tallies that update the
///   loadings of layer t >= 2.
/// - `theta[t-1]` (`K_t x J`): activations; the first layer's slot is only
///   materialized on demand under the collapsed scheme.
/// - `c_scale` (`T x J`, row `t-2` holding `c^(t)`), `p_scale`
///   (`(T+1) x J`, row `t-1` holding `p^(t)`): per-document scale chains
///   for `t = 2..=T+1` and `t = 1..=T+1`. Column-major like every other
///   table, so one document's chain is one contiguous column.
#[derive(Debug, Clone)]
pub struct LatentState {
    pub tokens: Vec<Vec<Token>>,
    pub term_topic: Mat<u32>,
    pub topic_total: Vec<u64>,
    pub m: Vec<Mat<u32>>,
    pub x_up: Vec<Mat<u32>>,
    pub split_phi: Vec<Mat<u32>>,
    pub theta: Vec<Mat>,
    pub(crate) c_scale: Mat,
    pub(crate) p_scale: Mat,
    /// Counter distinguishing the parallel phases run so far, used to name
    /// per-document substreams; see [`crate::rng::StreamRng::substream`].
    pub(crate) epoch: u64,
}

impl LatentState {
    pub fn n_docs(&self) -> usize {
        self.tokens.len()
    }

    pub fn depth(&self) -> usize {
        self.m.len()
    }

    /// Width of layer `t in 1..=T` as carried by this state.
    pub fn width(&self, t: usize) -> usize {
        self.m[t - 1].rows()
    }

    /// Scale `c^(t)_j` for `t in 2..=T+1`.
    pub fn c(&self, t: usize, j: usize) -> f64 {
        self.c_scale.at(t - 2, j)
    }

    pub fn set_c(&mut self, t: usize, j: usize, v: f64) {
        *self.c_scale.at_mut(t - 2, j) = v;
    }

    /// Probability `p^(t)_j` for `t in 1..=T+1`.
    pub fn p(&self, t: usize, j: usize) -> f64 {
        self.p_scale.at(t - 1, j)
    }

    pub fn set_p(&mut self, t: usize, j: usize, v: f64) {
        *self.p_scale.at_mut(t - 1, j) = v;
    }

    /// One document's scale chain `[c^(2), ..., c^(T+1)]`.
    pub fn c_col(&self, j: usize) -> &[f64] {
        self.c_scale.col(j)
    }

    /// One document's probability chain `[p^(1), ..., p^(T+1)]`.
    pub fn p_col(&self, j: usize) -> &[f64] {
        self.p_scale.col(j)
    }

    /// Advance and return the phase counter for substream derivation.
    pub(crate) fn next_epoch(&mut self) -> u64 {
        self.epoch += 1;
        self.epoch
    }

    /// Total observed tokens (layer-1 count mass).
    pub fn data_total(&self) -> u64 {
        self.topic_total.iter().sum()
    }

    /// Total latent count mass entering layer `t + 1`, i.e. the tallies the
    /// CRT pass at that layer produced. `t in 1..=T`.
    pub fn up_total(&self, t: usize) -> u64 {
        self.x_up[t - 1].total()
    }

    /// Fresh state over `corpus` for a chain on `network`: token factors
    /// are drawn uniformly, count tables tallied to match, activations set
    /// to one, and scale chains started at `c = 1`.
    pub fn init(corpus: &CountMatrix, network: &Network, rng: &mut StreamRng) -> Result<Self> {
        network.validate()?;
        if corpus.n_terms() != network.n_terms() {
            return Err(Error::DimensionMismatch("corpus vocabulary vs network"));
        }
        let depth = network.depth();
        let n_docs = corpus.n_docs();
        let k1 = network.width(1);
        let mut tokens = Vec::with_capacity(n_docs);
        let mut term_topic = Mat::zeros_u32(corpus.n_terms(), k1);
        let mut topic_total = vec![0u64; k1];
        let mut m: Vec<Mat<u32>> =
            (1..=depth).map(|t| Mat::zeros_u32(network.width(t), n_docs)).collect();
        for j in 0..n_docs {
            let mut doc_tokens = Vec::with_capacity(corpus.doc_total(j) as usize);
            for &(v, c) in corpus.doc(j) {
                for _ in 0..c {
                    let k = rng.below(k1 as u64) as u32;
                    doc_tokens.push(Token { term: v, topic: k });
                    *term_topic.at_mut(v as usize, k as usize) += 1;
                    topic_total[k as usize] += 1;
                    *m[0].at_mut(k as usize, j) += 1;
                }
            }
            tokens.push(doc_tokens);
        }
        let x_up = (1..=depth).map(|t| Mat::zeros_u32(network.width(t), n_docs)).collect();
        let split_phi =
            (2..=depth).map(|t| Mat::zeros_u32(network.width(t - 1), network.width(t))).collect();
        let theta = (1..=depth).map(|t| Mat::filled(network.width(t), n_docs, 1.0)).collect();
        let mut state = LatentState {
            tokens,
            term_topic,
            topic_total,
            m,
            x_up,
            split_phi,
            theta,
            c_scale: Mat::filled(depth, n_docs, 1.0),
            p_scale: Mat::zeros(depth + 1, n_docs),
            epoch: 0,
        };
        for j in 0..n_docs {
            state.refresh_p_chain(j);
        }
        crate::gibbs::cascade_up(&mut state, network, rng)?;
        Ok(state)
    }

    /// Recompute the probability chain `p^(1..=T+1)_j` from the scales
    /// `c^(2..=T+1)_j`; `p^(2)` is tied to `c^(2)` and deeper entries
    /// follow the propagation rule.
    pub fn refresh_p_chain(&mut self, j: usize) {
        let c_col = self.c_scale.col(j);
        let p_col = self.p_scale.col_mut(j);
        refresh_p_col(c_col, p_col);
    }

    /// Exhaustive structural check used by tests and debug builds: token
    /// tallies, table dimensions, conservation between layers, and scale
    /// chain domains.
    pub fn verify_consistency(&self, corpus: &CountMatrix) -> Result<()> {
        let depth = self.depth();
        let n_docs = self.n_docs();
        if corpus.n_docs() != n_docs {
            return Err(Error::DimensionMismatch("corpus docs vs state"));
        }
        let k1 = self.width(1);
        let mut term_topic = Mat::zeros_u32(corpus.n_terms(), k1);
        let mut topic_total = vec![0u64; k1];
        let mut m1 = Mat::zeros_u32(k1, n_docs);
        for (j, doc_tokens) in self.tokens.iter().enumerate() {
            let mut counts = vec![0u32; corpus.n_terms()];
            for tok in doc_tokens {
                counts[tok.term as usize] += 1;
                *term_topic.at_mut(tok.term as usize, tok.topic as usize) += 1;
                topic_total[tok.topic as usize] += 1;
                *m1.at_mut(tok.topic as usize, j) += 1;
            }
            let mut expect = vec![0u32; corpus.n_terms()];
            for &(v, c) in corpus.doc(j) {
                expect[v as usize] = c;
            }
            if counts != expect {
                return Err(Error::DimensionMismatch("token multiset vs corpus"));
            }
        }
        if term_topic != self.term_topic || topic_total != self.topic_total || m1 != self.m[0] {
            return Err(Error::DimensionMismatch("token tallies vs stored tables"));
        }
        for t in 1..=depth {
            let k_t = self.width(t);
            if self.m[t - 1].cols() != n_docs || self.x_up[t - 1].cols() != n_docs {
                return Err(Error::DimensionMismatch("count table document axis"));
            }
            if self.x_up[t - 1].rows() != k_t || self.theta[t - 1].rows() != k_t {
                return Err(Error::DimensionMismatch("count table width axis"));
            }
            for (xe, me) in self.x_up[t - 1].data().iter().zip(self.m[t - 1].data()) {
                if xe > me || ((*xe > 0) != (*me > 0)) {
                    return Err(Error::InvalidParameter("table counts vs source counts"));
                }
            }
            if t >= 2 {
                let split = &self.split_phi[t - 2];
                if split.rows() != self.width(t - 1) || split.cols() != k_t {
                    return Err(Error::DimensionMismatch("split tally shape"));
                }
                for j in 0..n_docs {
                    if self.m[t - 1].col_total(j) != self.x_up[t - 2].col_total(j) {
                        return Err(Error::InvalidParameter("split lost or created counts"));
                    }
                }
                for v in 0..split.rows() {
                    if split.row_total(v) != self.x_up[t - 2].row_total(v) {
                        return Err(Error::InvalidParameter("split row tallies inconsistent"));
                    }
                }
            }
            if !self.theta[t - 1].data().iter().all(|&v| v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter("activations must stay positive"));
            }
        }
        for j in 0..n_docs {
            if math::abs(self.p(1, j) - p_layer1()) > 1e-12 {
                return Err(Error::InvalidParameter("bottom probability must stay fixed"));
            }
            for t in 2..=depth + 1 {
                let (c, p) = (self.c(t, j), self.p(t, j));
                if !(c > 0.0 && c.is_finite() && p > 0.0 && p < 1.0) {
                    return Err(Error::InvalidParameter("scale chain out of domain"));
                }
            }
        }
        Ok(())
    }
}

/// Rebuild one document's probability chain from its scale chain:
/// `p_col = [p^(1), ..., p^(T+1)]` from `c_col = [c^(2), ..., c^(T+1)]`.
pub(crate) fn refresh_p_col(c_col: &[f64], p_col: &mut [f64]) {
    debug_assert_eq!(p_col.len(), c_col.len() + 1);
    p_col[0] = p_layer1();
    if !c_col.is_empty() {
        p_col[1] = 1.0 / (1.0 + c_col[0]);
    }
    for t in 2..p_col.len() {
        p_col[t] = crate::gibbs::propagate_p(p_col[t - 1], c_col[t - 1]);
    }
}

/// Posterior summary produced by feature extraction: per-document features
/// and the loadings they were computed under.
#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    /// `K_1 x J`: posterior mean of the first-layer activations.
    pub theta1_mean: Mat,
    /// `K_1 x J`: the same columns normalized to proportions. Documents
    /// with no tokens fall back to uniform columns.
    pub feature_props: Mat,
    /// Loadings the features were extracted under (one matrix per layer).
    pub phi: Vec<Mat>,
    /// Number of Gibbs samples averaged per document.
    pub sample_count: usize,
    /// Documents that had no tokens and got the uniform fallback.
    pub empty_docs: Vec<usize>,
}

/// Draw a corpus of `n_docs` documents from `network` using document scales
/// `c_sched[t-2] = c^(t)` for `t = 2..=T+1`. Returns the counts and a fully
/// consistent latent state carrying the generative activations and token
/// factor assignments.
pub fn generate(
    network: &Network,
    n_docs: usize,
    c_sched: &[f64],
    rng: &mut StreamRng,
) -> Result<(CountMatrix, LatentState)> {
    network.validate()?;
    let depth = network.depth();
    if c_sched.len() != depth {
        return Err(Error::DimensionMismatch("c_sched length vs depth"));
    }
    if !c_sched.iter().all(|&c| c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter("generation scales must be positive and finite"));
    }
    let k1 = network.width(1);
    let n_terms = network.n_terms();
    let mut theta: Vec<Mat> =
        (1..=depth).map(|t| Mat::zeros(network.width(t), n_docs)).collect();
    let mut tokens: Vec<Vec<Token>> = Vec::with_capacity(n_docs);
    let mut term_topic = Mat::zeros_u32(n_terms, k1);
    let mut topic_total = vec![0u64; k1];
    let mut m1 = Mat::zeros_u32(k1, n_docs);
    let mut docs: Vec<Vec<(u32, u32)>> = Vec::with_capacity(n_docs);
    let mut split = vec![0u64; n_terms];
    for j in 0..n_docs {
        // Activations flow top-down; layer t uses scale 1/c^(t+1), which at
        // the bottom equals p^(2)/(1 - p^(2)) by the c/p tie.
        for t in (1..=depth).rev() {
            let scale = 1.0 / c_sched[t - 1];
            let mut shape = vec![0.0; network.width(t)];
            if t == depth {
                shape.copy_from_slice(&network.r);
            } else {
                let above = theta[t].col(j).to_vec();
                network.shape_for_layer(t, Some(&above), &mut shape);
            }
            let col = theta[t - 1].col_mut(j);
            for (o, &s) in col.iter_mut().zip(&shape) {
                *o = sample_gamma(s, scale, rng)?;
            }
        }
        // Token counts by factor, then spread over terms; recording the
        // factor of every token keeps the returned state chain-ready.
        let mut doc_tokens = Vec::new();
        let mut doc_counts = vec![0u32; n_terms];
        for k in 0..k1 {
            let mk = sample_poisson(theta[0].at(k, j), rng)?;
            if mk == 0 {
                continue;
            }
            *m1.at_mut(k, j) += mk as u32;
            topic_total[k] += mk;
            multinomial_split_into(mk, network.phi[0].col(k), &mut split, rng)?;
            for (v, &cnt) in split.iter().enumerate() {
                if cnt > 0 {
                    *term_topic.at_mut(v, k) += cnt as u32;
                    doc_counts[v] += cnt as u32;
                    for _ in 0..cnt {
                        doc_tokens.push(Token { term: v as u32, topic: k as u32 });
                    }
                }
            }
        }
        docs.push(
            doc_counts
                .iter()
                .enumerate()
                .filter(|&(_, &c)| c > 0)
                .map(|(v, &c)| (v as u32, c))
                .collect(),
        );
        tokens.push(doc_tokens);
    }
    let corpus = CountMatrix::from_docs(n_terms, docs)?;
    let x_up = (1..=depth).map(|t| Mat::zeros_u32(network.width(t), n_docs)).collect();
    let split_phi =
        (2..=depth).map(|t| Mat::zeros_u32(network.width(t - 1), network.width(t))).collect();
    let mut m: Vec<Mat<u32>> =
        (2..=depth).map(|t| Mat::zeros_u32(network.width(t), n_docs)).collect();
    m.insert(0, m1);
    let mut c_scale = Mat::zeros(depth, n_docs);
    for j in 0..n_docs {
        c_scale.col_mut(j).copy_from_slice(c_sched);
    }
    let mut state = LatentState {
        tokens,
        term_topic,
        topic_total,
        m,
        x_up,
        split_phi,
        theta,
        c_scale,
        p_scale: Mat::zeros(depth + 1, n_docs),
        epoch: 0,
    };
    for j in 0..n_docs {
        state.refresh_p_chain(j);
    }
    crate::gibbs::cascade_up(&mut state, network, rng)?;
    Ok((corpus, state))
}
