//! Tiny end-to-end run that prints a digest of the sampler state, used to
//! check that serial and parallel builds produce identical chains:
//!
//! ```text
//! cargo run -p pgbn-core --example smoke
//! cargo run -p pgbn-core --example smoke --features parallel
//! ```

use pgbn_core::corpus::CountMatrix;
use pgbn_core::count_dist::sample_poisson;
use pgbn_core::gibbs::{iteration, SamplerOptions};
use pgbn_core::model::{Hyperparams, LatentState, Network, NetworkKind};
use pgbn_core::{Mat, StreamRng};

fn main() {
    let (v, k1, n_docs) = (30usize, 6usize, 40usize);
    let mut rng = StreamRng::new(42, 0);
    let docs: Vec<Vec<(u32, u32)>> = (0..n_docs)
        .map(|_| {
            (0..v as u32)
                .filter_map(|t| {
                    let c = sample_poisson(0.8, &mut rng).unwrap();
                    (c > 0).then_some((t, c as u32))
                })
                .collect()
        })
        .collect();
    let corpus = CountMatrix::from_docs(v, docs).unwrap();

    let mut phi1 = Mat::zeros(v, k1);
    for k in 0..k1 {
        phi1.col_mut(k).fill(1.0 / v as f64);
    }
    let mut phi2 = Mat::zeros(k1, 3);
    for k in 0..3 {
        phi2.col_mut(k).fill(1.0 / k1 as f64);
    }
    let mut net = Network {
        widths: vec![v, k1, 3],
        phi: vec![phi1, phi2],
        r: vec![1.0; 3],
        gamma0: 1.0,
        c0: 1.0,
        c_medians: None,
        kind: NetworkKind::LastSample,
    };
    let hyper = Hyperparams { eta: vec![0.05], ..Hyperparams::default() };
    let mut state = LatentState::init(&corpus, &net, &mut rng).unwrap();
    let opts = SamplerOptions::default();
    for i in 0..25 {
        let rep = iteration(&mut state, &mut net, &hyper, &opts, &mut rng).unwrap();
        if i % 5 == 4 {
            println!("iter {:2} totals {:?} ll {:.6}", i + 1, rep.layer_totals, rep.ll_proxy);
        }
    }
    let theta_digest: f64 = state.theta[1].data().iter().sum();
    let r_digest: f64 = net.r.iter().sum();
    println!("digest theta2 {theta_digest:.12e} r {r_digest:.12e} gamma0 {:.12e}", net.gamma0);
}
