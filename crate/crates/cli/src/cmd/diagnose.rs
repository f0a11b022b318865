//! `pgbn diagnose`: Monte-Carlo self-checks of the sampling kernels and the
//! layered-chain overdispersion simulation, reported as one `check=...
//! status=PASS|FAIL` line each. Exits nonzero when any check fails.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use pgbn_core::count_dist::{
    poisson_log_pair, sample_crt, sample_dirichlet, sample_gamma, sample_nb,
};
use pgbn_core::eval::{count_dispersion, vmr_diagnostic};
use pgbn_core::StreamRng;

use crate::args::DiagnoseArgs;
use crate::io::{display_opt_path, echo_lines, load_corpus, Report};

pub fn run(args: DiagnoseArgs) -> Result<()> {
    if args.draws < 1000 {
        bail!("--draws must be at least 1000 for the checks to mean anything");
    }
    let echo = echo_lines(
        "diagnose",
        &[
            ("draws", args.draws.to_string()),
            ("corpus", display_opt_path(args.corpus.as_deref())),
            ("seed", args.common.seed.to_string()),
            ("workers", args.common.workers.to_string()),
        ],
    );
    let mut out = Report::new(&echo);
    let mut failures = 0usize;
    let mut rng = StreamRng::new(args.common.seed, 0);

    // Overdispersion of the layered chain: empirical mean and
    // variance-to-mean ratio against the closed forms r*p/(1-p) and
    // (1+(depth-1)p)/(1-p).
    for &depth in &[1usize, 2, 3, 5] {
        for &p2 in &[0.3f64, 0.5] {
            let (mean, vmr) = vmr_diagnostic(depth, p2, 1.0, args.draws, &mut rng)
                .context("running the overdispersion simulation")?;
            let expect_mean = p2 / (1.0 - p2);
            let expect_vmr = (1.0 + (depth as f64 - 1.0) * p2) / (1.0 - p2);
            let ok = (mean - expect_mean).abs() / expect_mean < 0.05
                && (vmr - expect_vmr).abs() / expect_vmr < 0.05;
            if !ok {
                failures += 1;
            }
            out.push(format!(
                "check=vmr depth={depth} p2={p2} mean={mean:.6} expect-mean={expect_mean:.6} \
                 vmr={vmr:.6} expect-vmr={expect_vmr:.6} status={}",
                if ok { "PASS" } else { "FAIL" }
            ));
        }
    }

    // Table-count mean: E CRT(n, r) = sum_i r/(r+i-1).
    {
        let n = 100u64;
        let r = 1.0f64;
        let draws = 100_000usize;
        let mut expect = 0.0;
        let mut var = 0.0;
        for i in 1..=n {
            let p = r / (r + (i - 1) as f64);
            expect += p;
            var += p * (1.0 - p);
        }
        let mut sum = 0.0;
        for _ in 0..draws {
            sum += sample_crt(n, r, &mut rng).context("drawing table counts")? as f64;
        }
        let mean = sum / draws as f64;
        let tol = 4.0 * (var / draws as f64).sqrt();
        let ok = (mean - expect).abs() < tol;
        if !ok {
            failures += 1;
        }
        out.push(format!(
            "check=crt-mean n={n} r={r} mean={mean:.6} expect={expect:.6} tol={tol:.6} status={}",
            if ok { "PASS" } else { "FAIL" }
        ));
    }

    // Compound-Poisson identity: the joint of (count, tables) agrees
    // between the Poisson-logarithmic construction and the negative
    // binomial count followed by a table draw.
    {
        let (r, p) = (1.0f64, 0.5f64);
        let draws = 20_000usize;
        let mut a: BTreeMap<(u64, u64), u64> = BTreeMap::new();
        let mut b: BTreeMap<(u64, u64), u64> = BTreeMap::new();
        for _ in 0..draws {
            let pair = poisson_log_pair(r, p, &mut rng).context("drawing the pair")?;
            *a.entry(pair).or_insert(0) += 1;
            let n = sample_nb(r, p, &mut rng).context("drawing a count")?;
            let l = sample_crt(n, r, &mut rng).context("drawing table counts")?;
            *b.entry((n, l)).or_insert(0) += 1;
        }
        let keys: Vec<(u64, u64)> =
            a.keys().chain(b.keys()).copied().collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
        let mut tv = 0.0;
        for k in keys {
            let pa = *a.get(&k).unwrap_or(&0) as f64 / draws as f64;
            let pb = *b.get(&k).unwrap_or(&0) as f64 / draws as f64;
            tv += (pa - pb).abs();
        }
        tv *= 0.5;
        let limit = 0.05;
        let ok = tv < limit;
        if !ok {
            failures += 1;
        }
        out.push(format!(
            "check=compound-poisson r={r} p={p} tv={tv:.6} limit={limit} status={}",
            if ok { "PASS" } else { "FAIL" }
        ));
    }

    // Gamma moments.
    {
        let (shape, scale) = (2.5f64, 2.0f64);
        let draws = 100_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..draws {
            let x = sample_gamma(shape, scale, &mut rng).context("drawing gamma variates")?;
            sum += x;
            sum_sq += x * x;
        }
        let n = draws as f64;
        let mean = sum / n;
        let var = (sum_sq - n * mean * mean) / (n - 1.0);
        let expect_mean = shape * scale;
        let expect_var = shape * scale * scale;
        let mean_tol = 4.0 * (expect_var / n).sqrt();
        let ok = (mean - expect_mean).abs() < mean_tol
            && (var - expect_var).abs() / expect_var < 0.1;
        if !ok {
            failures += 1;
        }
        out.push(format!(
            "check=gamma-moments shape={shape} scale={scale} mean={mean:.6} var={var:.6} \
             expect-mean={expect_mean} expect-var={expect_var} status={}",
            if ok { "PASS" } else { "FAIL" }
        ));
    }

    // Dirichlet draws stay on the simplex.
    {
        let conc = vec![0.3f64; 5];
        let mut worst: f64 = 0.0;
        let mut positive = true;
        for _ in 0..200 {
            let d = sample_dirichlet(&conc, &mut rng).context("drawing Dirichlet variates")?;
            let sum: f64 = d.iter().sum();
            worst = worst.max((sum - 1.0).abs());
            positive &= d.iter().all(|&v| v > 0.0);
        }
        let ok = worst < 1e-12 && positive;
        if !ok {
            failures += 1;
        }
        out.push(format!(
            "check=dirichlet-simplex worst-deviation={worst:.3e} status={}",
            if ok { "PASS" } else { "FAIL" }
        ));
    }

    if let Some(path) = &args.corpus {
        let corpus = load_corpus(path)?;
        let d = count_dispersion(&corpus);
        out.push(format!(
            "corpus-docs={} corpus-terms={} corpus-tokens={} doc-total-mean={:.6} \
             doc-total-vmr={:.6} term-vmr-mean={:.6}",
            corpus.n_docs(),
            corpus.n_terms(),
            corpus.total(),
            d.doc_total_mean,
            d.doc_total_vmr,
            d.term_vmr_mean
        ));
    }

    out.push(format!("failures={failures}"));
    out.write(&args.report_out)?;
    if failures > 0 {
        bail!("{failures} diagnostic check(s) failed");
    }
    Ok(())
}
