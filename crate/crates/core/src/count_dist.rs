//! Samplers and exact mass functions for the count distributions the
//! augmentation scheme is built from: gamma, Dirichlet, Poisson, binomial,
//! multinomial splitting, the Chinese restaurant table (CRT) distribution,
//! the logarithmic distribution, and the negative binomial.
//!
//! Everything draws from a [`StreamRng`] and uses `libm` arithmetic only, so
//! a fixed seed produces the same values on every platform. Samplers return
//! `Err` on out-of-domain parameters instead of clamping silently; the one
//! deliberate clamp is a `1e-300` floor on gamma variates, which keeps
//! downstream shape and rate parameters strictly positive without moving any
//! probability mass that matters.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::math;
use crate::rng::StreamRng;

/// Smallest value a gamma variate is allowed to take. Draws below this are
/// rounded up so that later code can divide by or take logs of activations
/// without hitting zero.
pub const GAMMA_FLOOR: f64 = 1e-300;

/// Largest admissible success probability for the logarithmic sampler. The
/// inverse-CDF walk runs in expected `O(mean)` time, which diverges as `p`
/// approaches 1, so values at or above this bound are rejected.
pub const LOG_P_MAX: f64 = 1.0 - 1e-12;

fn require(cond: bool, what: &'static str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(what))
    }
}

/// Standard normal draw via the Marsaglia polar method.
pub fn sample_normal(rng: &mut StreamRng) -> f64 {
    loop {
        let u = 2.0 * rng.next_f64() - 1.0;
        let v = 2.0 * rng.next_f64() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * math::sqrt(-2.0 * math::ln(s) / s);
        }
    }
}

/// Gamma draw with the given shape and scale.
///
/// Shapes of one and above use the Marsaglia-Tsang squeeze; smaller shapes
/// draw at `shape + 1` and multiply by `U^(1/shape)`, which is exact. The
/// result is floored at [`GAMMA_FLOOR`].
pub fn sample_gamma(shape: f64, scale: f64, rng: &mut StreamRng) -> Result<f64> {
    require(shape > 0.0 && shape.is_finite(), "gamma shape must be positive and finite")?;
    require(scale > 0.0 && scale.is_finite(), "gamma scale must be positive and finite")?;
    let boost = if shape < 1.0 {
        // Gam(a) = Gam(a+1) * U^(1/a) in distribution.
        math::pow(rng.next_f64_pos(), 1.0 / shape)
    } else {
        1.0
    };
    let d = if shape < 1.0 { shape + 1.0 } else { shape } - 1.0 / 3.0;
    let c = 1.0 / (3.0 * math::sqrt(d));
    let unit = loop {
        let x = sample_normal(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = rng.next_f64_pos();
        if u < 1.0 - 0.0331 * x * x * x * x {
            break d * v;
        }
        if math::ln(u) < 0.5 * x * x + d * (1.0 - v + math::ln(v)) {
            break d * v;
        }
    };
    Ok((unit * boost * scale).max(GAMMA_FLOOR))
}

/// Beta draw as a ratio of two gamma variates.
pub fn sample_beta(a: f64, b: f64, rng: &mut StreamRng) -> Result<f64> {
    let x = sample_gamma(a, 1.0, rng)?;
    let y = sample_gamma(b, 1.0, rng)?;
    Ok(x / (x + y))
}

/// Poisson draw. Small means walk Knuth's uniform product; larger means use
/// Hormann's transformed rejection (PTRS), which is exact and O(1).
pub fn sample_poisson(lambda: f64, rng: &mut StreamRng) -> Result<u64> {
    require(lambda >= 0.0 && lambda.is_finite(), "poisson mean must be finite and nonnegative")?;
    if lambda == 0.0 {
        return Ok(0);
    }
    if lambda < 10.0 {
        let limit = math::exp(-lambda);
        let mut k = 0u64;
        let mut prod = rng.next_f64_pos();
        while prod > limit {
            k += 1;
            prod *= rng.next_f64_pos();
        }
        return Ok(k);
    }
    let log_lambda = math::ln(lambda);
    let b = 0.931 + 2.53 * math::sqrt(lambda);
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.next_f64() - 0.5;
        let v = rng.next_f64_pos();
        let us = 0.5 - math::abs(u);
        let k = math::floor((2.0 * a / us + b) * u + lambda + 0.43);
        if us >= 0.07 && v <= v_r {
            return Ok(k as u64);
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if math::ln(v * inv_alpha / (a / (us * us) + b))
            <= k * log_lambda - lambda - math::ln_gamma(k + 1.0)
        {
            return Ok(k as u64);
        }
    }
}

/// Binomial draw, exact for every `n`.
///
/// Small trial counts sum Bernoulli draws. Larger counts recurse on a beta
/// order statistic: conditioned on the median uniform, the trials split into
/// two smaller binomial problems, so the work is logarithmic in `n`.
pub fn sample_binomial(n: u64, p: f64, rng: &mut StreamRng) -> Result<u64> {
    require(p.is_finite(), "binomial probability must be finite")?;
    let mut n = n;
    let mut p = p.clamp(0.0, 1.0);
    let mut count = 0u64;
    loop {
        if p <= 0.0 || n == 0 {
            return Ok(count);
        }
        if p >= 1.0 {
            return Ok(count + n);
        }
        if n <= 64 {
            for _ in 0..n {
                if rng.bernoulli(p) {
                    count += 1;
                }
            }
            return Ok(count);
        }
        let i = (n + 1) / 2;
        let v = sample_beta(i as f64, (n + 1 - i) as f64, rng)?;
        if p >= v {
            // The i smallest uniforms all fall at or below p.
            count += i;
            p = ((p - v) / (1.0 - v)).clamp(0.0, 1.0);
            n -= i;
        } else {
            p = (p / v).clamp(0.0, 1.0);
            n = i - 1;
        }
    }
}

/// Categorical draw by cumulative-sum inversion over `weights * total`,
/// where `total` must be the sum of the weights. The comparison is strictly
/// greater-than, so a weight of exactly zero can never be selected.
pub(crate) fn categorical_given_total(weights: &[f64], total: f64, rng: &mut StreamRng) -> usize {
    debug_assert!(total > 0.0);
    let target = rng.next_f64() * total;
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            cum += w;
            last_positive = k;
            if cum > target {
                return k;
            }
        }
    }
    // Floating-point shortfall in the running sum; fall back to the last
    // bucket that carries mass.
    last_positive
}

/// Categorical draw from an unnormalized weight vector.
pub fn sample_categorical(weights: &[f64], rng: &mut StreamRng) -> Result<usize> {
    let mut total = 0.0;
    for &w in weights {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::DegenerateWeights);
        }
        total += w;
    }
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    Ok(categorical_given_total(weights, total, rng))
}

/// Dirichlet draw from a concentration vector, written into `out`.
///
/// Normalized independent gamma draws. If every gamma lands on the
/// [`GAMMA_FLOOR`] the normalization would be degenerate, so the mass then
/// goes entirely to one coordinate picked in proportion to concentration,
/// which is where such a draw concentrates in the small-parameter limit.
pub fn sample_dirichlet_into(conc: &[f64], out: &mut [f64], rng: &mut StreamRng) -> Result<()> {
    if conc.len() != out.len() {
        return Err(Error::DimensionMismatch("dirichlet output length"));
    }
    require(!conc.is_empty(), "dirichlet needs at least one component")?;
    let mut total = 0.0;
    for (o, &a) in out.iter_mut().zip(conc) {
        let g = sample_gamma(a, 1.0, rng)?;
        *o = g;
        total += g;
    }
    if total <= GAMMA_FLOOR * conc.len() as f64 {
        out.fill(0.0);
        let k = sample_categorical(conc, rng)?;
        out[k] = 1.0;
        return Ok(());
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    Ok(())
}

/// Dirichlet draw returning a fresh vector.
pub fn sample_dirichlet(conc: &[f64], rng: &mut StreamRng) -> Result<Vec<f64>> {
    let mut out = vec![0.0; conc.len()];
    sample_dirichlet_into(conc, &mut out, rng)?;
    Ok(out)
}

/// Multinomial draw written into `out`: distributes `x` trials over buckets
/// in proportion to `weights`. Conservation is exact and zero-weight buckets
/// never receive a trial.
pub fn multinomial_split_into(
    x: u64,
    weights: &[f64],
    out: &mut [u64],
    rng: &mut StreamRng,
) -> Result<()> {
    if weights.len() != out.len() {
        return Err(Error::DimensionMismatch("multinomial output length"));
    }
    out.fill(0);
    if x == 0 {
        return Ok(());
    }
    let mut total = 0.0;
    let mut last_positive = None;
    for (k, &w) in weights.iter().enumerate() {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::DegenerateWeights);
        }
        if w > 0.0 {
            total += w;
            last_positive = Some(k);
        }
    }
    let Some(last) = last_positive else {
        return Err(Error::DegenerateWeights);
    };
    if !total.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    if x <= 8 {
        // Few trials: draw each token's bucket directly.
        for _ in 0..x {
            out[categorical_given_total(weights, total, rng)] += 1;
        }
        return Ok(());
    }
    // Many trials: peel buckets off with conditional binomials. The final
    // positive bucket takes whatever remains, making conservation exact.
    let mut remaining = x;
    let mut mass_left = total;
    for (k, &w) in weights.iter().enumerate().take(last) {
        if remaining == 0 {
            return Ok(());
        }
        if w <= 0.0 {
            continue;
        }
        let share = sample_binomial(remaining, (w / mass_left).clamp(0.0, 1.0), rng)?;
        out[k] = share;
        remaining -= share;
        mass_left -= w;
    }
    out[last] = remaining;
    Ok(())
}

/// Multinomial draw returning a fresh vector.
pub fn multinomial_split(x: u64, weights: &[f64], rng: &mut StreamRng) -> Result<Vec<u64>> {
    let mut out = vec![0u64; weights.len()];
    multinomial_split_into(x, weights, &mut out, rng)?;
    Ok(out)
}

/// Chinese restaurant table draw: the number of tables occupied after `n`
/// customers arrive under concentration `r`. Customer `i` opens a new table
/// with probability `r / (r + i - 1)`, so the draw is a sum of independent
/// Bernoulli variables and always lies in `1..=n` when `n > 0`.
pub fn sample_crt(n: u64, r: f64, rng: &mut StreamRng) -> Result<u64> {
    if n == 0 {
        return Ok(0);
    }
    require(r > 0.0 && r.is_finite(), "crt concentration must be positive and finite")?;
    let mut tables = 0u64;
    for i in 0..n {
        if rng.bernoulli(r / (r + i as f64)) {
            tables += 1;
        }
    }
    Ok(tables)
}

/// Table of unsigned Stirling numbers of the first kind, `|s(n, l)|`, kept
/// in exact integer arithmetic so the defining recursion
/// `|s(n+1, l)| = n |s(n, l)| + |s(n, l-1)|` holds without rounding.
/// Capped at `n = 64`, beyond which CRT mass functions have no test use and
/// magnitudes become awkward.
#[derive(Debug, Clone)]
pub struct StirlingTable {
    rows: Vec<Vec<BigUint>>,
}

impl StirlingTable {
    /// Hard upper bound on the table size.
    pub const MAX_N: usize = 64;

    /// Table covering all `|s(n, l)|` with `n <= max_n`.
    pub fn new(max_n: usize) -> Result<Self> {
        if max_n > Self::MAX_N {
            return Err(Error::CapacityExceeded { requested: max_n, max: Self::MAX_N });
        }
        let mut rows: Vec<Vec<BigUint>> = Vec::with_capacity(max_n + 1);
        rows.push(vec![BigUint::from(1u32)]);
        for n in 0..max_n {
            let prev = &rows[n];
            let mut row = Vec::with_capacity(n + 2);
            for l in 0..=n + 1 {
                let mut v = BigUint::ZERO;
                if l <= n {
                    v += prev[l].clone() * BigUint::from(n);
                }
                if l >= 1 {
                    v += prev[l - 1].clone();
                }
                row.push(v);
            }
            rows.push(row);
        }
        Ok(StirlingTable { rows })
    }

    /// Largest `n` the table covers.
    pub fn max_n(&self) -> usize {
        self.rows.len() - 1
    }

    /// Exact `|s(n, l)|` for `l <= n <= max_n`.
    pub fn abs_stirling(&self, n: usize, l: usize) -> Result<&BigUint> {
        if n > self.max_n() || l > n {
            return Err(Error::CapacityExceeded { requested: n.max(l), max: self.max_n() });
        }
        Ok(&self.rows[n][l])
    }
}

/// Natural log of a positive big integer, accurate to within a few ulps.
fn ln_biguint(v: &BigUint) -> f64 {
    let bits = v.bits();
    if bits <= 64 {
        let small: u64 = v.try_into().expect("fits by bit count");
        return math::ln(small as f64);
    }
    // Take the top 64 bits and account for the shifted-away magnitude.
    let shift = bits - 64;
    let top: u64 = (v >> shift).try_into().expect("fits by construction");
    math::ln(top as f64) + shift as f64 * core::f64::consts::LN_2
}

/// Exact CRT mass function: probabilities of `l = 0..=n` tables after `n`
/// customers under concentration `r`, namely
/// `Gamma(r) r^l |s(n, l)| / Gamma(n + r)`.
pub fn crt_pmf(n: u64, r: f64, table: &StirlingTable) -> Result<Vec<f64>> {
    require(r > 0.0 && r.is_finite(), "crt concentration must be positive and finite")?;
    let n_us = usize::try_from(n).map_err(|_| Error::CapacityExceeded {
        requested: usize::MAX,
        max: table.max_n(),
    })?;
    if n_us > table.max_n() {
        return Err(Error::CapacityExceeded { requested: n_us, max: table.max_n() });
    }
    let base = math::ln_gamma(r) - math::ln_gamma(n as f64 + r);
    let ln_r = math::ln(r);
    let mut pmf = Vec::with_capacity(n_us + 1);
    for l in 0..=n_us {
        let s = table.abs_stirling(n_us, l)?;
        if *s == BigUint::ZERO {
            pmf.push(0.0);
        } else {
            pmf.push(math::exp(base + l as f64 * ln_r + ln_biguint(s)));
        }
    }
    Ok(pmf)
}

/// Logarithmic distribution draw on `1, 2, ...` with weight proportional to
/// `p^u / u`, by inverse-CDF walk. `p` must lie below [`LOG_P_MAX`].
pub fn sample_log(p: f64, rng: &mut StreamRng) -> Result<u64> {
    require(p > 0.0 && p < LOG_P_MAX, "logarithmic parameter must lie in (0, 1 - 1e-12)")?;
    let norm = -math::ln_1p(-p);
    let target = rng.next_f64();
    let mut term = p / norm;
    let mut cum = term;
    let mut u = 1u64;
    while target >= cum {
        // P(u+1) = P(u) * p * u / (u + 1).
        term *= p * u as f64 / (u + 1) as f64;
        u += 1;
        if term <= 0.0 {
            break;
        }
        cum += term;
    }
    Ok(u)
}

/// Negative binomial draw as a gamma-mixed Poisson: rate `Gam(r, p/(1-p))`,
/// then a Poisson count at that rate.
pub fn sample_nb(r: f64, p: f64, rng: &mut StreamRng) -> Result<u64> {
    require(r > 0.0 && r.is_finite(), "negative binomial dispersion must be positive")?;
    require((0.0..1.0).contains(&p), "negative binomial probability must lie in [0, 1)")?;
    if p == 0.0 {
        return Ok(0);
    }
    let rate = sample_gamma(r, p / (1.0 - p), rng)?;
    sample_poisson(rate, rng)
}

/// Joint draw from the Poisson-logarithmic pair `(n, l)`: `l` is Poisson
/// with mean `-r ln(1-p)` and `n` is the sum of `l` logarithmic variates.
/// Marginally `n` is negative binomial `(r, p)` and `l` given `n` is CRT
/// distributed, which is what makes the pair useful for moving counts
/// between layers in both directions.
pub fn poisson_log_pair(r: f64, p: f64, rng: &mut StreamRng) -> Result<(u64, u64)> {
    require(r > 0.0 && r.is_finite(), "pair dispersion must be positive and finite")?;
    require(p >= 0.0 && p < LOG_P_MAX, "pair probability must lie in [0, 1 - 1e-12)")?;
    if p == 0.0 {
        return Ok((0, 0));
    }
    let mean = -r * math::ln_1p(-p);
    let l = sample_poisson(mean, rng)?;
    let mut n = 0u64;
    for _ in 0..l {
        n += sample_log(p, rng)?;
    }
    Ok((n, l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete, Poisson};
    use statrs::function::gamma::gamma_lr;

    fn rng(seed: u64) -> StreamRng {
        StreamRng::new(seed, 0)
    }

    /// Pearson chi-square statistic against expected probabilities, pooling
    /// cells with tiny expectation into their neighbor.
    fn chi_square(observed: &[u64], probs: &[f64], n: u64) -> (f64, usize) {
        let mut stat = 0.0;
        let mut df = 0usize;
        let mut pool_obs = 0.0;
        let mut pool_exp = 0.0;
        for (o, p) in observed.iter().zip(probs) {
            pool_obs += *o as f64;
            pool_exp += p * n as f64;
            if pool_exp >= 5.0 {
                stat += (pool_obs - pool_exp) * (pool_obs - pool_exp) / pool_exp;
                df += 1;
                pool_obs = 0.0;
                pool_exp = 0.0;
            }
        }
        if pool_exp > 0.0 {
            stat += (pool_obs - pool_exp) * (pool_obs - pool_exp) / pool_exp;
            df += 1;
        }
        (stat, df.saturating_sub(1))
    }

    fn chi_square_critical(df: usize, alpha: f64) -> f64 {
        ChiSquared::new(df as f64).unwrap().inverse_cdf(1.0 - alpha)
    }

    #[test]
    fn stirling_recursion_is_exact() {
        let t = StirlingTable::new(40).unwrap();
        for n in 1..40usize {
            for l in 1..=n {
                let lhs = t.abs_stirling(n + 1, l).unwrap().clone();
                let mut rhs = t.abs_stirling(n, l).unwrap() * BigUint::from(n);
                rhs += t.abs_stirling(n, l - 1).unwrap();
                assert_eq!(lhs, rhs, "recursion failed at n={n} l={l}");
            }
            assert_eq!(*t.abs_stirling(n, 0).unwrap(), BigUint::ZERO);
            assert_eq!(*t.abs_stirling(n, n).unwrap(), BigUint::from(1u32));
        }
    }

    #[test]
    fn stirling_table_rejects_oversize() {
        assert!(matches!(
            StirlingTable::new(65),
            Err(Error::CapacityExceeded { requested: 65, max: 64 })
        ));
        let t = StirlingTable::new(8).unwrap();
        assert!(crt_pmf(9, 1.0, &t).is_err());
    }

    #[test]
    fn crt_pmf_small_cases_match_closed_forms() {
        let t = StirlingTable::new(8).unwrap();
        assert_eq!(crt_pmf(0, 2.5, &t).unwrap(), vec![1.0]);
        let one = crt_pmf(1, 0.5, &t).unwrap();
        assert!((one[1] - 1.0).abs() < 1e-15 && one[0] == 0.0);
        // n=3, r=1: table counts (0, 2, 3, 1) over 3! arrangements.
        let p31 = crt_pmf(3, 1.0, &t).unwrap();
        let expect = [0.0, 1.0 / 3.0, 0.5, 1.0 / 6.0];
        for (a, b) in p31.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        // n=2, r=2: (0, 1/3, 2/3).
        let p22 = crt_pmf(2, 2.0, &t).unwrap();
        assert!((p22[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((p22[2] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn crt_pmf_sums_to_one() {
        let t = StirlingTable::new(64).unwrap();
        for &r in &[0.25, 1.0, 3.5, 20.0] {
            for n in [1u64, 5, 17, 64] {
                let total: f64 = crt_pmf(n, r, &t).unwrap().iter().sum();
                assert!((total - 1.0).abs() < 1e-12, "n={n} r={r} total={total}");
            }
        }
    }

    #[test]
    fn crt_sampler_bounds_and_degenerate_cases() {
        let mut r = rng(1);
        assert_eq!(sample_crt(0, 2.0, &mut r).unwrap(), 0);
        assert_eq!(sample_crt(1, 0.3, &mut r).unwrap(), 1);
        assert!(sample_crt(4, 0.0, &mut r).is_err());
        assert!(sample_crt(4, -1.0, &mut r).is_err());
        for n in [2u64, 7, 30] {
            for _ in 0..200 {
                let l = sample_crt(n, 0.7, &mut r).unwrap();
                assert!((1..=n).contains(&l));
            }
        }
    }

    #[test]
    fn crt_sampler_matches_exact_pmf() {
        // Goodness of fit at a few (n, r) pairs; draws are seeded so the
        // test is deterministic.
        let t = StirlingTable::new(8).unwrap();
        let mut r = rng(42);
        for &(n, conc) in &[(3u64, 1.0), (5, 0.5), (8, 2.0)] {
            let pmf = crt_pmf(n, conc, &t).unwrap();
            let mut hits = vec![0u64; n as usize + 1];
            let draws = 40_000;
            for _ in 0..draws {
                hits[sample_crt(n, conc, &mut r).unwrap() as usize] += 1;
            }
            let (stat, df) = chi_square(&hits, &pmf, draws);
            let crit = chi_square_critical(df, 0.001);
            assert!(stat < crit, "n={n} r={conc}: chi2 {stat:.2} >= {crit:.2}");
        }
    }

    #[test]
    fn crt_sampler_mean_tracks_harmonic_sum() {
        let mut r = rng(7);
        let (n, conc, draws) = (100u64, 1.0, 20_000u64);
        let mean_expect: f64 = (0..n).map(|i| conc / (conc + i as f64)).sum();
        let var_expect: f64 = (0..n)
            .map(|i| {
                let p = conc / (conc + i as f64);
                p * (1.0 - p)
            })
            .sum();
        let total: u64 = (0..draws).map(|_| sample_crt(n, conc, &mut r).unwrap()).sum();
        let mean = total as f64 / draws as f64;
        let se = (var_expect / draws as f64).sqrt();
        assert!((mean - mean_expect).abs() < 4.0 * se, "mean {mean} vs {mean_expect}");
    }

    #[test]
    fn gamma_moments_and_small_shape_support() {
        let mut r = rng(3);
        let draws = 200_000;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..draws {
            let g = sample_gamma(2.0, 3.0, &mut r).unwrap();
            sum += g;
            sum_sq += g * g;
        }
        let mean = sum / draws as f64;
        let var = sum_sq / draws as f64 - mean * mean;
        // mean 6, var 18, and the fourth moment gives var-of-var ~ 7e-3.
        assert!((mean - 6.0).abs() < 0.05, "mean {mean}");
        assert!((var - 18.0).abs() < 0.8, "var {var}");
        for _ in 0..1_000_000 {
            let g = sample_gamma(0.05, 1.0, &mut r).unwrap();
            assert!(g >= GAMMA_FLOOR && g.is_finite());
        }
    }

    #[test]
    fn gamma_ks_against_regularized_incomplete_gamma() {
        // Kolmogorov-Smirnov against an independent CDF implementation.
        for &(shape, scale, seed) in &[(0.3, 1.0, 11u64), (1.0, 2.0, 12), (4.5, 0.5, 13)] {
            let mut r = rng(seed);
            let n = 100_000;
            let mut draws: Vec<f64> =
                (0..n).map(|_| sample_gamma(shape, scale, &mut r).unwrap()).collect();
            draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut ks: f64 = 0.0;
            for (i, &x) in draws.iter().enumerate() {
                let cdf = gamma_lr(shape, x / scale);
                let lo = i as f64 / n as f64;
                let hi = (i + 1) as f64 / n as f64;
                ks = ks.max((cdf - lo).abs()).max((cdf - hi).abs());
            }
            assert!(ks < 0.005, "shape {shape}: ks {ks}");
        }
    }

    #[test]
    fn gamma_rejects_bad_parameters() {
        let mut r = rng(0);
        assert!(sample_gamma(0.0, 1.0, &mut r).is_err());
        assert!(sample_gamma(-1.0, 1.0, &mut r).is_err());
        assert!(sample_gamma(1.0, 0.0, &mut r).is_err());
        assert!(sample_gamma(f64::NAN, 1.0, &mut r).is_err());
        assert!(sample_gamma(1.0, f64::INFINITY, &mut r).is_err());
    }

    #[test]
    fn beta_moments() {
        let mut r = rng(9);
        let draws = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..draws {
            let b = sample_beta(2.0, 3.0, &mut r).unwrap();
            assert!((0.0..=1.0).contains(&b));
            sum += b;
            sum_sq += b * b;
        }
        let mean = sum / draws as f64;
        let var = sum_sq / draws as f64 - mean * mean;
        assert!((mean - 0.4).abs() < 0.004, "mean {mean}");
        assert!((var - 0.04).abs() < 0.002, "var {var}");
    }

    #[test]
    fn poisson_matches_reference_pmf() {
        // Exercises both the product walk and the PTRS branch.
        for &(lambda, seed) in &[(0.8f64, 21u64), (4.2, 22), (30.0, 23), (250.0, 24)] {
            let mut r = rng(seed);
            let draws = 100_000u64;
            let hi = (lambda + 8.0 * lambda.sqrt()).ceil() as usize + 2;
            let mut hits = vec![0u64; hi + 1];
            for _ in 0..draws {
                let k = sample_poisson(lambda, &mut r).unwrap() as usize;
                hits[k.min(hi)] += 1;
            }
            let dist = Poisson::new(lambda).unwrap();
            let mut probs: Vec<f64> = (0..hi).map(|k| dist.pmf(k as u64)).collect();
            probs.push(1.0 - probs.iter().sum::<f64>());
            let (stat, df) = chi_square(&hits, &probs, draws);
            let crit = chi_square_critical(df, 0.001);
            assert!(stat < crit, "lambda={lambda}: chi2 {stat:.2} >= {crit:.2}");
        }
        let mut r = rng(0);
        assert_eq!(sample_poisson(0.0, &mut r).unwrap(), 0);
        assert!(sample_poisson(-1.0, &mut r).is_err());
    }

    #[test]
    fn binomial_matches_reference_pmf() {
        let mut r = rng(31);
        let (n, p, draws) = (12u64, 0.35, 100_000u64);
        let mut hits = vec![0u64; n as usize + 1];
        for _ in 0..draws {
            hits[sample_binomial(n, p, &mut r).unwrap() as usize] += 1;
        }
        let dist = Binomial::new(p, n).unwrap();
        let probs: Vec<f64> = (0..=n).map(|k| dist.pmf(k)).collect();
        let (stat, df) = chi_square(&hits, &probs, draws);
        let crit = chi_square_critical(df, 0.001);
        assert!(stat < crit, "chi2 {stat:.2} >= {crit:.2}");
    }

    #[test]
    fn binomial_split_branch_moments() {
        // n large enough to recurse through the beta splitter several times.
        let mut r = rng(32);
        let (n, p, draws) = (100_000u64, 0.37, 20_000u64);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..draws {
            let k = sample_binomial(n, p, &mut r).unwrap() as f64;
            assert!(k <= n as f64);
            sum += k;
            sum_sq += k * k;
        }
        let mean = sum / draws as f64;
        let var = sum_sq / draws as f64 - mean * mean;
        let mean_expect = n as f64 * p;
        let var_expect = n as f64 * p * (1.0 - p);
        let se = (var_expect / draws as f64).sqrt();
        assert!((mean - mean_expect).abs() < 4.0 * se, "mean {mean} vs {mean_expect}");
        assert!((var / var_expect - 1.0).abs() < 0.05, "var {var} vs {var_expect}");
    }

    #[test]
    fn categorical_respects_zero_weights() {
        let mut r = rng(41);
        let weights = [0.0, 2.0, 0.0, 1.0, 0.0];
        for _ in 0..5_000 {
            let k = sample_categorical(&weights, &mut r).unwrap();
            assert!(k == 1 || k == 3);
        }
        assert!(sample_categorical(&[0.0, 0.0], &mut r).is_err());
        assert!(sample_categorical(&[1.0, -0.5], &mut r).is_err());
        assert!(sample_categorical(&[1.0, f64::NAN], &mut r).is_err());
    }

    #[test]
    fn dirichlet_mean_and_simplex() {
        let mut r = rng(51);
        let conc = [10.05, 0.05, 0.05];
        let draws = 50_000;
        let mut mean = [0.0f64; 3];
        for _ in 0..draws {
            let d = sample_dirichlet(&conc, &mut r).unwrap();
            let total: f64 = d.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            for (m, v) in mean.iter_mut().zip(&d) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= draws as f64;
        }
        // Expected proportions 10.05/10.15 and 0.05/10.15.
        assert!((mean[0] - 0.9901).abs() < 2e-3, "{mean:?}");
        assert!((mean[1] - 0.0049).abs() < 1e-3, "{mean:?}");
        assert!((mean[2] - 0.0049).abs() < 1e-3, "{mean:?}");
    }

    #[test]
    fn dirichlet_survives_tiny_concentrations() {
        let mut r = rng(52);
        let conc = [1e-3, 1e-3, 1e-3, 1e-3];
        for _ in 0..20_000 {
            let d = sample_dirichlet(&conc, &mut r).unwrap();
            let total: f64 = d.iter().sum();
            assert!((total - 1.0).abs() < 1e-9, "total {total}");
            assert!(d.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }

    #[test]
    fn multinomial_conserves_and_respects_support() {
        let mut r = rng(61);
        assert_eq!(multinomial_split(0, &[1.0, 2.0], &mut r).unwrap(), vec![0, 0]);
        assert_eq!(multinomial_split(7, &[1.0, 0.0, 0.0], &mut r).unwrap(), vec![7, 0, 0]);
        // Both the per-trial branch (x <= 8) and the binomial branch.
        for &x in &[5u64, 1000, 100_000] {
            let out = multinomial_split(x, &[0.2, 0.0, 0.3, 0.5], &mut r).unwrap();
            assert_eq!(out.iter().sum::<u64>(), x);
            assert_eq!(out[1], 0);
        }
        assert!(multinomial_split(3, &[0.0, 0.0], &mut r).is_err());
    }

    #[test]
    fn multinomial_bucket_proportions() {
        let mut r = rng(62);
        let x = 100_000u64;
        let probs = [0.2, 0.3, 0.5];
        let out = multinomial_split(x, &probs, &mut r).unwrap();
        for (o, p) in out.iter().zip(probs) {
            let sd = (x as f64 * p * (1.0 - p)).sqrt();
            assert!((*o as f64 - x as f64 * p).abs() < 4.0 * sd, "{out:?}");
        }
    }

    #[test]
    fn log_sampler_front_mass_and_mean() {
        let mut r = rng(71);
        // Near p = 0 almost all mass sits on 1.
        let small: u64 = (0..100_000)
            .filter(|_| sample_log(1e-6, &mut r).unwrap() == 1)
            .count() as u64;
        assert!(small as f64 / 100_000.0 > 0.999);

        let draws = 200_000u64;
        let (mut ones, mut twos, mut sum) = (0u64, 0u64, 0u64);
        for _ in 0..draws {
            let u = sample_log(0.5, &mut r).unwrap();
            assert!(u >= 1);
            sum += u;
            if u == 1 {
                ones += 1;
            } else if u == 2 {
                twos += 1;
            }
        }
        // P(1) = 0.5/ln 2 = 0.7213, P(2) = 0.125/ln 2 = 0.1803, mean 1.4427.
        assert!((ones as f64 / draws as f64 - 0.7213).abs() < 0.005);
        assert!((twos as f64 / draws as f64 - 0.1803).abs() < 0.005);
        assert!((sum as f64 / draws as f64 - 1.4427).abs() < 0.01);
        assert!(sample_log(1.0 - 1e-13, &mut r).is_err());
        assert!(sample_log(0.0, &mut r).is_err());
    }

    #[test]
    fn nb_moments() {
        let mut r = rng(81);
        assert_eq!(sample_nb(2.0, 0.0, &mut r).unwrap(), 0);
        let draws = 200_000u64;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..draws {
            let n = sample_nb(2.0, 0.5, &mut r).unwrap() as f64;
            sum += n;
            sum_sq += n * n;
        }
        let mean = sum / draws as f64;
        let var = sum_sq / draws as f64 - mean * mean;
        // mean r p/(1-p) = 2, variance-to-mean 1/(1-p) = 2.
        assert!((mean - 2.0).abs() < 0.03, "mean {mean}");
        assert!((var / mean - 2.0).abs() < 0.06, "vmr {}", var / mean);
    }

    #[test]
    fn pair_zero_atom_and_ordering() {
        let mut r = rng(91);
        let draws = 100_000u64;
        let mut zeros = 0u64;
        for _ in 0..draws {
            let (n, l) = poisson_log_pair(1.0, 0.5, &mut r).unwrap();
            assert!(l <= n);
            assert_eq!(l == 0, n == 0);
            if n == 0 {
                zeros += 1;
            }
        }
        // P(0, 0) = (1-p)^r = 0.5; binomial sd ~ 0.0016.
        assert!((zeros as f64 / draws as f64 - 0.5).abs() < 0.006);
        assert_eq!(poisson_log_pair(1.0, 0.0, &mut r).unwrap(), (0, 0));
    }

    #[test]
    fn pair_routes_agree_in_distribution() {
        // Draw (n, l) via the compound-Poisson route and via the
        // NB-then-CRT route; total variation over a truncated grid must be
        // small. The acceptance suite repeats this wider and tighter.
        let (r_par, p, draws, cap) = (2.0, 0.7, 30_000usize, 40usize);
        let mut a = rng(101);
        let mut b = rng(202);
        let mut grid_a = vec![0u64; cap * cap];
        let mut grid_b = vec![0u64; cap * cap];
        for _ in 0..draws {
            let (n, l) = poisson_log_pair(r_par, p, &mut a).unwrap();
            let (n, l) = (n.min(cap as u64 - 1) as usize, l.min(cap as u64 - 1) as usize);
            grid_a[n * cap + l] += 1;
            let n2 = sample_nb(r_par, p, &mut b).unwrap();
            let l2 = sample_crt(n2, r_par, &mut b).unwrap();
            let (n2, l2) = (n2.min(cap as u64 - 1) as usize, l2.min(cap as u64 - 1) as usize);
            grid_b[n2 * cap + l2] += 1;
        }
        let tv: f64 = grid_a
            .iter()
            .zip(&grid_b)
            .map(|(x, y)| (*x as f64 - *y as f64).abs())
            .sum::<f64>()
            / (2.0 * draws as f64);
        assert!(tv < 0.05, "tv {tv}");
    }

    #[test]
    fn samplers_are_deterministic_under_seed() {
        let run = |seed: u64| {
            let mut r = StreamRng::new(seed, 0);
            let mut trace = Vec::new();
            trace.push(sample_gamma(0.4, 2.0, &mut r).unwrap());
            trace.push(sample_beta(1.5, 2.5, &mut r).unwrap());
            trace.push(sample_poisson(37.0, &mut r).unwrap() as f64);
            trace.push(sample_crt(20, 1.3, &mut r).unwrap() as f64);
            trace.push(sample_log(0.6, &mut r).unwrap() as f64);
            trace.push(sample_nb(2.0, 0.4, &mut r).unwrap() as f64);
            trace.extend(sample_dirichlet(&[0.5, 0.5, 2.0], &mut r).unwrap());
            trace.extend(
                multinomial_split(1000, &[1.0, 2.0, 3.0], &mut r)
                    .unwrap()
                    .into_iter()
                    .map(|v| v as f64),
            );
            trace
        };
        assert_eq!(run(12345), run(12345));
        assert_ne!(run(12345), run(54321));
    }
}
