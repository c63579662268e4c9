use num_bigint::BigUint;
use statrs::function::gamma::ln_gamma;
use subhash::sampling::{binomial_tail_bound, block_limit};

pub fn binom_row(n: usize) -> Vec<BigUint> {
    let mut row = vec![BigUint::from(1u32)];
    for k in 0..n {
        let next = &row[k] * BigUint::from((n - k) as u64) / BigUint::from((k + 1) as u64);
        row.push(next);
    }
    row
}

/// `Pr[Bin(n, 1/2) > l]` as a ratio of big integers.
pub fn exact_half_tail(row: &[BigUint], l: usize) -> (BigUint, BigUint) {
    let num = row[l + 1..].iter().fold(BigUint::from(0u32), |a, c| a + c);
    (num, BigUint::from(1u32) << (row.len() - 1))
}

pub fn big_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    // scale so that the quotient keeps ~60 significant bits
    let shift = den.bits().saturating_sub(num.bits()) + 64;
    let q = (num << shift) / den;
    let bits = q.bits().saturating_sub(64);
    let top = (&q >> bits).to_u64_digits().first().copied().unwrap_or(0);
    top as f64 * 2f64.powi(bits as i32 - shift as i32)
}

/// Checks the limit at `N = 1000`, `p = 1/2`, `eps = 1e-6` is minimal for the
/// bound and safe for the exact tail. Returns `(limit, exact tail at limit)`.
pub fn check_limit_at_thousand() -> (u64, f64) {
    let (n, p, eps, m) = (1000u64, 0.5, 1e-6, 1u64);
    let l = block_limit(n, p, eps, m).unwrap();
    let row = binom_row(n as usize);
    let threshold = eps / m as f64;
    assert!(binomial_tail_bound(n, p, l).unwrap() <= threshold);
    assert!(binomial_tail_bound(n, p, l - 1).unwrap() > threshold);
    let (num, den) = exact_half_tail(&row, l as usize);
    let exact = big_to_f64(&num, &den);
    assert!(exact <= threshold, "exact tail {exact:e} at L = {l}");
    assert!(exact <= binomial_tail_bound(n, p, l).unwrap());
    // the bound is conservative but not wildly so
    let (num_prev, _) = exact_half_tail(&row, l as usize - 12);
    assert!(big_to_f64(&num_prev, &den) > threshold);
    (l, exact)
}

pub const GRID_P: [f64; 7] = [0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9];

/// Exact survival function by log-space summation against the bound, for
/// every `n <= n_max`, every `l` and every `p` in [`GRID_P`].
pub fn check_bound_dominates(n_max: usize) -> usize {
    let mut checked = 0;
    for &p in &GRID_P {
        for n in 1..=n_max {
            let nf = n as f64;
            let log_pmf: Vec<f64> = (0..=n)
                .map(|k| {
                    let kf = k as f64;
                    ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0)
                        + if k > 0 { kf * p.ln() } else { 0.0 }
                        + if k < n { (nf - kf) * (1.0 - p).ln() } else { 0.0 }
                })
                .collect();
            // tail[l] = Pr[X > l]
            let mut tail = vec![0.0f64; n + 1];
            for l in (0..n).rev() {
                tail[l] = tail[l + 1] + log_pmf[l + 1].exp();
            }
            for (l, &exact) in tail.iter().enumerate() {
                let bound = binomial_tail_bound(n as u64, p, l as u64).unwrap();
                assert!(
                    exact <= bound * (1.0 + 1e-9) + 1e-300,
                    "n={n} p={p} l={l}: exact {exact:e} > bound {bound:e}"
                );
                checked += 1;
            }
        }
    }
    checked
}
