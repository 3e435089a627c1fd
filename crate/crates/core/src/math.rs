//! Deterministic numeric kernel: counter-mode pseudo-random bits, factorial
//! logarithms, Poisson weights, and a few small statistical helpers.
//!
//! Everything here is a pure function of its arguments. Reproducibility of
//! the whole library reduces to reproducibility of this module, so no global
//! state, no wall clock, no platform-dependent table initialisation.

use std::sync::OnceLock;

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Weyl increment used by the counter generator (the splitmix64 constant).
const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// splitmix64 finalizer: bijective on u64 with strong avalanche.
#[inline]
pub fn finalize64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed for replicate `k` of a run seeded with
/// `seed`. Documented mixing rule: finalize64(seed + (k+1)*GOLDEN).
#[inline]
pub fn seed_mix(seed: u64, k: u64) -> u64 {
    finalize64(seed.wrapping_add(GOLDEN.wrapping_mul(k.wrapping_add(1))))
}

/// Counter-mode generator: a short stream of u64 words attached to one
/// (key, index) pair. `IndexRng::new(key, n)` is a pure function, so the
/// n-th draw of a stream never depends on how many other draws were made.
pub(crate) struct IndexRng {
    state: u64,
}

impl IndexRng {
    #[inline]
    pub fn new(key: u64, index: u64) -> Self {
        let s = finalize64((key ^ 0x5851_f42d_4c95_7f2d).wrapping_add(index.wrapping_mul(GOLDEN)));
        IndexRng { state: s }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        finalize64(self.state)
    }

    /// Uniform draw on the open interval (0, 1); never returns 0 or 1, so
    /// logs and reciprocals of the result are always finite.
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / 9_007_199_254_740_992.0; // 2^-53
        ((self.next_u64() >> 11) as f64 + 0.5) * SCALE
    }
}

const LN_FACT_EXACT_MAX: usize = 33; // 33! still fits in u128

fn ln_fact_table() -> &'static [f64; LN_FACT_EXACT_MAX + 1] {
    static TABLE: OnceLock<[f64; LN_FACT_EXACT_MAX + 1]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0; LN_FACT_EXACT_MAX + 1];
        let mut f: u128 = 1;
        for n in 1..=LN_FACT_EXACT_MAX {
            f *= n as u128;
            t[n] = (f as f64).ln();
        }
        t
    })
}

/// ln(n!) with absolute error below ~1e-13 over the whole u64 range:
/// exact table through 33!, Stirling series beyond.
pub fn ln_factorial(n: u64) -> f64 {
    if n <= LN_FACT_EXACT_MAX as u64 {
        return ln_fact_table()[n as usize];
    }
    // Stirling for ln Gamma(x) at x = n+1; the truncated tail is below
    // 1/(1188 x^9) < 2e-17 once x >= 34.
    let x = n as f64 + 1.0;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv * (1.0 / 12.0 + inv2 * (-1.0 / 360.0 + inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    (x - 0.5) * x.ln() - x + 0.5 * (TWO_PI).ln() + series
}

/// Exact n! as f64 for small n (polynomial targets only).
pub fn factorial(n: u64) -> f64 {
    assert!(n <= LN_FACT_EXACT_MAX as u64, "factorial limited to n <= 33");
    let mut f: u128 = 1;
    for k in 2..=n {
        f *= k as u128;
    }
    f as f64
}

/// Poisson(r) probability mass at n, computed in the log domain:
/// ln p_n(r) = n ln r - ln n! - r. Safe for arbitrarily large n and r.
pub fn ln_poisson_weight(n: u64, r: f64) -> f64 {
    if r == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    n as f64 * r.ln() - ln_factorial(n) - r
}

/// Poisson(r) masses p_0..p_n_max by the stable forward recursion
/// p_0 = e^-r, p_n = p_{n-1} r / n. Relative error grows like n * eps,
/// which keeps the total mass within 1e-12 of 1 for r <= 300.
pub fn poisson_weights(r: f64, n_max: usize) -> Vec<f64> {
    let mut w = vec![0.0; n_max + 1];
    w[0] = (-r).exp();
    for n in 1..=n_max {
        w[n] = w[n - 1] * (r / n as f64);
    }
    w
}

/// Two-sided 97.5% Student-t quantile. Exact-to-3-decimals table for
/// df <= 30; the 1.96 + 2.4/df approximation beyond is good to ~5e-3,
/// far below the resolution of any confidence interval built here.
pub fn student_t_975(df: usize) -> f64 {
    const TABLE: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179,
        2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
        2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    ];
    assert!(df >= 1, "need at least one degree of freedom");
    if df <= 30 {
        TABLE[df - 1]
    } else {
        1.96 + 2.4 / df as f64
    }
}

/// Standard error of a binomial frequency under a hypothesised rate p0.
pub fn binomial_se(p0: f64, samples: u64) -> f64 {
    (p0 * (1.0 - p0) / samples as f64).sqrt()
}

/// Ordinary least squares for y = intercept + slope * x.
/// Returns (slope, intercept, slope standard error).
pub fn ols_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(u, v)| {
            let e = v - (intercept + slope * u);
            e * e
        })
        .sum();
    let dof = (x.len() - 2).max(1) as f64;
    let se = (rss / dof / sxx).sqrt();
    (slope, intercept, se)
}

/// Sample mean and unbiased variance.
pub fn mean_var(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0).max(1.0);
    (mean, var)
}

/// Median of a sequence (average of the two middle order statistics for
/// even lengths). Input is copied; NaNs are rejected by the callers.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("median: NaN in input"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// log(e^a + e^b) without overflow.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// ln I_0(x) for x >= 0: power series below 600, the standard large-x
/// expansion above (four correction terms, relative error < 1e-14 there).
pub fn ln_bessel_i0(x: f64) -> f64 {
    assert!(x >= 0.0, "ln_bessel_i0: negative argument {x}");
    if x <= 600.0 {
        // I_0(x) = sum_k (x^2/4)^k / (k!)^2; largest term stays inside f64
        // range on this side of the split
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= q / (k * k);
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
            k += 1.0;
        }
        sum.ln()
    } else {
        let inv = 1.0 / x;
        let bracket = 1.0
            + inv * (0.125 + inv * (0.0703125 + inv * (0.0732421875 + inv * 0.112152099609375)));
        x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + bracket.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed independently with 30-digit arithmetic.
    const LNFACT_34: f64 = 88.580827542197678804;
    const LNFACT_100: f64 = 363.73937555556349014;
    const LNFACT_1000: f64 = 5912.1281784881633489;
    const LNFACT_1E6: f64 = 12815518.384658169624;

    #[test]
    fn ln_factorial_matches_reference() {
        assert!((ln_factorial(0)).abs() < 1e-15);
        assert!((ln_factorial(1)).abs() < 1e-15);
        assert!((ln_factorial(2) - 2f64.ln()).abs() < 1e-15);
        for (n, want) in [
            (34, LNFACT_34),
            (100, LNFACT_100),
            (1000, LNFACT_1000),
            (1_000_000, LNFACT_1E6),
        ] {
            let got = ln_factorial(n);
            assert!(
                ((got - want) / want).abs() < 1e-14,
                "lnfact({n}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn ln_factorial_seam_is_smooth() {
        // table/Stirling handoff at n = 33/34 must agree to full precision
        let direct: f64 = (1..=40u64).map(|k| (k as f64).ln()).sum();
        assert!((ln_factorial(40) - direct).abs() < 1e-10);
        let gap_33 = ln_factorial(34) - ln_factorial(33) - 34f64.ln();
        assert!(gap_33.abs() < 1e-12, "seam gap {gap_33}");
    }

    #[test]
    fn poisson_mass_sums_to_one() {
        for r in [0.0f64, 0.5, 1.0, 17.3, 100.0, 300.0] {
            let n_end = (3.0 * r).ceil() as usize + 200;
            let w = poisson_weights(r, n_end);
            let total: f64 = w.iter().sum();
            assert!(
                (total - 1.0).abs() < 1e-12,
                "mass at r={r} off by {}",
                total - 1.0
            );
        }
    }

    #[test]
    fn poisson_log_and_recursive_weights_agree() {
        let r = 300.0;
        let w = poisson_weights(r, 1200);
        for n in [0usize, 1, 17, 300, 900, 1200] {
            let via_log = ln_poisson_weight(n as u64, r).exp();
            let rel = if w[n] == 0.0 {
                (via_log - w[n]).abs()
            } else {
                ((via_log - w[n]) / w[n]).abs()
            };
            assert!(rel < 1e-9, "n={n}: {via_log} vs {}", w[n]);
        }
    }

    #[test]
    fn poisson_squared_tail_geometric_bound() {
        // sum_{n>A} p_n^2 <= p_A^2 / 8 once A >= 3r
        for r in [2.0f64, 5.0, 20.0, 100.0] {
            let a = (3.0 * r).ceil() as usize;
            let w = poisson_weights(r, a + 400);
            let tail: f64 = w[a + 1..].iter().map(|p| p * p).sum();
            assert!(
                tail <= w[a] * w[a] / 8.0,
                "r={r}: tail {tail} vs bound {}",
                w[a] * w[a] / 8.0
            );
        }
    }

    #[test]
    fn counter_rng_is_pure_and_open() {
        let mut a = IndexRng::new(7, 42);
        let mut b = IndexRng::new(7, 42);
        for _ in 0..16 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = IndexRng::new(7, 43);
        assert_ne!(IndexRng::new(7, 42).next_u64(), c.next_u64());
        let mut r = IndexRng::new(0, 0);
        for _ in 0..10_000 {
            let u = r.next_open01();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn counter_rng_mean_is_uniform() {
        let mut acc = 0.0;
        let n = 100_000;
        for i in 0..n {
            acc += IndexRng::new(123, i).next_open01();
        }
        let mean = acc / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn seed_mix_separates_replicates() {
        assert_ne!(seed_mix(0, 0), seed_mix(0, 1));
        assert_ne!(seed_mix(0, 0), seed_mix(1, 0));
        assert_ne!(seed_mix(5, 2), 5);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        let (slope, intercept, se) = ols_fit(&x, &y);
        assert!((slope + 2.0).abs() < 1e-12);
        assert!((intercept - 3.0).abs() < 1e-12);
        assert!(se < 1e-12);
    }

    #[test]
    fn median_handles_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn log_add_matches_direct() {
        assert!((log_add(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((log_add(1.0, 3.0) - (1f64.exp() + 3f64.exp()).ln()).abs() < 1e-14);
        assert_eq!(log_add(f64::NEG_INFINITY, 2.5), 2.5);
        // no overflow for huge inputs
        let big = log_add(1e300_f64.ln() + 500.0, 1e300_f64.ln() + 500.0);
        assert!(big.is_finite());
    }

    #[test]
    fn bessel_i0_log_matches_references() {
        // precomputed at 40-digit precision
        let refs = [
            (2.0, 0.82399354148295628),
            (10.0, 7.9429720831186956),
            (15.0, 12.7356691094769062605),
            (20.0, 17.589610428244274),
            (200.0, 196.43252935422347),
            (600.0, 595.8828051464338930652),
            (650.0, 645.8427677412094241027),
            (1000.0, 995.6273088898694646715),
        ];
        for (x, want) in refs {
            let got = ln_bessel_i0(x);
            assert!(
                ((got - want) / want).abs() < 1e-13,
                "x={x}: {got} vs {want}"
            );
        }
        assert_eq!(ln_bessel_i0(0.0), 0.0);
    }

    #[test]
    fn bessel_i0_series_asymptotic_seam() {
        // both branches evaluated at the split point agree
        let q: f64 = 0.25 * 600.0 * 600.0;
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        let mut k = 1.0f64;
        while term >= 1e-18 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        let series = sum.ln();
        let x = 600.0f64;
        let inv = 1.0 / x;
        let bracket = 1.0
            + inv * (0.125 + inv * (0.0703125 + inv * (0.0732421875 + inv * 0.112152099609375)));
        let asym = x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + bracket.ln();
        assert!(((series - asym) / asym).abs() < 1e-13, "{series} vs {asym}");
    }
}
