use statrs::function::erf::erfc;
use statrs::function::factorial::ln_factorial;
use std::f64::consts::SQRT_2;

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    0.5 * erfc(-z / SQRT_2)
}

/// P(|Z| >= |z|) for a standard normal Z.
pub fn normal_two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return 1.0;
    }
    erfc(z.abs() / SQRT_2).min(1.0)
}

/// Upper tail of the chi-square distribution with one degree of freedom.
pub fn chi_square_1_sf(stat: f64) -> f64 {
    if !(stat > 0.0) {
        return 1.0;
    }
    erfc((stat / 2.0).sqrt()).min(1.0)
}

/// log C(n, k); negative infinity outside 0 <= k <= n.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Log probability of `k` successes in `n` draws without replacement from a
/// population of `big_n` items holding `big_k` successes.
pub fn hypergeom_log_pmf(k: u64, big_k: u64, n: u64, big_n: u64) -> f64 {
    if big_k > big_n || n > big_n || k > big_k || k > n || n - k > big_n - big_k {
        return f64::NEG_INFINITY;
    }
    ln_choose(big_k, k) + ln_choose(big_n - big_k, n - k) - ln_choose(big_n, n)
}
