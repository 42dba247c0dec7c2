use super::{chi_square_1_sf, TestMethod, TestResult};
use crate::{Error, Result};

/// Two-sided test of equal proportions using the pooled-variance chi-square
/// statistic with one degree of freedom, optionally with Yates' continuity
/// correction (capped at half the observed difference scaled by the harmonic
/// sample size, so the correction never overshoots).
pub fn two_proportion_test(
    successes_1: u64,
    n_1: u64,
    successes_2: u64,
    n_2: u64,
    continuity_correction: bool,
) -> Result<TestResult> {
    if n_1 == 0 || n_2 == 0 {
        return Err(Error::InvalidArgument(
            "two-proportion test needs at least one subject per arm".into(),
        ));
    }
    if successes_1 > n_1 || successes_2 > n_2 {
        return Err(Error::InvalidArgument(
            "successes cannot exceed the number of trials".into(),
        ));
    }
    let method = if continuity_correction {
        TestMethod::TwoProportionCorrected
    } else {
        TestMethod::TwoProportion
    };

    let (x1, n1, x2, n2) = (successes_1 as f64, n_1 as f64, successes_2 as f64, n_2 as f64);
    let pooled = (x1 + x2) / (n1 + n2);
    if pooled <= 0.0 || pooled >= 1.0 {
        return Ok(TestResult::uninformative(method));
    }
    let delta = x1 / n1 - x2 / n2;
    let yates = if continuity_correction {
        0.5f64.min(delta.abs() / (1.0 / n1 + 1.0 / n2))
    } else {
        0.0
    };
    // |O - E| is the same in all four cells of a 2x2 table.
    let deviation = ((x1 - n1 * pooled).abs() - yates).powi(2);
    let inv_expected =
        1.0 / (n1 * pooled) + 1.0 / (n1 * (1.0 - pooled)) + 1.0 / (n2 * pooled) + 1.0 / (n2 * (1.0 - pooled));
    let statistic = deviation * inv_expected;
    Ok(TestResult {
        statistic,
        p_value: chi_square_1_sf(statistic),
        method,
        degenerate: false,
    })
}
