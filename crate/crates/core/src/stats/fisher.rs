use super::{hypergeom_log_pmf, TestMethod, TestResult};
use serde::{Deserialize, Serialize};

/// A 2x2 table laid out as
///
/// ```text
///                 arm 1   arm 2
/// responders        a       b
/// non-responders    c       d
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContingencyTable2x2 {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable2x2 {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        ContingencyTable2x2 { a, b, c, d }
    }

    /// Table of responders by arm: `(responders, total)` per arm.
    pub fn from_arm_counts(responders_1: u64, n_1: u64, responders_2: u64, n_2: u64) -> Self {
        ContingencyTable2x2 {
            a: responders_1,
            b: responders_2,
            c: n_1 - responders_1,
            d: n_2 - responders_2,
        }
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    pub fn row_margins(&self) -> (u64, u64) {
        (self.a + self.b, self.c + self.d)
    }

    pub fn col_margins(&self) -> (u64, u64) {
        (self.a + self.c, self.b + self.d)
    }

    /// Log hypergeometric probability of the table given its margins.
    pub fn log_probability(&self) -> f64 {
        let (r1, _) = self.row_margins();
        let (c1, _) = self.col_margins();
        hypergeom_log_pmf(self.a, c1, r1, self.total())
    }
}

/// Relative slack when comparing table probabilities against the observed one.
const RELATIVE_SLACK: f64 = 1e-7;

/// Two-sided Fisher exact test: the total probability of all tables with the
/// observed margins that are no more likely than the observed table.
///
/// A table with an empty row or column has a single admissible arrangement;
/// it returns p = 1 and is marked degenerate.
pub fn fisher_exact_test(table: &ContingencyTable2x2) -> TestResult {
    let n = table.total();
    let (r1, r2) = table.row_margins();
    let (c1, c2) = table.col_margins();
    if r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0 {
        return TestResult::uninformative(TestMethod::FisherExact);
    }

    let observed = hypergeom_log_pmf(table.a, c1, r1, n);
    let cutoff = observed + RELATIVE_SLACK.ln_1p();
    let lo = r1.saturating_sub(c2);
    let hi = r1.min(c1);
    let p: f64 = (lo..=hi)
        .map(|k| hypergeom_log_pmf(k, c1, r1, n))
        .filter(|&lp| lp <= cutoff)
        .map(f64::exp)
        .sum();
    TestResult {
        statistic: observed.exp(),
        p_value: p.min(1.0),
        method: TestMethod::FisherExact,
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_table() {
        let r = fisher_exact_test(&ContingencyTable2x2::new(5, 5, 5, 5));
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extreme_table() {
        // Only the two extreme tables are as unlikely as the observed one.
        let r = fisher_exact_test(&ContingencyTable2x2::new(10, 0, 0, 10));
        assert!((r.p_value - 2.0 / 184756.0).abs() < 1e-15);
    }

    #[test]
    fn known_value() {
        // [[2,8],[8,2]]: tables with a in {0,1,2,8,9,10};
        // (1 + 100 + 2025) * 2 / 184756
        let r = fisher_exact_test(&ContingencyTable2x2::new(2, 8, 8, 2));
        assert!((r.p_value - 4252.0 / 184756.0).abs() < 1e-13);
    }

    #[test]
    fn zero_margin_is_degenerate() {
        let r = fisher_exact_test(&ContingencyTable2x2::new(0, 0, 3, 4));
        assert!(r.degenerate);
        assert_eq!(r.p_value, 1.0);
        let r = fisher_exact_test(&ContingencyTable2x2::default());
        assert!(r.degenerate);
    }

    #[test]
    fn from_arm_counts_layout() {
        let t = ContingencyTable2x2::from_arm_counts(3, 10, 7, 12);
        assert_eq!(t, ContingencyTable2x2::new(3, 7, 7, 5));
        assert_eq!(t.col_margins(), (10, 12));
    }
}
