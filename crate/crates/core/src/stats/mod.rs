//! Statistical primitives. Everything here is a pure function of its inputs.

mod contrast;
mod dist;
mod fisher;
mod logistic;
mod proportion;

pub use contrast::{sensitive_group_effect, CellOutcome, DEFAULT_CONTRAST};
pub use dist::{chi_square_1_sf, hypergeom_log_pmf, ln_choose, normal_cdf, normal_two_sided_p};
pub use fisher::{fisher_exact_test, ContingencyTable2x2};
pub use logistic::{fit_logistic, fit_logistic_with, fit_univariate, IrlsOptions, LogisticFit, Matrix, UnivariateFit};
pub use proportion::two_proportion_test;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    TwoProportion,
    TwoProportionCorrected,
    FisherExact,
    ContrastWald,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
    /// Set when the p-value is the conventional 1 for an uninformative input
    /// (zero margin, empty cell, non-converged fit).
    pub degenerate: bool,
}

impl TestResult {
    pub(crate) fn uninformative(method: TestMethod) -> Self {
        TestResult {
            statistic: 0.0,
            p_value: 1.0,
            method,
            degenerate: true,
        }
    }

    pub fn rejects_at(&self, alpha: f64) -> bool {
        !self.degenerate && self.p_value < alpha
    }
}
