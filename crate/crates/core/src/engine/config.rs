use crate::signature::{PredictionRule, DEFAULT_FOLDS};
use crate::stats::DEFAULT_CONTRAST;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Statistic used for the interim promise test in the sensitive group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromiseTest {
    /// Wald statistic of a contrast in the treatment-by-subgroup model.
    #[default]
    Contrast,
    /// Fisher's exact test of treatment against control inside the sensitive
    /// cluster.
    Fisher,
}

/// Which patients enter the final sensitive-group test after enrichment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnrichmentPopulation {
    /// Stage-2 enrollees only.
    #[default]
    Stage2Only,
    /// Stage-1 patients that model M classifies as sensitive, plus every
    /// stage-2 enrollee. These stage-1 patients also selected the signature,
    /// so the test is anti-conservative.
    Pooled,
}

/// Where the interim sensitive/non-sensitive labels come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterimLabels {
    /// Out-of-fold risk scores, clustered.
    #[default]
    CrossValidated,
    /// Model M applied back to the stage-1 patients it was fitted on.
    Resubstitution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignConfig {
    pub n1: usize,
    pub n2: usize,
    /// Interim significance level of the overall test.
    pub alpha_1: f64,
    /// Interim promise threshold in the sensitive group.
    pub alpha_2: f64,
    /// Final overall significance level.
    pub alpha_o: f64,
    /// Final sensitive-group significance level after an unselected stage 2.
    pub alpha_s: f64,
    pub contrast: [f64; 4],
    /// Enrichment screening cap; 50 x n2 when absent.
    pub max_screened: Option<usize>,
    pub n_folds: usize,
    pub continuity_correction: bool,
    pub promise_test: PromiseTest,
    pub interim_labels: InterimLabels,
    pub enrichment_population: EnrichmentPopulation,
    pub prediction_rule: PredictionRule,
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig {
            n1: 200,
            n2: 200,
            alpha_1: 0.04,
            alpha_2: 0.1,
            alpha_o: 0.04,
            alpha_s: 0.01,
            contrast: DEFAULT_CONTRAST,
            max_screened: None,
            n_folds: DEFAULT_FOLDS,
            continuity_correction: true,
            promise_test: PromiseTest::Contrast,
            interim_labels: InterimLabels::CrossValidated,
            enrichment_population: EnrichmentPopulation::Stage2Only,
            prediction_rule: PredictionRule::Nearest,
        }
    }
}

impl DesignConfig {
    pub fn with_sizes(n1: usize, n2: usize) -> Self {
        DesignConfig {
            n1,
            n2,
            ..Default::default()
        }
    }

    pub fn with_alpha_2(&self, alpha_2: f64) -> Self {
        DesignConfig {
            alpha_2,
            ..self.clone()
        }
    }

    pub fn total_size(&self) -> usize {
        self.n1 + self.n2
    }

    /// Level of the final sensitive-group test after enrichment.
    pub fn alpha_enrichment(&self) -> f64 {
        self.alpha_o + self.alpha_s
    }

    pub fn screening_cap(&self) -> usize {
        self.max_screened.unwrap_or(50 * self.n2)
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |a: f64| a > 0.0 && a < 1.0;
        for (name, a) in [
            ("alpha_1", self.alpha_1),
            ("alpha_2", self.alpha_2),
            ("alpha_o", self.alpha_o),
            ("alpha_s", self.alpha_s),
        ] {
            if !in_unit(a) {
                return Err(Error::Config(format!("{name} = {a} is not in (0, 1)")));
            }
        }
        if self.alpha_o + self.alpha_s > 1.0 {
            return Err(Error::Config("alpha_o + alpha_s exceeds 1".into()));
        }
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::Config("n1 and n2 must be at least 1".into()));
        }
        if self.n_folds < 2 {
            return Err(Error::Config("n_folds must be at least 2".into()));
        }
        if self.contrast.iter().all(|&g| g == 0.0) || self.contrast.iter().any(|g| !g.is_finite()) {
            return Err(Error::Config("contrast must be finite and non-zero".into()));
        }
        if self.screening_cap() < self.n2 {
            return Err(Error::Config("max_screened is below n2".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let d = DesignConfig::default();
        d.validate().unwrap();
        assert_eq!(d.alpha_enrichment(), 0.05);
        assert_eq!(d.screening_cap(), 10_000);
    }

    #[test]
    fn invalid_alphas() {
        for d in [
            DesignConfig {
                alpha_1: 0.0,
                ..Default::default()
            },
            DesignConfig {
                alpha_2: 1.0,
                ..Default::default()
            },
            DesignConfig {
                alpha_o: 0.6,
                alpha_s: 0.5,
                ..Default::default()
            },
            DesignConfig {
                n2: 0,
                ..Default::default()
            },
            DesignConfig {
                contrast: [0.0; 4],
                ..Default::default()
            },
        ] {
            assert!(d.validate().is_err(), "{d:?}");
        }
    }
}
