//! The two-stage CADEN design and the single-stage CVRS comparator.
//!
//! ```text
//! stage 1 (N1, 1:1) -> overall test p < alpha_1 ? -> unselected: N2 more, final overall + post hoc CVRS
//!                    \-> CVRS labels, promise p < alpha_2 ? -> enrichment: screen with model M, N2 predicted sensitive
//!                                                         \-> stop for futility
//! ```

mod config;
mod supplier;
mod trial;

pub use config::{DesignConfig, EnrichmentPopulation, InterimLabels, PromiseTest};
pub use supplier::{BlockRandomizer, Candidate, PatientSupplier};
pub use trial::{
    final_analysis, interim_analysis, interim_statistics, recruit_stage2, run_caden_trial, run_caden_trials,
    run_cvrs_trial, Confusion, InterimDecision, InterimStatistics, Stage2, Strategy, TrialResult,
};
