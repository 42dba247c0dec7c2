//! Cross-validated adaptive enrichment (CADEN) trial design.
//!
//! The crate is split along the lines of the design itself:
//!
//! - [`stats`]: logistic regression by IRLS, the two-proportion test, Fisher's
//!   exact test and the sensitive-group contrast statistic.
//! - [`signature`]: cross-validated risk scores, 1-D two-means clustering and
//!   the frozen signature model used to screen stage-2 candidates.
//! - [`engine`]: the two-stage CADEN state machine and the single-stage CVRS
//!   comparator, both driven by a [`engine::PatientSupplier`].
//! - [`simgen`]: the simulation data generator and the scenario catalogue.
//! - [`harness`]: Monte Carlo campaigns, operating characteristics, dataset
//!   ingestion, config files and stage-1 reports.

pub mod engine;
pub mod error;
pub mod harness;
pub mod patient;
pub mod seed;
pub mod signature;
pub mod simgen;
pub mod stats;

pub use error::{Error, Result};
pub use patient::{Arm, PatientRecord, Subgroup};
