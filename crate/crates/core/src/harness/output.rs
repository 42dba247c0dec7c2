use super::campaign::{OperatingCharacteristics, RunRecord};
use crate::engine::{interim_statistics, DesignConfig, Strategy};
use crate::signature::SignatureModel;
use crate::{Error, PatientRecord, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

pub const OC_COLUMNS: [&str; 13] = [
    "scenario",
    "design",
    "alpha2",
    "pwr_O",
    "pwr_S",
    "pwr_C",
    "sensitivity",
    "specificity",
    "pct_unselected",
    "pct_enrichment",
    "pct_stop",
    "n_exp",
    "n_runs",
];

fn fixed3(v: f64) -> String {
    format!("{v:.3}")
}

fn opt3(v: Option<f64>) -> String {
    v.map(fixed3).unwrap_or_default()
}

/// One row per threshold, rates to three decimals.
pub fn write_operating_characteristics<W: Write>(writer: W, rows: &[OperatingCharacteristics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(OC_COLUMNS).map_err(io)?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.design.to_string(),
            opt3(r.alpha2),
            fixed3(r.pwr_o),
            fixed3(r.pwr_s),
            fixed3(r.pwr_c),
            opt3(r.sensitivity),
            opt3(r.specificity),
            fixed3(r.pct_unselected),
            fixed3(r.pct_enrichment),
            fixed3(r.pct_stop),
            fixed3(r.n_exp),
            r.n_runs.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_runs_jsonl<W: Write>(mut writer: W, runs: &[RunRecord]) -> Result<()> {
    for r in runs {
        serde_json::to_writer(&mut writer, r).map_err(|e| Error::Io(e.into()))?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Interim analysis of an observed stage-1 dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Report {
    pub n_patients: usize,
    pub n_treated: usize,
    pub n_covariates: usize,
    pub strategy: Strategy,
    pub p_overall: f64,
    pub p_promise: Option<f64>,
    pub alpha_1: f64,
    pub alpha_2: f64,
    /// Patients in the cross-validated sensitive cluster.
    pub n_sensitive_cv: Option<usize>,
    pub model: Option<SignatureModel>,
    /// Patients model M classifies as sensitive.
    pub n_sensitive_model: Option<usize>,
}

/// Runs the interim analysis on `patients` as stage 1 (`n1` is taken from the
/// data).
pub fn analyze_stage1(patients: &[PatientRecord], cfg: &DesignConfig, seed: u64) -> Result<Stage1Report> {
    let cfg = DesignConfig {
        n1: patients.len(),
        ..cfg.clone()
    };
    cfg.validate()?;
    let n_covariates = crate::patient::common_dimension(patients)?;
    let stats = interim_statistics(patients, &cfg, seed)?;
    let decision = stats.decide(cfg.alpha_1, cfg.alpha_2);
    let n_sensitive_model = match stats.model.as_ref().filter(|m| m.usable) {
        Some(m) => {
            let mut k = 0;
            for p in patients {
                k += m.predict_with(&p.covariates, cfg.prediction_rule)? as usize;
            }
            Some(k)
        }
        None => None,
    };
    Ok(Stage1Report {
        n_patients: patients.len(),
        n_treated: patients.iter().filter(|p| p.treatment == crate::Arm::Treatment).count(),
        n_covariates,
        strategy: decision.strategy,
        p_overall: decision.p_overall,
        p_promise: decision.p_promise,
        alpha_1: cfg.alpha_1,
        alpha_2: cfg.alpha_2,
        n_sensitive_cv: stats.assignment.as_ref().map(|a| a.n_sensitive()),
        model: stats.model,
        n_sensitive_model,
    })
}
