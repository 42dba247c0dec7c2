use super::{
    BlockRandomizer, Candidate, DesignConfig, EnrichmentPopulation, InterimLabels, PatientSupplier, PromiseTest,
};
use crate::signature::{compute_risk_scores, cvrs_analyze, fit_signature_model, RiskScoreAssignment, SignatureModel};
use crate::stats::{
    fisher_exact_test, sensitive_group_effect, two_proportion_test, CellOutcome, ContingencyTable2x2, TestResult,
};
use crate::{seed, Arm, Error, PatientRecord, Result};
use serde::{Deserialize, Serialize};

// Independent random streams of one trial run.
const STREAM_STAGE1: u64 = 0;
const STREAM_INTERIM_FOLDS: u64 = 1;
const STREAM_STAGE2: u64 = 2;
const STREAM_FINAL_FOLDS: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Unselected,
    Enrichment,
    Stop,
}

/// Predicted against true sensitivity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn record(&mut self, truth: bool, predicted: bool) {
        match (truth, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn merge(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    pub fn sensitivity(&self) -> Option<f64> {
        let pos = self.tp + self.fn_;
        (pos > 0).then(|| self.tp as f64 / pos as f64)
    }

    pub fn specificity(&self) -> Option<f64> {
        let neg = self.tn + self.fp;
        (neg > 0).then(|| self.tn as f64 / neg as f64)
    }

    fn from_labels(patients: &[PatientRecord], predicted: &[bool]) -> Confusion {
        let mut c = Confusion::default();
        for (r, &p) in patients.iter().zip(predicted) {
            if let Some(t) = r.true_sensitive {
                c.record(t, p);
            }
        }
        c
    }
}

/// Everything the interim analysis computes before thresholds are applied.
/// Thresholding it at several `alpha_2` values gives nested decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct InterimStatistics {
    pub p_overall: f64,
    /// Absent when the overall test already met `alpha_1`.
    pub promise: Option<TestResult>,
    pub assignment: Option<RiskScoreAssignment>,
    pub model: Option<SignatureModel>,
}

impl InterimStatistics {
    pub fn decide(&self, alpha_1: f64, alpha_2: f64) -> InterimDecision {
        let strategy = if self.p_overall < alpha_1 {
            Strategy::Unselected
        } else {
            let promising = self.promise.as_ref().is_some_and(|t| t.rejects_at(alpha_2));
            let usable = self.model.as_ref().is_some_and(|m| m.usable);
            if promising && usable {
                Strategy::Enrichment
            } else {
                Strategy::Stop
            }
        };
        InterimDecision {
            strategy,
            p_overall: self.p_overall,
            p_promise: self.promise.map(|t| t.p_value),
            model: self.model.clone(),
            stage1_sensitive: self.assignment.as_ref().map(|a| a.sensitive.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterimDecision {
    pub strategy: Strategy,
    pub p_overall: f64,
    pub p_promise: Option<f64>,
    pub model: Option<SignatureModel>,
    /// Cross-validated stage-1 labels, when the signature analysis ran.
    pub stage1_sensitive: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Stage2 {
    pub patients: Vec<PatientRecord>,
    pub n_screened: usize,
    /// Model M predictions against truth over every screened candidate.
    pub screening: Confusion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    /// `None` for the single-stage comparator.
    pub decision: Option<InterimDecision>,
    pub reject_ho: bool,
    pub reject_hs: bool,
    pub reject_hc: bool,
    /// A sensitive-group test was carried out on a non-empty set.
    pub hs_tested: bool,
    pub n_enrolled: usize,
    pub n_screened: usize,
    pub final_p_overall: Option<f64>,
    pub final_p_sensitive: Option<f64>,
    pub stage2_patients: Vec<PatientRecord>,
    /// Predicted against true sensitivity for every patient the design
    /// classified: cross-validated stage-1 labels and model M screening after
    /// enrichment, post hoc labels after an unselected stage 2. Empty after a
    /// futility stop.
    pub confusion: Confusion,
}

impl TrialResult {
    pub fn strategy(&self) -> Option<Strategy> {
        self.decision.as_ref().map(|d| d.strategy)
    }
}

fn enroll<S: PatientSupplier + ?Sized>(
    supplier: &mut S,
    randomizer: &mut BlockRandomizer,
    candidate: Candidate,
    prefix: &str,
) -> Result<PatientRecord> {
    let arm = randomizer.next_arm();
    let response = supplier.outcome(&candidate, arm)?;
    let true_sensitive = candidate.true_sensitive();
    Ok(PatientRecord {
        id: format!("{prefix}-{}", candidate.id),
        treatment: arm,
        covariates: candidate.covariates,
        response: Some(response),
        true_sensitive,
        predicted_sensitive: None,
    })
}

fn enroll_unselected<S: PatientSupplier + ?Sized>(
    supplier: &mut S,
    n: usize,
    seed: u64,
    prefix: &str,
) -> Result<Vec<PatientRecord>> {
    let mut randomizer = BlockRandomizer::new(seed);
    (0..n)
        .map(|_| {
            let c = supplier.next_candidate()?;
            enroll(supplier, &mut randomizer, c, prefix)
        })
        .collect()
}

/// Responders and totals per arm: `(treated responders, treated, control
/// responders, control)`.
fn arm_counts<'a>(patients: impl IntoIterator<Item = &'a PatientRecord>) -> Result<(u64, u64, u64, u64)> {
    let mut c = (0, 0, 0, 0);
    for r in patients {
        let y = r
            .response
            .ok_or_else(|| Error::InvalidArgument(format!("patient '{}' has no response", r.id)))?
            as u64;
        match r.treatment {
            Arm::Treatment => {
                c.0 += y;
                c.1 += 1;
            }
            Arm::Control => {
                c.2 += y;
                c.3 += 1;
            }
        }
    }
    Ok(c)
}

fn overall_test(patients: &[PatientRecord], cfg: &DesignConfig) -> Result<TestResult> {
    let (yt, nt, yc, nc) = arm_counts(patients)?;
    if nt == 0 || nc == 0 {
        return Err(Error::SingleArm);
    }
    two_proportion_test(yt, nt, yc, nc, cfg.continuity_correction)
}

fn subgroup_fisher<'a>(patients: impl IntoIterator<Item = &'a PatientRecord>) -> Result<(TestResult, bool)> {
    let (yt, nt, yc, nc) = arm_counts(patients)?;
    let nonempty = nt + nc > 0;
    Ok((
        fisher_exact_test(&ContingencyTable2x2::from_arm_counts(yt, nt, yc, nc)),
        nonempty,
    ))
}

fn promise_test(stage1: &[PatientRecord], labels: &RiskScoreAssignment, cfg: &DesignConfig) -> Result<TestResult> {
    match cfg.promise_test {
        PromiseTest::Contrast => {
            let cells: Vec<CellOutcome> = stage1
                .iter()
                .zip(&labels.sensitive)
                .map(|(r, &s)| CellOutcome {
                    treated: r.treatment == Arm::Treatment,
                    sensitive: s,
                    response: r.response.unwrap_or(false),
                })
                .collect();
            sensitive_group_effect(&cells, &cfg.contrast)
        }
        PromiseTest::Fisher => {
            let members = stage1.iter().zip(&labels.sensitive).filter(|p| *p.1).map(|p| p.0);
            Ok(subgroup_fisher(members)?.0)
        }
    }
}

fn resubstitution_labels(
    stage1: &[PatientRecord],
    model: &SignatureModel,
    cfg: &DesignConfig,
) -> Result<RiskScoreAssignment> {
    let scores = compute_risk_scores(stage1, &model.betas)?;
    let sensitive = if model.usable {
        scores
            .iter()
            .map(|&r| {
                crate::signature::classify(model.mean_sensitive, model.mean_non_sensitive, r, cfg.prediction_rule)
            })
            .collect()
    } else {
        vec![false; scores.len()]
    };
    Ok(RiskScoreAssignment {
        scores,
        sensitive,
        mean_sensitive: model.mean_sensitive,
        mean_non_sensitive: model.mean_non_sensitive,
        degenerate: !model.usable,
        failed_folds: 0,
    })
}

/// Interim statistics on stage-1 data: the overall test and, when it fails
/// `alpha_1`, the cross-validated signature, the promise test and model M.
pub fn interim_statistics(stage1: &[PatientRecord], cfg: &DesignConfig, seed: u64) -> Result<InterimStatistics> {
    let overall = overall_test(stage1, cfg)?;
    if overall.rejects_at(cfg.alpha_1) {
        return Ok(InterimStatistics {
            p_overall: overall.p_value,
            promise: None,
            assignment: None,
            model: None,
        });
    }
    let model = fit_signature_model(stage1)?;
    let assignment = match cfg.interim_labels {
        InterimLabels::CrossValidated => cvrs_analyze(stage1, cfg.n_folds, seed::derive(seed, STREAM_INTERIM_FOLDS))?,
        InterimLabels::Resubstitution => resubstitution_labels(stage1, &model, cfg)?,
    };
    let promise = if assignment.degenerate {
        TestResult::uninformative(crate::stats::TestMethod::ContrastWald)
    } else {
        promise_test(stage1, &assignment, cfg)?
    };
    Ok(InterimStatistics {
        p_overall: overall.p_value,
        promise: Some(promise),
        assignment: Some(assignment),
        model: Some(model),
    })
}

pub fn interim_analysis(stage1: &[PatientRecord], cfg: &DesignConfig, seed: u64) -> Result<InterimDecision> {
    Ok(interim_statistics(stage1, cfg, seed)?.decide(cfg.alpha_1, cfg.alpha_2))
}

/// Stage-2 recruitment. Unselected: `n2` candidates randomised 1:1.
/// Enrichment: candidates are screened with model M and only predicted
/// sensitive ones are randomised, until `n2` are enrolled.
pub fn recruit_stage2<S: PatientSupplier + ?Sized>(
    decision: &InterimDecision,
    supplier: &mut S,
    cfg: &DesignConfig,
    seed: u64,
) -> Result<Stage2> {
    let stream = seed::derive(seed, STREAM_STAGE2);
    match decision.strategy {
        Strategy::Stop => Err(Error::InvalidArgument("no stage 2 after a futility stop".into())),
        Strategy::Unselected => Ok(Stage2 {
            patients: enroll_unselected(supplier, cfg.n2, stream, "s2")?,
            n_screened: cfg.n2,
            screening: Confusion::default(),
        }),
        Strategy::Enrichment => {
            let model = decision
                .model
                .as_ref()
                .filter(|m| m.usable)
                .ok_or(Error::UnusableModel)?;
            let cap = cfg.screening_cap();
            let mut randomizer = BlockRandomizer::new(stream);
            let mut out = Stage2::default();
            while out.patients.len() < cfg.n2 {
                if out.n_screened >= cap {
                    return Err(Error::ScreeningCapExceeded {
                        cap,
                        enrolled: out.patients.len(),
                        target: cfg.n2,
                    });
                }
                let candidate = supplier.next_candidate()?;
                out.n_screened += 1;
                let predicted = model.predict_with(&candidate.covariates, cfg.prediction_rule)?;
                if let Some(truth) = candidate.true_sensitive() {
                    out.screening.record(truth, predicted);
                }
                if predicted {
                    let mut record = enroll(supplier, &mut randomizer, candidate, "s2")?;
                    record.predicted_sensitive = Some(true);
                    out.patients.push(record);
                }
            }
            Ok(out)
        }
    }
}

/// Final tests for the strategy taken at the interim.
pub fn final_analysis(
    stage1: &[PatientRecord],
    stage2: &Stage2,
    decision: &InterimDecision,
    cfg: &DesignConfig,
    seed: u64,
) -> Result<TrialResult> {
    let stage1_confusion = || {
        decision
            .stage1_sensitive
            .as_ref()
            .map(|labels| Confusion::from_labels(stage1, labels))
            .unwrap_or_default()
    };
    let mut result = TrialResult {
        decision: Some(decision.clone()),
        reject_ho: false,
        reject_hs: false,
        reject_hc: false,
        hs_tested: false,
        n_enrolled: stage1.len(),
        n_screened: 0,
        final_p_overall: None,
        final_p_sensitive: None,
        stage2_patients: Vec::new(),
        confusion: Confusion::default(),
    };

    match decision.strategy {
        Strategy::Stop => {}
        Strategy::Unselected => {
            let all: Vec<PatientRecord> = stage1.iter().chain(&stage2.patients).cloned().collect();
            let single = single_stage_analysis(&all, cfg, seed)?;
            result.reject_ho = single.reject_ho;
            result.reject_hs = single.reject_hs;
            result.hs_tested = single.hs_tested;
            result.final_p_overall = single.final_p_overall;
            result.final_p_sensitive = single.final_p_sensitive;
            result.confusion = single.confusion;
        }
        Strategy::Enrichment => {
            let model = decision
                .model
                .as_ref()
                .filter(|m| m.usable)
                .ok_or(Error::UnusableModel)?;
            let mut pooled: Vec<&PatientRecord> = Vec::new();
            if cfg.enrichment_population == EnrichmentPopulation::Pooled {
                for r in stage1 {
                    if model.predict_with(&r.covariates, cfg.prediction_rule)? {
                        pooled.push(r);
                    }
                }
            }
            pooled.extend(&stage2.patients);
            let (test, nonempty) = subgroup_fisher(pooled)?;
            result.hs_tested = nonempty;
            result.final_p_sensitive = Some(test.p_value);
            result.reject_hs = test.rejects_at(cfg.alpha_enrichment());
            result.confusion = stage1_confusion();
            result.confusion.merge(&stage2.screening);
        }
    }
    result.reject_hc = result.reject_ho || result.reject_hs;
    result.n_enrolled = stage1.len() + stage2.patients.len();
    result.n_screened = stage2.n_screened;
    result.stage2_patients = stage2.patients.clone();
    Ok(result)
}

struct SingleStage {
    reject_ho: bool,
    reject_hs: bool,
    hs_tested: bool,
    final_p_overall: Option<f64>,
    final_p_sensitive: Option<f64>,
    confusion: Confusion,
}

/// Overall test at `alpha_o`, then CVRS and Fisher's test inside the
/// sensitive cluster at `alpha_s`.
fn single_stage_analysis(all: &[PatientRecord], cfg: &DesignConfig, seed: u64) -> Result<SingleStage> {
    let overall = overall_test(all, cfg)?;
    let assignment = cvrs_analyze(all, cfg.n_folds, seed::derive(seed, STREAM_FINAL_FOLDS))?;
    let members = all.iter().zip(&assignment.sensitive).filter(|p| *p.1).map(|p| p.0);
    let (test, nonempty) = subgroup_fisher(members)?;
    Ok(SingleStage {
        reject_ho: overall.rejects_at(cfg.alpha_o),
        reject_hs: nonempty && test.rejects_at(cfg.alpha_s),
        hs_tested: nonempty,
        final_p_overall: Some(overall.p_value),
        final_p_sensitive: nonempty.then_some(test.p_value),
        confusion: Confusion::from_labels(all, &assignment.sensitive),
    })
}

fn continue_after_interim<S: PatientSupplier + ?Sized>(
    supplier: &mut S,
    stage1: &[PatientRecord],
    decision: &InterimDecision,
    cfg: &DesignConfig,
    seed: u64,
) -> Result<TrialResult> {
    let stage2 = match decision.strategy {
        Strategy::Stop => Stage2::default(),
        _ => recruit_stage2(decision, supplier, cfg, seed)?,
    };
    final_analysis(stage1, &stage2, decision, cfg, seed)
}

/// One CADEN trial: stage 1, interim analysis, stage 2, final analysis.
pub fn run_caden_trial<S: PatientSupplier + ?Sized>(
    supplier: &mut S,
    cfg: &DesignConfig,
    seed: u64,
) -> Result<TrialResult> {
    cfg.validate()?;
    let stage1 = enroll_unselected(supplier, cfg.n1, seed::derive(seed, STREAM_STAGE1), "s1")?;
    let decision = interim_analysis(&stage1, cfg, seed)?;
    continue_after_interim(supplier, &stage1, &decision, cfg, seed)
}

/// The same trial under several interim promise thresholds. Stage 1 and the
/// interim statistics are shared; each threshold continues from its own copy
/// of the supplier. Entry `i` equals `run_caden_trial` with
/// `alpha_2 = alpha_2s[i]` on a fresh supplier in the same state.
pub fn run_caden_trials<S: PatientSupplier + Clone>(
    supplier: &mut S,
    cfg: &DesignConfig,
    alpha_2s: &[f64],
    seed: u64,
) -> Result<Vec<Result<TrialResult>>> {
    cfg.validate()?;
    let stage1 = enroll_unselected(supplier, cfg.n1, seed::derive(seed, STREAM_STAGE1), "s1")?;
    let stats = interim_statistics(&stage1, cfg, seed)?;
    let mut unselected: Option<TrialResult> = None;
    let mut out = Vec::with_capacity(alpha_2s.len());
    for &alpha_2 in alpha_2s {
        let cfg = cfg.with_alpha_2(alpha_2);
        cfg.validate()?;
        let decision = stats.decide(cfg.alpha_1, alpha_2);
        if decision.strategy == Strategy::Unselected {
            if let Some(done) = &unselected {
                out.push(Ok(done.clone()));
                continue;
            }
        }
        let mut fork = supplier.clone();
        let result = continue_after_interim(&mut fork, &stage1, &decision, &cfg, seed);
        if decision.strategy == Strategy::Unselected {
            if let Ok(r) = &result {
                unselected = Some(r.clone());
            }
        }
        out.push(result);
    }
    Ok(out)
}

/// Single-stage comparator: `n1 + n2` unselected patients, overall test at
/// `alpha_o`, post hoc signature test at `alpha_s`.
pub fn run_cvrs_trial<S: PatientSupplier + ?Sized>(
    supplier: &mut S,
    cfg: &DesignConfig,
    seed: u64,
) -> Result<TrialResult> {
    cfg.validate()?;
    let all = enroll_unselected(supplier, cfg.total_size(), seed::derive(seed, STREAM_STAGE1), "p")?;
    let single = single_stage_analysis(&all, cfg, seed)?;
    Ok(TrialResult {
        decision: None,
        reject_ho: single.reject_ho,
        reject_hs: single.reject_hs,
        reject_hc: single.reject_ho || single.reject_hs,
        hs_tested: single.hs_tested,
        n_enrolled: all.len(),
        n_screened: all.len(),
        final_p_overall: single.final_p_overall,
        final_p_sensitive: single.final_p_sensitive,
        stage2_patients: Vec::new(),
        confusion: single.confusion,
    })
}
