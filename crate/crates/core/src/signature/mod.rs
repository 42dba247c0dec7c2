//! Cross-validated risk scores and the frozen signature model.
//!
//! Each covariate is screened with its own logistic model
//! `logit p = μ + λ t + α x + β t x`; the interaction estimates β weight the
//! covariates into a risk score, and a two-means split of the scores separates
//! the sensitive group (higher mean) from the rest.
//!
//! The four-parameter screening model is saturated in the arm, so its MLE is
//! the pair of per-arm fits `logit p = a + b x`, with β = b(treatment) -
//! b(control). That is how it is computed here.

mod kmeans;

pub use kmeans::{kmeans2_1d, TwoMeans};

use crate::patient::common_dimension;
use crate::stats::{fit_univariate, IrlsOptions};
use crate::{seed, Arm, Error, PatientRecord, Result};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub const DEFAULT_FOLDS: usize = 10;

/// Interaction estimates, one per covariate.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionEstimates {
    pub betas: Vec<f64>,
    /// `false` where a per-arm fit failed to converge or the covariate had no
    /// spread; the matching beta is 0.
    pub identifiable: Vec<bool>,
}

/// Covariates stored column by column, with arms and responses alongside.
struct Columns {
    n: usize,
    p: usize,
    values: Vec<f64>,
    treated: Vec<bool>,
    response: Vec<bool>,
}

impl Columns {
    fn new(patients: &[PatientRecord]) -> Result<Self> {
        let p = common_dimension(patients)?;
        let n = patients.len();
        let mut values = vec![0.0; n * p];
        let mut response = Vec::with_capacity(n);
        for (i, r) in patients.iter().enumerate() {
            for (j, &x) in r.covariates.iter().enumerate() {
                values[j * n + i] = x;
            }
            response.push(
                r.response
                    .ok_or_else(|| Error::InvalidArgument(format!("patient '{}' has no response", r.id)))?,
            );
        }
        Ok(Columns {
            n,
            p,
            values,
            treated: patients.iter().map(|r| r.treatment == Arm::Treatment).collect(),
            response,
        })
    }

    fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.n..(j + 1) * self.n]
    }

    /// Screening fits on the patients listed in `idx`.
    fn estimate(&self, idx: &[usize]) -> Result<InteractionEstimates> {
        let (treated, control): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.treated[i]);
        if treated.is_empty() || control.is_empty() {
            return Err(Error::SingleArm);
        }
        let y_t: Vec<bool> = treated.iter().map(|&i| self.response[i]).collect();
        let y_c: Vec<bool> = control.iter().map(|&i| self.response[i]).collect();
        let opts = IrlsOptions::default();
        let mut x_t = vec![0.0; treated.len()];
        let mut x_c = vec![0.0; control.len()];
        let mut betas = Vec::with_capacity(self.p);
        let mut identifiable = Vec::with_capacity(self.p);
        for j in 0..self.p {
            let col = self.column(j);
            for (dst, &i) in x_t.iter_mut().zip(&treated) {
                *dst = col[i];
            }
            for (dst, &i) in x_c.iter_mut().zip(&control) {
                *dst = col[i];
            }
            let ft = fit_univariate(&x_t, &y_t, &opts);
            let fc = fit_univariate(&x_c, &y_c, &opts);
            let ok = ft.converged && fc.converged;
            betas.push(if ok { ft.slope - fc.slope } else { 0.0 });
            identifiable.push(ok);
        }
        Ok(InteractionEstimates { betas, identifiable })
    }

    fn score(&self, i: usize, betas: &[f64]) -> f64 {
        (0..self.p).map(|j| self.values[j * self.n + i] * betas[j]).sum()
    }
}

/// Per-covariate treatment-by-covariate interaction estimates.
pub fn estimate_interaction_betas(training: &[PatientRecord]) -> Result<InteractionEstimates> {
    let cols = Columns::new(training)?;
    let all: Vec<usize> = (0..cols.n).collect();
    cols.estimate(&all)
}

/// `RS_i = Σ_j β_j x_ij` for every patient.
pub fn compute_risk_scores(patients: &[PatientRecord], betas: &[f64]) -> Result<Vec<f64>> {
    patients.iter().map(|r| risk_score(&r.covariates, betas)).collect()
}

fn risk_score(covariates: &[f64], betas: &[f64]) -> Result<f64> {
    if covariates.len() != betas.len() {
        return Err(Error::Dimension(format!(
            "{} covariates but {} coefficients",
            covariates.len(),
            betas.len()
        )));
    }
    Ok(covariates.iter().zip(betas).map(|(x, b)| x * b).sum())
}

/// Fold index for each patient. Each arm is shuffled separately and dealt
/// round-robin, continuing the count across arms, so every fold holds a near
/// equal share of both arms.
pub fn stratified_folds(arms: &[Arm], n_folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed);
    let mut folds = vec![0; arms.len()];
    let mut next = 0;
    for arm in [Arm::Control, Arm::Treatment] {
        let mut members: Vec<usize> = (0..arms.len()).filter(|&i| arms[i] == arm).collect();
        members.shuffle(&mut rng);
        for i in members {
            folds[i] = next % n_folds;
            next += 1;
        }
    }
    folds
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskScoreAssignment {
    pub scores: Vec<f64>,
    pub sensitive: Vec<bool>,
    pub mean_sensitive: f64,
    pub mean_non_sensitive: f64,
    /// All scores identical; every patient is labelled non-sensitive.
    pub degenerate: bool,
    /// Folds whose training set could not be fitted (scored with zero betas).
    pub failed_folds: usize,
}

impl RiskScoreAssignment {
    fn from_scores(scores: Vec<f64>, failed_folds: usize) -> Result<Self> {
        let split = kmeans2_1d(&scores)?;
        Ok(RiskScoreAssignment {
            scores,
            sensitive: split.high,
            mean_sensitive: split.mean_high,
            mean_non_sensitive: split.mean_low,
            degenerate: split.degenerate,
            failed_folds,
        })
    }

    pub fn n_sensitive(&self) -> usize {
        self.sensitive.iter().filter(|&&s| s).count()
    }
}

/// Cross-validated risk scores clustered into sensitive and non-sensitive
/// groups. Every patient is scored by betas estimated without them.
pub fn cvrs_analyze(patients: &[PatientRecord], n_folds: usize, rng_seed: u64) -> Result<RiskScoreAssignment> {
    if n_folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {n_folds}")));
    }
    let cols = Columns::new(patients)?;
    let arms: Vec<Arm> = patients.iter().map(|r| r.treatment).collect();
    let folds = stratified_folds(&arms, n_folds, rng_seed);

    let mut scores = vec![0.0; cols.n];
    let mut failed = 0;
    for k in 0..n_folds {
        let test: Vec<usize> = (0..cols.n).filter(|&i| folds[i] == k).collect();
        if test.is_empty() {
            continue;
        }
        let train: Vec<usize> = (0..cols.n).filter(|&i| folds[i] != k).collect();
        match cols.estimate(&train) {
            Ok(est) => {
                for &i in &test {
                    scores[i] = cols.score(i, &est.betas);
                }
            }
            Err(Error::SingleArm) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    RiskScoreAssignment::from_scores(scores, failed)
}

/// How a new risk score is compared with the two cluster means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionRule {
    /// Sensitive iff `|m_S - r| < |m_N - r|`; ties are non-sensitive.
    #[default]
    Nearest,
    /// Sensitive iff `m_S - r < m_N - r`, which does not depend on `r`.
    Literal,
}

/// Signature frozen at the interim analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureModel {
    pub betas: Vec<f64>,
    pub mean_sensitive: f64,
    pub mean_non_sensitive: f64,
    pub usable: bool,
}

impl SignatureModel {
    pub fn risk_score(&self, covariates: &[f64]) -> Result<f64> {
        risk_score(covariates, &self.betas)
    }

    pub fn predict(&self, covariates: &[f64]) -> Result<bool> {
        self.predict_with(covariates, PredictionRule::Nearest)
    }

    pub fn predict_with(&self, covariates: &[f64], rule: PredictionRule) -> Result<bool> {
        if !self.usable {
            return Err(Error::UnusableModel);
        }
        let r = self.risk_score(covariates)?;
        Ok(classify(self.mean_sensitive, self.mean_non_sensitive, r, rule))
    }
}

pub(crate) fn classify(m_s: f64, m_n: f64, r: f64, rule: PredictionRule) -> bool {
    match rule {
        PredictionRule::Nearest => (m_s - r).abs() < (m_n - r).abs(),
        PredictionRule::Literal => m_s - r < m_n - r,
    }
}

/// Whole-data signature: betas from all patients, scores of the same
/// patients, two-means split. No cross-validation.
pub fn fit_signature_model(patients: &[PatientRecord]) -> Result<SignatureModel> {
    let est = estimate_interaction_betas(patients)?;
    let scores = compute_risk_scores(patients, &est.betas)?;
    let split = kmeans2_1d(&scores)?;
    Ok(SignatureModel {
        betas: est.betas,
        mean_sensitive: split.mean_high,
        mean_non_sensitive: split.mean_low,
        usable: !split.degenerate,
    })
}

/// Predicted sensitivity of a new patient under the default rule.
pub fn predict_sensitivity(model: &SignatureModel, covariates: &[f64]) -> Result<bool> {
    model.predict(covariates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{fit_logistic, Matrix};
    use rand::Rng;

    fn patient(i: usize, arm: Arm, x: Vec<f64>, y: bool) -> PatientRecord {
        PatientRecord::new(format!("p{i}"), arm, x).with_response(y)
    }

    fn random_data(n: usize, p: usize, seed: u64) -> Vec<PatientRecord> {
        let mut rng = seed::rng(seed);
        (0..n)
            .map(|i| {
                let arm = if i % 2 == 0 { Arm::Control } else { Arm::Treatment };
                let x: Vec<f64> = (0..p).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                let eta = -0.5 + if arm == Arm::Treatment { 1.2 * x[0] } else { 0.0 };
                let y = rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp());
                patient(i, arm, x, y)
            })
            .collect()
    }

    #[test]
    fn per_arm_fits_equal_four_parameter_model() {
        let data = random_data(80, 1, 7);
        let est = estimate_interaction_betas(&data).unwrap();
        let rows: Vec<[f64; 4]> = data
            .iter()
            .map(|r| {
                let t = r.treatment.indicator() as f64;
                [1.0, t, r.covariates[0], t * r.covariates[0]]
            })
            .collect();
        let y: Vec<bool> = data.iter().map(|r| r.response.unwrap()).collect();
        let fit = fit_logistic(&Matrix::from_rows(&rows).unwrap(), &y).unwrap();
        assert!(fit.converged);
        assert!((fit.coefficients[3] - est.betas[0]).abs() < 1e-8);
    }

    #[test]
    fn constant_covariate_gets_zero_beta() {
        let mut data = random_data(60, 2, 8);
        for r in &mut data {
            r.covariates[1] = 3.0;
        }
        let est = estimate_interaction_betas(&data).unwrap();
        assert_eq!(est.betas[1], 0.0);
        assert!(!est.identifiable[1]);
        assert!(est.identifiable[0]);
    }

    #[test]
    fn single_arm_is_an_error() {
        let data: Vec<_> = (0..10)
            .map(|i| patient(i, Arm::Treatment, vec![i as f64], i % 2 == 0))
            .collect();
        assert!(matches!(estimate_interaction_betas(&data), Err(Error::SingleArm)));
    }

    #[test]
    fn risk_scores() {
        let data = random_data(3, 3, 1);
        assert_eq!(compute_risk_scores(&data, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        let e1 = compute_risk_scores(&data, &[0.0, 1.0, 0.0]).unwrap();
        for (s, r) in e1.iter().zip(&data) {
            assert_eq!(*s, r.covariates[1]);
        }
        let betas = [0.5, -2.0, 1.5];
        let s = compute_risk_scores(&data, &betas).unwrap();
        for (si, r) in s.iter().zip(&data) {
            let by_hand = 0.5 * r.covariates[0] - 2.0 * r.covariates[1] + 1.5 * r.covariates[2];
            assert!((si - by_hand).abs() < 1e-12);
        }
        assert!(compute_risk_scores(&data, &[1.0]).is_err());
    }

    #[test]
    fn risk_scores_are_linear_in_covariates() {
        let a = random_data(5, 4, 2);
        let b = random_data(5, 4, 3);
        let betas = [0.3, -0.1, 2.0, 0.7];
        let sum: Vec<PatientRecord> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| {
                let cov = x
                    .covariates
                    .iter()
                    .zip(&y.covariates)
                    .map(|(u, v)| 2.0 * u + v)
                    .collect();
                PatientRecord::new("s", Arm::Control, cov)
            })
            .collect();
        let sa = compute_risk_scores(&a, &betas).unwrap();
        let sb = compute_risk_scores(&b, &betas).unwrap();
        let ss = compute_risk_scores(&sum, &betas).unwrap();
        for i in 0..5 {
            assert!((ss[i] - (2.0 * sa[i] + sb[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn folds_are_balanced_by_arm() {
        let arms: Vec<Arm> = (0..103)
            .map(|i| if i % 3 == 0 { Arm::Treatment } else { Arm::Control })
            .collect();
        let folds = stratified_folds(&arms, 10, 4);
        for arm in [Arm::Control, Arm::Treatment] {
            let mut counts = [0usize; 10];
            for (f, a) in folds.iter().zip(&arms) {
                if *a == arm {
                    counts[*f] += 1;
                }
            }
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            assert!(hi - lo <= 1, "{arm:?}: {counts:?}");
        }
        assert_eq!(folds, stratified_folds(&arms, 10, 4));
    }

    /// Recomputes every cross-validated score from scratch: the betas for a
    /// patient's fold come only from patients outside that fold.
    #[test]
    fn cross_validated_scores_exclude_own_fold() {
        let data = random_data(60, 5, 9);
        let seed = 77;
        let cv = cvrs_analyze(&data, 5, seed).unwrap();
        let arms: Vec<Arm> = data.iter().map(|r| r.treatment).collect();
        let folds = stratified_folds(&arms, 5, seed);
        for (i, r) in data.iter().enumerate() {
            let train: Vec<PatientRecord> = data
                .iter()
                .zip(&folds)
                .filter(|(_, &f)| f != folds[i])
                .map(|(p, _)| p.clone())
                .collect();
            let est = estimate_interaction_betas(&train).unwrap();
            let expected = risk_score(&r.covariates, &est.betas).unwrap();
            assert!((cv.scores[i] - expected).abs() < 1e-12);
        }
        assert!(cv.mean_sensitive >= cv.mean_non_sensitive);
    }

    #[test]
    fn tiny_folds_complete() {
        let data = random_data(20, 3, 10);
        let cv = cvrs_analyze(&data, 10, 1).unwrap();
        assert_eq!(cv.scores.len(), 20);
        assert!(cvrs_analyze(&data, 1, 1).is_err());
        // More folds than patients leaves some folds empty.
        let cv = cvrs_analyze(&data[..4], 10, 1).unwrap();
        assert_eq!(cv.scores.len(), 4);
    }

    #[test]
    fn prediction_rule() {
        let model = SignatureModel {
            betas: vec![1.0],
            mean_sensitive: 2.0,
            mean_non_sensitive: 0.0,
            usable: true,
        };
        assert!(model.predict(&[1.5]).unwrap());
        assert!(!model.predict(&[1.0]).unwrap());
        assert!(!model.predict(&[-0.5]).unwrap());
        assert!(!model.predict_with(&[1.9], PredictionRule::Literal).unwrap());
        assert!(model.predict(&[1.0, 2.0]).is_err());
        let unusable = SignatureModel { usable: false, ..model };
        assert!(matches!(unusable.predict(&[1.0]), Err(Error::UnusableModel)));
    }

    #[test]
    fn prediction_is_shift_invariant() {
        let mut rng = seed::rng(12);
        for _ in 0..1000 {
            let (ms, mn, r, c) = (
                rng.random::<f64>() * 4.0,
                rng.random::<f64>() * 4.0 - 4.0,
                rng.random::<f64>() * 8.0 - 4.0,
                (rng.random::<f64>() * 8.0 - 4.0).round(),
            );
            assert_eq!(
                classify(ms, mn, r, PredictionRule::Nearest),
                classify(ms + c, mn + c, r + c, PredictionRule::Nearest)
            );
        }
    }

    #[test]
    fn model_reproduces_own_clustering() {
        let data = random_data(200, 6, 13);
        let model = fit_signature_model(&data).unwrap();
        assert!(model.usable);
        assert!(model.mean_sensitive > model.mean_non_sensitive);
        let scores = compute_risk_scores(&data, &model.betas).unwrap();
        let split = kmeans2_1d(&scores).unwrap();
        for (r, &h) in data.iter().zip(&split.high) {
            assert_eq!(model.predict(&r.covariates).unwrap(), h);
        }
    }

    #[test]
    fn all_zero_betas_make_unusable_model() {
        // Constant covariates: every screening fit is non-identifiable.
        let data: Vec<_> = (0..40)
            .map(|i| {
                patient(
                    i,
                    if i % 2 == 0 { Arm::Control } else { Arm::Treatment },
                    vec![1.0, 1.0],
                    i % 3 == 0,
                )
            })
            .collect();
        let model = fit_signature_model(&data).unwrap();
        assert!(!model.usable);
    }
}
