//! Simulated trial populations.
//!
//! Covariates are independent normals. The first `k` covariates are the
//! sensitive ones: their law depends on the patient's subgroup. The remaining
//! `p - k` covariates follow the baseline law for everybody. Responses follow
//!
//! ```text
//! logit p = μ + λ t + Σ_k α_k x_k + t Σ_k γ_k x_k
//! ```
//!
//! with a separate interaction vector for the harmful subgroup. Coefficients
//! are chosen so that a patient sitting exactly at their subgroup's mean
//! covariate vector has the target response rate. Covariate noise around that
//! mean moves the realised rate slightly off target.

use crate::engine::{Candidate, PatientSupplier};
use crate::{seed, Arm, Error, PatientRecord, Result, Subgroup};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalLaw {
    pub mean: f64,
    pub variance: f64,
}

impl NormalLaw {
    pub const fn new(mean: f64, variance: f64) -> Self {
        NormalLaw { mean, variance }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.mean + self.variance.sqrt() * z
    }
}

/// Covariate laws by subgroup. All correlations are zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateLaws {
    /// Sensitive covariates of sensitive patients.
    pub sensitive: NormalLaw,
    /// Sensitive covariates of non-sensitive patients.
    pub non_sensitive: NormalLaw,
    /// Non-sensitive covariates of every patient.
    pub baseline: NormalLaw,
    /// Sensitive covariates of harmful-group patients.
    pub harmful: NormalLaw,
}

impl Default for CovariateLaws {
    fn default() -> Self {
        CovariateLaws {
            sensitive: NormalLaw::new(1.0, 0.25),
            non_sensitive: NormalLaw::new(0.0, 0.01),
            baseline: NormalLaw::new(0.0, 0.25),
            harmful: NormalLaw::new(-1.0, 0.25),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Total covariates.
    pub n_covariates: usize,
    /// Sensitive covariates; always the first ones.
    pub n_sensitive_covariates: usize,
    /// Response rate on control, everyone.
    pub rr0: f64,
    /// Sensitive group on treatment.
    pub rr1: f64,
    /// Non-sensitive group on treatment.
    pub rr2: f64,
    /// Harmful group on treatment.
    #[serde(default)]
    pub rr3: Option<f64>,
    pub prev_sensitive: f64,
    #[serde(default)]
    pub prev_harmful: f64,
    pub n1: usize,
    pub n2: usize,
    #[serde(default)]
    pub laws: CovariateLaws,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("scenario '{}': {m}", self.name)));
        if self.n_sensitive_covariates > self.n_covariates {
            return bad("more sensitive covariates than covariates".into());
        }
        if self.n_covariates == 0 {
            return bad("no covariates".into());
        }
        for (label, rate) in [("rr0", self.rr0), ("rr1", self.rr1), ("rr2", self.rr2)]
            .into_iter()
            .chain(self.rr3.map(|r| ("rr3", r)))
        {
            if !(rate > 0.0 && rate < 1.0) {
                return bad(format!("{label} = {rate} is not in (0, 1)"));
            }
        }
        for (label, prev) in [
            ("prev_sensitive", self.prev_sensitive),
            ("prev_harmful", self.prev_harmful),
        ] {
            if !(0.0..=1.0).contains(&prev) {
                return bad(format!("{label} = {prev} is not in [0, 1]"));
            }
        }
        if self.prev_sensitive + self.prev_harmful > 1.0 {
            return bad("prevalences sum above 1".into());
        }
        if self.prev_harmful > 0.0 && self.rr3.is_none() {
            return bad("a harmful group needs rr3".into());
        }
        if self.n1 == 0 || self.n2 == 0 {
            return bad("stage sizes must be positive".into());
        }
        let laws = [
            self.laws.sensitive,
            self.laws.non_sensitive,
            self.laws.baseline,
            self.laws.harmful,
        ];
        if laws.iter().any(|l| !(l.variance >= 0.0) || !l.mean.is_finite()) {
            return bad("covariate laws need finite means and non-negative variances".into());
        }
        let needs_nonzero_mean = |m: f64, active: bool| active && m == 0.0;
        if self.n_sensitive_covariates > 0
            && (needs_nonzero_mean(self.laws.sensitive.mean, self.rr1 != self.rr2)
                || needs_nonzero_mean(self.laws.harmful.mean, self.prev_harmful > 0.0))
        {
            return bad("an interaction effect needs a non-zero subgroup covariate mean".into());
        }
        Ok(())
    }

    pub fn total_size(&self) -> usize {
        self.n1 + self.n2
    }
}

/// Coefficients of the response model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeParams {
    pub mu: f64,
    pub lambda: f64,
    pub gammas: Vec<f64>,
    pub gammas_harmful: Option<Vec<f64>>,
    pub alphas: Vec<f64>,
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn expit(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

/// Model coefficients that hit the scenario's target response rates at the
/// subgroup mean covariate vectors.
pub fn derive_params(cfg: &ScenarioConfig) -> Result<GenerativeParams> {
    cfg.validate()?;
    let k = cfg.n_sensitive_covariates;
    let mu = logit(cfg.rr0);
    let lambda = if cfg.rr2 == cfg.rr0 { 0.0 } else { logit(cfg.rr2) - mu };
    let per_covariate = |target: f64, mean: f64| {
        if k == 0 || target == 0.0 {
            0.0
        } else {
            target / (k as f64 * mean)
        }
    };
    let gamma = per_covariate(logit(cfg.rr1) - mu - lambda, cfg.laws.sensitive.mean);
    let gammas_harmful = match cfg.rr3 {
        Some(rr3) if cfg.prev_harmful > 0.0 => {
            let g = per_covariate(logit(rr3) - mu - lambda, cfg.laws.harmful.mean);
            Some(vec![g; k])
        }
        _ => None,
    };
    Ok(GenerativeParams {
        mu,
        lambda,
        gammas: vec![gamma; k],
        gammas_harmful,
        alphas: vec![0.0; k],
    })
}

/// Covariate vector of a patient from `group`.
pub fn draw_covariates<R: Rng>(cfg: &ScenarioConfig, group: Subgroup, rng: &mut R) -> Vec<f64> {
    let law = match group {
        Subgroup::Sensitive => cfg.laws.sensitive,
        Subgroup::NonSensitive => cfg.laws.non_sensitive,
        Subgroup::Harmful => cfg.laws.harmful,
    };
    let k = cfg.n_sensitive_covariates;
    (0..cfg.n_covariates)
        .map(|j| {
            if j < k {
                law.sample(rng)
            } else {
                cfg.laws.baseline.sample(rng)
            }
        })
        .collect()
}

/// Linear predictor ω of the response model.
pub fn linear_predictor(params: &GenerativeParams, group: Subgroup, arm: Arm, covariates: &[f64]) -> f64 {
    let mut omega = params.mu;
    for (a, x) in params.alphas.iter().zip(covariates) {
        omega += a * x;
    }
    if arm == Arm::Treatment {
        omega += params.lambda;
        let gammas = match (group, &params.gammas_harmful) {
            (Subgroup::Harmful, Some(h)) => h,
            _ => &params.gammas,
        };
        for (g, x) in gammas.iter().zip(covariates) {
            omega += g * x;
        }
    }
    omega
}

pub fn response_probability(params: &GenerativeParams, group: Subgroup, arm: Arm, covariates: &[f64]) -> f64 {
    expit(linear_predictor(params, group, arm, covariates))
}

/// One simulated patient with an observed response.
pub fn generate_patient<R: Rng>(
    cfg: &ScenarioConfig,
    params: &GenerativeParams,
    group: Subgroup,
    arm: Arm,
    rng: &mut R,
) -> PatientRecord {
    let covariates = draw_covariates(cfg, group, rng);
    let p = response_probability(params, group, arm, &covariates);
    let response = rng.random::<f64>() < p;
    PatientRecord {
        true_sensitive: Some(group == Subgroup::Sensitive),
        ..PatientRecord::new("sim", arm, covariates).with_response(response)
    }
}

/// Endless stream of simulated candidates.
#[derive(Debug, Clone)]
pub struct SimulatedPopulation {
    cfg: Arc<ScenarioConfig>,
    params: Arc<GenerativeParams>,
    rng: ChaCha8Rng,
    drawn: u64,
}

impl SimulatedPopulation {
    pub fn new(cfg: Arc<ScenarioConfig>, params: Arc<GenerativeParams>, seed: u64) -> Self {
        SimulatedPopulation {
            cfg,
            params,
            rng: seed::rng(seed),
            drawn: 0,
        }
    }

    fn draw_group(&mut self) -> Subgroup {
        let u: f64 = self.rng.random();
        if u < self.cfg.prev_sensitive {
            Subgroup::Sensitive
        } else if u < self.cfg.prev_sensitive + self.cfg.prev_harmful {
            Subgroup::Harmful
        } else {
            Subgroup::NonSensitive
        }
    }
}

/// Supplier for a scenario, deterministic per seed.
pub fn population_supplier(cfg: &ScenarioConfig, params: &GenerativeParams, seed: u64) -> SimulatedPopulation {
    SimulatedPopulation::new(Arc::new(cfg.clone()), Arc::new(params.clone()), seed)
}

impl PatientSupplier for SimulatedPopulation {
    fn next_candidate(&mut self) -> Result<Candidate> {
        let group = self.draw_group();
        let covariates = draw_covariates(&self.cfg, group, &mut self.rng);
        self.drawn += 1;
        Ok(Candidate {
            id: format!("c{}", self.drawn),
            covariates,
            subgroup: Some(group),
        })
    }

    fn outcome(&mut self, candidate: &Candidate, arm: Arm) -> Result<bool> {
        let group = candidate.subgroup.unwrap_or(Subgroup::NonSensitive);
        let p = response_probability(&self.params, group, arm, &candidate.covariates);
        Ok(self.rng.random::<f64>() < p)
    }
}

/// A named row of the scenario catalogue.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogueEntry {
    pub setting: &'static str,
    pub table: u8,
    pub scenario: &'static str,
    pub config: ScenarioConfig,
}

fn scenario(
    name: &str,
    rr1: f64,
    rr2: f64,
    rr3: Option<f64>,
    prev_s: f64,
    prev_h: f64,
    total: usize,
) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        n_covariates: 100,
        n_sensitive_covariates: 10,
        rr0: 0.25,
        rr1,
        rr2,
        rr3,
        prev_sensitive: prev_s,
        prev_harmful: prev_h,
        n1: total / 2,
        n2: total - total / 2,
        laws: CovariateLaws::default(),
    }
}

/// The eleven simulation scenarios. Setting (ii) keeps a 10% nominal
/// sensitive group whose covariates are shifted but carry no interaction, so
/// classification rates stay defined.
pub fn scenario_catalogue() -> Vec<CatalogueEntry> {
    let mut out = Vec::new();
    for total in [400, 1000] {
        for rr1 in [0.5, 0.6, 0.7] {
            let name = format!("table1-rr{}-n{total}", (rr1 * 100.0f64).round() as u32);
            out.push(CatalogueEntry {
                setting: "i",
                table: 1,
                scenario: "-",
                config: scenario(&name, rr1, 0.25, None, 0.1, 0.0, total),
            });
        }
    }
    let rows = [
        ("i", 3, "A", scenario("table3-a", 0.6, 0.25, None, 0.2, 0.0, 400)),
        ("ii", 2, "A", scenario("table2-a", 0.25, 0.25, None, 0.1, 0.0, 400)),
        ("ii", 2, "B", scenario("table2-b", 0.35, 0.35, None, 0.1, 0.0, 400)),
        (
            "iii",
            3,
            "B",
            scenario("table3-b", 0.25, 0.25, Some(0.1), 0.0, 0.2, 1000),
        ),
        (
            "iii",
            3,
            "C",
            scenario("table3-c", 0.4, 0.25, Some(0.1), 0.2, 0.2, 1000),
        ),
    ];
    for (setting, table, label, config) in rows {
        out.push(CatalogueEntry {
            setting,
            table,
            scenario: label,
            config,
        });
    }
    out
}

pub fn find_scenario(name: &str) -> Option<ScenarioConfig> {
    scenario_catalogue()
        .into_iter()
        .find(|e| e.config.name == name)
        .map(|e| e.config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(name: &str) -> ScenarioConfig {
        find_scenario(name).unwrap()
    }

    #[test]
    fn intercept_from_control_rate() {
        let p = derive_params(&cfg("table1-rr60-n400")).unwrap();
        assert!((p.mu - (1.0f64 / 3.0).ln()).abs() < 1e-15);
        assert!((p.mu + 1.0986122886681098).abs() < 1e-12);
        assert_eq!(p.lambda, 0.0);
        assert!(p.alphas.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn interaction_closed_form() {
        let p = derive_params(&cfg("table1-rr60-n400")).unwrap();
        let expected = (1.5f64.ln() - (1.0f64 / 3.0).ln()) / 10.0;
        assert!((expected - 0.150407739677627).abs() < 1e-15);
        assert!(p.gammas.iter().all(|g| (g - expected).abs() < 1e-15));
        let null = derive_params(&cfg("table2-a")).unwrap();
        assert!(null.gammas.iter().all(|&g| g == 0.0));
        assert_eq!(null.lambda, 0.0);
    }

    #[test]
    fn uniform_effect_uses_main_effect() {
        let p = derive_params(&cfg("table2-b")).unwrap();
        assert!((p.mu + p.lambda - logit(0.35)).abs() < 1e-15);
        assert!(p.gammas.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn harmful_coefficients() {
        let p = derive_params(&cfg("table3-c")).unwrap();
        let h = p.gammas_harmful.as_ref().unwrap();
        assert!(h.iter().all(|g| (g + (logit(0.1) - p.mu) / 10.0).abs() < 1e-15));
    }

    #[test]
    fn targets_hit_at_group_means() {
        for entry in scenario_catalogue() {
            let c = &entry.config;
            let p = derive_params(c).unwrap();
            let mean_vec = |law: NormalLaw| {
                (0..c.n_covariates)
                    .map(|j| {
                        if j < c.n_sensitive_covariates {
                            law.mean
                        } else {
                            c.laws.baseline.mean
                        }
                    })
                    .collect::<Vec<_>>()
            };
            let cases = [
                (Subgroup::Sensitive, Arm::Treatment, c.rr1, c.laws.sensitive),
                (Subgroup::Sensitive, Arm::Control, c.rr0, c.laws.sensitive),
                (Subgroup::NonSensitive, Arm::Treatment, c.rr2, c.laws.non_sensitive),
                (Subgroup::NonSensitive, Arm::Control, c.rr0, c.laws.non_sensitive),
            ];
            for (g, arm, target, law) in cases {
                let omega = linear_predictor(&p, g, arm, &mean_vec(law));
                assert!((omega - logit(target)).abs() < 1e-14, "{} {g:?} {arm:?}", c.name);
            }
            if let Some(rr3) = c.rr3 {
                let omega = linear_predictor(&p, Subgroup::Harmful, Arm::Treatment, &mean_vec(c.laws.harmful));
                assert!((omega - logit(rr3)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn control_patient_responds_at_rr0() {
        let c = cfg("table1-rr60-n400");
        let p = derive_params(&c).unwrap();
        let mut rng = seed::rng(1);
        let x = draw_covariates(&c, Subgroup::Sensitive, &mut rng);
        assert!((response_probability(&p, Subgroup::Sensitive, Arm::Control, &x) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn empirical_sensitive_treated_rate() {
        let c = cfg("table1-rr60-n400");
        let p = derive_params(&c).unwrap();
        let mut rng = seed::rng(2);
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| {
                generate_patient(&c, &p, Subgroup::Sensitive, Arm::Treatment, &mut rng)
                    .response
                    .unwrap()
            })
            .count();
        let rate = hits as f64 / n as f64;
        assert!((rate - 0.6).abs() <= 0.02, "rate {rate}");
    }

    #[test]
    fn covariate_moments_and_independence() {
        let c = cfg("table3-c");
        let mut rng = seed::rng(3);
        let n = 10_000;
        for (group, law) in [
            (Subgroup::Sensitive, c.laws.sensitive),
            (Subgroup::NonSensitive, c.laws.non_sensitive),
            (Subgroup::Harmful, c.laws.harmful),
        ] {
            let draws: Vec<Vec<f64>> = (0..n).map(|_| draw_covariates(&c, group, &mut rng)).collect();
            for (j, expected) in [(0, law), (5, law), (50, c.laws.baseline)] {
                let col: Vec<f64> = draws.iter().map(|d| d[j]).collect();
                let mean = col.iter().sum::<f64>() / n as f64;
                let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                let se_mean = (expected.variance / n as f64).sqrt();
                let se_var = expected.variance * (2.0 / (n - 1) as f64).sqrt();
                assert!(
                    (mean - expected.mean).abs() < 3.0 * se_mean,
                    "{group:?} col {j} mean {mean}"
                );
                assert!(
                    (var - expected.variance).abs() < 3.0 * se_var,
                    "{group:?} col {j} var {var}"
                );
            }
            let (a, b): (Vec<f64>, Vec<f64>) = draws.iter().map(|d| (d[0], d[60])).unzip();
            let corr = correlation(&a, &b);
            assert!(corr.abs() < 3.0 / (n as f64).sqrt(), "corr {corr}");
        }
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn supplier_prevalence_and_determinism() {
        let c = cfg("table1-rr60-n1000");
        let p = derive_params(&c).unwrap();
        let mut s = population_supplier(&c, &p, 9);
        let n = 10_000;
        let sensitive = (0..n)
            .filter(|_| s.next_candidate().unwrap().subgroup == Some(Subgroup::Sensitive))
            .count();
        assert!((sensitive as f64 / n as f64 - 0.1).abs() <= 0.01);

        let mut a = population_supplier(&c, &p, 5);
        let mut b = population_supplier(&c, &p, 5);
        for _ in 0..20 {
            let (ca, cb) = (a.next_candidate().unwrap(), b.next_candidate().unwrap());
            assert_eq!(ca, cb);
            assert_eq!(
                a.outcome(&ca, Arm::Treatment).unwrap(),
                b.outcome(&cb, Arm::Treatment).unwrap()
            );
        }
    }

    #[test]
    fn no_subgroups_means_all_non_sensitive() {
        let c = ScenarioConfig {
            prev_sensitive: 0.0,
            ..cfg("table2-a")
        };
        let p = derive_params(&c).unwrap();
        let mut s = population_supplier(&c, &p, 1);
        assert!((0..1000).all(|_| s.next_candidate().unwrap().subgroup == Some(Subgroup::NonSensitive)));
    }

    #[test]
    fn control_rate_is_rr0_in_every_scenario() {
        for entry in scenario_catalogue() {
            let c = &entry.config;
            let p = derive_params(c).unwrap();
            let mut s = population_supplier(c, &p, 21);
            let n = 4000;
            let mut hits = 0;
            for _ in 0..n {
                let cand = s.next_candidate().unwrap();
                hits += s.outcome(&cand, Arm::Control).unwrap() as usize;
            }
            let rate = hits as f64 / n as f64;
            let se = (0.25 * 0.75 / n as f64).sqrt();
            assert!((rate - 0.25).abs() < 3.5 * se, "{}: {rate}", c.name);
        }
    }

    #[test]
    fn catalogue_rows() {
        let cat = scenario_catalogue();
        assert_eq!(cat.len(), 11);
        let t1 = cfg("table1-rr60-n400");
        assert_eq!(
            (t1.prev_sensitive, t1.n_sensitive_covariates, t1.n_covariates),
            (0.1, 10, 100)
        );
        assert_eq!((t1.n1, t1.n2), (200, 200));
        let a = cfg("table2-a");
        assert_eq!((a.rr0, a.rr1, a.rr2), (0.25, 0.25, 0.25));
        let c = cfg("table3-c");
        assert_eq!((c.prev_sensitive, c.prev_harmful, c.rr3), (0.2, 0.2, Some(0.1)));
        assert_eq!(c.total_size(), 1000);
        let e = cat.iter().find(|e| e.config.name == "table3-c").unwrap();
        assert_eq!((e.setting, e.table, e.scenario), ("iii", 3, "C"));
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = cfg("table1-rr60-n400");
        let cases = [
            ScenarioConfig {
                rr1: 1.0,
                ..base.clone()
            },
            ScenarioConfig {
                rr0: 0.0,
                ..base.clone()
            },
            ScenarioConfig {
                n_sensitive_covariates: 101,
                ..base.clone()
            },
            ScenarioConfig {
                prev_sensitive: 0.7,
                prev_harmful: 0.4,
                rr3: Some(0.1),
                ..base.clone()
            },
            ScenarioConfig {
                prev_harmful: 0.1,
                ..base.clone()
            },
        ];
        for c in cases {
            assert!(derive_params(&c).is_err(), "{c:?}");
        }
    }
}
