use crate::engine::{run_caden_trials, run_cvrs_trial, Confusion, DesignConfig, Strategy, TrialResult};
use crate::simgen::{derive_params, population_supplier, ScenarioConfig};
use crate::{seed, Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Stream index of the simulated population inside a run seed.
const SUPPLIER_STREAM: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    Caden,
    Cvrs,
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Design::Caden => "caden",
            Design::Cvrs => "cvrs",
        })
    }
}

impl FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "caden" => Ok(Design::Caden),
            "cvrs" => Ok(Design::Cvrs),
            other => Err(Error::Config(format!(
                "unknown design '{other}' (expected caden or cvrs)"
            ))),
        }
    }
}

/// How per-run sensitivity and specificity are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Mean of per-run rates over runs where the rate is defined.
    #[default]
    Macro,
    /// Rates of the confusion counts pooled over all runs.
    Micro,
}

/// Outcome of one replicate under one promise threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: u64,
    pub seed: u64,
    /// Absent for the single-stage comparator.
    pub alpha2: Option<f64>,
    pub strategy: Option<Strategy>,
    pub reject_ho: bool,
    pub reject_hs: bool,
    pub reject_hc: bool,
    pub hs_tested: bool,
    pub n_enrolled: usize,
    pub n_screened: usize,
    pub p_overall_interim: Option<f64>,
    pub p_promise: Option<f64>,
    pub final_p_overall: Option<f64>,
    pub final_p_sensitive: Option<f64>,
    pub confusion: Confusion,
    /// Set when the run failed; such runs are left out of every rate.
    pub error: Option<String>,
}

impl RunRecord {
    fn from_result(run: u64, seed: u64, alpha2: Option<f64>, result: Result<TrialResult>) -> Self {
        match result {
            Ok(r) => RunRecord {
                run,
                seed,
                alpha2,
                strategy: r.strategy(),
                reject_ho: r.reject_ho,
                reject_hs: r.reject_hs,
                reject_hc: r.reject_hc,
                hs_tested: r.hs_tested,
                n_enrolled: r.n_enrolled,
                n_screened: r.n_screened,
                p_overall_interim: r.decision.as_ref().map(|d| d.p_overall),
                p_promise: r.decision.as_ref().and_then(|d| d.p_promise),
                final_p_overall: r.final_p_overall,
                final_p_sensitive: r.final_p_sensitive,
                confusion: r.confusion,
                error: None,
            },
            Err(e) => RunRecord::failure(run, seed, alpha2, e.to_string()),
        }
    }

    fn failure(run: u64, seed: u64, alpha2: Option<f64>, error: String) -> Self {
        RunRecord {
            run,
            seed,
            alpha2,
            strategy: None,
            reject_ho: false,
            reject_hs: false,
            reject_hc: false,
            hs_tested: false,
            n_enrolled: 0,
            n_screened: 0,
            p_overall_interim: None,
            p_promise: None,
            final_p_overall: None,
            final_p_sensitive: None,
            confusion: Confusion::default(),
            error: Some(error),
        }
    }

    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// Monte Carlo standard errors of the aggregated rates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MonteCarloSe {
    pub pwr_o: f64,
    pub pwr_s: f64,
    pub pwr_c: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub pct_unselected: f64,
    pub pct_enrichment: f64,
    pub pct_stop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingCharacteristics {
    pub scenario: String,
    pub design: Design,
    pub alpha2: Option<f64>,
    pub pwr_o: f64,
    pub pwr_s: f64,
    pub pwr_c: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub pct_unselected: f64,
    pub pct_enrichment: f64,
    pub pct_stop: f64,
    pub n_exp: f64,
    /// Successful runs.
    pub n_runs: usize,
    pub n_failed: usize,
    pub monte_carlo_se: MonteCarloSe,
}

/// `N1 η + (N1 + N2)(1 − η)`, where `η` is the fraction of futility stops.
pub fn expected_sample_size(n1: usize, n2: usize, eta_stop: f64) -> f64 {
    n1 as f64 * eta_stop + (n1 + n2) as f64 * (1.0 - eta_stop)
}

fn rate_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn mean_and_se(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let k = values.len();
    if k == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    let se = if k > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
        (var / k as f64).sqrt()
    } else {
        0.0
    };
    (Some(mean), Some(se))
}

/// Aggregates the records of one design and threshold, in the order given.
pub fn aggregate(
    scenario: &str,
    design: Design,
    alpha2: Option<f64>,
    n1: usize,
    n2: usize,
    records: &[RunRecord],
    averaging: Averaging,
) -> OperatingCharacteristics {
    let ok: Vec<&RunRecord> = records.iter().filter(|r| !r.failed()).collect();
    let n = ok.len();
    let frac = |pred: &dyn Fn(&RunRecord) -> bool| {
        if n == 0 {
            0.0
        } else {
            ok.iter().filter(|r| pred(r)).count() as f64 / n as f64
        }
    };
    let pwr_o = frac(&|r| r.reject_ho);
    let pwr_s = frac(&|r| r.hs_tested && r.reject_hs);
    let pwr_c = frac(&|r| r.reject_hc);
    let unselected = frac(&|r| matches!(r.strategy, None | Some(Strategy::Unselected)));
    let enrichment = frac(&|r| r.strategy == Some(Strategy::Enrichment));
    let stop = frac(&|r| r.strategy == Some(Strategy::Stop));

    let (sensitivity, specificity, sens_se, spec_se) = match averaging {
        Averaging::Macro => {
            let sens: Vec<f64> = ok.iter().filter_map(|r| r.confusion.sensitivity()).collect();
            let spec: Vec<f64> = ok.iter().filter_map(|r| r.confusion.specificity()).collect();
            let (a, a_se) = mean_and_se(&sens);
            let (b, b_se) = mean_and_se(&spec);
            (a, b, a_se, b_se)
        }
        Averaging::Micro => {
            let mut total = Confusion::default();
            for r in &ok {
                total.merge(&r.confusion);
            }
            let se = |p: Option<f64>, m: u64| p.map(|p| (p * (1.0 - p) / m as f64).sqrt());
            let (s, sp) = (total.sensitivity(), total.specificity());
            (s, sp, se(s, total.tp + total.fn_), se(sp, total.tn + total.fp))
        }
    };

    let se = |p: f64| if n == 0 { 0.0 } else { rate_se(p, n) };
    OperatingCharacteristics {
        scenario: scenario.to_string(),
        design,
        alpha2,
        pwr_o,
        pwr_s,
        pwr_c,
        sensitivity,
        specificity,
        pct_unselected: 100.0 * unselected,
        pct_enrichment: 100.0 * enrichment,
        pct_stop: 100.0 * stop,
        n_exp: expected_sample_size(n1, n2, stop),
        n_runs: n,
        n_failed: records.len() - n,
        monte_carlo_se: MonteCarloSe {
            pwr_o: se(pwr_o),
            pwr_s: se(pwr_s),
            pwr_c: se(pwr_c),
            sensitivity: sens_se,
            specificity: spec_se,
            pct_unselected: 100.0 * se(unselected),
            pct_enrichment: 100.0 * se(enrichment),
            pct_stop: 100.0 * se(stop),
        },
    }
}

/// Everything that determines a simulation campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSpec {
    pub scenario: ScenarioConfig,
    pub design: Design,
    /// Stage sizes are taken from the scenario.
    pub config: DesignConfig,
    pub alpha_2s: Vec<f64>,
    pub n_runs: usize,
    pub master_seed: u64,
    pub parallelism: usize,
    pub averaging: Averaging,
}

impl CampaignSpec {
    pub fn new(scenario: ScenarioConfig, design: Design) -> Self {
        CampaignSpec {
            scenario,
            design,
            config: DesignConfig::default(),
            alpha_2s: vec![0.05, 0.1, 0.2],
            n_runs: 1000,
            master_seed: 1,
            parallelism: 1,
            averaging: Averaging::Macro,
        }
    }

    fn design_config(&self) -> DesignConfig {
        DesignConfig {
            n1: self.scenario.n1,
            n2: self.scenario.n2,
            ..self.config.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    /// One row per promise threshold (a single row for the comparator).
    pub rows: Vec<OperatingCharacteristics>,
    /// Grouped by threshold, then ordered by run index.
    pub runs: Vec<RunRecord>,
}

fn run_one(
    spec: &CampaignSpec,
    cfg: &DesignConfig,
    params: &crate::simgen::GenerativeParams,
    run: u64,
) -> Vec<RunRecord> {
    let run_seed = seed::run_seed(spec.master_seed, run);
    let mut supplier = population_supplier(&spec.scenario, params, seed::derive(run_seed, SUPPLIER_STREAM));
    match spec.design {
        Design::Cvrs => vec![RunRecord::from_result(
            run,
            run_seed,
            None,
            run_cvrs_trial(&mut supplier, cfg, run_seed),
        )],
        Design::Caden => match run_caden_trials(&mut supplier, cfg, &spec.alpha_2s, run_seed) {
            Ok(results) => spec
                .alpha_2s
                .iter()
                .zip(results)
                .map(|(&a, r)| RunRecord::from_result(run, run_seed, Some(a), r))
                .collect(),
            Err(e) => spec
                .alpha_2s
                .iter()
                .map(|&a| RunRecord::failure(run, run_seed, Some(a), e.to_string()))
                .collect(),
        },
    }
}

/// Runs `n_runs` replicates on up to `parallelism` threads. The output only
/// depends on `spec`, not on the thread count.
pub fn run_campaign(spec: &CampaignSpec) -> Result<Campaign> {
    if spec.n_runs == 0 {
        return Err(Error::Config("a campaign needs at least one run".into()));
    }
    if spec.design == Design::Caden && spec.alpha_2s.is_empty() {
        return Err(Error::Config("no alpha_2 values given".into()));
    }
    spec.scenario.validate()?;
    let cfg = spec.design_config();
    cfg.validate()?;
    for &a in &spec.alpha_2s {
        cfg.with_alpha_2(a).validate()?;
    }
    let params = derive_params(&spec.scenario)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.parallelism.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let per_run: Vec<Vec<RunRecord>> = pool.install(|| {
        (0..spec.n_runs as u64)
            .into_par_iter()
            .map(|run| run_one(spec, &cfg, &params, run))
            .collect()
    });

    let thresholds: Vec<Option<f64>> = match spec.design {
        Design::Caden => spec.alpha_2s.iter().map(|&a| Some(a)).collect(),
        Design::Cvrs => vec![None],
    };
    let mut rows = Vec::with_capacity(thresholds.len());
    let mut runs = Vec::with_capacity(thresholds.len() * spec.n_runs);
    for (k, &alpha2) in thresholds.iter().enumerate() {
        let records: Vec<RunRecord> = per_run.iter().map(|r| r[k].clone()).collect();
        let row = aggregate(
            &spec.scenario.name,
            spec.design,
            alpha2,
            cfg.n1,
            cfg.n2,
            &records,
            spec.averaging,
        );
        if row.n_failed > 0 {
            log::warn!(
                "{} of {} runs failed for scenario '{}' at alpha2 {:?}",
                row.n_failed,
                spec.n_runs,
                spec.scenario.name,
                alpha2
            );
        }
        rows.push(row);
        runs.extend(records);
    }
    Ok(Campaign { rows, runs })
}
