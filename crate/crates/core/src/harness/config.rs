//! TOML run configuration.
//!
//! ```toml
//! schema_version = 1
//!
//! [scenario]
//! base = "table3-a"     # catalogue entry; any field below overrides it
//! prev_sensitive = 0.15
//!
//! [design]
//! alpha_1 = 0.04
//!
//! [simulation]
//! design = "caden"
//! runs = 1000
//! seed = 7
//! alpha2 = [0.05, 0.1, 0.2]
//! ```

use super::campaign::{Averaging, Design};
use crate::engine::DesignConfig;
use crate::simgen::{find_scenario, CovariateLaws, ScenarioConfig};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub base: Option<String>,
    pub name: Option<String>,
    pub n_covariates: Option<usize>,
    pub n_sensitive_covariates: Option<usize>,
    pub rr0: Option<f64>,
    pub rr1: Option<f64>,
    pub rr2: Option<f64>,
    pub rr3: Option<f64>,
    pub prev_sensitive: Option<f64>,
    pub prev_harmful: Option<f64>,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub laws: Option<CovariateLaws>,
}

impl ScenarioSection {
    /// The catalogue entry named by `base` with overrides applied, or a
    /// scenario built from scratch when there is no base.
    pub fn resolve(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.base {
            Some(base) => find_scenario(base).ok_or_else(|| Error::Config(format!("unknown scenario '{base}'")))?,
            None => {
                let need = |v: Option<f64>, field: &str| {
                    v.ok_or_else(|| Error::Config(format!("scenario.{field} is required without a base scenario")))
                };
                let need_n = |v: Option<usize>, field: &str| {
                    v.ok_or_else(|| Error::Config(format!("scenario.{field} is required without a base scenario")))
                };
                ScenarioConfig {
                    name: self.name.clone().unwrap_or_else(|| "custom".into()),
                    n_covariates: need_n(self.n_covariates, "n_covariates")?,
                    n_sensitive_covariates: need_n(self.n_sensitive_covariates, "n_sensitive_covariates")?,
                    rr0: need(self.rr0, "rr0")?,
                    rr1: need(self.rr1, "rr1")?,
                    rr2: need(self.rr2, "rr2")?,
                    rr3: None,
                    prev_sensitive: need(self.prev_sensitive, "prev_sensitive")?,
                    prev_harmful: 0.0,
                    n1: need_n(self.n1, "n1")?,
                    n2: need_n(self.n2, "n2")?,
                    laws: CovariateLaws::default(),
                }
            }
        };
        macro_rules! apply {
            ($($field:ident),*) => { $( if let Some(v) = self.$field.clone() { cfg.$field = v; } )* };
        }
        apply!(
            name,
            n_covariates,
            n_sensitive_covariates,
            rr0,
            rr1,
            rr2,
            prev_sensitive,
            prev_harmful,
            n1,
            n2,
            laws
        );
        if let Some(r) = self.rr3 {
            cfg.rr3 = Some(r);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub design: Option<Design>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub alpha2: Option<Vec<f64>>,
    pub parallel: Option<usize>,
    pub averaging: Option<Averaging>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub scenario: Option<ScenarioSection>,
    #[serde(default)]
    pub design: DesignConfig,
    #[serde(default)]
    pub simulation: SimulationSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            scenario: None,
            design: DesignConfig::default(),
            simulation: SimulationSection::default(),
        }
    }
}

impl RunConfig {
    pub fn scenario(&self) -> Result<Option<ScenarioConfig>> {
        self.scenario.as_ref().map(ScenarioSection::resolve).transpose()
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            cfg.schema_version
        )));
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn render_config(cfg: &RunConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_scenario_with_overrides() {
        let cfg = parse_config(
            "schema_version = 1\n[scenario]\nbase = \"table3-a\"\nprev_sensitive = 0.15\n[design]\nalpha_2 = 0.2\n",
        )
        .unwrap();
        let sc = cfg.scenario().unwrap().unwrap();
        assert_eq!(sc.prev_sensitive, 0.15);
        assert_eq!(sc.rr1, 0.6);
        assert_eq!(cfg.design.alpha_2, 0.2);
        assert_eq!(cfg.design.alpha_1, 0.04);
    }

    #[test]
    fn scenario_from_scratch() {
        let text = r#"
schema_version = 1
[scenario]
name = "mine"
n_covariates = 20
n_sensitive_covariates = 4
rr0 = 0.2
rr1 = 0.5
rr2 = 0.2
prev_sensitive = 0.3
n1 = 50
n2 = 60
[simulation]
design = "cvrs"
alpha2 = [0.1]
"#;
        let cfg = parse_config(text).unwrap();
        let sc = cfg.scenario().unwrap().unwrap();
        assert_eq!(sc.name, "mine");
        assert_eq!(sc.total_size(), 110);
        assert_eq!(cfg.simulation.design, Some(Design::Cvrs));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(parse_config("schema_version = 2").is_err());
        assert!(parse_config("[design]\nalpha_1 = 0.1").is_err());
        assert!(parse_config("schema_version = 1\n[design]\nalpha_one = 0.1").is_err());
        let cfg = parse_config("schema_version = 1\n[scenario]\nbase = \"nope\"").unwrap();
        assert!(cfg.scenario().is_err());
        let cfg = parse_config("schema_version = 1\n[scenario]\nrr0 = 0.2").unwrap();
        assert!(cfg.scenario().is_err());
        let cfg = parse_config("schema_version = 1\n[scenario]\nbase = \"table3-a\"\nrr1 = 1.5").unwrap();
        assert!(cfg.scenario().is_err());
    }

    #[test]
    fn render_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.scenario = Some(ScenarioSection {
            base: Some("table3-c".into()),
            n1: Some(300),
            ..Default::default()
        });
        cfg.simulation.alpha2 = Some(vec![0.05, 0.2]);
        let text = render_config(&cfg).unwrap();
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }
}
