//! Monte Carlo campaigns, run configuration, patient files and reports.

mod campaign;
mod config;
mod data;
mod output;

pub use campaign::{
    aggregate, expected_sample_size, run_campaign, Averaging, Campaign, CampaignSpec, Design, MonteCarloSe,
    OperatingCharacteristics, RunRecord,
};
pub use config::{
    load_config, parse_config, render_config, RunConfig, ScenarioSection, SimulationSection, SCHEMA_VERSION,
};
pub use data::{export_dataset, ingest_dataset, read_dataset, write_dataset, ColumnMapping, Dataset};
pub use output::{analyze_stage1, write_operating_characteristics, write_runs_jsonl, Stage1Report, OC_COLUMNS};
