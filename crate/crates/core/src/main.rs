use caden::engine::{BlockRandomizer, DesignConfig, PatientSupplier};
use caden::harness::{
    analyze_stage1, export_dataset, ingest_dataset, load_config, run_campaign, write_operating_characteristics,
    write_runs_jsonl, Averaging, CampaignSpec, ColumnMapping, Dataset, Design, RunConfig,
};
use caden::simgen::{derive_params, find_scenario, population_supplier, scenario_catalogue, ScenarioConfig};
use caden::{Error, PatientRecord};
use clap::{Args, Parser, Subcommand};
use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "caden", version, about = "Adaptive enrichment trial simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo campaign and write operating characteristics.
    Simulate(SimulateArgs),
    /// Interim analysis of an observed stage-1 dataset.
    Analyze(AnalyzeArgs),
    /// List the built-in scenarios.
    Scenarios,
    /// Write a simulated patient file.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Catalogue name or path to a TOML config.
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    design: Option<Design>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Interim promise thresholds, comma separated or repeated.
    #[arg(long, value_delimiter = ',')]
    alpha2: Vec<f64>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    parallel: Option<usize>,
    #[arg(long)]
    averaging: Option<AveragingArg>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum AveragingArg {
    Macro,
    Micro,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "id")]
    id_column: String,
    #[arg(long, default_value = "treatment")]
    treatment_column: String,
    #[arg(long, default_value = "response")]
    response_column: String,
}

#[derive(Args)]
struct GenerateArgs {
    /// Catalogue name or path to a TOML config.
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    patients: usize,
    /// Override the number of covariates.
    #[arg(long)]
    covariates: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    error: Error,
}

fn config_err(error: Error) -> Failure {
    Failure { code: 2, error }
}

fn data_err(error: Error) -> Failure {
    Failure { code: 3, error }
}

fn runtime_err(error: Error) -> Failure {
    Failure { code: 4, error }
}

fn io_runtime(e: io::Error) -> Failure {
    runtime_err(Error::Io(e))
}

fn resolve_scenario(arg: &str) -> Result<(ScenarioConfig, RunConfig), Failure> {
    if let Some(sc) = find_scenario(arg) {
        return Ok((sc, RunConfig::default()));
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(config_err(Error::Config(format!(
            "'{arg}' is neither a scenario name nor a config file (see `caden scenarios`)"
        ))));
    }
    let cfg = load_config(path).map_err(config_err)?;
    let sc = cfg
        .scenario()
        .map_err(config_err)?
        .ok_or_else(|| config_err(Error::Config(format!("{arg}: no [scenario] section"))))?;
    Ok((sc, cfg))
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let (scenario, cfg) = resolve_scenario(&args.scenario)?;
    let sim = &cfg.simulation;
    let mut spec = CampaignSpec::new(scenario, args.design.or(sim.design).unwrap_or(Design::Caden));
    spec.config = cfg.design.clone();
    if let Some(runs) = args.runs.or(sim.runs) {
        spec.n_runs = runs;
    }
    if let Some(seed) = args.seed.or(sim.seed) {
        spec.master_seed = seed;
    }
    if !args.alpha2.is_empty() {
        spec.alpha_2s = args.alpha2.clone();
    } else if let Some(a) = &sim.alpha2 {
        spec.alpha_2s = a.clone();
    }
    spec.parallelism = args
        .parallel
        .or(sim.parallel)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    spec.averaging = match args.averaging {
        Some(AveragingArg::Macro) => Averaging::Macro,
        Some(AveragingArg::Micro) => Averaging::Micro,
        None => sim.averaging.unwrap_or_default(),
    };

    let campaign = run_campaign(&spec).map_err(|e| match e {
        Error::Config(_) => config_err(e),
        e => runtime_err(e),
    })?;
    fs::create_dir_all(&args.out).map_err(io_runtime)?;
    let csv_path = args.out.join("operating_characteristics.csv");
    write_operating_characteristics(
        BufWriter::new(File::create(&csv_path).map_err(io_runtime)?),
        &campaign.rows,
    )
    .map_err(runtime_err)?;
    let runs_path = args.out.join("runs.jsonl");
    write_runs_jsonl(
        BufWriter::new(File::create(&runs_path).map_err(io_runtime)?),
        &campaign.runs,
    )
    .map_err(runtime_err)?;
    write_operating_characteristics(io::stdout().lock(), &campaign.rows).map_err(runtime_err)?;
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<(), Failure> {
    let design = match &args.config {
        Some(p) => load_config(p).map_err(config_err)?.design,
        None => DesignConfig::default(),
    };
    let mapping = ColumnMapping {
        id: args.id_column,
        treatment: args.treatment_column,
        response: args.response_column,
    };
    let data = ingest_dataset(&args.data, &mapping).map_err(data_err)?;
    if data.patients.is_empty() {
        return Err(data_err(Error::Data {
            line: 1,
            column: String::new(),
            message: "no patients".into(),
        }));
    }
    let report = analyze_stage1(&data.patients, &design, args.seed).map_err(|e| match e {
        Error::Config(_) => config_err(e),
        Error::SingleArm | Error::Dimension(_) => data_err(e),
        e => runtime_err(e),
    })?;
    fs::create_dir_all(&args.out).map_err(io_runtime)?;
    let path = args.out.join("report.json");
    let text = serde_json::to_string_pretty(&report).map_err(|e| runtime_err(Error::Io(e.into())))?;
    fs::write(&path, text + "\n").map_err(io_runtime)?;
    println!(
        "{:?}: p_overall {:.4}, p_promise {}",
        report.strategy,
        report.p_overall,
        report.p_promise.map_or("-".into(), |p| format!("{p:.4}"))
    );
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<(), Failure> {
    let (mut scenario, _) = resolve_scenario(&args.scenario)?;
    if let Some(p) = args.covariates {
        scenario.n_covariates = p;
    }
    scenario.validate().map_err(config_err)?;
    let params = derive_params(&scenario).map_err(config_err)?;
    let mut supplier = population_supplier(&scenario, &params, args.seed);
    let mut randomizer = BlockRandomizer::new(caden::seed::derive(args.seed, 0));
    let mut patients = Vec::with_capacity(args.patients);
    for i in 0..args.patients {
        let c = supplier.next_candidate().map_err(runtime_err)?;
        let arm = randomizer.next_arm();
        let y = supplier.outcome(&c, arm).map_err(runtime_err)?;
        patients.push(PatientRecord::new(format!("p{}", i + 1), arm, c.covariates).with_response(y));
    }
    let dataset = Dataset {
        covariate_names: (1..=scenario.n_covariates).map(|j| format!("x{j}")).collect(),
        patients,
    };
    export_dataset(&args.out, &dataset, &ColumnMapping::default()).map_err(runtime_err)
}

fn scenarios() {
    println!(
        "{:<20} {:>7} {:>5} {:>8} {:>5} {:>5} {:>5} {:>5} {:>6} {:>6} {:>5}",
        "name", "setting", "table", "scenario", "rr0", "rr1", "rr2", "rr3", "prev_s", "prev_h", "N"
    );
    for e in scenario_catalogue() {
        let c = &e.config;
        println!(
            "{:<20} {:>7} {:>5} {:>8} {:>5} {:>5} {:>5} {:>5} {:>6} {:>6} {:>5}",
            c.name,
            e.setting,
            e.table,
            e.scenario,
            c.rr0,
            c.rr1,
            c.rr2,
            c.rr3.map_or("-".into(), |r| r.to_string()),
            c.prev_sensitive,
            c.prev_harmful,
            c.total_size()
        );
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze(a),
        Command::Generate(a) => generate(a),
        Command::Scenarios => {
            scenarios();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.error);
            ExitCode::from(f.code)
        }
    }
}
