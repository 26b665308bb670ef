use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crowdkit_core::floorfield::{rasterize_speed, solve_eikonal};
use crowdkit_core::outputs::{now_timestamp, RunOptions};
use crowdkit_core::scenario::{ScenarioError, Severity};
use crowdkit_core::{run_to_directory, validate_scenario, Scenario};
use serde_json::Value;

mod overrides;
mod sweep;

use overrides::{parse_assignment, parse_value, Override};

#[derive(Parser)]
#[command(name = "crowdkit", version = crowdkit_core::BUILD_ID, about = "Run, validate and sweep pedestrian simulation scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario into `<output>/<name>_<timestamp>/`.
    Run(RunArgs),
    /// Run every combination of parameter values and seeds.
    Sweep(SweepArgs),
    /// Check a scenario and print its diagnostics.
    Validate { scenario: PathBuf },
    /// Solve the floor field of one target and write it as CSV.
    ExportField {
        scenario: PathBuf,
        #[arg(long)]
        target: u32,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct Overrides {
    /// Replace the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override a scenario value by dotted key, e.g. `modelParams.osm.sigma=0`.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_assignment)]
    set: Vec<Override>,
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    #[arg(long, default_value = "output")]
    output: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    /// Also write every target's floor field as CSV.
    #[arg(long)]
    export_fields: bool,
}

#[derive(Args)]
struct SweepArgs {
    scenario: PathBuf,
    /// Dotted key to vary.
    #[arg(long)]
    key: String,
    /// Comma-separated values for the key.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    /// Comma-separated seeds; defaults to the scenario seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long, default_value = "output")]
    output: PathBuf,
    /// Simulations run at the same time; defaults to the number of CPUs.
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    overrides: Overrides,
}

/// Outcome classes and their exit codes.
enum Failure {
    /// Bad scenario, bad override or bad key: exit 1.
    Invalid(String),
    /// Unreadable input, failed run or I/O error: exit 2.
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Runtime(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::ExportField {
            scenario,
            target,
            output,
        } => cmd_export_field(&scenario, target, &output),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("cannot read {}: {e}", path.display())))
}

fn scenario_failure(path: &Path, e: ScenarioError) -> Failure {
    Failure::Invalid(format!("{}: {e}", path.display()))
}

/// The scenario file as a complete JSON tree, defaults filled in, so that
/// every key shown in the schema can be overridden.
fn load_document(path: &Path) -> Result<Value, Failure> {
    let text = read(path)?;
    let scenario: Scenario =
        serde_json::from_str(&text).map_err(|e| scenario_failure(path, ScenarioError::from(e)))?;
    Ok(serde_json::to_value(&scenario).expect("scenario is always serializable"))
}

fn build(path: &Path, mut doc: Value, overrides: &Overrides) -> Result<Scenario, Failure> {
    for o in &overrides.set {
        overrides::apply(&mut doc, &o.key, o.value.clone()).map_err(Failure::Invalid)?;
    }
    if let Some(seed) = overrides.seed {
        doc["seed"] = Value::from(seed);
    }
    crowdkit_core::scenario::scenario_from_value(doc).map_err(|e| scenario_failure(path, e))
}

fn print_warnings(scenario: &Scenario) {
    for d in validate_scenario(scenario) {
        if d.severity == Severity::Warning {
            println!("{d}");
        }
    }
}

fn dir_stamp(timestamp: &str) -> String {
    timestamp.chars().filter(|c| c.is_ascii_alphanumeric()).collect()
}

/// `base`, or `base_2`, `base_3`, ... if it is taken.
fn fresh_dir(parent: &Path, base: &str) -> PathBuf {
    let mut dir = parent.join(base);
    let mut n = 2;
    while dir.exists() {
        dir = parent.join(format!("{base}_{n}"));
        n += 1;
    }
    dir
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let doc = load_document(&args.scenario)?;
    let scenario = build(&args.scenario, doc, &args.overrides)?;
    print_warnings(&scenario);
    let timestamp = now_timestamp();
    let dir = fresh_dir(&args.output, &format!("{}_{}", scenario.name, dir_stamp(&timestamp)));
    let options = RunOptions {
        timestamp: Some(timestamp),
        export_fields: args.export_fields,
        ..RunOptions::default()
    };
    let outcome = run_to_directory(&scenario, &dir, &options).map_err(|e| Failure::Runtime(e.to_string()))?;
    println!("{}", dir.display());
    println!(
        "{} steps, {} agents spawned, {} absorbed, {} remaining, {:.3}s wall time",
        outcome.summary.steps,
        outcome.summary.spawned,
        outcome.summary.absorbed,
        outcome.summary.remaining,
        outcome.summary.wall_time.as_secs_f64()
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Failure> {
    let doc = load_document(&args.scenario)?;
    if args.overrides.seed.is_some() && !args.seeds.is_empty() {
        return Err(Failure::Invalid("--seed cannot be combined with --seeds".to_owned()));
    }
    if args.overrides.set.iter().any(|o| o.key == args.key) {
        return Err(Failure::Invalid(format!("`{}` is both swept and set", args.key)));
    }
    let base = build(&args.scenario, doc.clone(), &args.overrides)?;
    let seeds = if args.seeds.is_empty() { vec![base.seed] } else { args.seeds.clone() };
    let timestamp = now_timestamp();
    let stamp = format!("{}_{}", base.name, dir_stamp(&timestamp));

    let mut jobs = Vec::new();
    for raw in &args.values {
        let value = parse_value(raw);
        let mut varied = doc.clone();
        overrides::apply(&mut varied, &args.key, value.clone()).map_err(Failure::Invalid)?;
        for &seed in &seeds {
            let overrides = Overrides {
                seed: Some(seed),
                set: args.overrides.set.clone(),
            };
            let scenario = build(&args.scenario, varied.clone(), &overrides)?;
            let ordinal = jobs.len() + 1;
            jobs.push(sweep::Job {
                ordinal,
                value: value.clone(),
                seed,
                scenario,
                dir: args.output.join(format!("{stamp}_{ordinal}")),
            });
        }
    }

    fs::create_dir_all(&args.output)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", args.output.display())))?;
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let results = sweep::run_all(&jobs, workers, &timestamp);
    let index = args.output.join(format!("{stamp}_sweep.csv"));
    sweep::write_index(&index, &args.key, &jobs, &results)
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", index.display())))?;
    println!("{}", index.display());
    let failed = results.iter().filter(|r| r.error.is_some()).count();
    println!("{} runs, {} failed", jobs.len(), failed);
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} of {} runs failed, see {}", jobs.len(), index.display())));
    }
    Ok(())
}

fn cmd_validate(path: &Path) -> Result<(), Failure> {
    let text = read(path)?;
    let scenario: Scenario =
        serde_json::from_str(&text).map_err(|e| scenario_failure(path, ScenarioError::from(e)))?;
    let diagnostics = validate_scenario(&scenario);
    let errors = diagnostics.iter().filter(|d| d.severity == Severity::Error).count();
    if errors > 0 {
        for d in &diagnostics {
            eprintln!("{d}");
        }
        return Err(Failure::Invalid(format!("{}: {errors} error(s)", path.display())));
    }
    for d in &diagnostics {
        println!("{d}");
    }
    println!("{}: ok", path.display());
    Ok(())
}

fn cmd_export_field(path: &Path, target: u32, output: &Path) -> Result<(), Failure> {
    let text = read(path)?;
    let scenario = crowdkit_core::parse_scenario(&text).map_err(|e| scenario_failure(path, e))?;
    let topo = &scenario.topography;
    let shape = topo
        .target(target)
        .map(|t| t.shape.clone())
        .ok_or_else(|| Failure::Invalid(format!("{}: no target with id {target}", path.display())))?;
    let speed = rasterize_speed(topo, scenario.floor_field_cell_size, scenario.floor_field_max_cells, None)
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    let field = solve_eikonal(&speed, &[shape], target).map_err(|e| Failure::Runtime(e.to_string()))?;
    let mut out = Vec::new();
    field.u.write_csv(&mut out).expect("writing to memory");
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(output, out).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", output.display())))?;
    println!("{}", output.display());
    Ok(())
}
