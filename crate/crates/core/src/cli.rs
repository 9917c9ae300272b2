//! Command-line front end. Each command resolves a run configuration from
//! an optional `--config` file plus flag overrides; `--print-config` dumps
//! that resolution in the same schema the config file accepts.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::checks::{run_all, CheckConfig};
use crate::error::{Error, Result};
use crate::io::{read_history, read_pool, rows_from_history, write_history, write_json, write_pool, write_report, write_round_result, Summary};
use crate::scene::{validate_pool, PoolState};
use crate::selector::{select_round, BudgetLedger, FrozenDetector, SelectorConfig, StageOrder, Strategy};
use crate::simulator::{generate_pool, run_strategies, PoolGenConfig};
use crate::submodular::Transform;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_EXHAUSTED: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "lh3d", version, about = "Learnability-driven sample selection for budgeted active learning")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Generate a synthetic scene pool.
    GenPool(GenPoolArgs),
    /// Run one selection round on a pool file.
    Select(SelectArgs),
    /// Run multi-round active learning for one or more strategies.
    Simulate(SimulateArgs),
    /// Run the seeded property suites.
    Check(CheckArgs),
    /// Rebuild a report table from a history file.
    Report(ReportArgs),
}

#[derive(Debug, Args, Default)]
pub struct PoolFlags {
    /// Number of scenes.
    #[arg(long)]
    pub scenes: Option<usize>,
    /// Comma-separated class names.
    #[arg(long, value_delimiter = ',')]
    pub class_names: Option<Vec<String>>,
    /// Comma-separated class mixture, same order as the class names.
    #[arg(long, value_delimiter = ',')]
    pub class_mixture: Option<Vec<f64>>,
    #[arg(long)]
    pub objects_min: Option<usize>,
    #[arg(long)]
    pub objects_max: Option<usize>,
    #[arg(long)]
    pub depth_bins: Option<usize>,
    #[arg(long)]
    pub locations: Option<usize>,
    /// Share of scenes with near-uniform depth rows.
    #[arg(long)]
    pub ambiguity: Option<f64>,
    #[arg(long)]
    pub layout_components: Option<usize>,
    /// Scenes labeled before the first round.
    #[arg(long)]
    pub init_labeled: Option<usize>,
    #[arg(long)]
    pub n0: Option<f64>,
    #[arg(long)]
    pub sigma0: Option<f64>,
}

impl PoolFlags {
    fn apply(&self, cfg: &mut PoolGenConfig) {
        macro_rules! set {
            ($flag:ident => $field:ident) => {
                if let Some(v) = &self.$flag {
                    cfg.$field = v.clone();
                }
            };
        }
        set!(scenes => n_scenes);
        set!(class_names => class_names);
        set!(class_mixture => class_mixture);
        set!(depth_bins => depth_bins);
        set!(locations => locations_per_scene);
        set!(ambiguity => ambiguity_fraction);
        set!(layout_components => layout_components);
        set!(init_labeled => init_labeled);
        set!(n0 => n0);
        set!(sigma0 => sigma0);
        if let Some(v) = self.objects_min {
            cfg.objects_per_scene[0] = v;
        }
        if let Some(v) = self.objects_max {
            cfg.objects_per_scene[1] = v;
        }
    }
}

#[derive(Debug, Args, Default)]
pub struct SelectorFlags {
    /// Images annotated per round.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub rho_a: Option<f64>,
    #[arg(long)]
    pub rho_b: Option<f64>,
    /// Comma-separated stages, e.g. dc,sb,gv or dc,gv.
    #[arg(long)]
    pub stage_order: Option<StageOrder>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub lambda_reg: Option<f64>,
    #[arg(long)]
    pub min_count: Option<usize>,
    #[arg(long)]
    pub cutoff_z: Option<f64>,
    #[arg(long)]
    pub shape: Option<f64>,
    /// Cap on cumulative annotated objects.
    #[arg(long)]
    pub object_budget: Option<u64>,
}

impl SelectorFlags {
    fn apply(&self, cfg: &mut SelectorConfig) {
        macro_rules! set {
            ($flag:ident => $field:ident) => {
                if let Some(v) = &self.$flag {
                    cfg.$field = v.clone();
                }
            };
        }
        set!(k => k_per_round);
        set!(rho_a => rho_a);
        set!(rho_b => rho_b);
        set!(stage_order => stage_order);
        set!(tau => tau);
        set!(gamma => gamma);
        set!(beta => beta);
        set!(epsilon => epsilon);
        set!(lambda_reg => lambda_reg);
        set!(min_count => min_count);
        set!(cutoff_z => cutoff_z);
        set!(shape => shape);
        set!(object_budget => total_object_budget);
    }
}

#[derive(Debug, Args)]
pub struct GenPoolArgs {
    /// Run configuration file (JSON, same schema as --print-config).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, env = "LH3D_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub pool: PoolFlags,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Pool file to select from.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    /// Output file for the round result; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long, env = "LH3D_SEED")]
    pub seed: Option<u64>,
    /// Round number, used in the result and to derive the random seed.
    #[arg(long)]
    pub round: Option<usize>,
    /// Objects already charged against the budget.
    #[arg(long)]
    pub consumed: Option<u64>,
    #[command(flatten)]
    pub selector: SelectorFlags,
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Existing pool file; predictions stay frozen across rounds. Without
    /// it a synthetic pool is generated and a simulated detector is used.
    #[arg(long)]
    pub pool_file: Option<PathBuf>,
    /// Comma-separated strategies, e.g. lh3d,entropy,random,coreset.
    #[arg(long, value_delimiter = ',')]
    pub strategies: Option<Vec<Strategy>>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long, env = "LH3D_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    pub pool: PoolFlags,
    #[command(flatten)]
    pub selector: SelectorFlags,
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Sampled triples for the submodularity suite; scales the others.
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, env = "LH3D_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, hide = true)]
    pub inject_broken_transform: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub history: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenPoolRun {
    pub pool: PoolGenConfig,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectRun {
    pub selector: SelectorConfig,
    pub pool: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub round: usize,
    pub consumed: u64,
}

impl Default for SelectRun {
    fn default() -> Self {
        Self {
            selector: SelectorConfig::default(),
            pool: None,
            out: None,
            round: 1,
            consumed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateRun {
    /// Generated pool; ignored when `pool_file` is set.
    pub pool: PoolGenConfig,
    pub pool_file: Option<PathBuf>,
    pub strategies: Vec<SelectorConfig>,
    pub rounds: usize,
    pub history: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl Default for SimulateRun {
    fn default() -> Self {
        // protocol constants: 500 initial scenes, 100 per round, 32,000 objects
        Self {
            pool: PoolGenConfig {
                n_scenes: 3000,
                init_labeled: 500,
                ..Default::default()
            },
            pool_file: None,
            strategies: vec![SelectorConfig::default()],
            rounds: 20,
            history: None,
            report: None,
            summary: None,
        }
    }
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let file = File::open(p)?;
            serde_json::from_reader(BufReader::new(file))
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))
        }
    }
}

fn print_config<T: Serialize>(value: &T) -> Result<i32> {
    write_json(io::stdout().lock(), value)?;
    Ok(EXIT_OK)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn load_pool(path: &Path) -> Result<PoolState> {
    let pool = read_pool(BufReader::new(File::open(path)?)).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })?;
    let violations = validate_pool(&pool);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("violation: {}", serde_json::to_string(v)?);
        }
        return Err(Error::Validation(violations.len()));
    }
    Ok(pool)
}

fn gen_pool(args: GenPoolArgs) -> Result<i32> {
    let mut run: GenPoolRun = load_config(args.config.as_deref())?;
    args.pool.apply(&mut run.pool);
    if let Some(s) = args.seed {
        run.pool.seed = s;
    }
    if args.out.is_some() {
        run.out = args.out;
    }
    if args.print_config {
        return print_config(&run);
    }
    let out = run
        .out
        .as_deref()
        .ok_or_else(|| Error::Config("gen-pool needs --out".into()))?;
    let generated = generate_pool(&run.pool)?;
    write_pool(create(out)?, &generated.pool)?;
    let pool = &generated.pool;
    let mut totals = vec![0u64; pool.num_classes()];
    for r in &pool.records {
        for b in &r.true_boxes {
            totals[b.class_id] += 1;
        }
    }
    println!("wrote {} scenes to {}", pool.records.len(), out.display());
    let parts: Vec<String> = pool
        .class_names
        .iter()
        .zip(&totals)
        .map(|(c, n)| format!("{c}={n}"))
        .collect();
    println!("objects: {} ({})", totals.iter().sum::<u64>(), parts.join(", "));
    Ok(EXIT_OK)
}

fn select(args: SelectArgs) -> Result<i32> {
    let mut run: SelectRun = load_config(args.config.as_deref())?;
    args.selector.apply(&mut run.selector);
    if let Some(s) = args.strategy {
        run.selector.strategy = s;
    }
    if let Some(s) = args.seed {
        run.selector.seed = s;
    }
    if let Some(r) = args.round {
        run.round = r;
    }
    if let Some(c) = args.consumed {
        run.consumed = c;
    }
    if args.pool.is_some() {
        run.pool = args.pool;
    }
    if args.out.is_some() {
        run.out = args.out;
    }
    if args.print_config {
        return print_config(&run);
    }
    run.selector.validate()?;
    let path = run
        .pool
        .as_deref()
        .ok_or_else(|| Error::Config("select needs --pool".into()))?;
    let pool = load_pool(path)?;
    let mut ledger = BudgetLedger::new(run.selector.total_object_budget);
    if run.consumed > 0 {
        ledger.charge(0, 0, run.consumed).map_err(|_| {
            Error::Config(format!(
                "consumed {} exceeds the object budget {}",
                run.consumed, run.selector.total_object_budget
            ))
        })?;
    }
    let result = select_round(&pool, &run.selector, &ledger, run.round)?;
    match &run.out {
        Some(p) => write_round_result(create(p)?, &result)?,
        None => write_round_result(io::stdout().lock(), &result)?,
    }
    if result.exhausted {
        eprintln!("object budget exhausted: no unlabeled scene fits {} remaining objects", ledger.remaining());
        return Ok(EXIT_EXHAUSTED);
    }
    if run.out.is_some() {
        println!(
            "selected {} scenes, {} objects, {} skipped for budget",
            result.selected.len(),
            result.budget_delta,
            result.skipped_for_budget.len()
        );
    }
    Ok(EXIT_OK)
}

fn simulate(args: SimulateArgs) -> Result<i32> {
    let mut run: SimulateRun = load_config(args.config.as_deref())?;
    args.pool.apply(&mut run.pool);
    if let Some(list) = &args.strategies {
        let template = run.strategies.first().cloned().unwrap_or_default();
        run.strategies = list
            .iter()
            .map(|&strategy| SelectorConfig {
                strategy,
                ..template.clone()
            })
            .collect();
    }
    for s in &mut run.strategies {
        args.selector.apply(s);
    }
    if let Some(seed) = args.seed {
        run.pool.seed = seed;
        for s in &mut run.strategies {
            s.seed = seed;
        }
    }
    macro_rules! take {
        ($($field:ident),*) => {
            $(if args.$field.is_some() {
                run.$field = args.$field;
            })*
        };
    }
    take!(pool_file, history, report, summary);
    if let Some(r) = args.rounds {
        run.rounds = r;
    }
    if args.print_config {
        return print_config(&run);
    }
    for s in &run.strategies {
        s.validate()?;
    }
    let report = match &run.pool_file {
        Some(path) => {
            let pool = load_pool(path)?;
            run_strategies(&pool, &run.strategies, run.rounds, || FrozenDetector)?
        }
        None => {
            let generated = generate_pool(&run.pool)?;
            run_strategies(&generated.pool, &run.strategies, run.rounds, || generated.detector())?
        }
    };
    if let Some(p) = &run.history {
        write_history(create(p)?, &report.class_names, report.runs.iter().flat_map(|r| &r.history))?;
    }
    if let Some(p) = &run.report {
        write_report(create(p)?, &report.class_names, &report.rows())?;
    }
    let summary = Summary::from_report(&report);
    if let Some(p) = &run.summary {
        write_json(create(p)?, &summary)?;
    }
    let mut out = io::stdout().lock();
    for s in &summary.strategies {
        let entropy = s
            .final_class_entropy
            .map(|h| format!("{h:.4}"))
            .unwrap_or_else(|| "n/a".into());
        writeln!(
            out,
            "{}: {} rounds, {} images, {}/{} objects, class entropy {}{}",
            s.strategy,
            s.rounds_run,
            s.images_labeled,
            s.objects_consumed,
            s.total_object_budget,
            entropy,
            if s.halted_early { ", halted early" } else { "" }
        )?;
    }
    Ok(EXIT_OK)
}

fn check(args: CheckArgs) -> Result<i32> {
    let cfg = CheckConfig {
        trials: args.trials,
        seed: args.seed,
        transform_override: args.inject_broken_transform.then_some(Transform::BrokenSquare),
    };
    let mut failed = false;
    let mut out = io::stdout().lock();
    for suite in run_all(&cfg) {
        if suite.passed() {
            writeln!(out, "PASS {} ({} checks)", suite.name, suite.checks)?;
        } else {
            failed = true;
            writeln!(
                out,
                "FAIL {} ({}/{} failed): {}",
                suite.name,
                suite.failures,
                suite.checks,
                suite.detail.as_deref().unwrap_or("")
            )?;
        }
    }
    Ok(if failed { EXIT_CHECK_FAILED } else { EXIT_OK })
}

fn report(args: ReportArgs) -> Result<i32> {
    let (class_names, records) = read_history(BufReader::new(File::open(&args.history)?))?;
    let rows = rows_from_history(&records);
    match &args.out {
        Some(p) => write_report(create(p)?, &class_names, &rows)?,
        None => write_report(io::stdout().lock(), &class_names, &rows)?,
    }
    Ok(EXIT_OK)
}

/// Runs a parsed command and returns its exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::GenPool(a) => gen_pool(a),
        Command::Select(a) => select(a),
        Command::Simulate(a) => simulate(a),
        Command::Check(a) => check(a),
        Command::Report(a) => report(a),
    }
}

/// Exit code for an error that escaped a command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "lh3d", "select", "--pool", "p.jsonl", "--strategy", "entropy", "--k", "10", "--stage-order", "gv,dc,sb",
        ])
        .unwrap();
        let Command::Select(args) = cli.command else { panic!() };
        assert_eq!(args.strategy, Some(Strategy::Entropy));
        assert_eq!(args.selector.stage_order.unwrap().to_string(), "gv,dc,sb");

        let cli = Cli::try_parse_from(["lh3d", "simulate", "--strategies", "lh3d,entropy,random"]).unwrap();
        let Command::Simulate(args) = cli.command else { panic!() };
        assert_eq!(args.strategies.unwrap().len(), 3);
    }

    #[test]
    fn run_configs_reject_unknown_keys() {
        assert!(serde_json::from_str::<SelectRun>(r#"{"selector":{"k_per_round":3},"round":2}"#).is_ok());
        assert!(serde_json::from_str::<SelectRun>(r#"{"selector":{"k":3}}"#).is_err());
        assert!(serde_json::from_str::<SimulateRun>(r#"{"rounds":3,"extra":1}"#).is_err());
        let dumped = serde_json::to_string(&SimulateRun::default()).unwrap();
        assert_eq!(serde_json::from_str::<SimulateRun>(&dumped).unwrap(), SimulateRun::default());
    }
}
