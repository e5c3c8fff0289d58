//! The `minebench` command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::engine::Semantics;
use crate::error::{Error, Result};
use crate::experiment::{self, ConfigFile, Engine, ExperimentConfig, Phase};
use crate::formats::{self, InputMethod, ParseOptions};
use crate::generator::{self, Cardinality, GenerationParams, DEFAULT_DENSITY_TOLERANCE};
use crate::metrics::{self, MetricsReport, ResultRow};
use crate::miner;
use crate::presets;
use crate::prompts::{PromptStrategy, TemplateSet};
use crate::provider::{
    self, AttemptStore, Clock, FixedClock, MiningContext, ProviderConfig, ProviderKind, SystemClock,
};
use crate::scenario_files;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_FAILURE: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "minebench", version, about = "ABAC policy-mining benchmark toolkit")]
pub struct Cli {
    /// Seed for scenario generation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Parallel runs.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Refuse network providers and stamp attempts with a fixed clock.
    #[arg(long, global = true)]
    pub offline: bool,
    /// TOML configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a scenario directory.
    Generate(GenerateArgs),
    /// Print a scenario in one of the input formats, or a full prompt.
    Render(RenderArgs),
    /// Mine a policy for a scenario.
    Mine(MineArgs),
    /// Grade a rules file against a scenario.
    Evaluate(EvaluateArgs),
    /// Run an experiment phase.
    Experiment(ExperimentArgs),
    /// Rebuild summary tables from a run directory.
    Summarize(SummarizeArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Named preset (TC1..TC5, scal-500..scal-5000).
    #[arg(long, conflicts_with_all = ["subjects", "objects"])]
    pub preset: Option<String>,
    #[arg(long, required_unless_present = "preset")]
    pub subjects: Option<usize>,
    #[arg(long, required_unless_present = "preset")]
    pub objects: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub subject_attrs: usize,
    #[arg(long, default_value_t = 1)]
    pub object_attrs: usize,
    #[arg(long, default_value_t = 1)]
    pub cardinality: u32,
    #[arg(long, default_value_t = 1)]
    pub rules: usize,
    /// Target fraction of permit cells.
    #[arg(long, required_unless_present_any = ["preset", "ones"], conflicts_with = "ones")]
    pub density: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_DENSITY_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long)]
    pub max_conditions: Option<usize>,
    /// Require exactly this many permit cells.
    #[arg(long)]
    pub ones: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RenderFormat {
    AccessData,
    Acm,
    Acl,
    Attributes,
    VerboseAccessData,
    VerboseAcm,
    VerboseAcl,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    pub scenario: PathBuf,
    #[arg(long, value_enum, default_value = "access-data", conflicts_with = "prompt")]
    pub format: RenderFormat,
    /// Render the full prompt for this strategy instead.
    #[arg(long)]
    pub prompt: Option<String>,
}

#[derive(Debug, Args)]
pub struct MineArgs {
    pub scenario: PathBuf,
    #[arg(long, default_value = "reference")]
    pub engine: String,
    /// Prompt strategy (llm engine).
    #[arg(long)]
    pub strategy: Option<String>,
    /// Provider id from the config file, or `echo-truth`.
    #[arg(long)]
    pub provider: Option<String>,
    /// Replay recorded responses from this directory.
    #[arg(long, conflicts_with = "provider")]
    pub fixtures: Option<PathBuf>,
    /// Largest policy the exact engine may return.
    #[arg(long, default_value_t = miner::ORACLE_MAX_BUDGET)]
    pub budget: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub scenario: PathBuf,
    pub rules: PathBuf,
    #[arg(long, default_value = "permit-only")]
    pub semantics: String,
    /// Reject any non-blank line that is not a rule.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub phase: Option<String>,
    /// Comma-separated preset names, or `all`, `tc`, `scal`.
    #[arg(long, value_delimiter = ',')]
    pub presets: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub strategies: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub engines: Vec<String>,
    /// Comma-separated provider ids from the config file.
    #[arg(long, value_delimiter = ',')]
    pub providers: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Draw a separate scenario for every run instead of sharing one per preset.
    #[arg(long)]
    pub fresh_scenarios: bool,
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    pub run_dir: PathBuf,
}

/// Parses arguments, runs the command and maps errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = if is_usage_error(&e) { EXIT_USAGE } else { EXIT_FAILURE };
            ExitCode::from(code)
        }
    }
}

fn is_usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Unknown { .. } | Error::IncompatibleInputMethod { .. } | Error::Config(_)
    )
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    match &cli.command {
        Command::Generate(args) => cmd_generate(&cli, args),
        Command::Render(args) => cmd_render(args),
        Command::Mine(args) => cmd_mine(&cli, &file, args),
        Command::Evaluate(args) => cmd_evaluate(&cli, args),
        Command::Experiment(args) => cmd_experiment(&cli, file, args),
        Command::Summarize(args) => {
            for t in experiment::summarize(&args.run_dir)? {
                println!("{}", t.metric);
                println!("{}", t.render_text());
            }
            Ok(())
        }
    }
}

fn cmd_generate(cli: &Cli, args: &GenerateArgs) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let scenario = match &args.preset {
        Some(name) => presets::find(name)?.generate(seed)?,
        None => {
            let (n_subjects, n_objects) = (args.subjects.unwrap_or(0), args.objects.unwrap_or(0));
            let total = (n_subjects * n_objects).max(1) as f64;
            let params = GenerationParams {
                n_subjects,
                n_objects,
                n_subject_attrs: args.subject_attrs,
                n_object_attrs: args.object_attrs,
                domain_cardinality: Cardinality::Uniform(args.cardinality),
                n_rules: args.rules,
                target_density: args
                    .ones
                    .map(|k| k as f64 / total)
                    .or(args.density)
                    .unwrap_or_default(),
                density_tolerance: args.tolerance,
                max_conditions_per_rule: args
                    .max_conditions
                    .unwrap_or(args.subject_attrs + args.object_attrs),
                seed,
                exact_ones: args.ones,
            };
            generator::generate_scenario(&params)?
        }
    };
    let dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("scenarios").join(&scenario.id));
    scenario_files::write_scenario(&scenario, &dir)?;
    let (n, m) = scenario.acm.dims();
    println!(
        "{}: {n}x{m}, {} ones (density {:.4}), {} ground-truth rules, {} attempts -> {}",
        scenario.id,
        scenario.acm.ones(),
        scenario.density(),
        scenario.ground_truth.len(),
        scenario.attempts,
        dir.display()
    );
    Ok(())
}

fn cmd_render(args: &RenderArgs) -> Result<()> {
    let scenario = scenario_files::read_scenario(&args.scenario)?;
    if let Some(name) = &args.prompt {
        let strategy: PromptStrategy = name.parse()?;
        let bundle = TemplateSet::from_env()?.build(strategy, &scenario)?;
        print!("{}", bundle.text);
        for a in &bundle.attachments {
            print!("\n--- {} ---\n{}", a.name, a.contents);
        }
        return Ok(());
    }
    let text = match args.format {
        RenderFormat::AccessData => formats::render_access_data(&scenario),
        RenderFormat::Acm => formats::render_acm_text(&scenario.acm),
        RenderFormat::Acl => formats::render_acl_text(&scenario.acm),
        RenderFormat::Attributes => {
            formats::render_attributes_json(&scenario.subjects, &scenario.objects)
        }
        RenderFormat::VerboseAccessData => formats::render_verbose(&scenario, InputMethod::AccessData),
        RenderFormat::VerboseAcm => formats::render_verbose(&scenario, InputMethod::AcmPlusAttributes),
        RenderFormat::VerboseAcl => formats::render_verbose(&scenario, InputMethod::AclPlusAttributes),
    };
    print!("{text}");
    Ok(())
}

fn print_report(label: &str, r: &MetricsReport) {
    let c = &r.counts;
    println!("{label}");
    println!("  rules      {} (ground truth {})", r.mined_size, r.ground_truth_size);
    println!("  ratio      {:.2}", r.size_ratio);
    println!("  accuracy   {:.4}", r.accuracy);
    println!("  precision  {:.4}", r.precision);
    println!("  recall     {:.4}", r.recall);
    println!("  f1         {:.4}", r.f1);
    println!("  tp {}  tn {}  fp {}  fn {}", c.tp, c.tn, c.fp, c.fn_);
}

fn resolve_provider(file: &ConfigFile, args: &MineArgs) -> Result<ProviderConfig> {
    if let Some(dir) = &args.fixtures {
        return Ok(ProviderConfig::new("fixture", ProviderKind::Fixture { dir: dir.clone() }));
    }
    let id = args
        .provider
        .as_deref()
        .ok_or_else(|| Error::Config("the llm engine needs --provider or --fixtures".into()))?;
    if let Some(p) = file.providers.iter().find(|p| p.id == id) {
        return Ok(p.clone());
    }
    if id == "echo-truth" {
        return Ok(ProviderConfig::echo_truth());
    }
    Err(Error::Unknown {
        what: "provider",
        name: id.to_string(),
    })
}

fn cmd_mine(cli: &Cli, file: &ConfigFile, args: &MineArgs) -> Result<()> {
    let scenario = scenario_files::read_scenario(&args.scenario)?;
    let engine: Engine = args.engine.parse()?;
    let out = cli.out.clone().unwrap_or_else(|| args.scenario.join("mined"));
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    match engine {
        Engine::Reference | Engine::Exact => {
            let policy = experiment::mine_builtin(engine, &scenario, args.budget)?;
            let path = out.join(format!("{}.rules", engine.name()));
            scenario_files::write_file(&path, &formats::emit_policy(&policy))?;
            let report = metrics::grade(&scenario, &policy, Semantics::PermitOnly)?;
            print_report(&format!("{} -> {}", scenario.id, path.display()), &report);
        }
        Engine::Llm => {
            let strategy: PromptStrategy = args
                .strategy
                .as_deref()
                .ok_or_else(|| Error::Config("the llm engine needs --strategy".into()))?
                .parse()?;
            let config = resolve_provider(file, args)?;
            if cli.offline && !config.kind.is_offline() {
                return Err(Error::Config(format!(
                    "provider {} needs the network but --offline is set",
                    config.id
                )));
            }
            let provider = provider::build_provider(&config)?;
            let templates = TemplateSet::from_env()?;
            let store = AttemptStore::new(out.join("attempts"));
            let clock: Box<dyn Clock> = if cli.offline {
                Box::new(FixedClock(0))
            } else {
                Box::new(SystemClock)
            };
            let ctx = MiningContext {
                templates: &templates,
                store: Some(&store),
                clock: clock.as_ref(),
            };
            let outcome = provider::mine_with_regeneration(&scenario, strategy, provider.as_ref(), &ctx)?;
            let chosen = &outcome.chosen;
            println!(
                "{} / {} / {}: {} call(s), kept attempt {}",
                scenario.id,
                strategy,
                config.id,
                outcome.calls(),
                chosen.attempt_index
            );
            match (&chosen.rules, &chosen.metrics) {
                (Some(rules), Some(report)) => {
                    let path = out.join(format!("{}.{}.rules", strategy.name(), config.id));
                    let text: String = rules.iter().map(|r| format!("{r}\n")).collect();
                    scenario_files::write_file(&path, &text)?;
                    print_report(&path.display().to_string(), report);
                }
                _ => println!(
                    "*  no valid output: {}",
                    chosen.failure.as_deref().unwrap_or("unknown")
                ),
            }
        }
    }
    Ok(())
}

fn cmd_evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<()> {
    let scenario = scenario_files::read_scenario(&args.scenario)?;
    let semantics: Semantics = args.semantics.parse()?;
    let text = scenario_files::read_file(&args.rules)?;
    let parsed = formats::parse_rule_lines_with(&text, ParseOptions { strict: args.strict })?;
    let report = metrics::grade(&scenario, &parsed.policy, semantics)?;
    print_report(
        &format!("{} vs {}", args.rules.display(), scenario.id),
        &report,
    );
    if parsed.skipped > 0 {
        println!("  skipped {} non-rule line(s)", parsed.skipped);
    }
    let stem = args
        .rules
        .file_stem()
        .map_or_else(|| "rules".to_string(), |s| s.to_string_lossy().into_owned());
    let row = ResultRow::new(&scenario.id, &stem, "file", scenario.density(), Some(&report));
    let base = cli.out.clone().unwrap_or_else(|| with_suffix(&args.rules, ".eval"));
    scenario_files::write_file(
        &with_suffix(&base, ".csv"),
        &experiment::rows_to_csv(std::slice::from_ref(&row))?,
    )?;
    scenario_files::write_file(
        &with_suffix(&base, ".json"),
        &(serde_json::to_string_pretty(&report)? + "\n"),
    )?;
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn expand_presets(names: &[String]) -> Vec<String> {
    names
        .iter()
        .flat_map(|n| match n.to_ascii_lowercase().as_str() {
            "all" => presets::all().map(|p| p.name.to_string()).collect(),
            "tc" => presets::TEST_CASES.iter().map(|p| p.name.to_string()).collect(),
            "scal" => presets::SCALABILITY.iter().map(|p| p.name.to_string()).collect(),
            _ => vec![n.clone()],
        })
        .collect()
}

fn parse_all<T: std::str::FromStr<Err = Error>>(items: &[String]) -> Result<Vec<T>> {
    items.iter().map(|s| s.parse()).collect()
}

/// Merges flags over the config file over phase defaults.
pub fn resolve_experiment(cli: &Cli, file: ConfigFile, args: &ExperimentArgs) -> Result<ExperimentConfig> {
    let phase = match &args.phase {
        Some(p) => p.parse()?,
        None => file.phase.unwrap_or(Phase::Custom),
    };
    let out = cli
        .out
        .clone()
        .or(file.out)
        .unwrap_or_else(|| PathBuf::from("runs").join(phase.name()));
    let mut cfg = ExperimentConfig::new(phase, out);
    if let Some(p) = file.presets {
        cfg.presets = expand_presets(&p);
    }
    if !args.presets.is_empty() {
        cfg.presets = expand_presets(&args.presets);
    }
    if let Some(s) = file.strategies {
        cfg.strategies = s;
    }
    if !args.strategies.is_empty() {
        cfg.strategies = parse_all(&args.strategies)?;
    }
    let providers = file.providers;
    cfg.providers = if args.providers.is_empty() {
        providers
    } else {
        args.providers
            .iter()
            .map(|id| {
                providers
                    .iter()
                    .find(|p| &p.id == id)
                    .cloned()
                    .or_else(|| (id == "echo-truth").then(ProviderConfig::echo_truth))
                    .ok_or_else(|| Error::Unknown {
                        what: "provider",
                        name: id.clone(),
                    })
            })
            .collect::<Result<_>>()?
    };
    cfg.engines = if !args.engines.is_empty() {
        parse_all(&args.engines)?
    } else if let Some(e) = file.engines {
        e
    } else if cfg.providers.is_empty() {
        vec![Engine::Reference]
    } else {
        vec![Engine::Llm]
    };
    cfg.seeds = if !args.seeds.is_empty() {
        args.seeds.clone()
    } else if let Some(seed) = cli.seed {
        vec![seed]
    } else {
        file.seeds.unwrap_or_else(|| vec![0])
    };
    cfg.jobs = cli.jobs.or(file.jobs).unwrap_or(1);
    cfg.offline = cli.offline || file.offline.unwrap_or(false);
    cfg.fresh_scenarios = args.fresh_scenarios || file.fresh_scenarios.unwrap_or(false);
    cfg.exact_budget = args.budget.or(file.exact_budget).unwrap_or(miner::ORACLE_MAX_BUDGET);
    Ok(cfg)
}

fn cmd_experiment(cli: &Cli, file: ConfigFile, args: &ExperimentArgs) -> Result<()> {
    let cfg = resolve_experiment(cli, file, args)?;
    let report = experiment::run_experiment(&cfg)?;
    let failed = report.rows.iter().filter(|r| r.failed()).count();
    println!(
        "{}: {} runs ({} new, {} resumed, {} marked *) -> {}",
        cfg.phase.name(),
        report.rows.len(),
        report.executed,
        report.resumed,
        failed,
        report.results_csv.display()
    );
    Ok(())
}
