//! Phased experiment runner and result summaries.
//!
//! A run directory holds:
//!
//! ```text
//! config.json            resolved configuration
//! scenarios/<id>/        scenario files
//! attempts/              provider attempts (LLM engine only)
//! results.partial.csv    append-only, one row per finished run
//! results.csv            final rows sorted by (scenario, strategy, provider)
//! summary/<metric>.txt   tables, one row per preset, one column per configuration
//! summary/<metric>.dat   same data for gnuplot, plus <metric>.gp
//! ```
//!
//! Rerunning into the same directory skips runs already present in the
//! partial CSV.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator;
use crate::metrics::{self, ResultRow, CSV_HEADER};
use crate::miner;
use crate::model::{PolicySet, Scenario};
use crate::presets::{self, Preset, PresetFamily};
use crate::prompts::{PromptStrategy, TemplateSet};
use crate::provider::{self, AttemptStore, Clock, FixedClock, MiningContext, ProviderConfig, SystemClock};
use crate::scenario_files;

pub const PARTIAL_CSV: &str = "results.partial.csv";
pub const RESULTS_CSV: &str = "results.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const SUMMARY_DIR: &str = "summary";

/// Provider column for the built-in miners.
pub const BUILTIN_PROVIDER: &str = "builtin";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    ModelScreening,
    InputFormats,
    PromptStudy,
    Scalability,
    Custom,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::ModelScreening => "model-screening",
            Phase::InputFormats => "input-formats",
            Phase::PromptStudy => "prompt-study",
            Phase::Scalability => "scalability",
            Phase::Custom => "custom",
        }
    }

    pub fn default_presets(self) -> Vec<String> {
        let family = match self {
            Phase::Scalability => &presets::SCALABILITY[..],
            _ => &presets::TEST_CASES[..],
        };
        family.iter().map(|p| p.name.to_string()).collect()
    }

    pub fn default_strategies(self) -> Vec<PromptStrategy> {
        use PromptStrategy::*;
        match self {
            Phase::ModelScreening | Phase::Custom => vec![Prompt1],
            Phase::InputFormats => vec![Prompt1, AcmPrompt, AclPrompt],
            Phase::PromptStudy => vec![
                Prompt1,
                Prompt2ZeroShot,
                Prompt3Examples,
                ChainOfThought,
                No0To1,
                DenyAllowed,
            ],
            Phase::Scalability => vec![Prompt1, ChainOfThought],
        }
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Phase::ModelScreening,
            Phase::InputFormats,
            Phase::PromptStudy,
            Phase::Scalability,
            Phase::Custom,
        ]
        .into_iter()
        .find(|p| p.name() == s.to_ascii_lowercase().replace('_', "-"))
        .ok_or_else(|| Error::Unknown {
            what: "phase",
            name: s.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Reference,
    Exact,
    Llm,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Reference => "reference",
            Engine::Exact => "exact",
            Engine::Llm => "llm",
        }
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "reference" => Ok(Engine::Reference),
            "exact" => Ok(Engine::Exact),
            "llm" => Ok(Engine::Llm),
            _ => Err(Error::Unknown {
                what: "engine",
                name: s.to_string(),
            }),
        }
    }
}

/// Runs a built-in miner on a scenario.
pub fn mine_builtin(engine: Engine, scenario: &Scenario, exact_budget: usize) -> Result<PolicySet> {
    match engine {
        Engine::Reference => miner::mine_generalize_validate(scenario),
        Engine::Exact => miner::exact_minimal_policy(scenario, exact_budget),
        Engine::Llm => Err(Error::Config("the llm engine needs a provider".into())),
    }
}

/// Optional settings read from a TOML file; CLI flags override them.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub phase: Option<Phase>,
    pub presets: Option<Vec<String>>,
    pub strategies: Option<Vec<PromptStrategy>>,
    pub engines: Option<Vec<Engine>>,
    pub seeds: Option<Vec<u64>>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub offline: Option<bool>,
    pub fresh_scenarios: Option<bool>,
    pub exact_budget: Option<usize>,
    #[serde(default)]
    pub providers: Vec<ProviderConfig>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = scenario_files::read_file(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub phase: Phase,
    pub presets: Vec<String>,
    pub strategies: Vec<PromptStrategy>,
    pub engines: Vec<Engine>,
    pub providers: Vec<ProviderConfig>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub jobs: usize,
    pub offline: bool,
    pub fresh_scenarios: bool,
    pub exact_budget: usize,
}

impl ExperimentConfig {
    /// Phase defaults: that phase's presets and strategies, seed 0, the
    /// reference engine.
    pub fn new(phase: Phase, out: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            phase,
            presets: phase.default_presets(),
            strategies: phase.default_strategies(),
            engines: vec![Engine::Reference],
            providers: Vec::new(),
            seeds: vec![0],
            out: out.into(),
            jobs: 1,
            offline: false,
            fresh_scenarios: false,
            exact_budget: miner::ORACLE_MAX_BUDGET,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.presets.is_empty() {
            return Err(Error::Config("no presets selected".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds selected".into()));
        }
        if self.engines.is_empty() {
            return Err(Error::Config("no engines selected".into()));
        }
        for name in &self.presets {
            presets::find(name)?;
        }
        if self.engines.contains(&Engine::Llm) {
            if self.providers.is_empty() {
                return Err(Error::Config("the llm engine needs at least one provider".into()));
            }
            if self.strategies.is_empty() {
                return Err(Error::Config("the llm engine needs at least one strategy".into()));
            }
        }
        let mut ids = HashSet::new();
        for p in &self.providers {
            p.validate()?;
            if !ids.insert(p.id.as_str()) {
                return Err(Error::Config(format!("duplicate provider id {}", p.id)));
            }
            if self.offline && !p.kind.is_offline() {
                return Err(Error::Config(format!(
                    "provider {} needs the network but --offline is set",
                    p.id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Task {
    Builtin(Engine),
    Llm {
        strategy: PromptStrategy,
        provider: usize,
    },
}

#[derive(Debug, Clone)]
struct RunSpec {
    preset: &'static Preset,
    seed: u64,
    task: Task,
}

impl RunSpec {
    fn labels(&self, config: &ExperimentConfig) -> (String, String) {
        match &self.task {
            Task::Builtin(e) => (e.name().to_string(), BUILTIN_PROVIDER.to_string()),
            Task::Llm { strategy, provider } => {
                (strategy.name().to_string(), config.providers[*provider].id.clone())
            }
        }
    }

    /// Seed the scenario is generated from. Shared per preset and seed
    /// unless fresh scenarios were requested.
    fn scenario_seed(&self, config: &ExperimentConfig, slot: u64) -> u64 {
        if config.fresh_scenarios {
            self.seed.wrapping_mul(1_000).wrapping_add(slot)
        } else {
            self.seed
        }
    }
}

fn plan(config: &ExperimentConfig) -> Result<Vec<(RunSpec, u64)>> {
    let mut tasks = Vec::new();
    for &engine in &config.engines {
        if engine == Engine::Llm {
            for &strategy in &config.strategies {
                for provider in 0..config.providers.len() {
                    tasks.push(Task::Llm { strategy, provider });
                }
            }
        } else {
            tasks.push(Task::Builtin(engine));
        }
    }
    let mut runs = Vec::new();
    for &seed in &config.seeds {
        for name in &config.presets {
            let preset = presets::find(name)?;
            for (slot, task) in tasks.iter().enumerate() {
                let spec = RunSpec {
                    preset,
                    seed,
                    task: task.clone(),
                };
                let scenario_seed = spec.scenario_seed(config, slot as u64);
                runs.push((spec, scenario_seed));
            }
        }
    }
    Ok(runs)
}

fn csv_writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

/// Serializes rows (header first) to CSV text.
pub fn rows_to_csv(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::format("results csv", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
        _ => Error::Csv(e),
    })?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Appends rows to the partial CSV one at a time.
struct Appender {
    path: PathBuf,
    lock: Mutex<()>,
}

impl Appender {
    fn open(path: PathBuf) -> Result<Self> {
        if !path.exists() {
            scenario_files::write_file(&path, &rows_to_csv(&[])?)?;
        }
        Ok(Appender {
            path,
            lock: Mutex::new(()),
        })
    }

    fn append(&self, row: &ResultRow) -> Result<()> {
        let _guard = self.lock.lock().expect("appender lock");
        let file = OpenOptions::new()
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        let mut w = csv_writer(file);
        w.serialize(row)?;
        w.flush().map_err(|e| Error::io(&self.path, e))
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub rows: Vec<ResultRow>,
    pub executed: usize,
    pub resumed: usize,
    pub results_csv: PathBuf,
}

/// Runs every (preset, seed, engine/strategy/provider) combination and
/// writes the results and summaries under `config.out`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let out = &config.out;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    scenario_files::write_file(
        &out.join(CONFIG_FILE),
        &(serde_json::to_string_pretty(config)? + "\n"),
    )?;

    let partial = out.join(PARTIAL_CSV);
    let done: HashSet<_> = if partial.exists() {
        read_rows(&partial)?.iter().map(ResultRow::key).collect()
    } else {
        HashSet::new()
    };
    let appender = Appender::open(partial.clone())?;

    let runs = plan(config)?;
    let pending: Vec<_> = runs
        .iter()
        .filter(|(spec, scenario_seed)| {
            let (strategy, provider) = spec.labels(config);
            !done.contains(&(spec.preset.scenario_id(*scenario_seed), strategy, provider))
        })
        .collect();
    let resumed = runs.len() - pending.len();
    if resumed > 0 {
        log::info!("resuming: {resumed} runs already recorded");
    }

    let templates = TemplateSet::from_env()?;
    let providers = config
        .providers
        .iter()
        .map(provider::build_provider)
        .collect::<Result<Vec<_>>>()?;
    let store = AttemptStore::new(out.join("attempts"));
    let clock: Box<dyn Clock> = if config.offline {
        Box::new(FixedClock(0))
    } else {
        Box::new(SystemClock)
    };

    // Generate each distinct scenario once, up front.
    let wanted: BTreeSet<(&str, u64)> = pending
        .iter()
        .map(|(spec, seed)| (spec.preset.name, *seed))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let scenarios: BTreeMap<(&str, u64), Scenario> = pool.install(|| {
        wanted
            .par_iter()
            .map(|&(name, seed)| {
                let s = presets::find(name)?.generate(seed)?;
                let dir = out.join("scenarios").join(&s.id);
                scenario_files::write_scenario(&s, &dir)?;
                Ok(((name, seed), s))
            })
            .collect::<Result<_>>()
    })?;

    pool.install(|| {
        pending.par_iter().try_for_each(|(spec, seed)| {
            let scenario = &scenarios[&(spec.preset.name, *seed)];
            let (strategy, provider_id) = spec.labels(config);
            let density = generator::density(&scenario.acm)?;
            let report = match &spec.task {
                Task::Builtin(engine) => match mine_builtin(*engine, scenario, config.exact_budget)
                    .and_then(|p| metrics::grade(scenario, &p, crate::engine::Semantics::PermitOnly))
                {
                    Ok(r) => Some(r),
                    Err(e) => {
                        log::warn!("{} / {}: {e}", scenario.id, engine.name());
                        None
                    }
                },
                Task::Llm { strategy, provider } => {
                    let ctx = MiningContext {
                        templates: &templates,
                        store: Some(&store),
                        clock: clock.as_ref(),
                    };
                    provider::mine_with_regeneration(
                        scenario,
                        *strategy,
                        providers[*provider].as_ref(),
                        &ctx,
                    )?
                    .chosen
                    .metrics
                }
            };
            let row = ResultRow::new(&scenario.id, &strategy, &provider_id, density, report.as_ref());
            appender.append(&row)
        })
    })?;

    let mut rows = read_rows(&partial)?;
    rows.sort_by_key(ResultRow::key);
    rows.dedup_by(|a, b| a.key() == b.key());
    let results_csv = out.join(RESULTS_CSV);
    scenario_files::write_file(&results_csv, &rows_to_csv(&rows)?)?;
    summarize(out)?;
    Ok(ExperimentReport {
        rows,
        executed: pending.len(),
        resumed,
        results_csv,
    })
}

/// Metrics that get a summary table, with their CSV column and decimals.
pub const SUMMARY_METRICS: [(&str, usize); 5] = [
    ("ratio", 1),
    ("accuracy", 2),
    ("precision", 2),
    ("recall", 2),
    ("f1", 2),
];

fn metric_value(row: &ResultRow, metric: &str) -> Option<f64> {
    match metric {
        "ratio" => row.ratio,
        "accuracy" => row.accuracy,
        "precision" => row.precision,
        "recall" => row.recall,
        "f1" => row.f1,
        _ => None,
    }
}

/// Table row identity: preset label when the scenario came from a preset.
fn row_label(scenario_id: &str) -> (usize, String) {
    match presets::for_scenario_id(scenario_id) {
        Some(p) => (
            presets::all().position(|q| q == p).unwrap_or(usize::MAX),
            p.label.to_string(),
        ),
        None => (
            usize::MAX,
            scenario_id
                .rsplit_once("-s")
                .map_or(scenario_id, |(base, _)| base)
                .to_string(),
        ),
    }
}

fn column_rank(strategy: &str) -> usize {
    PromptStrategy::ALL
        .iter()
        .position(|s| s.name() == strategy)
        .or_else(|| {
            [Engine::Reference, Engine::Exact]
                .iter()
                .position(|e| e.name() == strategy)
                .map(|k| PromptStrategy::ALL.len() + k)
        })
        .unwrap_or(usize::MAX)
}

fn column_label(strategy: &str, provider: &str) -> String {
    match PromptStrategy::from_str(strategy) {
        Ok(s) if provider != BUILTIN_PROVIDER => format!("{provider} ({})", s.label()),
        _ => strategy.to_string(),
    }
}

/// Preset rank and label.
type RowKey = (usize, String);
/// Strategy rank, provider, strategy.
type ColumnKey = (usize, String, String);

/// A rendered summary table. Cells are `None` for `*` (every run failed)
/// and absent combinations are rendered as `-`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub metric: String,
    pub row_heading: String,
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<Option<Option<f64>>>)>,
    pub decimals: usize,
}

impl SummaryTable {
    pub fn build(rows: &[ResultRow], metric: &str, decimals: usize) -> Self {
        let mut columns: BTreeSet<ColumnKey> = BTreeSet::new();
        let mut row_keys: BTreeSet<RowKey> = BTreeSet::new();
        // (row, column) -> values of successful runs and count of all runs
        let mut cells: BTreeMap<(RowKey, ColumnKey), (Vec<f64>, usize)> = BTreeMap::new();
        for r in rows {
            let rk = row_label(&r.scenario_id);
            let ck = (column_rank(&r.strategy), r.provider.clone(), r.strategy.clone());
            row_keys.insert(rk.clone());
            columns.insert(ck.clone());
            let entry = cells.entry((rk, ck)).or_default();
            entry.1 += 1;
            if let Some(v) = metric_value(r, metric).filter(|_| !r.failed()) {
                entry.0.push(v);
            }
        }
        let family = rows
            .iter()
            .filter_map(|r| presets::for_scenario_id(&r.scenario_id))
            .map(|p| p.family)
            .next();
        let row_heading = match family {
            Some(PresetFamily::TestCase) => "Percentage of 1s",
            Some(PresetFamily::Scalability) => "Total Elements in ACM",
            None => "Scenario",
        }
        .to_string();
        let col_list: Vec<_> = columns.into_iter().collect();
        let table_rows = row_keys
            .into_iter()
            .map(|rk| {
                let values = col_list
                    .iter()
                    .map(|ck| {
                        cells.get(&(rk.clone(), ck.clone())).map(|(vals, _)| {
                            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
                        })
                    })
                    .collect();
                (rk.1, values)
            })
            .collect();
        SummaryTable {
            metric: metric.to_string(),
            row_heading,
            columns: col_list
                .iter()
                .map(|(_, provider, strategy)| column_label(strategy, provider))
                .collect(),
            rows: table_rows,
            decimals,
        }
    }

    fn cell_text(&self, cell: &Option<Option<f64>>) -> String {
        match cell {
            None => "-".to_string(),
            Some(None) => "*".to_string(),
            Some(Some(v)) => format!("{v:.prec$}", prec = self.decimals),
        }
    }

    pub fn render_text(&self) -> String {
        let mut grid = vec![std::iter::once(self.row_heading.clone())
            .chain(self.columns.iter().cloned())
            .collect::<Vec<_>>()];
        for (label, cells) in &self.rows {
            grid.push(
                std::iter::once(label.clone())
                    .chain(cells.iter().map(|c| self.cell_text(c)))
                    .collect(),
            );
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|k| grid.iter().map(|r| r[k].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in grid.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c:<w$}"))
                .collect();
            out.push_str(line.join(" | ").trim_end());
            out.push('\n');
            if i == 0 {
                let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
                out.push_str(&rule.join("-|-"));
                out.push('\n');
            }
        }
        out
    }

    /// Whitespace-separated data with `?` for missing values.
    pub fn render_dat(&self) -> String {
        let mut out = format!("# {}", self.row_heading.replace(' ', "_"));
        for c in &self.columns {
            let _ = write!(out, "\t\"{c}\"");
        }
        out.push('\n');
        for (label, cells) in &self.rows {
            out.push_str(label);
            for c in cells {
                match c {
                    Some(Some(v)) => {
                        let _ = write!(out, "\t{v:.4}");
                    }
                    _ => out.push_str("\t?"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn render_gnuplot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "set datafile missing \"?\"");
        let _ = writeln!(out, "set terminal pngcairo size 900,600");
        let _ = writeln!(out, "set output \"{}.png\"", self.metric);
        let _ = writeln!(out, "set xlabel \"{}\"", self.row_heading);
        let _ = writeln!(out, "set ylabel \"{}\"", self.metric);
        let _ = writeln!(out, "set key outside right");
        let plots: Vec<String> = self
            .columns
            .iter()
            .enumerate()
            .map(|(k, c)| {
                format!(
                    "\"{}.dat\" using 0:{}:xtic(1) with linespoints title \"{}\"",
                    self.metric,
                    k + 2,
                    c.replace('"', "'")
                )
            })
            .collect();
        if !plots.is_empty() {
            let _ = writeln!(out, "plot {}", plots.join(", \\\n     "));
        }
        out
    }
}

/// Rebuilds every summary file from `results.csv` in `run_dir`.
pub fn summarize(run_dir: &Path) -> Result<Vec<SummaryTable>> {
    let rows = read_rows(&run_dir.join(RESULTS_CSV))?;
    let dir = run_dir.join(SUMMARY_DIR);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut tables = Vec::new();
    for (metric, decimals) in SUMMARY_METRICS {
        let t = SummaryTable::build(&rows, metric, decimals);
        scenario_files::write_file(&dir.join(format!("{metric}.txt")), &t.render_text())?;
        scenario_files::write_file(&dir.join(format!("{metric}.dat")), &t.render_dat())?;
        scenario_files::write_file(&dir.join(format!("{metric}.gp")), &t.render_gnuplot())?;
        tables.push(t);
    }
    Ok(tables)
}
