//! LLM providers, mining attempts and the regeneration protocol.
//!
//! A provider turns a [`PromptBundle`] into raw text. Live models are reached
//! through [`CommandProvider`], which runs an external adapter program; the
//! other providers are offline stand-ins for tests and fixture replays.
//! Credentials are never stored here: a config names the environment
//! variable holding the key and the adapter reads it itself.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats;
use crate::metrics::{self, MetricsReport};
use crate::model::Scenario;
use crate::prompts::{PromptBundle, PromptStrategy, TemplateSet};
use crate::scenario_files;

pub const ACCURACY_THRESHOLD: f64 = 0.9;
pub const PRECISION_THRESHOLD: f64 = 0.9;
pub const DEFAULT_TIMEOUT_SECS: u64 = 600;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProviderKind {
    /// External adapter program: prompt on stdin, rule lines on stdout.
    Command { command: Vec<String> },
    /// Recorded responses under `dir`.
    Fixture { dir: PathBuf },
    /// Answers with the scenario's own ground truth.
    EchoTruth,
    /// Replays `responses` in order, one per call.
    Scripted { responses: Vec<String> },
}

impl ProviderKind {
    pub fn is_offline(&self) -> bool {
        !matches!(self, ProviderKind::Command { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub id: String,
    #[serde(default)]
    pub model: String,
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Name of the variable holding the key. Defaults to `MINEBENCH_<ID>_KEY`.
    #[serde(default)]
    pub credential_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub max_output_tokens: Option<u32>,
    /// Minimum spacing between requests, in milliseconds.
    #[serde(default)]
    pub min_interval_ms: u64,
    /// Passed through to the adapter untouched.
    #[serde(default)]
    pub decoding: BTreeMap<String, serde_json::Value>,
    #[serde(flatten)]
    pub kind: ProviderKind,
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_SECS
}

impl ProviderConfig {
    pub fn new(id: impl Into<String>, kind: ProviderKind) -> Self {
        ProviderConfig {
            id: id.into(),
            model: String::new(),
            endpoint: None,
            credential_env: None,
            timeout_secs: DEFAULT_TIMEOUT_SECS,
            max_output_tokens: None,
            min_interval_ms: 0,
            decoding: BTreeMap::new(),
            kind,
        }
    }

    pub fn echo_truth() -> Self {
        Self::new("echo-truth", ProviderKind::EchoTruth)
    }

    pub fn credential_var(&self) -> String {
        self.credential_env.clone().unwrap_or_else(|| {
            let id: String = self
                .id
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
                .collect();
            format!("MINEBENCH_{id}_KEY")
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Config("provider id is empty".into()));
        }
        if self.timeout_secs == 0 {
            return Err(Error::Config(format!("provider {}: timeout must be positive", self.id)));
        }
        if let ProviderKind::Command { command } = &self.kind {
            if command.is_empty() {
                return Err(Error::Config(format!("provider {}: empty command", self.id)));
            }
        }
        Ok(())
    }
}

/// What a provider sees for one call.
pub struct ProviderRequest<'a> {
    pub scenario: &'a Scenario,
    pub strategy: PromptStrategy,
    pub attempt: u8,
    pub prompt: &'a PromptBundle,
}

pub trait Provider: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, request: &ProviderRequest<'_>) -> Result<String>;
}

fn provider_error(id: &str, reason: impl Into<String>) -> Error {
    Error::Provider {
        provider: id.to_string(),
        reason: reason.into(),
    }
}

pub struct EchoTruthProvider {
    id: String,
}

impl EchoTruthProvider {
    pub fn new(id: impl Into<String>) -> Self {
        EchoTruthProvider { id: id.into() }
    }
}

impl Provider for EchoTruthProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &ProviderRequest<'_>) -> Result<String> {
        Ok(formats::emit_policy(&request.scenario.ground_truth))
    }
}

/// Hands out canned responses in order. `Err` entries simulate transport
/// failures. Counts every call.
pub struct ScriptedProvider {
    id: String,
    responses: Mutex<VecDeque<std::result::Result<String, String>>>,
    calls: AtomicUsize,
}

impl ScriptedProvider {
    pub fn new<I>(id: impl Into<String>, responses: I) -> Self
    where
        I: IntoIterator<Item = std::result::Result<String, String>>,
    {
        ScriptedProvider {
            id: id.into(),
            responses: Mutex::new(responses.into_iter().collect()),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn replies<I, S>(id: impl Into<String>, replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(id, replies.into_iter().map(|s| Ok(s.into())))
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Provider for ScriptedProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, _request: &ProviderRequest<'_>) -> Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let next = self.responses.lock().expect("script lock").pop_front();
        match next {
            Some(Ok(text)) => Ok(text),
            Some(Err(reason)) => Err(provider_error(&self.id, reason)),
            None => Err(provider_error(&self.id, "script exhausted")),
        }
    }
}

/// Replays responses recorded as
/// `<dir>/<scenario>/<strategy>/attempt-<n>.txt`, falling back to
/// `<dir>/<scenario>/<strategy>.txt` for every attempt.
pub struct FixtureProvider {
    id: String,
    dir: PathBuf,
}

impl FixtureProvider {
    pub fn new(id: impl Into<String>, dir: impl Into<PathBuf>) -> Self {
        FixtureProvider {
            id: id.into(),
            dir: dir.into(),
        }
    }

    pub fn fixture_paths(&self, scenario_id: &str, strategy: PromptStrategy, attempt: u8) -> [PathBuf; 2] {
        let base = self.dir.join(scenario_id);
        [
            base.join(strategy.name()).join(format!("attempt-{attempt}.txt")),
            base.join(format!("{}.txt", strategy.name())),
        ]
    }
}

impl Provider for FixtureProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &ProviderRequest<'_>) -> Result<String> {
        let paths = self.fixture_paths(&request.scenario.id, request.strategy, request.attempt);
        match paths.iter().find(|p| p.is_file()) {
            Some(path) => scenario_files::read_file(path),
            None => Err(provider_error(
                &self.id,
                format!("no fixture at {}", paths[1].display()),
            )),
        }
    }
}

/// Runs an adapter program per call. The prompt text goes to stdin;
/// attachments are written to a scratch directory named by
/// `MINEBENCH_ATTACHMENTS`. The child's stdout is the raw response.
pub struct CommandProvider {
    config: ProviderConfig,
    command: Vec<String>,
    last_call: Mutex<Option<Instant>>,
}

static SCRATCH_COUNTER: AtomicUsize = AtomicUsize::new(0);

impl CommandProvider {
    pub fn new(config: ProviderConfig) -> Result<Self> {
        config.validate()?;
        let command = match &config.kind {
            ProviderKind::Command { command } => command.clone(),
            _ => return Err(Error::Config(format!("provider {} is not a command", config.id))),
        };
        Ok(CommandProvider {
            config,
            command,
            last_call: Mutex::new(None),
        })
    }

    fn pace(&self) {
        if self.config.min_interval_ms == 0 {
            return;
        }
        let gap = Duration::from_millis(self.config.min_interval_ms);
        let mut last = self.last_call.lock().expect("rate lock");
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < gap {
                thread::sleep(gap - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn run(&self, request: &ProviderRequest<'_>, scratch: &Path) -> Result<String> {
        let id = &self.config.id;
        for a in &request.prompt.attachments {
            scenario_files::write_file(&scratch.join(&a.name), &a.contents)?;
        }
        let mut cmd = Command::new(&self.command[0]);
        cmd.args(&self.command[1..])
            .env("MINEBENCH_PROVIDER", id)
            .env("MINEBENCH_MODEL", &self.config.model)
            .env("MINEBENCH_SCENARIO", &request.scenario.id)
            .env("MINEBENCH_STRATEGY", request.strategy.name())
            .env("MINEBENCH_ATTEMPT", request.attempt.to_string())
            .env("MINEBENCH_ATTACHMENTS", scratch)
            .env("MINEBENCH_CREDENTIAL_ENV", self.config.credential_var())
            .env("MINEBENCH_DECODING", serde_json::to_string(&self.config.decoding)?)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        if let Some(endpoint) = &self.config.endpoint {
            cmd.env("MINEBENCH_ENDPOINT", endpoint);
        }
        if let Some(max) = self.config.max_output_tokens {
            cmd.env("MINEBENCH_MAX_OUTPUT_TOKENS", max.to_string());
        }
        let mut child = cmd
            .spawn()
            .map_err(|e| provider_error(id, format!("cannot start {}: {e}", self.command[0])))?;

        let mut stdin = child.stdin.take().expect("piped stdin");
        let text = request.prompt.text.clone();
        let writer = thread::spawn(move || stdin.write_all(text.as_bytes()));
        let mut stdout = child.stdout.take().expect("piped stdout");
        let reader = thread::spawn(move || {
            let mut buf = Vec::new();
            stdout.read_to_end(&mut buf).map(|_| buf)
        });
        let mut stderr = child.stderr.take().expect("piped stderr");
        let err_reader = thread::spawn(move || {
            let mut buf = String::new();
            let _ = stderr.read_to_string(&mut buf);
            buf
        });

        let deadline = Instant::now() + Duration::from_secs(self.config.timeout_secs);
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(provider_error(
                        id,
                        format!("timed out after {}s", self.config.timeout_secs),
                    ));
                }
                Ok(None) => thread::sleep(Duration::from_millis(20)),
                Err(e) => return Err(provider_error(id, e.to_string())),
            }
        };
        // A child that exits without reading stdin yields a broken pipe; that is fine.
        let _ = writer.join();
        let out = reader
            .join()
            .expect("stdout reader")
            .map_err(|e| provider_error(id, e.to_string()))?;
        let err = err_reader.join().unwrap_or_default();
        if !status.success() {
            return Err(provider_error(
                id,
                format!("adapter exited with {status}: {}", err.trim()),
            ));
        }
        String::from_utf8(out).map_err(|_| provider_error(id, "response is not UTF-8"))
    }
}

impl Provider for CommandProvider {
    fn id(&self) -> &str {
        &self.config.id
    }

    fn complete(&self, request: &ProviderRequest<'_>) -> Result<String> {
        self.pace();
        log::info!(
            "calling {} (model {:?}, decoding {:?}) for {} / {} attempt {}",
            self.config.id,
            self.config.model,
            self.config.decoding,
            request.scenario.id,
            request.strategy,
            request.attempt
        );
        let scratch = std::env::temp_dir().join(format!(
            "minebench-{}-{}",
            std::process::id(),
            SCRATCH_COUNTER.fetch_add(1, Ordering::SeqCst)
        ));
        fs::create_dir_all(&scratch).map_err(|e| Error::io(&scratch, e))?;
        let result = self.run(request, &scratch);
        let _ = fs::remove_dir_all(&scratch);
        result
    }
}

pub fn build_provider(config: &ProviderConfig) -> Result<Box<dyn Provider>> {
    config.validate()?;
    Ok(match &config.kind {
        ProviderKind::Command { .. } => Box::new(CommandProvider::new(config.clone())?),
        ProviderKind::Fixture { dir } => Box::new(FixtureProvider::new(&config.id, dir)),
        ProviderKind::EchoTruth => Box::new(EchoTruthProvider::new(&config.id)),
        ProviderKind::Scripted { responses } => {
            Box::new(ScriptedProvider::replies(&config.id, responses.clone()))
        }
    })
}

/// Timestamp source for attempt records.
pub trait Clock: Send + Sync {
    /// Seconds since the Unix epoch.
    fn now(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    }
}

pub struct FixedClock(pub u64);

impl Clock for FixedClock {
    fn now(&self) -> u64 {
        self.0
    }
}

/// One provider round trip, graded. `metrics` is present exactly when
/// `failure` is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningAttempt {
    pub scenario_id: String,
    pub strategy: PromptStrategy,
    pub provider: String,
    pub attempt_index: u8,
    pub timestamp: u64,
    /// Stored as a sibling `.txt` file, not inside the JSON record.
    #[serde(skip)]
    pub raw_response: String,
    pub rules: Option<Vec<String>>,
    pub skipped_lines: usize,
    pub metrics: Option<MetricsReport>,
    pub failure: Option<String>,
}

impl MiningAttempt {
    pub fn failed(&self) -> bool {
        self.metrics.is_none()
    }

    pub fn policy_size(&self) -> Option<usize> {
        self.metrics.as_ref().map(|m| m.mined_size)
    }
}

/// Persists attempts as `<root>/<scenario>/<strategy>/<provider>/attempt-<n>.{txt,json}`.
#[derive(Debug, Clone)]
pub struct AttemptStore {
    root: PathBuf,
}

fn path_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

impl AttemptStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        AttemptStore { root: root.into() }
    }

    pub fn dir_for(&self, scenario_id: &str, strategy: PromptStrategy, provider: &str) -> PathBuf {
        self.root
            .join(path_safe(scenario_id))
            .join(strategy.name())
            .join(path_safe(provider))
    }

    fn base(&self, scenario_id: &str, strategy: PromptStrategy, provider: &str, attempt: u8) -> Result<PathBuf> {
        let dir = self.dir_for(scenario_id, strategy, provider);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(dir.join(format!("attempt-{attempt}")))
    }

    pub fn write_raw(
        &self,
        scenario_id: &str,
        strategy: PromptStrategy,
        provider: &str,
        attempt: u8,
        raw: &str,
    ) -> Result<()> {
        let base = self.base(scenario_id, strategy, provider, attempt)?;
        scenario_files::write_file(&base.with_extension("txt"), raw)
    }

    pub fn write_attempt(&self, attempt: &MiningAttempt) -> Result<()> {
        let base = self.base(
            &attempt.scenario_id,
            attempt.strategy,
            &attempt.provider,
            attempt.attempt_index,
        )?;
        let json = serde_json::to_string_pretty(attempt)? + "\n";
        scenario_files::write_file(&base.with_extension("json"), &json)
    }

    pub fn read_attempt(
        &self,
        scenario_id: &str,
        strategy: PromptStrategy,
        provider: &str,
        attempt: u8,
    ) -> Result<MiningAttempt> {
        let base = self
            .dir_for(scenario_id, strategy, provider)
            .join(format!("attempt-{attempt}"));
        let mut a: MiningAttempt =
            serde_json::from_str(&scenario_files::read_file(&base.with_extension("json"))?)?;
        a.raw_response = scenario_files::read_file(&base.with_extension("txt"))?;
        Ok(a)
    }
}

/// Shared pieces of a mining run.
pub struct MiningContext<'a> {
    pub templates: &'a TemplateSet,
    pub store: Option<&'a AttemptStore>,
    pub clock: &'a dyn Clock,
}

/// Grades a raw response. Parse and grading problems become a failure cause.
pub fn grade_response(
    scenario: &Scenario,
    strategy: PromptStrategy,
    raw: &str,
) -> std::result::Result<(Vec<String>, usize, MetricsReport), String> {
    let parsed = formats::parse_rule_lines(raw).map_err(|e| e.to_string())?;
    let report = metrics::grade(scenario, &parsed.policy, strategy.expected_semantics())
        .map_err(|e| e.to_string())?;
    let rules = parsed.policy.iter().map(formats::emit_rule_line).collect();
    Ok((rules, parsed.skipped, report))
}

/// One attempt: prompt, call (retrying a transport failure once), persist
/// the raw response, then grade. Only prompt construction and storage
/// problems are returned as errors.
pub fn mine_once(
    scenario: &Scenario,
    strategy: PromptStrategy,
    provider: &dyn Provider,
    ctx: &MiningContext<'_>,
    attempt_index: u8,
) -> Result<MiningAttempt> {
    let prompt = ctx.templates.build(strategy, scenario)?;
    let request = ProviderRequest {
        scenario,
        strategy,
        attempt: attempt_index,
        prompt: &prompt,
    };
    let response = provider.complete(&request).or_else(|first| {
        log::warn!("{}: {first}; retrying once", provider.id());
        provider.complete(&request)
    });
    let timestamp = ctx.clock.now();
    let (raw, outcome) = match response {
        Ok(raw) => {
            if let Some(store) = ctx.store {
                store.write_raw(&scenario.id, strategy, provider.id(), attempt_index, &raw)?;
            }
            let graded = grade_response(scenario, strategy, &raw);
            (raw, graded)
        }
        Err(e) => {
            if let Some(store) = ctx.store {
                store.write_raw(&scenario.id, strategy, provider.id(), attempt_index, "")?;
            }
            (String::new(), Err(e.to_string()))
        }
    };
    let mut attempt = MiningAttempt {
        scenario_id: scenario.id.clone(),
        strategy,
        provider: provider.id().to_string(),
        attempt_index,
        timestamp,
        raw_response: raw,
        rules: None,
        skipped_lines: 0,
        metrics: None,
        failure: None,
    };
    match outcome {
        Ok((rules, skipped, report)) => {
            attempt.rules = Some(rules);
            attempt.skipped_lines = skipped;
            attempt.metrics = Some(report);
        }
        Err(cause) => attempt.failure = Some(cause),
    }
    if let Some(store) = ctx.store {
        store.write_attempt(&attempt)?;
    }
    Ok(attempt)
}

/// Failed, inaccurate, imprecise, or one rule per permit entry.
pub fn is_anomalous(attempt: &MiningAttempt, scenario: &Scenario) -> bool {
    match &attempt.metrics {
        None => true,
        Some(m) => {
            m.accuracy < ACCURACY_THRESHOLD
                || m.precision < PRECISION_THRESHOLD
                || m.mined_size == scenario.acm.ones()
        }
    }
}

/// True when `a` should be kept over `b`: graded beats failed, then higher
/// F1, higher accuracy, fewer rules. Ties keep `b`.
fn outperforms(a: &MiningAttempt, b: &MiningAttempt) -> bool {
    match (&a.metrics, &b.metrics) {
        (Some(_), None) => true,
        (None, _) => false,
        (Some(x), Some(y)) => {
            let key = |m: &MetricsReport| (m.f1, m.accuracy, std::cmp::Reverse(m.mined_size));
            key(x).partial_cmp(&key(y)) == Some(std::cmp::Ordering::Greater)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegenerationOutcome {
    pub chosen: MiningAttempt,
    /// Every attempt made, in order.
    pub attempts: Vec<MiningAttempt>,
}

impl RegenerationOutcome {
    pub fn calls(&self) -> usize {
        self.attempts.len()
    }
}

/// Runs one attempt and, if it is anomalous, exactly one more with the same
/// prompt, keeping the better of the two.
pub fn mine_with_regeneration(
    scenario: &Scenario,
    strategy: PromptStrategy,
    provider: &dyn Provider,
    ctx: &MiningContext<'_>,
) -> Result<RegenerationOutcome> {
    let first = mine_once(scenario, strategy, provider, ctx, 1)?;
    if !is_anomalous(&first, scenario) {
        return Ok(RegenerationOutcome {
            chosen: first.clone(),
            attempts: vec![first],
        });
    }
    let second = mine_once(scenario, strategy, provider, ctx, 2)?;
    let chosen = if outperforms(&second, &first) {
        second.clone()
    } else {
        first.clone()
    };
    Ok(RegenerationOutcome {
        chosen,
        attempts: vec![first, second],
    })
}
