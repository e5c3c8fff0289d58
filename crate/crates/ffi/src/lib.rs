//! C ABI over the `minebench` library.
//!
//! Handles (`MbScenario`, `MbPolicy`) are opaque and owned by the caller
//! once returned; release them with the matching `*_free`. Strings returned
//! through `char **` are heap allocated and released with
//! [`mb_string_free`]. Every fallible call returns an [`MbStatus`]; on
//! failure [`mb_last_error_message`] describes the most recent error on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use minebench::engine::Semantics;
use minebench::formats::{self, InputMethod};
use minebench::generator::{self, Cardinality, GenerationParams};
use minebench::metrics;
use minebench::miner;
use minebench::model::{PolicySet, Scenario};
use minebench::presets;
use minebench::prompts::{PromptStrategy, TemplateSet};
use minebench::scenario_files;
use minebench::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    ParseError = 3,
    GenerationFailed = 4,
    ScaleExceeded = 5,
    IoError = 6,
    SemanticsError = 7,
    NotFound = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbSemantics {
    PermitOnly = 0,
    DenyOverrides = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbFormat {
    AccessData = 0,
    Acm = 1,
    Acl = 2,
    Attributes = 3,
    Rules = 4,
}

/// Parameters for a custom scenario. `exact_ones < 0` means the density
/// window applies.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MbGenerationParams {
    pub n_subjects: usize,
    pub n_objects: usize,
    pub n_subject_attrs: usize,
    pub n_object_attrs: usize,
    pub cardinality: u32,
    pub n_rules: usize,
    pub target_density: f64,
    pub density_tolerance: f64,
    pub max_conditions_per_rule: usize,
    pub seed: u64,
    pub exact_ones: i64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MbMetrics {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub size_ratio: f64,
    pub mined_size: usize,
    pub ground_truth_size: usize,
}

/// Opaque scenario handle.
pub struct MbScenario(Scenario);

/// Opaque policy handle.
pub struct MbPolicy(PolicySet);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> MbStatus {
    match e {
        Error::MalformedRule { .. }
        | Error::KindMismatch { .. }
        | Error::NoRulesFound { .. }
        | Error::AtLine { .. }
        | Error::Format { .. }
        | Error::Json(_)
        | Error::Csv(_)
        | Error::ConflictingConditions { .. } => MbStatus::ParseError,
        Error::GenerationExhausted { .. } | Error::DensityUnreachable { .. } => {
            MbStatus::GenerationFailed
        }
        Error::ScaleExceeded(_) | Error::BudgetExceeded { .. } => MbStatus::ScaleExceeded,
        Error::Io { .. } | Error::MissingTemplate(_) => MbStatus::IoError,
        Error::DenyRuleUnderPermitOnly | Error::AttributeOutOfRange { .. } => {
            MbStatus::SemanticsError
        }
        Error::Unknown { .. } => MbStatus::NotFound,
        _ => MbStatus::InvalidArgument,
    }
}

struct Failure(MbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(MbStatus::NullArgument, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MbStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MbStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(MbStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(MbStatus::InvalidArgument, "text contains a NUL byte".into()))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn mb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Generates the scenario for a named preset such as `TC1` or `scal-2000`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mb_scenario_from_preset(
    name: *const c_char,
    seed: u64,
    out: *mut *mut MbScenario,
) -> MbStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        let s = presets::find(name)?.generate(seed)?;
        write_out(out, Box::into_raw(Box::new(MbScenario(s))))
    })
}

/// Generates a custom scenario.
///
/// # Safety
/// `params` must point to a valid struct; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mb_scenario_generate(
    params: *const MbGenerationParams,
    out: *mut *mut MbScenario,
) -> MbStatus {
    guard(|| {
        let p = handle(params, "params")?;
        let params = GenerationParams {
            n_subjects: p.n_subjects,
            n_objects: p.n_objects,
            n_subject_attrs: p.n_subject_attrs,
            n_object_attrs: p.n_object_attrs,
            domain_cardinality: Cardinality::Uniform(p.cardinality),
            n_rules: p.n_rules,
            target_density: p.target_density,
            density_tolerance: p.density_tolerance,
            max_conditions_per_rule: p.max_conditions_per_rule,
            seed: p.seed,
            exact_ones: usize::try_from(p.exact_ones).ok(),
        };
        let s = generator::generate_scenario(&params)?;
        write_out(out, Box::into_raw(Box::new(MbScenario(s))))
    })
}

/// Loads a scenario directory written by `mb_scenario_save` or the CLI.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mb_scenario_load(dir: *const c_char, out: *mut *mut MbScenario) -> MbStatus {
    guard(|| {
        let dir = str_arg(dir, "dir")?;
        let s = scenario_files::read_scenario(Path::new(dir))?;
        write_out(out, Box::into_raw(Box::new(MbScenario(s))))
    })
}

/// # Safety
/// `scenario` must be a live handle; `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mb_scenario_save(scenario: *const MbScenario, dir: *const c_char) -> MbStatus {
    guard(|| {
        let s = handle(scenario, "scenario")?;
        let dir = str_arg(dir, "dir")?;
        Ok(scenario_files::write_scenario(&s.0, Path::new(dir))?)
    })
}

/// # Safety
/// `scenario` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn mb_scenario_free(scenario: *mut MbScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// # Safety
/// `scenario` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mb_scenario_dims(
    scenario: *const MbScenario,
    n_subjects: *mut usize,
    n_objects: *mut usize,
) -> MbStatus {
    guard(|| {
        let (n, m) = handle(scenario, "scenario")?.0.acm.dims();
        write_out(n_subjects, n)?;
        write_out(n_objects, m)
    })
}

/// Writes 1 for permit, 0 for deny.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mb_scenario_cell(
    scenario: *const MbScenario,
    subject: usize,
    object: usize,
    out: *mut u8,
) -> MbStatus {
    guard(|| {
        let acm = &handle(scenario, "scenario")?.0.acm;
        let (n, m) = acm.dims();
        if subject >= n || object >= m {
            return Err(Failure(
                MbStatus::InvalidArgument,
                format!("cell ({subject}, {object}) outside {n}x{m}"),
            ));
        }
        write_out(out, u8::from(acm.get(subject, object)))
    })
}

/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mb_scenario_ones(scenario: *const MbScenario, out: *mut usize) -> MbStatus {
    guard(|| write_out(out, handle(scenario, "scenario")?.0.acm.ones()))
}

/// Copies the ground-truth policy into a new handle.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mb_scenario_ground_truth(
    scenario: *const MbScenario,
    out: *mut *mut MbPolicy,
) -> MbStatus {
    guard(|| {
        let gt = handle(scenario, "scenario")?.0.ground_truth.clone();
        write_out(out, Box::into_raw(Box::new(MbPolicy(gt))))
    })
}

/// Renders one of the scenario's text formats.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mb_scenario_render(
    scenario: *const MbScenario,
    format: MbFormat,
    out: *mut *mut c_char,
) -> MbStatus {
    guard(|| {
        let s = &handle(scenario, "scenario")?.0;
        let text = match format {
            MbFormat::AccessData => formats::render_access_data(s),
            MbFormat::Acm => formats::render_acm_text(&s.acm),
            MbFormat::Acl => formats::render_acl_text(&s.acm),
            MbFormat::Attributes => formats::render_attributes_json(&s.subjects, &s.objects),
            MbFormat::Rules => formats::emit_policy(&s.ground_truth),
        };
        write_out(out, into_c_string(text)?)
    })
}

/// Prompt text for `strategy`. Matrix strategies get their attachments
/// appended after a `--- <file> ---` line each.
///
/// # Safety
/// `scenario` must be a live handle; `strategy` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mb_build_prompt(
    scenario: *const MbScenario,
    strategy: *const c_char,
    out: *mut *mut c_char,
) -> MbStatus {
    guard(|| {
        let s = &handle(scenario, "scenario")?.0;
        let strategy: PromptStrategy = str_arg(strategy, "strategy")?.parse()?;
        let bundle = TemplateSet::from_env()?.build(strategy, s)?;
        let mut text = bundle.text;
        for a in bundle.attachments {
            text.push_str(&format!("\n--- {} ---\n{}", a.name, a.contents));
        }
        write_out(out, into_c_string(text)?)
    })
}

/// Parses rule lines leniently (prose lines are skipped).
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mb_policy_parse(text: *const c_char, out: *mut *mut MbPolicy) -> MbStatus {
    guard(|| {
        let parsed = formats::parse_rule_lines(str_arg(text, "text")?)?;
        write_out(out, Box::into_raw(Box::new(MbPolicy(parsed.policy))))
    })
}

/// # Safety
/// `policy` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mb_policy_emit(policy: *const MbPolicy, out: *mut *mut c_char) -> MbStatus {
    guard(|| {
        let text = formats::emit_policy(&handle(policy, "policy")?.0);
        write_out(out, into_c_string(text)?)
    })
}

/// Number of rules, or 0 for a null handle.
///
/// # Safety
/// `policy` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mb_policy_len(policy: *const MbPolicy) -> usize {
    policy.as_ref().map_or(0, |p| p.0.len())
}

/// # Safety
/// `policy` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn mb_policy_free(policy: *mut MbPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Greedy generalize-and-validate miner.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mb_mine_reference(scenario: *const MbScenario, out: *mut *mut MbPolicy) -> MbStatus {
    guard(|| {
        let p = miner::mine_generalize_validate(&handle(scenario, "scenario")?.0)?;
        write_out(out, Box::into_raw(Box::new(MbPolicy(p))))
    })
}

/// Exhaustive minimal policy for tiny scenarios.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mb_mine_exact(
    scenario: *const MbScenario,
    size_budget: usize,
    out: *mut *mut MbPolicy,
) -> MbStatus {
    guard(|| {
        let p = miner::exact_minimal_policy(&handle(scenario, "scenario")?.0, size_budget)?;
        write_out(out, Box::into_raw(Box::new(MbPolicy(p))))
    })
}

/// Grades `policy` against the scenario's matrix.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mb_evaluate(
    scenario: *const MbScenario,
    policy: *const MbPolicy,
    semantics: MbSemantics,
    out: *mut MbMetrics,
) -> MbStatus {
    guard(|| {
        let s = &handle(scenario, "scenario")?.0;
        let p = &handle(policy, "policy")?.0;
        let sem = match semantics {
            MbSemantics::PermitOnly => Semantics::PermitOnly,
            MbSemantics::DenyOverrides => Semantics::DenyOverrides,
        };
        let r = metrics::grade(s, p, sem)?;
        write_out(
            out,
            MbMetrics {
                tp: r.counts.tp,
                tn: r.counts.tn,
                fp: r.counts.fp,
                fn_: r.counts.fn_,
                accuracy: r.accuracy,
                precision: r.precision,
                recall: r.recall,
                f1: r.f1,
                size_ratio: r.size_ratio,
                mined_size: r.mined_size,
                ground_truth_size: r.ground_truth_size,
            },
        )
    })
}

/// Parses an input-method name (`access-data`, `acm`, `acl`); writes the
/// matching [`MbFormat`].
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mb_format_from_name(name: *const c_char, out: *mut MbFormat) -> MbStatus {
    guard(|| {
        let method: InputMethod = str_arg(name, "name")?.parse()?;
        let f = match method {
            InputMethod::AccessData => MbFormat::AccessData,
            InputMethod::AcmPlusAttributes => MbFormat::Acm,
            InputMethod::AclPlusAttributes => MbFormat::Acl,
        };
        write_out(out, f)
    })
}
