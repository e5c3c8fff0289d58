//! Prompt templates and prompt assembly.
//!
//! Templates live in `prompts/<strategy>.txt`. Lines starting with `#` are
//! header comments and are dropped before a prompt is assembled. Built-in
//! copies are compiled in; setting `MINEBENCH_PROMPTS` to a directory makes
//! [`TemplateSet::from_env`] read the files from there instead.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::Semantics;
use crate::error::{Error, Result};
use crate::formats::{self, InputMethod};
use crate::model::Scenario;
use crate::scenario_files;

pub const PROMPTS_ENV: &str = "MINEBENCH_PROMPTS";

/// Separator placed between the template and inline scenario data.
pub const DATASET_DELIMITER: &str = "\n\nDATASET:\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptStrategy {
    Prompt1,
    Prompt2ZeroShot,
    Prompt3Examples,
    ChainOfThought,
    No0To1,
    DenyAllowed,
    AcmPrompt,
    AclPrompt,
}

impl PromptStrategy {
    pub const ALL: [PromptStrategy; 8] = [
        PromptStrategy::Prompt1,
        PromptStrategy::Prompt2ZeroShot,
        PromptStrategy::Prompt3Examples,
        PromptStrategy::ChainOfThought,
        PromptStrategy::No0To1,
        PromptStrategy::DenyAllowed,
        PromptStrategy::AcmPrompt,
        PromptStrategy::AclPrompt,
    ];

    /// File stem and CSV name.
    pub fn name(self) -> &'static str {
        match self {
            PromptStrategy::Prompt1 => "prompt1",
            PromptStrategy::Prompt2ZeroShot => "prompt2-zero-shot",
            PromptStrategy::Prompt3Examples => "prompt3-examples",
            PromptStrategy::ChainOfThought => "chain-of-thought",
            PromptStrategy::No0To1 => "no-0-to-1",
            PromptStrategy::DenyAllowed => "deny-allowed",
            PromptStrategy::AcmPrompt => "acm",
            PromptStrategy::AclPrompt => "acl",
        }
    }

    /// Column heading in summary tables.
    pub fn label(self) -> &'static str {
        match self {
            PromptStrategy::Prompt1 => "Prompt 1",
            PromptStrategy::Prompt2ZeroShot => "Prompt 2",
            PromptStrategy::Prompt3Examples => "Prompt 3",
            PromptStrategy::ChainOfThought => "COT",
            PromptStrategy::No0To1 => "No 0 to 1",
            PromptStrategy::DenyAllowed => "Deny Allowed",
            PromptStrategy::AcmPrompt => "ACM",
            PromptStrategy::AclPrompt => "ACL",
        }
    }

    pub fn input_method(self) -> InputMethod {
        match self {
            PromptStrategy::AcmPrompt => InputMethod::AcmPlusAttributes,
            PromptStrategy::AclPrompt => InputMethod::AclPlusAttributes,
            _ => InputMethod::AccessData,
        }
    }

    pub fn expected_semantics(self) -> Semantics {
        match self {
            PromptStrategy::DenyAllowed => Semantics::DenyOverrides,
            _ => Semantics::PermitOnly,
        }
    }

    fn builtin(self) -> &'static str {
        match self {
            PromptStrategy::Prompt1 => include_str!("../prompts/prompt1.txt"),
            PromptStrategy::Prompt2ZeroShot => include_str!("../prompts/prompt2-zero-shot.txt"),
            PromptStrategy::Prompt3Examples => include_str!("../prompts/prompt3-examples.txt"),
            PromptStrategy::ChainOfThought => include_str!("../prompts/chain-of-thought.txt"),
            PromptStrategy::No0To1 => include_str!("../prompts/no-0-to-1.txt"),
            PromptStrategy::DenyAllowed => include_str!("../prompts/deny-allowed.txt"),
            PromptStrategy::AcmPrompt => include_str!("../prompts/acm.txt"),
            PromptStrategy::AclPrompt => include_str!("../prompts/acl.txt"),
        }
    }
}

pub fn expected_semantics(strategy: PromptStrategy) -> Semantics {
    strategy.expected_semantics()
}

impl fmt::Display for PromptStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PromptStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.to_ascii_lowercase().replace('_', "-");
        let alias = match wanted.as_str() {
            "prompt2" | "zero-shot" => "prompt2-zero-shot",
            "prompt3" | "examples" => "prompt3-examples",
            "cot" => "chain-of-thought",
            "no0to1" => "no-0-to-1",
            "deny" => "deny-allowed",
            other => other,
        };
        PromptStrategy::ALL
            .into_iter()
            .find(|p| p.name() == alias)
            .ok_or_else(|| Error::Unknown {
                what: "prompt strategy",
                name: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attachment {
    pub name: String,
    pub contents: String,
}

/// Everything sent to a provider for one attempt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub text: String,
    pub attachments: Vec<Attachment>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    raw: String,
}

impl Template {
    pub fn new(raw: impl Into<String>) -> Self {
        Template { raw: raw.into() }
    }

    /// File contents including header comments.
    pub fn raw(&self) -> &str {
        &self.raw
    }

    /// Template text with header comment lines removed.
    pub fn body(&self) -> String {
        let mut lines = self.raw.lines().skip_while(|l| l.starts_with('#'));
        let mut out = String::with_capacity(self.raw.len());
        if let Some(first) = lines.next() {
            out.push_str(first);
            for line in lines {
                out.push('\n');
                out.push_str(line);
            }
        }
        out.trim_end_matches('\n').to_string()
    }

    /// Hex SHA-256 of the raw file.
    pub fn checksum(&self) -> String {
        Sha256::digest(self.raw.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: Vec<(PromptStrategy, Template)>,
    root: Option<PathBuf>,
}

impl TemplateSet {
    pub fn builtin() -> Self {
        TemplateSet {
            templates: PromptStrategy::ALL
                .into_iter()
                .map(|s| (s, Template::new(s.builtin())))
                .collect(),
            root: None,
        }
    }

    /// Reads every `<strategy>.txt` from `dir`. All eight files must exist.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut templates = Vec::with_capacity(PromptStrategy::ALL.len());
        for s in PromptStrategy::ALL {
            let path = dir.join(format!("{}.txt", s.name()));
            if !path.is_file() {
                return Err(Error::MissingTemplate(path.display().to_string()));
            }
            templates.push((s, Template::new(scenario_files::read_file(&path)?)));
        }
        Ok(TemplateSet {
            templates,
            root: Some(dir.to_path_buf()),
        })
    }

    /// Built-in templates unless `MINEBENCH_PROMPTS` names a directory.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(PROMPTS_ENV) {
            Some(dir) if !dir.is_empty() => Self::from_dir(Path::new(&dir)),
            _ => Ok(Self::builtin()),
        }
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn get(&self, strategy: PromptStrategy) -> &Template {
        &self
            .templates
            .iter()
            .find(|(s, _)| *s == strategy)
            .expect("template set covers every strategy")
            .1
    }

    pub fn build(&self, strategy: PromptStrategy, scenario: &Scenario) -> Result<PromptBundle> {
        self.build_with(strategy, strategy.input_method(), scenario)
    }

    /// Like [`TemplateSet::build`] but checks an explicitly requested input method.
    pub fn build_with(
        &self,
        strategy: PromptStrategy,
        method: InputMethod,
        scenario: &Scenario,
    ) -> Result<PromptBundle> {
        if method != strategy.input_method() {
            return Err(Error::IncompatibleInputMethod {
                strategy: strategy.name().to_string(),
                method: method.as_str().to_string(),
            });
        }
        let body = self.get(strategy).body();
        let bundle = match method {
            InputMethod::AccessData => PromptBundle {
                text: format!(
                    "{body}{DATASET_DELIMITER}{}",
                    formats::render_access_data(scenario)
                ),
                attachments: Vec::new(),
            },
            InputMethod::AcmPlusAttributes => {
                let (acm, attrs) = formats::render_acm_input(scenario);
                PromptBundle {
                    text: body,
                    attachments: vec![
                        attachment(scenario_files::ATTRIBUTES_FILE, attrs),
                        attachment(scenario_files::ACM_FILE, acm),
                    ],
                }
            }
            InputMethod::AclPlusAttributes => {
                let (acl, attrs) = formats::render_acl_input(scenario);
                PromptBundle {
                    text: body,
                    attachments: vec![
                        attachment(scenario_files::ATTRIBUTES_FILE, attrs),
                        attachment(scenario_files::ACL_FILE, acl),
                    ],
                }
            }
        };
        Ok(bundle)
    }
}

fn attachment(name: &str, contents: String) -> Attachment {
    Attachment {
        name: name.to_string(),
        contents,
    }
}

/// Builds a prompt from the built-in templates.
pub fn build_prompt(strategy: PromptStrategy, scenario: &Scenario) -> Result<PromptBundle> {
    TemplateSet::builtin().build(strategy, scenario)
}

/// Recovers the inline data section of an access-data prompt.
pub fn dataset_section(text: &str) -> Option<&str> {
    text.split_once(DATASET_DELIMITER).map(|(_, data)| data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn scenario() -> Scenario {
        presets::find("TC1").unwrap().generate(0).unwrap()
    }

    #[test]
    fn required_sections_present() {
        let s = scenario();
        let text = |p| build_prompt(p, &s).unwrap().text;
        assert!(text(PromptStrategy::Prompt1).contains("Critical Safety Constraint"));
        assert!(text(PromptStrategy::ChainOfThought)
            .contains("Step-by-Step Reasoning (think before answering)"));
        assert!(text(PromptStrategy::DenyAllowed).contains("Deny-Overrides Principle"));
        assert!(text(PromptStrategy::No0To1).contains("NO RULE SHOULD GRANT A PERMIT"));
    }

    #[test]
    fn header_comment_is_stripped() {
        for p in PromptStrategy::ALL {
            let t = TemplateSet::builtin().get(p).body();
            assert!(!t.starts_with('#'), "{p}");
            assert!(t.starts_with("You are an AI") || p == PromptStrategy::DenyAllowed);
        }
    }

    #[test]
    fn semantics_per_strategy() {
        assert_eq!(expected_semantics(PromptStrategy::DenyAllowed), Semantics::DenyOverrides);
        assert_eq!(expected_semantics(PromptStrategy::Prompt1), Semantics::PermitOnly);
        assert_eq!(expected_semantics(PromptStrategy::No0To1), Semantics::PermitOnly);
    }

    #[test]
    fn incompatible_method_rejected() {
        let s = scenario();
        let set = TemplateSet::builtin();
        assert!(matches!(
            set.build_with(PromptStrategy::AcmPrompt, InputMethod::AccessData, &s),
            Err(Error::IncompatibleInputMethod { .. })
        ));
        assert!(matches!(
            set.build_with(PromptStrategy::Prompt1, InputMethod::AclPlusAttributes, &s),
            Err(Error::IncompatibleInputMethod { .. })
        ));
    }

    #[test]
    fn access_data_embedded_after_delimiter() {
        let s = scenario();
        let b = build_prompt(PromptStrategy::Prompt1, &s).unwrap();
        assert!(b.attachments.is_empty());
        let log = formats::AccessLog::parse(dataset_section(&b.text).unwrap()).unwrap();
        assert_eq!(log.entries.len(), 225);
        assert_eq!(log.permits().count(), s.acm.ones());
    }

    #[test]
    fn matrix_strategies_attach_files() {
        let s = scenario();
        let b = build_prompt(PromptStrategy::AclPrompt, &s).unwrap();
        let names: Vec<_> = b.attachments.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, ["output.json", "ACL.txt"]);
        assert!(dataset_section(&b.text).is_none());
    }

    #[test]
    fn strategy_names_parse() {
        for p in PromptStrategy::ALL {
            assert_eq!(p.name().parse::<PromptStrategy>().unwrap(), p);
        }
        assert_eq!("CoT".parse::<PromptStrategy>().unwrap(), PromptStrategy::ChainOfThought);
        assert!("prompt9".parse::<PromptStrategy>().is_err());
    }

    #[test]
    fn directory_override() {
        let dir = tempfile::tempdir().unwrap();
        for p in PromptStrategy::ALL {
            std::fs::write(dir.path().join(format!("{}.txt", p.name())), format!("# x\nbody {p}\n"))
                .unwrap();
        }
        let set = TemplateSet::from_dir(dir.path()).unwrap();
        assert_eq!(set.get(PromptStrategy::No0To1).body(), "body no-0-to-1");
        std::fs::remove_file(dir.path().join("acl.txt")).unwrap();
        assert!(matches!(TemplateSet::from_dir(dir.path()), Err(Error::MissingTemplate(_))));
    }
}
