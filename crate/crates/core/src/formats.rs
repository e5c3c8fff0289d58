//! Text formats: the three input methods, the verbose illustration layout
//! and the rule-line grammar.
//!
//! All renderers emit UTF-8 with LF line endings and a trailing newline.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    AccessMatrix, AttributeKind, AttributeRef, AttributeValue, Decision, EntityProfile, PolicySet,
    Rule, Scenario,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputMethod {
    AccessData,
    AcmPlusAttributes,
    AclPlusAttributes,
}

impl InputMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            InputMethod::AccessData => "access-data",
            InputMethod::AcmPlusAttributes => "acm",
            InputMethod::AclPlusAttributes => "acl",
        }
    }
}

impl std::fmt::Display for InputMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InputMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "access-data" | "access_data" | "accessdata" => Ok(InputMethod::AccessData),
            "acm" => Ok(InputMethod::AcmPlusAttributes),
            "acl" => Ok(InputMethod::AclPlusAttributes),
            other => Err(Error::Unknown {
                what: "input method",
                name: other.to_string(),
            }),
        }
    }
}

/// One labelled request of an access log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessEntry {
    pub subject: EntityProfile,
    pub object: EntityProfile,
    pub permit: bool,
}

/// A flat list of labelled requests. A scenario yields one entry per
/// matrix cell; hand-written logs may list any subset.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AccessLog {
    pub entries: Vec<AccessEntry>,
}

impl AccessLog {
    /// Row-major: all objects for subject 0, then subject 1, ...
    pub fn from_scenario(scenario: &Scenario) -> Self {
        let mut entries = Vec::with_capacity(scenario.acm.total());
        for (i, s) in scenario.subjects.iter().enumerate() {
            for (j, o) in scenario.objects.iter().enumerate() {
                entries.push(AccessEntry {
                    subject: s.clone(),
                    object: o.clone(),
                    permit: scenario.acm.get(i, j),
                });
            }
        }
        AccessLog { entries }
    }

    pub fn permits(&self) -> impl Iterator<Item = &AccessEntry> {
        self.entries.iter().filter(|e| e.permit)
    }

    pub fn denies(&self) -> impl Iterator<Item = &AccessEntry> {
        self.entries.iter().filter(|e| !e.permit)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let tokens = e
                .subject
                .tokens(AttributeKind::Subject)
                .into_iter()
                .chain(e.object.tokens(AttributeKind::Object));
            for t in tokens {
                out.push_str(&t);
                out.push(' ');
            }
            out.push(if e.permit { '1' } else { '0' });
            out.push('\n');
        }
        out
    }

    /// Parses `S_1_2 ... O_1_5 ... <0|1>` lines. Tokens of each kind must
    /// appear in attribute order starting at 1.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let at = |reason: String| Error::format("access data", format!("line {}: {reason}", n + 1));
            let mut tokens: Vec<&str> = line.split_whitespace().collect();
            let permit = match tokens.pop() {
                Some("1") => true,
                Some("0") => false,
                other => return Err(at(format!("bad decision {other:?}"))),
            };
            let mut subject = Vec::new();
            let mut object = Vec::new();
            for tok in tokens {
                let v = parse_value_token(tok).ok_or_else(|| at(format!("bad token {tok}")))?;
                let target = match v.attr.kind {
                    AttributeKind::Subject => &mut subject,
                    AttributeKind::Object => &mut object,
                };
                if v.attr.index() as usize != target.len() + 1 {
                    return Err(at(format!("token {tok} out of order")));
                }
                target.push(v.value());
            }
            entries.push(AccessEntry {
                subject: subject.into(),
                object: object.into(),
                permit,
            });
        }
        Ok(AccessLog { entries })
    }
}

/// One line per cell in row-major order.
pub fn render_access_data(scenario: &Scenario) -> String {
    AccessLog::from_scenario(scenario).render()
}

/// Space-separated 0/1 rows.
pub fn render_acm_text(acm: &AccessMatrix) -> String {
    let mut out = String::with_capacity(acm.total() * 2);
    for i in 0..acm.n_subjects() {
        let row: Vec<&str> = acm.row(i).iter().map(|&c| if c { "1" } else { "0" }).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_acm_text(text: &str) -> Result<AccessMatrix> {
    let rows = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_whitespace()
                .map(|t| match t {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => Err(Error::format("ACM", format!("cell {other:?}"))),
                })
                .collect::<Result<Vec<u8>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    AccessMatrix::from_rows(&rows)
}

/// `j: i1 i2 ...` per object, 0-based, subjects ascending.
pub fn render_acl_text(acm: &AccessMatrix) -> String {
    let mut out = String::new();
    for j in 0..acm.n_objects() {
        write!(out, "{j}:").unwrap();
        for i in 0..acm.n_subjects() {
            if acm.get(i, j) {
                write!(out, " {i}").unwrap();
            }
        }
        out.push('\n');
    }
    out
}

/// Subjects absent from an object's list are denies; objects with no line
/// permit nobody.
pub fn parse_acl_text(text: &str, n_subjects: usize, n_objects: usize) -> Result<AccessMatrix> {
    let mut cells = vec![false; n_subjects * n_objects];
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (obj, subs) = line
            .split_once(':')
            .ok_or_else(|| Error::format("ACL", format!("missing ':' in {line:?}")))?;
        let j: usize = obj
            .trim()
            .parse()
            .map_err(|_| Error::format("ACL", format!("object index {obj:?}")))?;
        if j >= n_objects {
            return Err(Error::format("ACL", format!("object {j} out of range")));
        }
        for s in subs.split_whitespace() {
            let i: usize = s
                .parse()
                .map_err(|_| Error::format("ACL", format!("subject index {s:?}")))?;
            if i >= n_subjects {
                return Err(Error::format("ACL", format!("subject {i} out of range")));
            }
            cells[i * n_objects + j] = true;
        }
    }
    AccessMatrix::new(n_subjects, n_objects, cells)
}

#[derive(Serialize, Deserialize)]
struct AttributeTable {
    #[serde(rename = "SV")]
    sv: Vec<Vec<String>>,
    #[serde(rename = "OV")]
    ov: Vec<Vec<String>>,
}

/// `{"SV": [...], "OV": [...]}` with 4-space indentation.
pub fn render_attributes_json(subjects: &[EntityProfile], objects: &[EntityProfile]) -> String {
    let table = AttributeTable {
        sv: subjects.iter().map(|p| p.tokens(AttributeKind::Subject)).collect(),
        ov: objects.iter().map(|p| p.tokens(AttributeKind::Object)).collect(),
    };
    let mut buf = Vec::new();
    let fmt = serde_json::ser::PrettyFormatter::with_indent(b"    ");
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    table.serialize(&mut ser).expect("in-memory JSON");
    let mut out = String::from_utf8(buf).expect("JSON is UTF-8");
    out.push('\n');
    out
}

pub fn parse_attributes_json(text: &str) -> Result<(Vec<EntityProfile>, Vec<EntityProfile>)> {
    let table: AttributeTable = serde_json::from_str(text)?;
    let convert = |rows: Vec<Vec<String>>, kind: AttributeKind| {
        rows.into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(k, tok)| match parse_value_token(tok) {
                        Some(v) if v.attr.kind == kind && v.attr.position() == k => Ok(v.value()),
                        _ => Err(Error::format("attribute JSON", format!("unexpected token {tok}"))),
                    })
                    .collect::<Result<Vec<u32>>>()
                    .map(EntityProfile::new)
            })
            .collect::<Result<Vec<_>>>()
    };
    Ok((
        convert(table.sv, AttributeKind::Subject)?,
        convert(table.ov, AttributeKind::Object)?,
    ))
}

pub fn render_acm_input(scenario: &Scenario) -> (String, String) {
    (
        render_acm_text(&scenario.acm),
        render_attributes_json(&scenario.subjects, &scenario.objects),
    )
}

pub fn render_acl_input(scenario: &Scenario) -> (String, String) {
    (
        render_acl_text(&scenario.acm),
        render_attributes_json(&scenario.subjects, &scenario.objects),
    )
}

fn verbose_attrs(p: &EntityProfile, kind: AttributeKind) -> String {
    p.values()
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let attr = AttributeRef::new(kind, k as u32 + 1);
            format!(
                "{}{}={}",
                kind.name_prefix(),
                attr.index(),
                AttributeValue::new(attr, v)
            )
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Human-oriented layout with 1-based entity labels (`S1`, `O2`) and
/// `SA1=S_1_2` style attribute listings.
pub fn render_verbose(scenario: &Scenario, method: InputMethod) -> String {
    let subjects = &scenario.subjects;
    let objects = &scenario.objects;
    let acm = &scenario.acm;
    let mut out = String::new();
    let attribute_sections = |out: &mut String| {
        out.push_str("Subject Attributes:\n");
        for (i, s) in subjects.iter().enumerate() {
            writeln!(out, "S{}: {}", i + 1, verbose_attrs(s, AttributeKind::Subject)).unwrap();
        }
        out.push_str("\nObject Attributes:\n");
        for (j, o) in objects.iter().enumerate() {
            writeln!(out, "O{}: {}", j + 1, verbose_attrs(o, AttributeKind::Object)).unwrap();
        }
    };
    match method {
        InputMethod::AccessData => {
            for (i, s) in subjects.iter().enumerate() {
                for (j, o) in objects.iter().enumerate() {
                    writeln!(
                        out,
                        "S{}: {} | O{}: {} | Decision={}",
                        i + 1,
                        verbose_attrs(s, AttributeKind::Subject),
                        j + 1,
                        verbose_attrs(o, AttributeKind::Object),
                        u8::from(acm.get(i, j))
                    )
                    .unwrap();
                }
            }
        }
        InputMethod::AcmPlusAttributes => {
            out.push_str("ACM:\n        ");
            let header: Vec<String> = (1..=objects.len()).map(|j| format!("{:<4}", format!("O{j}"))).collect();
            out.push_str(header.concat().trim_end());
            out.push('\n');
            for i in 0..subjects.len() {
                let mut line = format!("{:<8}", format!("S{}", i + 1));
                for &c in acm.row(i) {
                    write!(line, "{:<4}", u8::from(c)).unwrap();
                }
                out.push_str(line.trim_end());
                out.push('\n');
            }
            out.push('\n');
            attribute_sections(&mut out);
        }
        InputMethod::AclPlusAttributes => {
            out.push_str("Access Control Lists:\n");
            for j in 0..objects.len() {
                let allowed: Vec<String> = (0..subjects.len())
                    .filter(|&i| acm.get(i, j))
                    .map(|i| format!("S{}", i + 1))
                    .collect();
                writeln!(out, "O{}: [{}]", j + 1, allowed.join(", ")).unwrap();
            }
            out.push('\n');
            attribute_sections(&mut out);
        }
    }
    out
}

fn parse_u32(s: &str) -> Option<u32> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok().filter(|&v| v >= 1)
}

/// `SA_3` / `OA_1`.
pub fn parse_attribute_name(s: &str) -> Option<AttributeRef> {
    let (kind, rest) = if let Some(r) = s.strip_prefix("SA_") {
        (AttributeKind::Subject, r)
    } else if let Some(r) = s.strip_prefix("OA_") {
        (AttributeKind::Object, r)
    } else {
        return None;
    };
    parse_u32(rest).map(|i| AttributeRef::new(kind, i))
}

/// `S_2_5` / `O_1_3`.
pub fn parse_value_token(s: &str) -> Option<AttributeValue> {
    let (kind, rest) = if let Some(r) = s.strip_prefix("S_") {
        (AttributeKind::Subject, r)
    } else if let Some(r) = s.strip_prefix("O_") {
        (AttributeKind::Object, r)
    } else {
        return None;
    };
    let (i, j) = rest.split_once('_')?;
    Some(AttributeValue::new(
        AttributeRef::new(kind, parse_u32(i)?),
        parse_u32(j)?,
    ))
}

/// `{'rule': [('OA_1', 'O_1_1'), ('SA_2', 'S_2_2')], 'decision': 'permit'}`
pub fn emit_rule_line(rule: &Rule) -> String {
    let conds: Vec<String> = rule
        .conditions()
        .iter()
        .map(|c| format!("('{}', '{}')", c.attr, c))
        .collect();
    format!(
        "{{'rule': [{}], 'decision': '{}'}}",
        conds.join(", "),
        rule.decision
    )
}

/// One rule line per rule, each terminated by LF.
pub fn emit_policy(policy: &PolicySet) -> String {
    policy.iter().map(|r| emit_rule_line(r) + "\n").collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Reject any non-blank line that is not a rule.
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedRules {
    pub policy: PolicySet,
    /// Non-blank lines that were not rules (prose, code fences).
    pub skipped: usize,
}

pub fn parse_rule_lines(text: &str) -> Result<ParsedRules> {
    parse_rule_lines_with(text, ParseOptions::default())
}

/// Parses rule lines, normalizing every rule. Quote style and spacing are
/// free; a rule may wrap across lines as long as its braces balance.
pub fn parse_rule_lines_with(text: &str, opts: ParseOptions) -> Result<ParsedRules> {
    let text = normalize_quotes(text);
    let lines: Vec<&str> = text.lines().collect();
    let mut rules = Vec::new();
    let mut skipped = 0;
    let mut n = 0;
    while n < lines.len() {
        let line_no = n + 1;
        let trimmed = lines[n].trim();
        n += 1;
        if trimmed.is_empty() {
            continue;
        }
        let Some(body) = rule_start(trimmed) else {
            if opts.strict {
                return Err(Error::MalformedRule {
                    line: line_no,
                    reason: "not a rule line".into(),
                });
            }
            skipped += 1;
            continue;
        };
        let mut buf = body.to_string();
        while brace_depth(&buf) > 0 && n < lines.len() {
            buf.push(' ');
            buf.push_str(lines[n].trim());
            n += 1;
        }
        let rule = RuleParser::new(&buf, line_no).parse()?;
        let rule = rule.normalize().map_err(|e| Error::AtLine {
            line: line_no,
            source: Box::new(e),
        })?;
        rules.push(rule);
    }
    if rules.is_empty() {
        return Err(Error::NoRulesFound { skipped });
    }
    Ok(ParsedRules {
        policy: PolicySet::new(rules),
        skipped,
    })
}

fn normalize_quotes(text: &str) -> String {
    text.chars()
        .map(|c| match c {
            '\u{2018}' | '\u{2019}' | '\u{201A}' | '`' | '\u{00B4}' => '\'',
            '\u{201C}' | '\u{201D}' => '"',
            other => other,
        })
        .collect()
}

/// Returns the line from its opening brace if everything before it is list
/// decoration (bullets, numbering, backticks).
fn rule_start(line: &str) -> Option<&str> {
    let brace = line.find('{')?;
    let prefix = &line[..brace];
    let decoration = prefix.chars().all(|c| {
        c.is_whitespace() || c.is_ascii_digit() || matches!(c, '-' | '*' | '\u{2022}' | '.' | ')' | '\'' | '[')
    });
    decoration.then(|| &line[brace..])
}

fn brace_depth(s: &str) -> i32 {
    let mut depth = 0;
    let mut quote: Option<char> = None;
    for c in s.chars() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None => match c {
                '\'' | '"' => quote = Some(c),
                '{' => depth += 1,
                '}' => depth -= 1,
                _ => {}
            },
        }
    }
    depth
}

struct RuleParser<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
}

impl<'a> RuleParser<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        RuleParser {
            chars: src.chars().peekable(),
            line,
        }
    }

    fn fail<T>(&self, reason: impl Into<String>) -> Result<T> {
        Err(Error::MalformedRule {
            line: self.line,
            reason: reason.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.chars.peek().is_some_and(|c| c.is_whitespace()) {
            self.chars.next();
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.peek().copied()
    }

    fn eat(&mut self, want: char) -> bool {
        if self.peek() == Some(want) {
            self.chars.next();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, want: char) -> Result<()> {
        if self.eat(want) {
            Ok(())
        } else {
            let got = self.peek();
            self.fail(format!("expected '{want}', found {got:?}"))
        }
    }

    fn string(&mut self) -> Result<String> {
        let q = match self.peek() {
            Some(c @ ('\'' | '"')) => c,
            other => return self.fail(format!("expected a quoted string, found {other:?}")),
        };
        self.chars.next();
        let mut s = String::new();
        for c in self.chars.by_ref() {
            if c == q {
                return Ok(s.trim().to_string());
            }
            s.push(c);
        }
        self.fail("unterminated string")
    }

    fn parse(mut self) -> Result<Rule> {
        self.expect('{')?;
        let mut conditions = None;
        let mut decision = None;
        loop {
            if self.eat('}') {
                break;
            }
            let key = self.string()?;
            self.expect(':')?;
            match key.as_str() {
                "rule" => conditions = Some(self.conditions()?),
                "decision" => {
                    let d = self.string()?;
                    decision = Some(match d.to_ascii_lowercase().as_str() {
                        "permit" => Decision::Permit,
                        "deny" => Decision::Deny,
                        _ => return self.fail(format!("unknown decision {d:?}")),
                    });
                }
                other => return self.fail(format!("unexpected key {other:?}")),
            }
            if !self.eat(',') {
                self.expect('}')?;
                break;
            }
        }
        let rest: String = self.chars.by_ref().collect();
        if !rest.chars().all(|c| c.is_whitespace() || matches!(c, ',' | ']' | ';' | '\'')) {
            return self.fail(format!("trailing text {:?}", rest.trim()));
        }
        match (conditions, decision) {
            (Some(c), Some(d)) => Ok(Rule::new(c, d)),
            (None, _) => Err(Error::MalformedRule {
                line: self.line,
                reason: "missing 'rule'".into(),
            }),
            (_, None) => Err(Error::MalformedRule {
                line: self.line,
                reason: "missing 'decision'".into(),
            }),
        }
    }

    fn conditions(&mut self) -> Result<Vec<AttributeValue>> {
        self.expect('[')?;
        let mut out = Vec::new();
        loop {
            if self.eat(']') {
                return Ok(out);
            }
            let close = if self.eat('(') {
                ')'
            } else if self.eat('[') {
                ']'
            } else {
                return self.fail("expected a ('ATTR', 'VALUE') pair");
            };
            let name = self.string()?;
            self.expect(',')?;
            let token = self.string()?;
            self.eat(',');
            self.expect(close)?;
            out.push(self.condition(&name, &token)?);
            if !self.eat(',') {
                self.expect(']')?;
                return Ok(out);
            }
        }
    }

    fn condition(&self, name: &str, token: &str) -> Result<AttributeValue> {
        let Some(attr) = parse_attribute_name(name) else {
            return self.fail(format!("bad attribute name {name:?}"));
        };
        let Some(value) = parse_value_token(token) else {
            return self.fail(format!("bad value token {token:?}"));
        };
        if value.attr != attr {
            return Err(Error::KindMismatch {
                line: self.line,
                name: name.to_string(),
                token: token.to_string(),
            });
        }
        Ok(value)
    }
}
