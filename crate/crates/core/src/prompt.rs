//! Chain-of-thought prompt templates, rendering, and parsing of the
//! `YES, I found …` / `NO, I did not find …` answer prefixes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Candidate, Decision, SmellKind};

pub const SMELL_PLACEHOLDER: &str = "{smell}";
pub const CODE_PLACEHOLDER: &str = "{code}";
pub const TEMPLATE_EXTENSION: &str = "txt";

const ROLE_PREFIX: &str = "You are a software expert analyzing one Java file for symptoms that may indicate the ";
const ROLE_SUFFIX: &str = " code smell.";
const STEP_LEAD: &str =
    "Please answer the following questions step by step before reaching a conclusion about the code smell.";

/// Positive answer prefix for a smell.
pub fn yes_prefix(smell: SmellKind) -> String {
    format!("YES, I found {}", smell.display_name())
}

/// Negative answer prefix for a smell.
pub fn no_prefix(smell: SmellKind) -> String {
    format!("NO, I did not find {}", smell.display_name())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub smell: SmellKind,
    pub description: String,
    pub questions: [String; 4],
    pub instruction_block: String,
}

impl PromptTemplate {
    /// Parses the sectioned template format. `file` only labels errors.
    pub fn parse(smell: SmellKind, text: &str, file: &str) -> Result<Self> {
        let fail = |message: String| Error::Template {
            file: file.to_string(),
            message,
        };
        let mut sections: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        let mut current: Option<&str> = None;
        for line in text.lines() {
            let trimmed = line.trim();
            if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                if !matches!(name, "description" | "questions" | "instructions") {
                    return Err(fail(format!("unknown section [{name}]")));
                }
                if sections.insert(name, Vec::new()).is_some() {
                    return Err(fail(format!("section [{name}] appears twice")));
                }
                current = Some(name);
                continue;
            }
            match current {
                Some(name) => sections.entry(name).or_default().push(line),
                None if trimmed.is_empty() => {}
                None => return Err(fail("text before the first section".into())),
            }
        }
        let section = |name: &str| -> Result<String> {
            let body = sections
                .get(name)
                .ok_or_else(|| fail(format!("missing section [{name}]")))?
                .join("\n");
            let body = body.trim().to_string();
            if body.is_empty() {
                return Err(fail(format!("section [{name}] is empty")));
            }
            Ok(body)
        };
        let description = section("description")?;
        let instruction_block = section("instructions")?;

        let mut questions: Vec<String> = Vec::new();
        for line in section("questions")?.lines() {
            let trimmed = line.trim();
            if let Some(q) = trimmed.strip_prefix('-') {
                questions.push(q.trim().to_string());
            } else if !trimmed.is_empty() {
                match questions.last_mut() {
                    Some(q) => {
                        q.push(' ');
                        q.push_str(trimmed);
                    }
                    None => return Err(fail("question text before the first `-` item".into())),
                }
            }
        }
        let count = questions.len();
        let questions: [String; 4] = questions
            .try_into()
            .map_err(|_| fail(format!("expected exactly 4 questions, found {count}")))?;
        if questions.iter().any(String::is_empty) {
            return Err(fail("empty question".into()));
        }

        let template = PromptTemplate {
            smell,
            description,
            questions,
            instruction_block,
        };
        template.validate().map_err(fail)?;
        Ok(template)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let instructions = self.instruction_block.replace(SMELL_PLACEHOLDER, self.smell.display_name());
        for prefix in [yes_prefix(self.smell), no_prefix(self.smell)] {
            if !instructions.contains(&prefix) {
                return Err(format!("instructions lack the answer prefix {prefix:?}"));
            }
        }
        if let Some(pos) = self.instruction_block.find(CODE_PLACEHOLDER) {
            if pos + CODE_PLACEHOLDER.len() != self.instruction_block.len() {
                return Err("{code} must be the last thing in [instructions]".into());
            }
        }
        if self.description.contains(CODE_PLACEHOLDER) || self.questions.iter().any(|q| q.contains(CODE_PLACEHOLDER)) {
            return Err("{code} may only appear in [instructions]".into());
        }
        Ok(())
    }
}

/// Loads `<stem>.txt` for every smell from `dir` (stems like `large_class`).
pub fn load_templates(dir: &Path) -> Result<BTreeMap<SmellKind, PromptTemplate>> {
    let listing = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found: BTreeMap<SmellKind, PromptTemplate> = BTreeMap::new();
    for entry in listing {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some(TEMPLATE_EXTENSION) {
            continue;
        }
        let file = path.display().to_string();
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let smell: SmellKind = stem.parse().map_err(|_| Error::Template {
            file: file.clone(),
            message: format!("file name {stem:?} names no known smell"),
        })?;
        let text = crate::io::read_text(&path)?;
        let template = PromptTemplate::parse(smell, &text, &file)?;
        if found.insert(smell, template).is_some() {
            return Err(Error::Template {
                file,
                message: format!("second template for {smell}"),
            });
        }
    }
    if let Some(missing) = SmellKind::ALL.iter().find(|s| !found.contains_key(s)) {
        return Err(Error::Template {
            file: dir.join(format!("{}.{TEMPLATE_EXTENSION}", missing.file_stem())).display().to_string(),
            message: format!("no template for {missing}"),
        });
    }
    Ok(found)
}

macro_rules! bundled {
    ($($smell:ident => $file:literal),* $(,)?) => {
        [$((SmellKind::$smell, $file, include_str!(concat!("../templates/", $file)))),*]
    };
}

/// The nine templates shipped with the crate.
pub fn default_templates() -> BTreeMap<SmellKind, PromptTemplate> {
    let files = bundled![
        DataClass => "data_class.txt",
        DispersedCoupling => "dispersed_coupling.txt",
        FeatureEnvy => "feature_envy.txt",
        IntensiveCoupling => "intensive_coupling.txt",
        LargeClass => "large_class.txt",
        LongMethod => "long_method.txt",
        LongParameterList => "long_parameter_list.txt",
        RefusedBequest => "refused_bequest.txt",
        ShotgunSurgery => "shotgun_surgery.txt",
    ];
    files
        .into_iter()
        .map(|(smell, file, text)| {
            let t = PromptTemplate::parse(smell, text, file).expect("bundled templates are valid");
            (smell, t)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub candidate_id: String,
    pub smell: SmellKind,
    pub text: String,
    pub token_estimate: usize,
}

/// Rough token count: one token per four characters, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// Role sentence, description, numbered questions, instructions, then the
/// class source verbatim as the final section.
pub fn render(template: &PromptTemplate, candidate: &Candidate) -> Result<RenderedPrompt> {
    if template.smell != candidate.smell {
        return Err(Error::Contract(format!(
            "{} template cannot render candidate {} of {}",
            template.smell, candidate.id, candidate.smell
        )));
    }
    let name = template.smell.display_name();
    let mut text = String::new();
    text.push_str(ROLE_PREFIX);
    text.push_str(name);
    text.push_str(ROLE_SUFFIX);
    text.push_str("\n\n");
    text.push_str(&template.description.replace(SMELL_PLACEHOLDER, name));
    text.push_str("\n\n");
    text.push_str(STEP_LEAD);
    text.push_str("\n\n");
    for (i, q) in template.questions.iter().enumerate() {
        text.push_str(&format!("{}. {}\n", i + 1, q.replace(SMELL_PLACEHOLDER, name)));
    }
    text.push_str("\nInstructions:\n");
    let instructions = template.instruction_block.replace(SMELL_PLACEHOLDER, name);
    let head = instructions.strip_suffix(CODE_PLACEHOLDER).unwrap_or(&instructions).trim_end();
    text.push_str(head);
    text.push_str("\n\n");
    text.push_str(&candidate.class_source);
    Ok(RenderedPrompt {
        candidate_id: candidate.id.clone(),
        smell: candidate.smell,
        token_estimate: estimate_tokens(&text),
        text,
    })
}

/// Recovers the smell named in a rendered prompt's role sentence.
pub fn smell_of_prompt(text: &str) -> Option<SmellKind> {
    let rest = text.strip_prefix(ROLE_PREFIX)?;
    let name = &rest[..rest.find(ROLE_SUFFIX)?];
    SmellKind::ALL.iter().copied().find(|s| s.display_name() == name)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedReply {
    pub decision: Decision,
    pub matched_prefix: Option<String>,
    pub rationale: String,
}

const DECORATION: &[char] = &['*', '_', '`', '#', '>', '"', '\u{201c}', '\u{201d}'];

fn strip_prefix_ignore_case<'a>(text: &'a str, prefix: &str) -> Option<&'a str> {
    let mut chars = text.char_indices();
    for p in prefix.chars() {
        let (_, c) = chars.next()?;
        if !c.eq_ignore_ascii_case(&p) {
            return None;
        }
    }
    Some(chars.next().map_or("", |(i, _)| &text[i..]))
}

/// Classifies a model reply by its first non-empty line.
///
/// Markdown emphasis, heading and quote characters are removed from that line
/// and whitespace is collapsed before a case-insensitive prefix match. Any
/// other opening yields `Abstain` with the whole reply as rationale.
pub fn parse_reply(smell: SmellKind, reply_text: &str) -> ParsedReply {
    let mut lines = reply_text.lines().skip_while(|l| l.trim().is_empty());
    let Some(first) = lines.next() else {
        return ParsedReply {
            decision: Decision::Abstain,
            matched_prefix: None,
            rationale: reply_text.to_string(),
        };
    };
    let cleaned: String = first
        .chars()
        .filter(|c| !DECORATION.contains(c))
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    for (decision, prefix) in [(Decision::Positive, yes_prefix(smell)), (Decision::Negative, no_prefix(smell))] {
        if let Some(rest) = strip_prefix_ignore_case(&cleaned, &prefix) {
            let head = rest.trim_start_matches(|c: char| matches!(c, '.' | ':' | '!' | ',' | ';') || c.is_whitespace());
            let tail = lines.collect::<Vec<_>>().join("\n");
            let rationale = match (head.is_empty(), tail.trim().is_empty()) {
                (true, _) => tail.trim().to_string(),
                (false, true) => head.to_string(),
                (false, false) => format!("{head}\n{}", tail.trim()),
            };
            return ParsedReply {
                decision,
                matched_prefix: Some(prefix),
                rationale,
            };
        }
    }
    ParsedReply {
        decision: Decision::Abstain,
        matched_prefix: None,
        rationale: reply_text.to_string(),
    }
}
