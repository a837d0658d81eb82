//! Shared vocabulary: the smell catalog, tool and detector identities,
//! candidates, verdicts and source normalization.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Whether a smell is judged on a whole class or on a single method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Granularity {
    ClassLevel,
    MethodLevel,
}

/// The four static analysis tools whose reports can be ingested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tool {
    JDeodorant,
    #[serde(rename = "JSpIRIT")]
    JSpIrit,
    Organic,
    #[serde(rename = "PMD")]
    Pmd,
}

impl Tool {
    pub const ALL: [Tool; 4] = [Tool::JDeodorant, Tool::JSpIrit, Tool::Organic, Tool::Pmd];

    pub fn name(self) -> &'static str {
        match self {
            Tool::JDeodorant => "JDeodorant",
            Tool::JSpIrit => "JSpIRIT",
            Tool::Organic => "Organic",
            Tool::Pmd => "PMD",
        }
    }

    /// Smells this tool is trusted to report on.
    pub fn assigned_smells(self) -> Vec<SmellKind> {
        SmellKind::ALL
            .iter()
            .copied()
            .filter(|s| s.assigned_tools().contains(&self))
            .collect()
    }

    pub fn detector(self) -> DetectorId {
        DetectorId::tool(self)
    }
}

impl fmt::Display for Tool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tool {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim();
        Tool::ALL
            .iter()
            .copied()
            .find(|t| t.name().eq_ignore_ascii_case(wanted))
            .ok_or_else(|| Error::Validation(format!("unknown tool {wanted:?}")))
    }
}

/// One of the nine studied code smells.
///
/// Variants are declared in alphabetical order so the derived `Ord` gives the
/// catalog order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SmellKind {
    DataClass,
    DispersedCoupling,
    FeatureEnvy,
    IntensiveCoupling,
    LargeClass,
    LongMethod,
    LongParameterList,
    RefusedBequest,
    ShotgunSurgery,
}

impl SmellKind {
    pub const ALL: [SmellKind; 9] = [
        SmellKind::DataClass,
        SmellKind::DispersedCoupling,
        SmellKind::FeatureEnvy,
        SmellKind::IntensiveCoupling,
        SmellKind::LargeClass,
        SmellKind::LongMethod,
        SmellKind::LongParameterList,
        SmellKind::RefusedBequest,
        SmellKind::ShotgunSurgery,
    ];

    /// Human spelling, as injected into prompts and answer prefixes.
    pub fn display_name(self) -> &'static str {
        match self {
            SmellKind::DataClass => "Data Class",
            SmellKind::DispersedCoupling => "Dispersed Coupling",
            SmellKind::FeatureEnvy => "Feature Envy",
            SmellKind::IntensiveCoupling => "Intensive Coupling",
            SmellKind::LargeClass => "Large Class",
            SmellKind::LongMethod => "Long Method",
            SmellKind::LongParameterList => "Long Parameter List",
            SmellKind::RefusedBequest => "Refused Bequest",
            SmellKind::ShotgunSurgery => "Shotgun Surgery",
        }
    }

    pub fn abbreviation(self) -> &'static str {
        match self {
            SmellKind::DataClass => "DC",
            SmellKind::DispersedCoupling => "DiCo",
            SmellKind::FeatureEnvy => "FE",
            SmellKind::IntensiveCoupling => "IC",
            SmellKind::LargeClass => "LC",
            SmellKind::LongMethod => "LM",
            SmellKind::LongParameterList => "LPL",
            SmellKind::RefusedBequest => "RB",
            SmellKind::ShotgunSurgery => "SS",
        }
    }

    /// Identifier form, e.g. `LongParameterList`. Also the serde form.
    pub fn code_name(self) -> &'static str {
        match self {
            SmellKind::DataClass => "DataClass",
            SmellKind::DispersedCoupling => "DispersedCoupling",
            SmellKind::FeatureEnvy => "FeatureEnvy",
            SmellKind::IntensiveCoupling => "IntensiveCoupling",
            SmellKind::LargeClass => "LargeClass",
            SmellKind::LongMethod => "LongMethod",
            SmellKind::LongParameterList => "LongParameterList",
            SmellKind::RefusedBequest => "RefusedBequest",
            SmellKind::ShotgunSurgery => "ShotgunSurgery",
        }
    }

    /// File stem used for template files, e.g. `long_parameter_list`.
    pub fn file_stem(self) -> String {
        self.display_name().to_ascii_lowercase().replace(' ', "_")
    }

    pub fn granularity(self) -> Granularity {
        match self {
            SmellKind::DataClass | SmellKind::LargeClass | SmellKind::RefusedBequest => {
                Granularity::ClassLevel
            }
            _ => Granularity::MethodLevel,
        }
    }

    pub fn is_method_level(self) -> bool {
        self.granularity() == Granularity::MethodLevel
    }

    pub fn assigned_tools(self) -> [Tool; 2] {
        use Tool::*;
        match self {
            SmellKind::DataClass => [Pmd, Organic],
            SmellKind::DispersedCoupling => [Organic, JSpIrit],
            SmellKind::FeatureEnvy => [JDeodorant, Organic],
            SmellKind::IntensiveCoupling => [Organic, JSpIrit],
            SmellKind::LargeClass => [JDeodorant, JSpIrit],
            SmellKind::LongMethod => [JDeodorant, Organic],
            SmellKind::LongParameterList => [Pmd, Organic],
            SmellKind::RefusedBequest => [Organic, JSpIrit],
            SmellKind::ShotgunSurgery => [Organic, JSpIrit],
        }
    }

    pub fn is_assigned(self, tool: Tool) -> bool {
        self.assigned_tools().contains(&tool)
    }
}

impl fmt::Display for SmellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for SmellKind {
    type Err = Error;

    /// Accepts the display name, the identifier form or the abbreviation,
    /// ignoring case, spaces, dashes and underscores.
    fn from_str(s: &str) -> Result<Self> {
        let squash = |x: &str| {
            x.chars()
                .filter(|c| !matches!(c, ' ' | '_' | '-'))
                .collect::<String>()
                .to_ascii_lowercase()
        };
        let wanted = squash(s);
        SmellKind::ALL
            .iter()
            .copied()
            .find(|k| squash(k.code_name()) == wanted || k.abbreviation().to_ascii_lowercase() == wanted)
            .ok_or_else(|| Error::Validation(format!("unknown smell {:?}", s.trim())))
    }
}

/// All nine smells in alphabetical order.
pub fn smell_catalog() -> &'static [SmellKind; 9] {
    &SmellKind::ALL
}

/// One row of the systems table: size metrics and popularity of a project.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemRecord {
    pub name: String,
    pub noc: u64,
    pub nom: u64,
    pub loc: u64,
    pub stars: u64,
}

/// Reads a `name,noc,nom,loc,stars` CSV, rejecting duplicate names.
/// Thousands separators inside quoted numbers are accepted.
pub fn load_systems(path: &std::path::Path) -> Result<Vec<SystemRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let source_name = path.display().to_string();
    let mut out: Vec<SystemRecord> = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(idx + 2);
        let parse_err = |message: String| Error::Parse {
            source_name: source_name.clone(),
            line,
            message,
        };
        if rec.len() != 5 {
            return Err(parse_err(format!("expected 5 fields, found {}", rec.len())));
        }
        let num = |i: usize| -> Result<u64> {
            rec[i]
                .trim()
                .replace(',', "")
                .parse::<u64>()
                .map_err(|e| parse_err(format!("field {}: {e}", i + 1)))
        };
        let name = rec[0].trim().to_string();
        if name.is_empty() {
            return Err(parse_err("empty system name".into()));
        }
        if out.iter().any(|s| s.name == name) {
            return Err(parse_err(format!("duplicate system {name:?}")));
        }
        out.push(SystemRecord {
            name,
            noc: num(1)?,
            nom: num(2)?,
            loc: num(3)?,
            stars: num(4)?,
        });
    }
    Ok(out)
}

pub(crate) fn csv_error(path: &std::path::Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            source_name: path.display().to_string(),
            line,
            message: format!("{other:?}"),
        },
    }
}

/// One sampled code-smell instance with its whole enclosing class as context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub system: String,
    pub class_path: String,
    pub class_name: String,
    pub method_name: Option<String>,
    pub smell: SmellKind,
    pub class_source: String,
}

impl Candidate {
    pub fn new(
        system: &str,
        class_path: &str,
        class_name: &str,
        method_name: Option<&str>,
        smell: SmellKind,
        class_source: String,
    ) -> Result<Self> {
        let id = candidate_id(system, class_path, class_name, method_name, smell)?;
        let candidate = Candidate {
            id,
            system: system.to_string(),
            class_path: class_path.to_string(),
            class_name: class_name.to_string(),
            method_name: method_name.map(str::to_string),
            smell,
            class_source,
        };
        candidate.validate()?;
        Ok(candidate)
    }

    pub fn validate(&self) -> Result<()> {
        match (self.smell.granularity(), &self.method_name) {
            (Granularity::MethodLevel, None) => {
                return Err(Error::Validation(format!(
                    "{} is method-level but candidate {} names no method",
                    self.smell, self.id
                )))
            }
            (Granularity::ClassLevel, Some(m)) => {
                return Err(Error::Validation(format!(
                    "{} is class-level but candidate {} names method {m:?}",
                    self.smell, self.id
                )))
            }
            _ => {}
        }
        if self.class_source.trim().is_empty() {
            return Err(Error::Validation(format!("candidate {} has empty class source", self.id)));
        }
        if !self.class_source.contains(simple_name(&self.class_name)) {
            return Err(Error::Validation(format!(
                "class source of candidate {} does not mention {}",
                self.id, self.class_name
            )));
        }
        Ok(())
    }
}

/// Last segment of a possibly qualified class name (`a.b.Outer$Inner` → `Inner`).
pub fn simple_name(class_name: &str) -> &str {
    class_name
        .rsplit(['.', '$'])
        .next()
        .unwrap_or(class_name)
}

/// Stable identifier of a candidate.
///
/// The smell abbreviation keeps ids readable; the hash covers every field
/// length-prefixed so that no two distinct inputs can share a preimage.
pub fn candidate_id(
    system: &str,
    class_path: &str,
    class_name: &str,
    method_name: Option<&str>,
    smell: SmellKind,
) -> Result<String> {
    for (field, value) in [("system", system), ("class_path", class_path), ("class_name", class_name)] {
        if value.trim().is_empty() {
            return Err(Error::Validation(format!("candidate id: {field} is empty")));
        }
    }
    let mut hasher = Sha256::new();
    let mut feed = |bytes: &[u8]| {
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(bytes);
    };
    feed(system.as_bytes());
    feed(class_path.as_bytes());
    feed(class_name.as_bytes());
    match method_name {
        Some(m) => {
            feed(&[1]);
            feed(m.as_bytes());
        }
        None => feed(&[0]),
    }
    feed(smell.code_name().as_bytes());
    let digest = hasher.finalize();
    Ok(format!("{}-{}", smell.abbreviation(), &hex::encode(digest)[..20]))
}

/// Unifies line endings, strips trailing whitespace from every line and drops
/// blank lines at both ends.
pub fn normalize_source(text: &str) -> String {
    let unified = text.replace("\r\n", "\n").replace('\r', "\n");
    let lines: Vec<&str> = unified.split('\n').map(str::trim_end).collect();
    let first = lines.iter().position(|l| !l.is_empty());
    let last = lines.iter().rposition(|l| !l.is_empty());
    match (first, last) {
        (Some(a), Some(b)) => lines[a..=b].join("\n"),
        _ => String::new(),
    }
}

pub fn sha256_hex(data: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(data.as_ref()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Llm,
    Tool,
    Ensemble,
}

/// Who produced a verdict. Ordering puts LLMs first, then tools, then the
/// ensemble, each group sorted by name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DetectorId {
    pub kind: DetectorKind,
    pub name: String,
}

impl DetectorId {
    pub const ENSEMBLE_NAME: &'static str = "combined";

    pub fn llm(name: impl Into<String>) -> Self {
        DetectorId {
            kind: DetectorKind::Llm,
            name: name.into(),
        }
    }

    pub fn tool(tool: Tool) -> Self {
        DetectorId {
            kind: DetectorKind::Tool,
            name: tool.name().to_string(),
        }
    }

    pub fn ensemble() -> Self {
        DetectorId {
            kind: DetectorKind::Ensemble,
            name: Self::ENSEMBLE_NAME.to_string(),
        }
    }

    pub fn as_tool(&self) -> Option<Tool> {
        match self.kind {
            DetectorKind::Tool => self.name.parse().ok(),
            _ => None,
        }
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            DetectorKind::Llm => "llm",
            DetectorKind::Tool => "tool",
            DetectorKind::Ensemble => "ensemble",
        };
        write!(f, "{kind}:{}", self.name)
    }
}

impl FromStr for DetectorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, name) = s
            .split_once(':')
            .ok_or_else(|| Error::Validation(format!("detector {s:?} is not of the form kind:name")))?;
        let kind = match kind {
            "llm" => DetectorKind::Llm,
            "tool" => DetectorKind::Tool,
            "ensemble" => DetectorKind::Ensemble,
            other => return Err(Error::Validation(format!("unknown detector kind {other:?}"))),
        };
        if name.is_empty() {
            return Err(Error::Validation(format!("detector {s:?} has an empty name")));
        }
        Ok(DetectorId {
            kind,
            name: name.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Positive,
    Negative,
    Abstain,
}

impl Decision {
    pub fn is_positive(self) -> bool {
        self == Decision::Positive
    }
}

/// One detector's decision on one candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub detector: DetectorId,
    pub candidate_id: String,
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_response_digest: Option<String>,
}

impl Verdict {
    pub fn validate(&self) -> Result<()> {
        if self.detector.kind == DetectorKind::Llm
            && self.decision != Decision::Abstain
            && self.rationale.is_none()
        {
            return Err(Error::Validation(format!(
                "llm verdict from {} on {} carries no rationale",
                self.detector.name, self.candidate_id
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_matches_tool_assignments() {
        let catalog = smell_catalog();
        assert_eq!(catalog.len(), 9);
        assert_eq!(SmellKind::DataClass.assigned_tools(), [Tool::Pmd, Tool::Organic]);
        assert_eq!(SmellKind::LargeClass.assigned_tools(), [Tool::JDeodorant, Tool::JSpIrit]);
        let mut sorted = catalog.to_vec();
        sorted.sort_by_key(|s| s.display_name());
        assert_eq!(sorted, catalog.to_vec());
    }

    #[test]
    fn tool_coverage_counts() {
        let count = |t: Tool| t.assigned_smells().len();
        assert_eq!(count(Tool::JDeodorant), 3);
        assert_eq!(count(Tool::Pmd), 2);
        assert_eq!(count(Tool::Organic), 8);
        assert_eq!(count(Tool::JSpIrit), 5);
    }

    #[test]
    fn granularity_split() {
        let class_level: Vec<_> = SmellKind::ALL.iter().filter(|s| !s.is_method_level()).collect();
        assert_eq!(
            class_level,
            [&SmellKind::DataClass, &SmellKind::LargeClass, &SmellKind::RefusedBequest]
        );
    }

    #[test]
    fn smell_parsing_accepts_all_spellings() {
        for s in SmellKind::ALL {
            assert_eq!(s.display_name().parse::<SmellKind>().unwrap(), s);
            assert_eq!(s.code_name().parse::<SmellKind>().unwrap(), s);
            assert_eq!(s.abbreviation().parse::<SmellKind>().unwrap(), s);
            assert_eq!(s.file_stem().parse::<SmellKind>().unwrap(), s);
        }
        assert!("Spaghetti Code".parse::<SmellKind>().is_err());
    }

    #[test]
    fn candidate_id_contract() {
        let a = candidate_id("jsoup", "src/A.java", "A", Some("f"), SmellKind::LongMethod).unwrap();
        let b = candidate_id("jsoup", "src/A.java", "A", Some("f"), SmellKind::LongMethod).unwrap();
        assert_eq!(a, b);
        let c = candidate_id("jsoup", "src/A.java", "A", Some("g"), SmellKind::LongMethod).unwrap();
        assert_ne!(a, c);
        let d = candidate_id("jsoup", "src/A.java", "A", Some("f"), SmellKind::FeatureEnvy).unwrap();
        assert_ne!(a, d);
        assert!(candidate_id("", "src/A.java", "A", None, SmellKind::LargeClass).is_err());
        assert!(candidate_id("jsoup", " ", "A", None, SmellKind::LargeClass).is_err());
    }

    #[test]
    fn candidate_granularity_enforced() {
        let src = "class A { void f() {} }".to_string();
        assert!(Candidate::new("s", "A.java", "A", None, SmellKind::LargeClass, src.clone()).is_ok());
        assert!(Candidate::new("s", "A.java", "A", None, SmellKind::LongMethod, src.clone()).is_err());
        assert!(Candidate::new("s", "A.java", "A", Some("f"), SmellKind::DataClass, src.clone()).is_err());
        assert!(Candidate::new("s", "A.java", "B", None, SmellKind::LargeClass, src).is_err());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_source("a \r\n b\r\n"), "a\n b");
        assert_eq!(normalize_source("\n\n  \nx\t\n\n"), "x");
        assert_eq!(normalize_source(""), "");
    }

    #[test]
    fn normalize_line_ending_fixture_pair() {
        let unix = "void f() {\n    return;  \n}\n";
        let dos = "void f() {\r\n    return;\r\n}\r\n\r\n";
        // Hand-normalized expected form, compared char by char.
        let expected: Vec<char> = "void f() {\n    return;\n}".chars().collect();
        let left: Vec<char> = normalize_source(unix).chars().collect();
        let right: Vec<char> = normalize_source(dos).chars().collect();
        assert_eq!(left.len(), expected.len());
        for (i, ((l, r), e)) in left.iter().zip(&right).zip(&expected).enumerate() {
            assert_eq!((l, r), (e, e), "mismatch at char {i}");
        }
    }

    #[test]
    fn detector_id_roundtrip_and_order() {
        let ids = [DetectorId::ensemble(), Tool::Pmd.detector(), DetectorId::llm("Qwen"), DetectorId::llm("A")];
        for id in &ids {
            assert_eq!(id.to_string().parse::<DetectorId>().unwrap(), *id);
        }
        let mut sorted = ids.to_vec();
        sorted.sort();
        assert_eq!(sorted[0], DetectorId::llm("A"));
        assert_eq!(sorted[3], DetectorId::ensemble());
    }

    #[test]
    fn verdict_rationale_invariant() {
        let mut v = Verdict {
            detector: DetectorId::llm("m"),
            candidate_id: "x".into(),
            decision: Decision::Positive,
            rationale: None,
            raw_response_digest: None,
        };
        assert!(v.validate().is_err());
        v.decision = Decision::Abstain;
        assert!(v.validate().is_ok());
    }
}
