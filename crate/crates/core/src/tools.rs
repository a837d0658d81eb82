//! Static-analysis tool reports and their closed-world alignment to the
//! manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{csv_error, Decision, DetectorId, SmellKind, Tool, Verdict};
use crate::sampler::{Manifest, ManifestEntry};

pub const REPORT_HEADER: [&str; 5] = ["system", "class_name", "method_name", "smell", "tool"];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlaggedKey {
    pub system: String,
    pub class_name: String,
    pub method_name: Option<String>,
}

impl FlaggedKey {
    fn of(entry: &ManifestEntry) -> Self {
        FlaggedKey {
            system: entry.system.clone(),
            class_name: entry.class_name.clone(),
            method_name: entry.method_name.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolReport {
    pub tool: Tool,
    pub smell: SmellKind,
    pub flagged: BTreeSet<FlaggedKey>,
}

impl ToolReport {
    pub fn detector(&self) -> DetectorId {
        DetectorId::tool(self.tool)
    }
}

#[derive(Debug, Clone)]
struct ReportRow {
    tool: Tool,
    smell: SmellKind,
    key: FlaggedKey,
}

fn check_assignment(tool: Tool, smell: SmellKind) -> Result<()> {
    if smell.is_assigned(tool) {
        Ok(())
    } else {
        Err(Error::Assignment {
            tool: tool.name().to_string(),
            smell: smell.display_name().to_string(),
        })
    }
}

fn parse_rows(text: &str, source_name: &str) -> Result<Vec<ReportRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| csv_error(Path::new(source_name), e))?.clone();
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != REPORT_HEADER {
        return Err(Error::Parse {
            source_name: source_name.to_string(),
            line: 1,
            message: format!("expected header {}, found {}", REPORT_HEADER.join(","), got.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(Path::new(source_name), e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let fail = |message: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            message,
        };
        if rec.len() != REPORT_HEADER.len() {
            return Err(fail(format!("expected 5 fields, found {}", rec.len())));
        }
        let field = |i: usize| rec[i].trim().to_string();
        let smell: SmellKind = field(3).parse().map_err(|e: Error| fail(e.to_string()))?;
        let tool: Tool = field(4).parse().map_err(|e: Error| fail(e.to_string()))?;
        if field(0).is_empty() || field(1).is_empty() {
            return Err(fail("system and class_name are required".into()));
        }
        check_assignment(tool, smell).map_err(|_| Error::Assignment {
            tool: format!("{tool} (line {line})"),
            smell: smell.display_name().to_string(),
        })?;
        let method = field(2);
        rows.push(ReportRow {
            tool,
            smell,
            key: FlaggedKey {
                system: field(0),
                class_name: field(1),
                method_name: (!method.is_empty()).then_some(method),
            },
        });
    }
    Ok(rows)
}

/// Reads the rows of one (tool, smell) pair from a report file. Rows for
/// other assigned pairs are skipped; rows for unassigned pairs are errors.
pub fn ingest_report(path: &Path, tool_name: &str, smell: SmellKind) -> Result<ToolReport> {
    let tool: Tool = tool_name.parse()?;
    check_assignment(tool, smell)?;
    let text = crate::io::read_text(path)?;
    parse_report(&text, &path.display().to_string(), tool, smell)
}

pub fn parse_report(text: &str, source_name: &str, tool: Tool, smell: SmellKind) -> Result<ToolReport> {
    check_assignment(tool, smell)?;
    let flagged = parse_rows(text, source_name)?
        .into_iter()
        .filter(|r| r.tool == tool && r.smell == smell)
        .map(|r| r.key)
        .collect();
    Ok(ToolReport { tool, smell, flagged })
}

/// Reads a report file holding several tools' output.
///
/// The file is taken as the complete output of every tool in `tools`
/// (default: every tool named in the file), so each of those tools gets a
/// report, possibly empty, for every smell it is assigned to.
pub fn load_reports(path: &Path, tools: Option<&[Tool]>) -> Result<Vec<ToolReport>> {
    let text = crate::io::read_text(path)?;
    let rows = parse_rows(&text, &path.display().to_string())?;
    let tools: BTreeSet<Tool> = match tools {
        Some(t) => t.iter().copied().collect(),
        None => rows.iter().map(|r| r.tool).collect(),
    };
    let mut reports: BTreeMap<(Tool, SmellKind), ToolReport> = BTreeMap::new();
    for &tool in &tools {
        for smell in tool.assigned_smells() {
            reports.insert(
                (tool, smell),
                ToolReport {
                    tool,
                    smell,
                    flagged: BTreeSet::new(),
                },
            );
        }
    }
    for row in rows {
        if let Some(report) = reports.get_mut(&(row.tool, row.smell)) {
            report.flagged.insert(row.key);
        }
    }
    Ok(reports.into_values().collect())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Alignment {
    pub verdicts: Vec<Verdict>,
    /// Flagged entries that match no candidate of the report's smell.
    pub orphans: Vec<FlaggedKey>,
    pub warnings: Vec<String>,
}

/// One verdict per manifest candidate of the report's smell: positive when
/// flagged, negative otherwise.
pub fn align(report: &ToolReport, manifest: &Manifest) -> Result<Alignment> {
    let entries: Vec<&ManifestEntry> = manifest.entries_for(report.smell).collect();
    if entries.is_empty() {
        return Err(Error::Contract(format!(
            "manifest has no {} candidates for the {} report",
            report.smell, report.tool
        )));
    }
    let mut out = Alignment::default();
    let mut matched: BTreeSet<&FlaggedKey> = BTreeSet::new();
    for entry in &entries {
        let key = FlaggedKey::of(entry);
        let hit = report.flagged.get(&key);
        if let Some(k) = hit {
            matched.insert(k);
        }
        out.verdicts.push(Verdict {
            detector: report.detector(),
            candidate_id: entry.id.clone(),
            decision: if hit.is_some() { Decision::Positive } else { Decision::Negative },
            rationale: None,
            raw_response_digest: None,
        });
    }
    for flagged in &report.flagged {
        if matched.contains(flagged) {
            continue;
        }
        let granularity_clash = entries.iter().any(|e| {
            e.system == flagged.system && e.class_name == flagged.class_name && e.method_name.is_some() != flagged.method_name.is_some()
        });
        if granularity_clash {
            out.warnings.push(format!(
                "{} flags {}.{} at a different granularity than the {} candidate",
                report.tool,
                flagged.system,
                flagged.class_name,
                report.smell
            ));
        }
        out.orphans.push(flagged.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::Provenance;

    fn entry(system: &str, class: &str, method: Option<&str>, smell: SmellKind) -> ManifestEntry {
        ManifestEntry {
            id: crate::model::candidate_id(system, "F.java", class, method, smell).unwrap(),
            system: system.into(),
            version: String::new(),
            class_path: "F.java".into(),
            class_name: class.into(),
            method_name: method.map(Into::into),
            smell,
            source_sha256: String::new(),
            unit_sha256: String::new(),
            provenance: Provenance {
                dataset_line: 0,
                file_sha256: String::new(),
                seed: 0,
                run: None,
            },
        }
    }

    const HEADER: &str = "system,class_name,method_name,smell,tool\n";

    #[test]
    fn table_three_pairs_enforced() {
        let lpl = format!("{HEADER}s,Foo,bar,Long Parameter List,PMD\n");
        let report = parse_report(&lpl, "r.csv", Tool::Pmd, SmellKind::LongParameterList).unwrap();
        assert_eq!(report.flagged.len(), 1);
        let err = parse_report(HEADER, "r.csv", Tool::Pmd, SmellKind::LargeClass).unwrap_err();
        assert!(matches!(err, Error::Assignment { .. }));
        let bad_row = format!("{HEADER}s,Foo,,Large Class,PMD\n");
        assert!(matches!(
            parse_report(&bad_row, "r.csv", Tool::Pmd, SmellKind::DataClass),
            Err(Error::Assignment { .. })
        ));
    }

    #[test]
    fn duplicate_rows_collapse() {
        let text = format!("{HEADER}s,Foo,,Large Class,JDeodorant\ns,Foo,,Large Class,JDeodorant\n");
        let r = parse_report(&text, "r.csv", Tool::JDeodorant, SmellKind::LargeClass).unwrap();
        assert_eq!(r.flagged.len(), 1);
    }

    #[test]
    fn malformed_row_names_line() {
        let text = format!("{HEADER}s,Foo,,Large Class,JDeodorant\ns,Foo,,Large Class\n");
        let err = parse_report(&text, "r.csv", Tool::JDeodorant, SmellKind::LargeClass).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let text = format!("{HEADER}s,Foo,,Huge Class,JDeodorant\n");
        assert!(matches!(
            parse_report(&text, "r.csv", Tool::JDeodorant, SmellKind::LargeClass),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn closed_world_alignment() {
        let lc = SmellKind::LargeClass;
        let manifest = Manifest::from_entries(vec![
            entry("a", "Foo", None, lc),
            entry("b", "Bar", None, lc),
            entry("a", "Foo", Some("m"), SmellKind::LongMethod),
        ]);
        let text = format!("{HEADER}a,Foo,,Large Class,JSpIRIT\nzzz,Gone,,Large Class,JSpIRIT\n");
        let report = parse_report(&text, "r.csv", Tool::JSpIrit, lc).unwrap();
        let aligned = align(&report, &manifest).unwrap();
        let decisions: Vec<Decision> = aligned.verdicts.iter().map(|v| v.decision).collect();
        assert_eq!(decisions, [Decision::Positive, Decision::Negative]);
        assert!(aligned.verdicts.iter().all(|v| v.detector == DetectorId::tool(Tool::JSpIrit)));
        assert_eq!(aligned.orphans.len(), 1);
        assert_eq!(aligned.orphans[0].system, "zzz");
    }

    #[test]
    fn granularity_mismatch_is_warned_not_matched() {
        let lm = SmellKind::LongMethod;
        let manifest = Manifest::from_entries(vec![entry("a", "Foo", Some("run"), lm)]);
        let text = format!("{HEADER}a,Foo,,Long Method,Organic\n");
        let report = parse_report(&text, "r.csv", Tool::Organic, lm).unwrap();
        let aligned = align(&report, &manifest).unwrap();
        assert_eq!(aligned.verdicts[0].decision, Decision::Negative);
        assert_eq!(aligned.warnings.len(), 1);
    }

    #[test]
    fn multi_tool_file_covers_assigned_smells() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("reports.csv");
        std::fs::write(&path, format!("{HEADER}a,Foo,,Data Class,PMD\na,Foo,run,Feature Envy,JDeodorant\n")).unwrap();
        let reports = load_reports(&path, None).unwrap();
        let pairs: Vec<(Tool, SmellKind)> = reports.iter().map(|r| (r.tool, r.smell)).collect();
        assert_eq!(pairs.len(), 3 + 2);
        assert!(pairs.contains(&(Tool::JDeodorant, SmellKind::LargeClass)));
        assert!(pairs.contains(&(Tool::Pmd, SmellKind::LongParameterList)));
        let only = ingest_report(&path, "PMD", SmellKind::DataClass).unwrap();
        assert_eq!(only.flagged.len(), 1);
        assert!(ingest_report(&path, "Sonar", SmellKind::DataClass).is_err());
    }
}
