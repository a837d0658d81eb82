//! Candidate sampling: one instance per (system, smell), whole-class context,
//! duplicates removed.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{csv_error, normalize_source, sha256_hex, simple_name, Candidate, SmellKind};
use crate::segment::{segment_file, ClassSpan};
use crate::config::RunStamp;

pub const DATASET_HEADER: [&str; 6] = ["system", "version", "file_path", "class_name", "method_name", "smell"];

/// One row of the smell dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetRow {
    /// 1-based line in the source CSV (header is line 1).
    pub line: usize,
    pub system: String,
    pub version: String,
    pub file_path: String,
    pub class_name: String,
    pub method_name: Option<String>,
    pub smell: SmellKind,
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetRow>> {
    let text = crate::io::read_text(path)?;
    parse_dataset(&text, &path.display().to_string())
}

pub fn parse_dataset(text: &str, source_name: &str) -> Result<Vec<DatasetRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| csv_error(Path::new(source_name), e))?
        .clone();
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != DATASET_HEADER {
        return Err(Error::Parse {
            source_name: source_name.to_string(),
            line: 1,
            message: format!("expected header {}, found {}", DATASET_HEADER.join(","), got.join(",")),
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
        if rec.len() != DATASET_HEADER.len() {
            return Err(fail(format!("expected 6 fields, found {}", rec.len())));
        }
        let field = |i: usize| rec[i].trim().to_string();
        let smell: SmellKind = field(5).parse().map_err(|e: Error| fail(e.to_string()))?;
        let method = field(4);
        let method_name = (!method.is_empty()).then_some(method);
        if smell.is_method_level() != method_name.is_some() {
            return Err(fail(format!(
                "{smell} is {} but method_name is {}",
                if smell.is_method_level() { "method-level" } else { "class-level" },
                if method_name.is_some() { "set" } else { "empty" }
            )));
        }
        for (i, name) in [(0, "system"), (2, "file_path"), (3, "class_name")] {
            if field(i).is_empty() {
                return Err(fail(format!("{name} is empty")));
            }
        }
        rows.push(DatasetRow {
            line,
            system: field(0),
            version: field(1),
            file_path: field(2),
            class_name: field(3),
            method_name,
            smell,
        });
    }
    Ok(rows)
}

/// Where candidate source files come from.
pub trait SourceProvider {
    fn read(&self, path: &str) -> Result<String>;
}

/// Files resolved relative to a project root directory.
pub struct FsSources {
    pub root: PathBuf,
}

impl SourceProvider for FsSources {
    fn read(&self, path: &str) -> Result<String> {
        crate::io::read_text(&self.root.join(path))
    }
}

impl SourceProvider for HashMap<String, String> {
    fn read(&self, path: &str) -> Result<String> {
        self.get(path).cloned().ok_or_else(|| {
            Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such source file"))
        })
    }
}

/// A resolved candidate plus the text of its smelly unit (the method's
/// overloads for method-level smells, the class otherwise).
#[derive(Debug, Clone)]
pub struct Extracted {
    pub candidate: Candidate,
    pub unit_source: String,
    pub file_sha256: String,
}

fn find_class<'a>(spans: &'a [ClassSpan], class_name: &str) -> Option<&'a ClassSpan> {
    let dotted = class_name.replace('$', ".");
    let simple = simple_name(class_name);
    spans
        .iter()
        .find(|s| dotted.ends_with(&s.qualified_name) && s.class_name == simple)
        .or_else(|| spans.iter().find(|s| s.class_name == simple))
}

pub fn extract_candidate(row: &DatasetRow, sources: &dyn SourceProvider) -> Result<Extracted> {
    let text = sources.read(&row.file_path)?;
    let spans = segment_file(&text).map_err(|e| match e {
        Error::Segmentation { line, message } => Error::Segmentation {
            line,
            message: format!("{} ({})", message, row.file_path),
        },
        other => other,
    })?;
    let class = find_class(&spans, &row.class_name).ok_or_else(|| {
        Error::Resolution(format!("class {} not found in {}", row.class_name, row.file_path))
    })?;
    let unit_source = match &row.method_name {
        Some(method) => class.method_source(&text, method).ok_or_else(|| {
            Error::Resolution(format!(
                "method {method} not found in class {} of {}",
                row.class_name, row.file_path
            ))
        })?,
        None => class.source.clone(),
    };
    let candidate = Candidate::new(
        &row.system,
        &row.file_path,
        &row.class_name,
        row.method_name.as_deref(),
        row.smell,
        class.source.clone(),
    )?;
    Ok(Extracted {
        candidate,
        unit_source,
        file_sha256: sha256_hex(text.as_bytes()),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset_line: usize,
    pub file_sha256: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunStamp>,
}

/// One manifest line. The class source itself is not stored; its hash is,
/// so later stages can re-extract and detect drift.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub system: String,
    pub version: String,
    pub class_path: String,
    pub class_name: String,
    pub method_name: Option<String>,
    pub smell: SmellKind,
    pub source_sha256: String,
    pub unit_sha256: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gap {
    pub system: String,
    pub smell: SmellKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedDuplicate {
    pub dropped_id: String,
    pub kept_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    pub sampling_seed: u64,
    pub gaps: Vec<Gap>,
    pub duplicates: Vec<DroppedDuplicate>,
}

impl Manifest {
    pub fn from_entries(entries: Vec<ManifestEntry>) -> Self {
        let sampling_seed = entries.first().map(|e| e.provenance.seed).unwrap_or_default();
        Manifest {
            entries,
            sampling_seed,
            gaps: Vec::new(),
            duplicates: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let entries: Vec<ManifestEntry> = crate::io::read_jsonl(path)?;
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Validation(format!("manifest repeats candidate {}", e.id)));
            }
        }
        Ok(Self::from_entries(entries))
    }

    pub fn to_jsonl(&self) -> String {
        crate::io::to_jsonl(&self.entries)
    }

    pub fn per_smell_counts(&self) -> BTreeMap<SmellKind, usize> {
        let mut counts: BTreeMap<SmellKind, usize> = SmellKind::ALL.iter().map(|s| (*s, 0)).collect();
        for e in &self.entries {
            *counts.entry(e.smell).or_default() += 1;
        }
        counts
    }

    pub fn entries_for(&self, smell: SmellKind) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.smell == smell)
    }

    pub fn get(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn stamp(&mut self, run: &RunStamp) {
        for e in &mut self.entries {
            e.provenance.run = Some(run.clone());
        }
    }
}

/// Picks one row per (system, smell) with a seeded uniform draw.
///
/// Draw order is smell-major over the catalog, then systems in alphabetical
/// (case-insensitive) order; the returned rows follow the same order.
pub fn sample_rows(rows: &[DatasetRow], seed: u64) -> (Vec<&DatasetRow>, Vec<Gap>) {
    let mut systems: Vec<&str> = rows.iter().map(|r| r.system.as_str()).collect();
    systems.sort_by(|a, b| a.to_lowercase().cmp(&b.to_lowercase()).then(a.cmp(b)));
    systems.dedup();
    let mut groups: HashMap<(&str, SmellKind), Vec<&DatasetRow>> = HashMap::new();
    for row in rows {
        groups.entry((row.system.as_str(), row.smell)).or_default().push(row);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::new();
    let mut gaps = Vec::new();
    for smell in SmellKind::ALL {
        for system in &systems {
            match groups.get(&(*system, smell)) {
                Some(group) => chosen.push(group[rng.gen_range(0..group.len())]),
                None => gaps.push(Gap {
                    system: system.to_string(),
                    smell,
                }),
            }
        }
    }
    (chosen, gaps)
}

/// Samples, extracts and deduplicates. Returns the manifest together with the
/// resolved candidates, index-aligned with `manifest.entries`.
pub fn build_manifest(
    rows: &[DatasetRow],
    sources: &dyn SourceProvider,
    seed: u64,
) -> Result<(Manifest, Vec<Candidate>)> {
    let (chosen, gaps) = sample_rows(rows, seed);
    let mut entries = Vec::new();
    let mut candidates = Vec::new();
    let mut duplicates = Vec::new();
    let mut seen: HashMap<(SmellKind, String), String> = HashMap::new();
    for row in chosen {
        let extracted = extract_candidate(row, sources)?;
        let unit_sha256 = sha256_hex(normalize_source(&extracted.unit_source));
        let candidate = extracted.candidate;
        if let Some(kept) = seen.get(&(row.smell, unit_sha256.clone())) {
            duplicates.push(DroppedDuplicate {
                dropped_id: candidate.id.clone(),
                kept_id: kept.clone(),
            });
            continue;
        }
        seen.insert((row.smell, unit_sha256.clone()), candidate.id.clone());
        entries.push(ManifestEntry {
            id: candidate.id.clone(),
            system: row.system.clone(),
            version: row.version.clone(),
            class_path: row.file_path.clone(),
            class_name: row.class_name.clone(),
            method_name: row.method_name.clone(),
            smell: row.smell,
            source_sha256: sha256_hex(candidate.class_source.as_bytes()),
            unit_sha256,
            provenance: Provenance {
                dataset_line: row.line,
                file_sha256: extracted.file_sha256,
                seed,
                run: None,
            },
        });
        candidates.push(candidate);
    }
    Ok((
        Manifest {
            entries,
            sampling_seed: seed,
            gaps,
            duplicates,
        },
        candidates,
    ))
}

/// Re-extracts the candidates of a stored manifest, failing if a class's
/// source no longer hashes to the recorded value.
pub fn resolve_candidates(manifest: &Manifest, sources: &dyn SourceProvider) -> Result<Vec<Candidate>> {
    manifest
        .entries
        .iter()
        .map(|e| {
            let row = DatasetRow {
                line: e.provenance.dataset_line,
                system: e.system.clone(),
                version: e.version.clone(),
                file_path: e.class_path.clone(),
                class_name: e.class_name.clone(),
                method_name: e.method_name.clone(),
                smell: e.smell,
            };
            let extracted = extract_candidate(&row, sources)?;
            if sha256_hex(extracted.candidate.class_source.as_bytes()) != e.source_sha256 {
                return Err(Error::Resolution(format!(
                    "source of {} in {} changed since sampling",
                    e.class_name, e.class_path
                )));
            }
            Ok(extracted.candidate)
        })
        .collect()
}
