//! On-disk records passed between stages: rendered prompts and verdict logs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunStamp;
use crate::error::Result;
use crate::io::{read_jsonl, write_jsonl};
use crate::model::{sha256_hex, Verdict};
use crate::prompt::RenderedPrompt;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    #[serde(flatten)]
    pub prompt: RenderedPrompt,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunStamp>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictRecord {
    #[serde(flatten)]
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunStamp>,
}

impl VerdictRecord {
    pub fn new(verdict: Verdict, run: Option<&RunStamp>) -> Self {
        VerdictRecord {
            rationale_sha256: verdict.rationale.as_deref().map(sha256_hex),
            verdict,
            run: run.cloned(),
        }
    }
}

pub fn write_prompts(path: &Path, prompts: &[RenderedPrompt], run: Option<&RunStamp>) -> Result<()> {
    let records: Vec<PromptRecord> = prompts
        .iter()
        .map(|p| PromptRecord {
            prompt: p.clone(),
            run: run.cloned(),
        })
        .collect();
    write_jsonl(path, &records)
}

pub fn read_prompts(path: &Path) -> Result<Vec<RenderedPrompt>> {
    Ok(read_jsonl::<PromptRecord>(path)?.into_iter().map(|r| r.prompt).collect())
}

pub fn write_verdicts(path: &Path, verdicts: &[Verdict], run: Option<&RunStamp>) -> Result<()> {
    let records: Vec<VerdictRecord> = verdicts.iter().map(|v| VerdictRecord::new(v.clone(), run)).collect();
    write_jsonl(path, &records)
}

/// Reads a verdict log, checking each verdict's invariants.
pub fn read_verdicts(path: &Path) -> Result<Vec<Verdict>> {
    let mut out = Vec::new();
    for r in read_jsonl::<VerdictRecord>(path)? {
        r.verdict.validate()?;
        out.push(r.verdict);
    }
    Ok(out)
}
