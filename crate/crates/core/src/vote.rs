//! Majority voting over the six detectors assigned to each smell.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::{Decision, DetectorId, DetectorKind, SmellKind, Verdict};
use crate::sampler::{Manifest, ManifestEntry};

pub const DEFAULT_THRESHOLD: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteSlate {
    pub candidate_id: String,
    pub smell: SmellKind,
    /// Configured LLMs first, then the smell's two tools.
    pub votes: Vec<(DetectorId, Decision)>,
}

impl VoteSlate {
    pub fn positives(&self) -> usize {
        self.votes.iter().filter(|(_, d)| d.is_positive()).count()
    }
}

/// Which detectors vote, and how many positive votes carry a candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Voter {
    llm_names: Vec<String>,
    threshold: usize,
}

impl Voter {
    pub fn new(llm_names: Vec<String>, threshold: usize) -> Result<Self> {
        let voters = llm_names.len() + 2;
        if threshold == 0 || threshold > voters {
            return Err(Error::Validation(format!(
                "threshold {threshold} is outside 1..={voters} for {voters} voters"
            )));
        }
        let unique: BTreeSet<&String> = llm_names.iter().collect();
        if unique.len() != llm_names.len() {
            return Err(Error::Validation("duplicate LLM name in voter list".into()));
        }
        Ok(Voter { llm_names, threshold })
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn expected(&self, smell: SmellKind) -> Vec<DetectorId> {
        let mut ids: Vec<DetectorId> = self.llm_names.iter().map(DetectorId::llm).collect();
        ids.extend(smell.assigned_tools().into_iter().map(DetectorId::tool));
        ids
    }

    /// Gathers exactly one verdict per expected detector. Verdicts from
    /// unexpected detectors are contract errors and are checked first.
    pub fn collect_slate(&self, entry: &ManifestEntry, verdicts: &[&Verdict]) -> Result<VoteSlate> {
        let expected = self.expected(entry.smell);
        let mut by_detector: BTreeMap<&DetectorId, Decision> = BTreeMap::new();
        for v in verdicts {
            if v.candidate_id != entry.id {
                return Err(Error::Contract(format!(
                    "verdict for {} offered to the slate of {}",
                    v.candidate_id, entry.id
                )));
            }
            if !expected.contains(&v.detector) {
                return Err(Error::Contract(format!(
                    "{} does not vote on {} ({})",
                    v.detector, entry.smell, entry.id
                )));
            }
            if by_detector.insert(&v.detector, v.decision).is_some() {
                return Err(Error::Contract(format!("{} voted twice on {}", v.detector, entry.id)));
            }
        }
        let mut votes = Vec::with_capacity(expected.len());
        for id in &expected {
            match by_detector.get(id) {
                Some(&d) => votes.push((id.clone(), d)),
                None => return Err(Error::Completeness(format!("{id} on {}", entry.id))),
            }
        }
        Ok(VoteSlate {
            candidate_id: entry.id.clone(),
            smell: entry.smell,
            votes,
        })
    }

    /// Abstentions count as non-positive.
    pub fn decide(&self, slate: &VoteSlate) -> Verdict {
        let k = slate.positives();
        Verdict {
            detector: DetectorId::ensemble(),
            candidate_id: slate.candidate_id.clone(),
            decision: if k >= self.threshold { Decision::Positive } else { Decision::Negative },
            rationale: Some(format!("{k}/{} positive, threshold {}", slate.votes.len(), self.threshold)),
            raw_response_digest: None,
        }
    }

    /// Votes every manifest candidate. Ensemble verdicts in the input are
    /// ignored so a previous vote log can sit alongside the inputs.
    pub fn vote_all(&self, manifest: &Manifest, verdicts: &[Verdict]) -> Result<Vec<Verdict>> {
        let mut grouped: BTreeMap<&str, Vec<&Verdict>> = BTreeMap::new();
        for v in verdicts.iter().filter(|v| v.detector.kind != DetectorKind::Ensemble) {
            grouped.entry(v.candidate_id.as_str()).or_default().push(v);
        }
        let known: BTreeSet<&str> = manifest.entries.iter().map(|e| e.id.as_str()).collect();
        if let Some(stray) = grouped.keys().find(|id| !known.contains(*id)) {
            return Err(Error::Contract(format!("verdict for {stray}, which is not in the manifest")));
        }
        manifest
            .entries
            .iter()
            .map(|e| {
                let vs = grouped.get(e.id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
                Ok(self.decide(&self.collect_slate(e, vs)?))
            })
            .collect()
    }
}

/// Positive ensemble verdicts per smell, every smell listed.
pub fn combined_counts(manifest: &Manifest, ensemble: &[Verdict]) -> Result<BTreeMap<SmellKind, usize>> {
    let mut out: BTreeMap<SmellKind, usize> = SmellKind::ALL.iter().map(|&s| (s, 0)).collect();
    for v in ensemble.iter().filter(|v| v.decision.is_positive()) {
        let entry = manifest
            .get(&v.candidate_id)
            .ok_or_else(|| Error::Contract(format!("verdict for {}, which is not in the manifest", v.candidate_id)))?;
        *out.entry(entry.smell).or_default() += 1;
    }
    Ok(out)
}
