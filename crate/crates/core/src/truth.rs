//! Aggregation of human severity ratings into per-candidate labels.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use num_rational::Ratio;
use serde::Deserialize;

use crate::config::RunStamp;
use crate::error::{Error, Result};
use crate::model::{csv_error, SmellKind};
use crate::sampler::Manifest;

pub const MIN_RATINGS: usize = 2;
pub const RATINGS_HEADER: [&str; 3] = ["rater_id", "candidate_id", "score"];
pub const TRUTH_HEADER: [&str; 6] = ["candidate_id", "smell", "n_ratings", "score_sum", "mean", "smelly"];

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct RatingRecord {
    pub rater_id: String,
    pub candidate_id: String,
    pub score: u8,
}

impl RatingRecord {
    pub fn new(rater_id: &str, candidate_id: &str, score: u8) -> Result<Self> {
        if !(1..=5).contains(&score) {
            return Err(Error::Validation(format!(
                "score {score} from {rater_id} on {candidate_id} is outside 1..=5"
            )));
        }
        if rater_id.trim().is_empty() || candidate_id.trim().is_empty() {
            return Err(Error::Validation("rating needs rater_id and candidate_id".into()));
        }
        Ok(RatingRecord {
            rater_id: rater_id.to_string(),
            candidate_id: candidate_id.to_string(),
            score,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthLabel {
    pub candidate_id: String,
    pub smell: SmellKind,
    pub n_ratings: usize,
    pub score_sum: u64,
    pub smelly: bool,
}

impl GroundTruthLabel {
    pub fn mean(&self) -> Ratio<u64> {
        Ratio::new(self.score_sum, self.n_ratings as u64)
    }
}

/// Smelly iff the mean score is strictly above 3.
pub fn aggregate(candidate_id: &str, smell: SmellKind, scores: &[u8]) -> Result<GroundTruthLabel> {
    if scores.len() < MIN_RATINGS {
        return Err(Error::Coverage(format!(
            "{candidate_id} has {} rating(s), needs at least {MIN_RATINGS}",
            scores.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !(1..=5).contains(*s)) {
        return Err(Error::Validation(format!("score {bad} on {candidate_id} is outside 1..=5")));
    }
    let n = scores.len() as u64;
    let sum: u64 = scores.iter().map(|&s| u64::from(s)).sum();
    Ok(GroundTruthLabel {
        candidate_id: candidate_id.to_string(),
        smell,
        n_ratings: scores.len(),
        score_sum: sum,
        smelly: sum > 3 * n,
    })
}

pub fn parse_ratings(text: &str, source_name: &str) -> Result<Vec<RatingRecord>> {
    let path = Path::new(source_name);
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers().map_err(|e| csv_error(path, e))?.iter().map(str::to_string).collect();
    if headers != RATINGS_HEADER {
        return Err(Error::Parse {
            source_name: source_name.to_string(),
            line: 1,
            message: format!("expected header {}", RATINGS_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let fail = |message: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            message,
        };
        let score: u8 = rec[2].parse().map_err(|_| fail(format!("score {:?} is not an integer", &rec[2])))?;
        out.push(RatingRecord::new(&rec[0], &rec[1], score).map_err(|e| fail(e.to_string()))?);
    }
    Ok(out)
}

pub fn load_ratings(path: &Path) -> Result<Vec<RatingRecord>> {
    parse_ratings(&crate::io::read_text(path)?, &path.display().to_string())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub labels: BTreeMap<String, GroundTruthLabel>,
    /// Ratings naming ids absent from the manifest; they are skipped.
    pub unknown_candidates: Vec<String>,
}

impl GroundTruth {
    pub fn get(&self, candidate_id: &str) -> Option<&GroundTruthLabel> {
        self.labels.get(candidate_id)
    }

    pub fn for_smell(&self, smell: SmellKind) -> impl Iterator<Item = &GroundTruthLabel> {
        self.labels.values().filter(move |l| l.smell == smell)
    }

    pub fn positives(&self) -> BTreeMap<SmellKind, usize> {
        let mut out: BTreeMap<SmellKind, usize> = SmellKind::ALL.iter().map(|&s| (s, 0)).collect();
        for l in self.labels.values().filter(|l| l.smelly) {
            *out.entry(l.smell).or_default() += 1;
        }
        out
    }

    pub fn to_csv(&self, stamp: Option<&RunStamp>) -> String {
        let mut out = String::new();
        if let Some(s) = stamp {
            let _ = writeln!(out, "# {}", s.line());
        }
        out.push_str(&TRUTH_HEADER.join(","));
        out.push('\n');
        for l in self.labels.values() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                l.candidate_id,
                l.smell.code_name(),
                l.n_ratings,
                l.score_sum,
                l.mean(),
                l.smelly
            );
        }
        out
    }

    /// Reads a truth file written by [`GroundTruth::to_csv`]. The label is
    /// recomputed from the sums and must agree with the stored flag.
    pub fn parse_csv(text: &str, source_name: &str) -> Result<Self> {
        let path = Path::new(source_name);
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let headers: Vec<String> = reader.headers().map_err(|e| csv_error(path, e))?.iter().map(str::to_string).collect();
        if headers != TRUTH_HEADER {
            return Err(Error::Parse {
                source_name: source_name.to_string(),
                line: 1,
                message: format!("expected header {}", TRUTH_HEADER.join(",")),
            });
        }
        let mut labels = BTreeMap::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            let fail = |message: String| Error::Parse {
                source_name: source_name.to_string(),
                line,
                message,
            };
            let smell: SmellKind = rec[1].parse().map_err(|e: Error| fail(e.to_string()))?;
            let n: usize = rec[2].parse().map_err(|_| fail("bad n_ratings".into()))?;
            let sum: u64 = rec[3].parse().map_err(|_| fail("bad score_sum".into()))?;
            let smelly: bool = rec[5].parse().map_err(|_| fail("bad smelly flag".into()))?;
            if n < MIN_RATINGS || sum < n as u64 || sum > 5 * n as u64 {
                return Err(fail(format!("{n} ratings summing to {sum} is impossible")));
            }
            if smelly != (sum > 3 * n as u64) {
                return Err(fail("smelly flag disagrees with the score sum".into()));
            }
            let id = rec[0].to_string();
            let label = GroundTruthLabel {
                candidate_id: id.clone(),
                smell,
                n_ratings: n,
                score_sum: sum,
                smelly,
            };
            if labels.insert(id.clone(), label).is_some() {
                return Err(fail(format!("{id} listed twice")));
            }
        }
        Ok(GroundTruth {
            labels,
            unknown_candidates: Vec::new(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_csv(&crate::io::read_text(path)?, &path.display().to_string())
    }
}

/// Labels every manifest candidate. Any candidate with fewer than two
/// ratings makes the whole call fail, listing all such ids.
pub fn build_ground_truth(ratings: &[RatingRecord], manifest: &Manifest) -> Result<GroundTruth> {
    let mut scores: BTreeMap<&str, Vec<u8>> = manifest.entries.iter().map(|e| (e.id.as_str(), Vec::new())).collect();
    let mut seen: BTreeSet<(&str, &str)> = BTreeSet::new();
    let mut unknown = BTreeSet::new();
    for r in ratings {
        if !seen.insert((r.rater_id.as_str(), r.candidate_id.as_str())) {
            return Err(Error::Validation(format!(
                "{} rated {} more than once",
                r.rater_id, r.candidate_id
            )));
        }
        match scores.get_mut(r.candidate_id.as_str()) {
            Some(v) => v.push(r.score),
            None => {
                unknown.insert(r.candidate_id.clone());
            }
        }
    }
    let thin: Vec<&str> = scores.iter().filter(|(_, v)| v.len() < MIN_RATINGS).map(|(id, _)| *id).collect();
    if !thin.is_empty() {
        return Err(Error::Coverage(format!(
            "{} candidate(s) have fewer than {MIN_RATINGS} ratings: {}",
            thin.len(),
            thin.join(", ")
        )));
    }
    let mut labels = BTreeMap::new();
    for e in &manifest.entries {
        labels.insert(e.id.clone(), aggregate(&e.id, e.smell, &scores[e.id.as_str()])?);
    }
    Ok(GroundTruth {
        labels,
        unknown_candidates: unknown.into_iter().collect(),
    })
}
