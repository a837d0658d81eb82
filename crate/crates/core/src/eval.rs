//! Confusion counts, precision/recall/F1, bands and best-strategy picks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::RunStamp;
use crate::error::{Error, Result};
use crate::model::{csv_error, DetectorId, DetectorKind, SmellKind, Verdict};
use crate::truth::GroundTruth;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionCounts { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn actual_positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn predicted_positives(&self) -> u64 {
        self.tp + self.fp
    }
}

/// Compares predictions against labels over the same candidate set.
/// Abstentions must already be mapped to `false`.
pub fn confusion(predictions: &BTreeMap<String, bool>, labels: &BTreeMap<String, bool>) -> Result<ConfusionCounts> {
    let p: BTreeSet<&String> = predictions.keys().collect();
    let l: BTreeSet<&String> = labels.keys().collect();
    if p != l {
        let diff: Vec<&str> = p.symmetric_difference(&l).map(|s| s.as_str()).collect();
        return Err(Error::Alignment(format!(
            "prediction and label sets differ on {} candidate(s): {}",
            diff.len(),
            diff.join(", ")
        )));
    }
    let mut c = ConfusionCounts::default();
    for (id, &pred) in predictions {
        match (pred, labels[id]) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// `num/den` in hundredths, rounded half up, exactly. Zero when `den` is.
pub fn hundredths(num: u64, den: u64) -> u32 {
    if den == 0 {
        0
    } else {
        ((200 * num + den) / (2 * den)) as u32
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// The same three values at two decimals, as integers.
    pub precision_h: u32,
    pub recall_h: u32,
    pub f1_h: u32,
}

impl Metrics {
    pub fn band(&self) -> Band {
        Band::from_hundredths(self.f1_h)
    }
}

/// F1 is computed as 2tp / (2tp + fp + fn), which equals the harmonic mean
/// whenever both P and R are defined and is 0 otherwise.
pub fn metrics(c: &ConfusionCounts) -> Metrics {
    let (f1_num, f1_den) = (2 * c.tp, 2 * c.tp + c.fp + c.fn_);
    Metrics {
        precision: ratio(c.tp, c.predicted_positives()),
        recall: ratio(c.tp, c.actual_positives()),
        f1: ratio(f1_num, f1_den),
        precision_h: hundredths(c.tp, c.predicted_positives()),
        recall_h: hundredths(c.tp, c.actual_positives()),
        f1_h: hundredths(f1_num, f1_den),
    }
}

pub fn format_hundredths(h: u32) -> String {
    format!("{}.{:02}", h / 100, h % 100)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Limited,
    Moderate,
    High,
}

impl Band {
    /// high ≥ 0.80, moderate 0.51 to 0.79, limited ≤ 0.50, all on the
    /// two-decimal value.
    pub fn from_hundredths(h: u32) -> Band {
        match h {
            80.. => Band::High,
            51..=79 => Band::Moderate,
            _ => Band::Limited,
        }
    }

    pub fn from_f1(f1: f64) -> Band {
        Band::from_hundredths((f1 * 100.0).round().max(0.0) as u32)
    }

    pub fn label(self) -> &'static str {
        match self {
            Band::High => "high",
            Band::Moderate => "moderate",
            Band::Limited => "limited",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "high" => Ok(Band::High),
            "moderate" => Ok(Band::Moderate),
            "limited" => Ok(Band::Limited),
            other => Err(Error::Validation(format!("unknown band {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub detector: DetectorId,
    pub smell: SmellKind,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

impl MetricsRow {
    pub fn new(detector: DetectorId, smell: SmellKind, counts: ConfusionCounts) -> Self {
        MetricsRow {
            detector,
            smell,
            counts,
            metrics: metrics(&counts),
        }
    }

    pub fn band(&self) -> Band {
        self.metrics.band()
    }
}

/// Builds one row per (detector, smell) cell that has verdicts. Every cell
/// present must cover all ground-truth candidates of its smell.
pub fn evaluate_all(verdicts: &[Verdict], truth: &GroundTruth) -> Result<Vec<MetricsRow>> {
    let unknown: BTreeSet<&str> = verdicts
        .iter()
        .filter(|v| truth.get(&v.candidate_id).is_none())
        .map(|v| v.candidate_id.as_str())
        .collect();
    if !unknown.is_empty() {
        return Err(Error::Alignment(format!(
            "verdicts for {} candidate(s) without ground truth: {}",
            unknown.len(),
            unknown.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }
    let mut cells: BTreeMap<(SmellKind, &DetectorId), BTreeMap<String, bool>> = BTreeMap::new();
    for v in verdicts {
        let smell = truth.labels[&v.candidate_id].smell;
        if let Some(tool) = v.detector.as_tool() {
            if !smell.is_assigned(tool) {
                return Err(Error::Assignment {
                    tool: tool.name().to_string(),
                    smell: smell.display_name().to_string(),
                });
            }
        }
        let cell = cells.entry((smell, &v.detector)).or_default();
        if cell.insert(v.candidate_id.clone(), v.decision.is_positive()).is_some() {
            return Err(Error::Alignment(format!("{} has two verdicts on {}", v.detector, v.candidate_id)));
        }
    }
    let mut labels_by_smell: BTreeMap<SmellKind, BTreeMap<String, bool>> = BTreeMap::new();
    for l in truth.labels.values() {
        labels_by_smell.entry(l.smell).or_default().insert(l.candidate_id.clone(), l.smelly);
    }
    let mut rows = Vec::with_capacity(cells.len());
    for ((smell, detector), predictions) in cells {
        let counts = confusion(&predictions, &labels_by_smell[&smell]).map_err(|e| match e {
            Error::Alignment(m) => Error::Alignment(format!("{detector} on {smell}: {m}")),
            other => other,
        })?;
        rows.push(MetricsRow::new(detector.clone(), smell, counts));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestPick {
    pub row: MetricsRow,
    /// Other detectors with the same two-decimal F1.
    pub f1_ties: Vec<DetectorId>,
}

impl BestPick {
    /// The winner and every detector tied with it on F1.
    pub fn marked(&self) -> Vec<&DetectorId> {
        std::iter::once(&self.row.detector).chain(&self.f1_ties).collect()
    }
}

/// Highest two-decimal F1 among individual detectors per smell; ties go to
/// the higher precision, then to the detector that sorts first.
pub fn best_strategy(rows: &[MetricsRow]) -> BTreeMap<SmellKind, BestPick> {
    let mut out: BTreeMap<SmellKind, BestPick> = BTreeMap::new();
    for smell in SmellKind::ALL {
        let cands: Vec<&MetricsRow> = rows
            .iter()
            .filter(|r| r.smell == smell && r.detector.kind != DetectorKind::Ensemble)
            .collect();
        let Some(best) = cands.iter().copied().min_by(|a, b| {
            (b.metrics.f1_h, b.metrics.precision_h)
                .cmp(&(a.metrics.f1_h, a.metrics.precision_h))
                .then_with(|| a.detector.cmp(&b.detector))
        }) else {
            continue;
        };
        let f1_ties = cands
            .iter()
            .filter(|r| r.detector != best.detector && r.metrics.f1_h == best.metrics.f1_h)
            .map(|r| r.detector.clone())
            .collect();
        out.insert(
            smell,
            BestPick {
                row: best.clone(),
                f1_ties,
            },
        );
    }
    out
}

pub const METRICS_HEADER: [&str; 10] = [
    "detector", "smell", "tp", "fp", "fn", "tn", "precision", "recall", "f1", "band",
];

pub fn metrics_csv(rows: &[MetricsRow], stamp: Option<&RunStamp>) -> String {
    let mut out = String::new();
    if let Some(s) = stamp {
        let _ = writeln!(out, "# {}", s.line());
    }
    out.push_str(&METRICS_HEADER.join(","));
    out.push('\n');
    for r in rows {
        let c = r.counts;
        let m = r.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.detector,
            r.smell.code_name(),
            c.tp,
            c.fp,
            c.fn_,
            c.tn,
            format_hundredths(m.precision_h),
            format_hundredths(m.recall_h),
            format_hundredths(m.f1_h),
            r.band()
        );
    }
    out
}

/// Reads rows back; the printed values must match those recomputed from the
/// counts. Returns the run stamp when the file carries one.
pub fn parse_metrics_csv(text: &str, source_name: &str) -> Result<(Vec<MetricsRow>, Option<RunStamp>)> {
    let stamp = text.lines().next().and_then(|l| l.strip_prefix("# ")).and_then(parse_stamp);
    let path = Path::new(source_name);
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers().map_err(|e| csv_error(path, e))?.iter().map(str::to_string).collect();
    if headers != METRICS_HEADER {
        return Err(Error::Parse {
            source_name: source_name.to_string(),
            line: 1,
            message: format!("expected header {}", METRICS_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let fail = |message: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            message,
        };
        let detector: DetectorId = rec[0].parse().map_err(|e: Error| fail(e.to_string()))?;
        let smell: SmellKind = rec[1].parse().map_err(|e: Error| fail(e.to_string()))?;
        let mut n = [0u64; 4];
        for (i, slot) in n.iter_mut().enumerate() {
            *slot = rec[2 + i].parse().map_err(|_| fail(format!("bad count {:?}", &rec[2 + i])))?;
        }
        let row = MetricsRow::new(detector, smell, ConfusionCounts::new(n[0], n[1], n[2], n[3]));
        let m = row.metrics;
        let expect = [
            format_hundredths(m.precision_h),
            format_hundredths(m.recall_h),
            format_hundredths(m.f1_h),
            row.band().to_string(),
        ];
        if (6..10).any(|i| rec[i] != expect[i - 6]) {
            return Err(fail("printed metrics disagree with the counts".into()));
        }
        rows.push(row);
    }
    Ok((rows, stamp))
}

pub(crate) fn parse_stamp(line: &str) -> Option<RunStamp> {
    let mut digest = None;
    let mut seed = None;
    let mut threshold = None;
    for part in line.split_whitespace() {
        match part.split_once('=')? {
            ("config_digest", v) => digest = Some(v.to_string()),
            ("seed", v) => seed = v.parse().ok(),
            ("threshold", v) => threshold = v.parse().ok(),
            _ => {}
        }
    }
    Some(RunStamp {
        config_digest: digest?,
        seed: seed?,
        threshold: threshold?,
    })
}
