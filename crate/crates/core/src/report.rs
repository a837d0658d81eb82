//! Markdown and CSV renderings of evaluation results.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use crate::config::RunStamp;
use crate::error::{Error, Result};
use crate::eval::{best_strategy, evaluate_all, format_hundredths, Band, MetricsRow};
use crate::model::{DetectorId, DetectorKind, SmellKind, Verdict};
use crate::sampler::Manifest;
use crate::truth::GroundTruth;
use crate::vote::Voter;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Usage(format!("unknown report format {other:?}; use md or csv"))),
        }
    }
}

pub const BEST_MARK: &str = "*";
pub const MISSING: &str = "-";

pub fn band_legend() -> String {
    format!(
        "Bands: high when F1 >= 0.80, moderate when 0.51 <= F1 <= 0.79, limited when F1 <= 0.50 (F1 at two decimals). {BEST_MARK} marks the best individual strategy."
    )
}

fn column_label(d: &DetectorId) -> String {
    match d.kind {
        DetectorKind::Ensemble => "Combined".to_string(),
        _ => d.name.clone(),
    }
}

struct Grid<'a> {
    smells: Vec<SmellKind>,
    detectors: Vec<&'a DetectorId>,
    cells: BTreeMap<(SmellKind, &'a DetectorId), &'a MetricsRow>,
}

impl<'a> Grid<'a> {
    fn new(rows: &'a [MetricsRow], keep: impl Fn(&DetectorId) -> bool) -> Self {
        let mut smells = BTreeSet::new();
        let mut detectors = BTreeSet::new();
        let mut cells = BTreeMap::new();
        for r in rows.iter().filter(|r| keep(&r.detector)) {
            smells.insert(r.smell);
            detectors.insert(&r.detector);
            cells.insert((r.smell, &r.detector), r);
        }
        Grid {
            smells: smells.into_iter().collect(),
            detectors: detectors.into_iter().collect(),
            cells,
        }
    }

    fn cell(&self, smell: SmellKind, d: &'a DetectorId) -> Option<&'a MetricsRow> {
        self.cells.get(&(smell, d)).copied()
    }
}

fn table_row(out: &mut String, cells: &[String]) {
    let _ = writeln!(out, "| {} |", cells.join(" | "));
}

fn header(out: &mut String, cols: &[String]) {
    table_row(out, cols);
    table_row(out, &vec!["---".to_string(); cols.len()]);
}

fn pct(row: Option<&MetricsRow>, pick: impl Fn(&MetricsRow) -> u32) -> String {
    row.map(|r| format_hundredths(pick(r))).unwrap_or_else(|| MISSING.to_string())
}

pub fn render_markdown(rows: &[MetricsRow], stamp: Option<&RunStamp>) -> String {
    let best = best_strategy(rows);
    let mut out = String::from("# Code smell detection results\n");

    let individual = Grid::new(rows, |d| d.kind != DetectorKind::Ensemble);
    if !individual.detectors.is_empty() {
        out.push_str("\n## Per-detector metrics\n\n");
        let mut cols = vec!["Code smell".to_string(), "Metric".to_string()];
        cols.extend(individual.detectors.iter().map(|d| column_label(d)));
        header(&mut out, &cols);
        for &smell in &individual.smells {
            for (i, (label, pick)) in [
                ("P", (|r: &MetricsRow| r.metrics.precision_h) as fn(&MetricsRow) -> u32),
                ("R", |r: &MetricsRow| r.metrics.recall_h),
                ("F1", |r: &MetricsRow| r.metrics.f1_h),
            ]
            .into_iter()
            .enumerate()
            {
                let mut cells = vec![
                    if i == 0 { smell.display_name().to_string() } else { String::new() },
                    label.to_string(),
                ];
                cells.extend(individual.detectors.iter().map(|d| pct(individual.cell(smell, d), pick)));
                table_row(&mut out, &cells);
            }
        }
    }

    let combined: BTreeMap<SmellKind, &MetricsRow> = rows
        .iter()
        .filter(|r| r.detector.kind == DetectorKind::Ensemble)
        .map(|r| (r.smell, r))
        .collect();
    if !combined.is_empty() {
        out.push_str("\n## Best individual strategy and combined prediction\n\n");
        let cols = ["Code smell", "Best strategy", "P", "R", "F1", "Combined P", "Combined R", "Combined F1"];
        header(&mut out, &cols.map(String::from));
        for smell in SmellKind::ALL {
            let b = best.get(&smell);
            let c = combined.get(&smell).copied();
            if b.is_none() && c.is_none() {
                continue;
            }
            let name = b
                .map(|b| b.marked().iter().map(|d| column_label(d)).collect::<Vec<_>>().join(", "))
                .unwrap_or_else(|| MISSING.to_string());
            let br = b.map(|b| &b.row);
            table_row(
                &mut out,
                &[
                    smell.display_name().to_string(),
                    name,
                    pct(br, |r| r.metrics.precision_h),
                    pct(br, |r| r.metrics.recall_h),
                    pct(br, |r| r.metrics.f1_h),
                    pct(c, |r| r.metrics.precision_h),
                    pct(c, |r| r.metrics.recall_h),
                    pct(c, |r| r.metrics.f1_h),
                ],
            );
        }
    }

    let all = Grid::new(rows, |_| true);
    if !all.detectors.is_empty() {
        out.push_str("\n## F1 bands\n\n");
        let mut cols = vec!["Code smell".to_string()];
        cols.extend(all.detectors.iter().map(|d| column_label(d)));
        header(&mut out, &cols);
        for &smell in &all.smells {
            let marked: Vec<&DetectorId> = best.get(&smell).map(|b| b.marked()).unwrap_or_default();
            let mut cells = vec![smell.display_name().to_string()];
            for d in &all.detectors {
                cells.push(match all.cell(smell, d) {
                    Some(r) if marked.contains(d) => format!("{}{BEST_MARK}", r.band()),
                    Some(r) => r.band().to_string(),
                    None => MISSING.to_string(),
                });
            }
            table_row(&mut out, &cells);
        }
        let _ = writeln!(out, "\n{}", band_legend());
    }

    if let Some(s) = stamp {
        let _ = writeln!(out, "\n<!-- {} -->", s.line());
    }
    out
}

pub fn render_csv(rows: &[MetricsRow], stamp: Option<&RunStamp>) -> String {
    let best = best_strategy(rows);
    let mut out = String::new();
    if let Some(s) = stamp {
        let _ = writeln!(out, "# {}", s.line());
    }
    out.push_str("smell,detector,precision,recall,f1,band,best\n");
    let mut sorted: Vec<&MetricsRow> = rows.iter().collect();
    sorted.sort_by(|a, b| (a.smell, &a.detector).cmp(&(b.smell, &b.detector)));
    for r in sorted {
        let is_best = best.get(&r.smell).is_some_and(|b| b.marked().contains(&&r.detector));
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.smell.code_name(),
            r.detector,
            format_hundredths(r.metrics.precision_h),
            format_hundredths(r.metrics.recall_h),
            format_hundredths(r.metrics.f1_h),
            r.band(),
            is_best
        );
    }
    out
}

pub fn render_report(rows: &[MetricsRow], format: ReportFormat, stamp: Option<&RunStamp>) -> String {
    match format {
        ReportFormat::Markdown => render_markdown(rows, stamp),
        ReportFormat::Csv => render_csv(rows, stamp),
    }
}

/// Reads the band cells back out of a rendered markdown report, keyed by
/// smell display name and column label. Best markers are stripped.
pub fn parse_band_table(markdown: &str) -> BTreeMap<(String, String), Band> {
    let mut out = BTreeMap::new();
    let Some(start) = markdown.find("## F1 bands") else {
        return out;
    };
    let mut lines = markdown[start..].lines().filter(|l| l.starts_with('|'));
    let Some(head) = lines.next() else {
        return out;
    };
    let cols: Vec<&str> = head.trim_matches('|').split('|').map(str::trim).collect();
    for line in lines.skip(1) {
        let cells: Vec<&str> = line.trim_matches('|').split('|').map(str::trim).collect();
        for (col, cell) in cols.iter().zip(&cells).skip(1) {
            if let Ok(b) = cell.trim_end_matches(BEST_MARK).parse::<Band>() {
                out.insert((cells[0].to_string(), col.to_string()), b);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub threshold: usize,
    pub row: MetricsRow,
}

/// Re-votes at every threshold in `from..=to` and scores the result.
pub fn sweep(
    manifest: &Manifest,
    verdicts: &[Verdict],
    truth: &GroundTruth,
    llm_names: &[String],
    from: usize,
    to: usize,
) -> Result<Vec<SweepRow>> {
    if from > to {
        return Err(Error::Usage(format!("empty threshold range {from}..={to}")));
    }
    let mut out = Vec::new();
    for t in from..=to {
        let voter = Voter::new(llm_names.to_vec(), t)?;
        let ensemble = voter.vote_all(manifest, verdicts)?;
        for row in evaluate_all(&ensemble, truth)? {
            out.push(SweepRow { threshold: t, row });
        }
    }
    Ok(out)
}

pub fn render_sweep(rows: &[SweepRow], format: ReportFormat, stamp: Option<&RunStamp>) -> String {
    let mut out = String::new();
    let fields = |r: &SweepRow| {
        let m = &r.row.metrics;
        [
            r.threshold.to_string(),
            r.row.smell.code_name().to_string(),
            r.row.counts.tp.to_string(),
            r.row.counts.fp.to_string(),
            r.row.counts.fn_.to_string(),
            format_hundredths(m.precision_h),
            format_hundredths(m.recall_h),
            format_hundredths(m.f1_h),
            r.row.band().to_string(),
        ]
    };
    let cols = ["threshold", "smell", "tp", "fp", "fn", "precision", "recall", "f1", "band"].map(String::from);
    match format {
        ReportFormat::Csv => {
            if let Some(s) = stamp {
                let _ = writeln!(out, "# {}", s.line());
            }
            let _ = writeln!(out, "{}", cols.join(","));
            for r in rows {
                let _ = writeln!(out, "{}", fields(r).join(","));
            }
        }
        ReportFormat::Markdown => {
            out.push_str("# Voting threshold sweep\n\n");
            header(&mut out, &cols);
            for r in rows {
                table_row(&mut out, &fields(r));
            }
            if let Some(s) = stamp {
                let _ = writeln!(out, "\n<!-- {} -->", s.line());
            }
        }
    }
    out
}
