mod common;

use std::path::Path;

use common::*;
use smellvote::model::{DetectorKind, SmellKind};
use smellvote::records::read_verdicts;
use smellvote::sampler::Manifest;
use smellvote::truth::GroundTruth;

struct Run {
    dir: tempfile::TempDir,
}

impl Run {
    fn path(&self, name: &str) -> std::path::PathBuf {
        self.dir.path().join(name)
    }
}

fn ok(args: &[&str]) -> String {
    let (code, out, err) = cli(args);
    assert_eq!(code, 0, "{args:?} failed: {err}");
    out
}

/// sample, render, detect (mock), ingest, truth, vote, evaluate, report.
fn full_run() -> Run {
    let run = Run {
        dir: tempfile::tempdir().unwrap(),
    };
    let corpus = write_corpus(run.dir.path());
    let config = run.path("run.toml");
    std::fs::write(&config, config_toml(Some(&run.path("cache")))).unwrap();
    let (manifest, prompts, llm, tools, truth, combined, metrics, report) = (
        run.path("manifest.jsonl"),
        run.path("prompts.jsonl"),
        run.path("llm.jsonl"),
        run.path("tools.jsonl"),
        run.path("truth.csv"),
        run.path("combined.jsonl"),
        run.path("metrics.csv"),
        run.path("report.md"),
    );
    ok(&["sample", "--dataset", p(&corpus.dataset), "--project-root", p(&corpus.project_root), "--config", p(&config), "--out", p(&manifest)]);
    let m = Manifest::load(&manifest).unwrap();
    std::fs::write(run.path("ratings.csv"), ratings_csv(&m)).unwrap();
    std::fs::write(run.path("reports.csv"), tool_reports_csv(&m)).unwrap();
    ok(&["render", "--manifest", p(&manifest), "--project-root", p(&corpus.project_root), "--config", p(&config), "--out", p(&prompts)]);
    ok(&["detect", "--prompts", p(&prompts), "--config", p(&config), "--mock", "--parallelism", "8", "--out", p(&llm)]);
    ok(&[
        "ingest", "--report", p(&run.path("reports.csv")), "--manifest", p(&manifest), "--tool", "JDeodorant", "--tool", "JSpIRIT",
        "--tool", "Organic", "--tool", "PMD", "--config", p(&config), "--out", p(&tools),
    ]);
    ok(&["truth", "--ratings", p(&run.path("ratings.csv")), "--manifest", p(&manifest), "--config", p(&config), "--out", p(&truth)]);
    ok(&["vote", "--manifest", p(&manifest), "--verdicts", p(&llm), "--verdicts", p(&tools), "--config", p(&config), "--out", p(&combined)]);
    ok(&["evaluate", "--verdicts", p(&llm), "--verdicts", p(&tools), "--verdicts", p(&combined), "--truth", p(&truth), "--config", p(&config), "--out", p(&metrics)]);
    ok(&["report", "--metrics", p(&metrics), "--format", "md", "--out", p(&report)]);
    run
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn pipeline_produces_every_artifact() {
    let run = full_run();
    let m = Manifest::load(&run.path("manifest.jsonl")).unwrap();
    assert_eq!(m.entries.len(), 268);

    let llm = read_verdicts(&run.path("llm.jsonl")).unwrap();
    assert_eq!(llm.len(), 268 * LLMS.len());
    assert!(llm.iter().all(|v| v.detector.kind == DetectorKind::Llm));

    let tools = read_verdicts(&run.path("tools.jsonl")).unwrap();
    assert_eq!(tools.len(), 268 * 2);

    let truth = GroundTruth::load(&run.path("truth.csv")).unwrap();
    for (smell, n) in GROUND_TRUTH {
        assert_eq!(truth.positives()[&smell], n, "{smell}");
    }

    let combined = read_verdicts(&run.path("combined.jsonl")).unwrap();
    assert_eq!(combined.len(), 268);

    let metrics = read(&run.path("metrics.csv"));
    // 4 LLMs and the ensemble on 9 smells, plus 18 tool cells.
    assert_eq!(metrics.lines().filter(|l| !l.starts_with('#')).count(), 1 + 9 * 5 + 18);

    let report = read(&run.path("report.md"));
    assert!(report.contains("## F1 bands"));
    assert!(report.contains("## Best individual strategy and combined prediction"));
}

#[test]
fn every_artifact_carries_the_run_stamp() {
    let run = full_run();
    let cfg = smellvote::config::RunConfig::load(&run.path("run.toml")).unwrap();
    let digest = cfg.digest();
    for name in ["manifest.jsonl", "prompts.jsonl", "llm.jsonl", "tools.jsonl", "truth.csv", "combined.jsonl", "metrics.csv", "report.md"] {
        let text = read(&run.path(name));
        assert!(text.contains(&digest), "{name} lacks the config digest");
        assert!(text.contains(&SEED.to_string()), "{name} lacks the seed");
    }
}

#[test]
fn detect_is_served_from_cache_on_rerun() {
    let run = full_run();
    let cfg = run.path("run.toml");
    let again = run.path("llm2.jsonl");
    ok(&["detect", "--prompts", p(&run.path("prompts.jsonl")), "--config", p(&cfg), "--mock", "--parallelism", "3", "--out", p(&again)]);
    assert_eq!(read(&run.path("llm.jsonl")), read(&again));
    let cached = walk(&run.path("cache"));
    assert_eq!(cached, 268 * LLMS.len());
}

fn walk(dir: &Path) -> usize {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p)
            } else {
                usize::from(p.extension().is_some_and(|x| x == "json"))
            }
        })
        .sum()
}

#[test]
fn sweep_threshold_covers_each_threshold() {
    let run = full_run();
    let out = ok(&[
        "sweep-threshold", "--manifest", p(&run.path("manifest.jsonl")), "--verdicts", p(&run.path("llm.jsonl")), "--verdicts",
        p(&run.path("tools.jsonl")), "--truth", p(&run.path("truth.csv")), "--config", p(&run.path("run.toml")), "--from", "1",
        "--to", "6", "--format", "csv",
    ]);
    let rows: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 6 * 9);
    // Raising the threshold never adds positive predictions.
    for smell in SmellKind::ALL {
        let predicted: Vec<u64> = rows
            .iter()
            .map(|r| r.split(',').collect::<Vec<_>>())
            .filter(|f| f[1] == smell.code_name())
            .map(|f| f[2].parse::<u64>().unwrap() + f[3].parse::<u64>().unwrap())
            .collect();
        assert!(predicted.windows(2).all(|w| w[0] >= w[1]), "{smell}: {predicted:?}");
    }
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.jsonl");
    let (code, _, err) = cli(&["evaluate", "--verdicts", p(&missing), "--truth", p(&missing), "--out", p(&dir.path().join("m.csv"))]);
    assert_eq!(code, 2);
    assert!(err.contains("\"error\":\"io\""), "{err}");

    let (code, _, err) = cli(&["frobnicate"]);
    assert_eq!(code, 1);
    assert!(err.contains("\"error\":\"usage\""));

    let metrics = dir.path().join("m.csv");
    std::fs::write(&metrics, "detector,smell,tp,fp,fn,tn,precision,recall,f1,band\n").unwrap();
    let (code, _, err) = cli(&["report", "--metrics", p(&metrics), "--format", "html"]);
    assert_eq!(code, 1);
    assert!(err.contains("\"error\":\"usage\""));

    let (code, out, _) = cli(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("sweep-threshold"));
}

#[test]
fn vote_rejects_incomplete_slates() {
    let run = full_run();
    let (code, _, err) = cli(&[
        "vote", "--manifest", p(&run.path("manifest.jsonl")), "--verdicts", p(&run.path("llm.jsonl")), "--config",
        p(&run.path("run.toml")), "--out", p(&run.path("c2.jsonl")),
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("completeness"), "{err}");
}

#[test]
fn truth_reports_unrated_candidates() {
    let run = full_run();
    let ratings = read(&run.path("ratings.csv"));
    let trimmed: String = ratings.lines().take(100).map(|l| format!("{l}\n")).collect();
    std::fs::write(run.path("few.csv"), trimmed).unwrap();
    let (code, _, err) = cli(&["truth", "--ratings", p(&run.path("few.csv")), "--manifest", p(&run.path("manifest.jsonl")), "--out", p(&run.path("t2.csv"))]);
    assert_eq!(code, 1);
    assert!(err.contains("coverage"), "{err}");
}

#[test]
fn pipeline_is_byte_deterministic() {
    let a = full_run();
    let b = full_run();
    for name in ["manifest.jsonl", "prompts.jsonl", "llm.jsonl", "tools.jsonl", "truth.csv", "combined.jsonl", "metrics.csv", "report.md"] {
        assert_eq!(read(&a.path(name)), read(&b.path(name)), "{name} differs between runs");
    }
}

#[test]
fn at_most_one_entry_per_system_and_smell() {
    let run = full_run();
    let m = Manifest::load(&run.path("manifest.jsonl")).unwrap();
    let mut seen = std::collections::BTreeSet::new();
    for e in &m.entries {
        assert!(seen.insert((e.system.clone(), e.smell)), "{} {}", e.system, e.smell);
    }
}

#[test]
fn sweep_matches_independent_vote_and_evaluate_runs() {
    let run = full_run();
    let (manifest, llm, tools, truth, cfg) = (
        run.path("manifest.jsonl"),
        run.path("llm.jsonl"),
        run.path("tools.jsonl"),
        run.path("truth.csv"),
        run.path("run.toml"),
    );
    let swept = ok(&[
        "sweep-threshold", "--manifest", p(&manifest), "--verdicts", p(&llm), "--verdicts", p(&tools), "--truth", p(&truth), "--config", p(&cfg),
        "--from", "1", "--to", "6", "--format", "csv",
    ]);
    let swept: Vec<Vec<String>> = swept
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    for t in 1..=6 {
        let ens = run.path(&format!("ens{t}.jsonl"));
        let met = run.path(&format!("met{t}.csv"));
        let t_arg = t.to_string();
        ok(&["vote", "--manifest", p(&manifest), "--verdicts", p(&llm), "--verdicts", p(&tools), "--config", p(&cfg), "--threshold", &t_arg, "--out", p(&ens)]);
        ok(&["evaluate", "--verdicts", p(&ens), "--truth", p(&truth), "--out", p(&met)]);
        let independent: Vec<Vec<String>> = read(&met)
            .lines()
            .filter(|l| !l.starts_with('#'))
            .skip(1)
            .map(|l| l.split(',').map(String::from).collect())
            .collect();
        let at_t: Vec<&Vec<String>> = swept.iter().filter(|r| r[0] == t_arg).collect();
        assert_eq!(at_t.len(), 9);
        for (s, i) in at_t.iter().zip(&independent) {
            // sweep: threshold,smell,tp,fp,fn,precision,recall,f1,band
            // metrics: detector,smell,tp,fp,fn,tn,precision,recall,f1,band
            assert_eq!(s[1], i[1]);
            assert_eq!(&s[2..5], &i[2..5], "t={t} {}", s[1]);
            assert_eq!(&s[5..9], &i[6..10], "t={t} {}", s[1]);
        }
    }
}
