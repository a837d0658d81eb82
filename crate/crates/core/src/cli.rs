//! Command-line front end. Every subcommand reads and writes files only.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{evaluate_all, metrics_csv, parse_metrics_csv};
use crate::io::{read_text, write_text};
use crate::llm::{ChatBackend, FailureRecord, HttpBackend, LlmDetector, MockBackend, ResponseCache};
use crate::model::{SmellKind, Tool, Verdict};
use crate::prompt::{default_templates, load_templates, render};
use crate::records::{read_prompts, read_verdicts, write_prompts, write_verdicts};
use crate::report::{render_report, render_sweep, sweep, ReportFormat};
use crate::sampler::{build_manifest, load_dataset, resolve_candidates, FsSources, Manifest};
use crate::tools::{align, ingest_report, load_reports};
use crate::truth::{build_ground_truth, load_ratings, GroundTruth};
use crate::vote::{combined_counts, Voter};

#[derive(Debug, Parser)]
#[command(name = "smellvote", version, about = "Code smell detection by detector voting, with evaluation against rated ground truth")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw the per-smell candidate sample and write manifest.jsonl.
    Sample {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        project_root: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Render one prompt per manifest candidate.
    Render {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        project_root: PathBuf,
        /// Template directory; the bundled templates are used otherwise.
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Query every configured model on every prompt.
    Detect {
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Use the offline deterministic backend instead of HTTP.
        #[arg(long)]
        mock: bool,
        #[arg(long, default_value_t = 4)]
        parallelism: usize,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Where to write failed (prompt, model) pairs; defaults to stderr.
        #[arg(long)]
        failures: Option<PathBuf>,
    },
    /// Turn tool reports into closed-world verdicts over the manifest.
    Ingest {
        #[arg(long = "report", required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        manifest: PathBuf,
        /// Restrict to these tools; each is taken to have run on all its smells.
        #[arg(long = "tool")]
        tools: Vec<String>,
        /// With --tool, read only this smell.
        #[arg(long)]
        smell: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate ratings into truth.csv.
    Truth {
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Combine LLM and tool verdicts by majority vote.
    Vote {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long = "verdicts", required = true)]
        verdicts: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// LLM voter names, when no config is given.
        #[arg(long = "llm")]
        llms: Vec<String>,
        #[arg(long)]
        threshold: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score verdicts against ground truth and write metrics.csv.
    Evaluate {
        #[arg(long = "verdicts", required = true)]
        verdicts: Vec<PathBuf>,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render metrics.csv as tables.
    Report {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long, default_value = "md")]
        format: String,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score the combined prediction at each voting threshold.
    SweepThreshold {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long = "verdicts", required = true)]
        verdicts: Vec<PathBuf>,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "llm")]
        llms: Vec<String>,
        #[arg(long, default_value_t = 1)]
        from: usize,
        #[arg(long, default_value_t = 6)]
        to: usize,
        #[arg(long, default_value = "md")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn voter_names(cfg: &RunConfig, llms: Vec<String>) -> Result<Vec<String>> {
    match (cfg.models.is_empty(), llms.is_empty()) {
        (false, true) => Ok(cfg.model_names()),
        (true, false) => Ok(llms),
        (false, false) => Err(Error::Usage("give LLM voters through --config or --llm, not both".into())),
        (true, true) => Err(Error::Usage("no LLM voters: pass --config with [[models]] or --llm".into())),
    }
}

fn read_all_verdicts(paths: &[PathBuf]) -> Result<Vec<Verdict>> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(read_verdicts(p)?);
    }
    Ok(out)
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn write_or_print(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => write_text(p, text),
        None => emit(out, text),
    }
}

fn warn(err: &mut dyn Write, message: &str) {
    let _ = writeln!(err, "warning: {message}");
}

fn failure_exit(failures: &[FailureRecord]) -> i32 {
    if failures.iter().any(|f| f.kind == "transport" || f.kind == "io") {
        2
    } else if failures.is_empty() {
        0
    } else {
        1
    }
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Sample {
            dataset,
            project_root,
            out: dest,
            seed,
            config,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let rows = load_dataset(&dataset)?;
            let (mut manifest, _) = build_manifest(&rows, &FsSources { root: project_root }, cfg.seed)?;
            manifest.stamp(&cfg.stamp());
            for g in &manifest.gaps {
                warn(err, &format!("{} has no {} candidates", g.system, g.smell));
            }
            for d in &manifest.duplicates {
                warn(err, &format!("dropped {} as a duplicate of {}", d.dropped_id, d.kept_id));
            }
            write_text(&dest, &manifest.to_jsonl())?;
            for (smell, n) in manifest.per_smell_counts() {
                emit(out, &format!("{}\t{n}\n", smell.abbreviation()))?;
            }
        }
        Command::Render {
            manifest,
            project_root,
            templates,
            config,
            out: dest,
        } => {
            let cfg = load_config(config.as_deref())?;
            let manifest = Manifest::load(&manifest)?;
            let dir = templates.or(cfg.template_dir.clone());
            let templates = match dir {
                Some(d) => load_templates(&d)?,
                None => default_templates(),
            };
            let candidates = resolve_candidates(&manifest, &FsSources { root: project_root })?;
            let prompts = candidates
                .iter()
                .map(|c| render(&templates[&c.smell], c))
                .collect::<Result<Vec<_>>>()?;
            write_prompts(&dest, &prompts, Some(&cfg.stamp()))?;
        }
        Command::Detect {
            prompts,
            config,
            mock,
            parallelism,
            cache_dir,
            out: dest,
            failures,
        } => {
            let cfg = RunConfig::load(&config)?;
            if cfg.models.is_empty() {
                return Err(Error::Validation(format!("{} configures no models", config.display())));
            }
            let prompts = read_prompts(&prompts)?;
            let backend: Arc<dyn ChatBackend> = if mock {
                Arc::new(MockBackend::new())
            } else {
                Arc::new(HttpBackend::default())
            };
            let cache = match cache_dir.or(cfg.cache_dir.clone()) {
                Some(d) => ResponseCache::on_disk(d),
                None => ResponseCache::in_memory(),
            };
            let detector = LlmDetector::new(backend, cache);
            let outcome = detector.batch_prompts(&prompts, &cfg.models, parallelism)?;
            let stamp = cfg.stamp();
            write_verdicts(&dest, &outcome.verdicts, Some(&stamp))?;
            match failures {
                Some(p) => crate::io::write_jsonl(&p, &outcome.failures)?,
                None => {
                    for f in &outcome.failures {
                        let _ = writeln!(err, "{}", serde_json::to_string(f).expect("serializable record"));
                    }
                }
            }
            return Ok(failure_exit(&outcome.failures));
        }
        Command::Ingest {
            reports,
            manifest,
            tools,
            smell,
            config,
            out: dest,
        } => {
            let cfg = load_config(config.as_deref())?;
            let manifest = Manifest::load(&manifest)?;
            let parsed_tools = tools.iter().map(|t| t.parse()).collect::<Result<Vec<Tool>>>()?;
            let smell: Option<SmellKind> = smell.map(|s| s.parse()).transpose()?;
            let mut all = Vec::new();
            for path in &reports {
                let loaded = match (smell, parsed_tools.is_empty()) {
                    (Some(_), true) => return Err(Error::Usage("--smell needs at least one --tool".into())),
                    (Some(s), false) => tools.iter().map(|t| ingest_report(path, t, s)).collect::<Result<Vec<_>>>()?,
                    (None, true) => load_reports(path, None)?,
                    (None, false) => load_reports(path, Some(&parsed_tools))?,
                };
                for report in loaded {
                    let aligned = align(&report, &manifest)?;
                    for w in &aligned.warnings {
                        warn(err, w);
                    }
                    for o in &aligned.orphans {
                        warn(
                            err,
                            &format!("{} flags {}.{} which is not a {} candidate", report.tool, o.system, o.class_name, report.smell),
                        );
                    }
                    all.extend(aligned.verdicts);
                }
            }
            write_verdicts(&dest, &all, Some(&cfg.stamp()))?;
        }
        Command::Truth {
            ratings,
            manifest,
            config,
            out: dest,
        } => {
            let cfg = load_config(config.as_deref())?;
            let manifest = Manifest::load(&manifest)?;
            let truth = build_ground_truth(&load_ratings(&ratings)?, &manifest)?;
            for id in &truth.unknown_candidates {
                warn(err, &format!("ratings for {id}, which is not in the manifest, were ignored"));
            }
            write_text(&dest, &truth.to_csv(Some(&cfg.stamp())))?;
            for (smell, n) in truth.positives() {
                emit(out, &format!("{}\t{n}\n", smell.abbreviation()))?;
            }
        }
        Command::Vote {
            manifest,
            verdicts,
            config,
            llms,
            threshold,
            out: dest,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(t) = threshold {
                cfg.threshold = t;
            }
            let voter = Voter::new(voter_names(&cfg, llms)?, cfg.threshold)?;
            let manifest = Manifest::load(&manifest)?;
            let ensemble = voter.vote_all(&manifest, &read_all_verdicts(&verdicts)?)?;
            write_verdicts(&dest, &ensemble, Some(&cfg.stamp()))?;
            for (smell, n) in combined_counts(&manifest, &ensemble)? {
                emit(out, &format!("{}\t{n}\n", smell.abbreviation()))?;
            }
        }
        Command::Evaluate {
            verdicts,
            truth,
            config,
            out: dest,
        } => {
            let cfg = load_config(config.as_deref())?;
            let truth = GroundTruth::load(&truth)?;
            let rows = evaluate_all(&read_all_verdicts(&verdicts)?, &truth)?;
            write_text(&dest, &metrics_csv(&rows, Some(&cfg.stamp())))?;
        }
        Command::Report { metrics, format, out: dest } => {
            let format: ReportFormat = format.parse()?;
            let (rows, stamp) = parse_metrics_csv(&read_text(&metrics)?, &metrics.display().to_string())?;
            write_or_print(dest.as_deref(), &render_report(&rows, format, stamp.as_ref()), out)?;
        }
        Command::SweepThreshold {
            manifest,
            verdicts,
            truth,
            config,
            llms,
            from,
            to,
            format,
            out: dest,
        } => {
            let format: ReportFormat = format.parse()?;
            let cfg = load_config(config.as_deref())?;
            let names = voter_names(&cfg, llms)?;
            let manifest = Manifest::load(&manifest)?;
            let truth = GroundTruth::load(&truth)?;
            let rows = sweep(&manifest, &read_all_verdicts(&verdicts)?, &truth, &names, from, to)?;
            write_or_print(dest.as_deref(), &render_sweep(&rows, format, Some(&cfg.stamp())), out)?;
        }
    }
    Ok(0)
}

fn error_summary(kind: &str, message: &str, code: i32) -> String {
    let mut summary = BTreeMap::new();
    summary.insert("error", serde_json::Value::from(kind));
    summary.insert("message", serde_json::Value::from(message));
    summary.insert("exit_code", serde_json::Value::from(code));
    serde_json::to_string(&summary).expect("serializable summary")
}

/// Parses `args` (program name first) and runs the subcommand. Returns the
/// process exit code: 0 on success, 2 for IO and transport failures, 1 for
/// every other error. Failures also print one JSON line on `err`.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = write!(out, "{}", e.render());
            return 0;
        }
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            let _ = writeln!(err, "{}", error_summary("usage", &e.kind().to_string(), 1));
            return 1;
        }
    };
    match execute(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let code = e.exit_code();
            let _ = writeln!(err, "error: {e}");
            let _ = writeln!(err, "{}", error_summary(e.kind(), &e.to_string(), code));
            code
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}
