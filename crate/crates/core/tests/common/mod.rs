//! Synthetic 30-system corpus shared by the integration and acceptance
//! tests: Java sources, the smell dataset, tool reports and ratings.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use smellvote::model::{SmellKind, Tool};
use smellvote::sampler::Manifest;

pub const SYSTEMS: usize = 30;
pub const SEED: u64 = 20240917;
pub const LLMS: [&str; 4] = ["gpt-4o", "llama-3.3", "gemini-1.5", "mistral-large"];

/// Per-smell sample sizes after deduplication.
pub const SAMPLE: [(SmellKind, usize); 9] = [
    (SmellKind::DataClass, 29),
    (SmellKind::DispersedCoupling, 30),
    (SmellKind::FeatureEnvy, 29),
    (SmellKind::IntensiveCoupling, 30),
    (SmellKind::LargeClass, 30),
    (SmellKind::LongMethod, 30),
    (SmellKind::LongParameterList, 30),
    (SmellKind::RefusedBequest, 30),
    (SmellKind::ShotgunSurgery, 30),
];

/// Per-smell count of candidates the raters judged smelly.
pub const GROUND_TRUTH: [(SmellKind, usize); 9] = [
    (SmellKind::DataClass, 17),
    (SmellKind::DispersedCoupling, 18),
    (SmellKind::FeatureEnvy, 16),
    (SmellKind::IntensiveCoupling, 19),
    (SmellKind::LargeClass, 20),
    (SmellKind::LongMethod, 25),
    (SmellKind::LongParameterList, 16),
    (SmellKind::RefusedBequest, 10),
    (SmellKind::ShotgunSurgery, 16),
];

/// Per-smell count of positive combined predictions.
pub const COMBINED: [(SmellKind, usize); 9] = [
    (SmellKind::DataClass, 21),
    (SmellKind::DispersedCoupling, 22),
    (SmellKind::FeatureEnvy, 24),
    (SmellKind::IntensiveCoupling, 25),
    (SmellKind::LargeClass, 23),
    (SmellKind::LongMethod, 22),
    (SmellKind::LongParameterList, 25),
    (SmellKind::RefusedBequest, 10),
    (SmellKind::ShotgunSurgery, 16),
];

pub const RATERS: usize = 76;
pub const TWO_RATING_CANDIDATES: usize = 46;

pub fn system_name(s: usize) -> String {
    format!("system{s:02}")
}

fn class_source(class: &str, method: &str, class_salt: &str, method_salt: &str) -> String {
    format!(
        "package fixture;

import java.util.List;

/** Generated fixture. */
public class {class} {{
    private int count;
    private String label = \"{class_salt}\";

    public int getCount() {{
        return count;
    }}

    @Override
    public String toString() {{
        return label + \"{{\" + count + \"}}\";
    }}

    public void {method}(int a, int b, String c, List<String> d) {{
        // {method_salt}
        if (a > b) {{
            count += a;
        }}
        d.add(c);
    }}
}}
"
    )
}

/// Systems whose (smell) cell shares its unit source with an earlier system.
pub const PLANTED_DUPLICATES: [(SmellKind, usize, usize); 2] =
    [(SmellKind::DataClass, 3, 7), (SmellKind::FeatureEnvy, 5, 12)];

struct Unit {
    class: String,
    method: String,
    text: String,
}

fn units_for(s: usize, smell: SmellKind) -> Vec<Unit> {
    let abbr = smell.abbreviation();
    let dup = PLANTED_DUPLICATES
        .iter()
        .find(|(k, a, b)| *k == smell && (s == *a || s == *b));
    if let Some((k, first, _)) = dup {
        let (class, class_salt) = match k {
            SmellKind::DataClass => ("SharedRecord".to_string(), "shared".to_string()),
            _ => (format!("{abbr}Sys{s:02}Holder"), format!("{s}-holder")),
        };
        let method = "moveTo".to_string();
        let text = class_source(&class, &method, &class_salt, &format!("shared-{abbr}-{first}"));
        return vec![Unit { class, method, text }];
    }
    let variants = 1 + (s + smell as usize) % 3;
    (0..variants)
        .map(|v| {
            let class = format!("{abbr}Sys{s:02}V{v}");
            let method = format!("process{v}");
            let text = class_source(&class, &method, &format!("{s}-{abbr}-{v}"), &format!("{abbr}/{s}/{v}"));
            Unit { class, method, text }
        })
        .collect()
}

pub struct CorpusPaths {
    pub dataset: PathBuf,
    pub project_root: PathBuf,
}

/// Writes sources under `dir/src` and the dataset to `dir/dataset.csv`.
pub fn write_corpus(dir: &Path) -> CorpusPaths {
    let project_root = dir.join("src");
    let mut csv = String::from("system,version,file_path,class_name,method_name,smell\n");
    for s in 1..=SYSTEMS {
        let system = system_name(s);
        for smell in SmellKind::ALL {
            for unit in units_for(s, smell) {
                let rel = format!("{system}/fixture/{}.java", unit.class);
                let path = project_root.join(&rel);
                std::fs::create_dir_all(path.parent().unwrap()).unwrap();
                std::fs::write(&path, &unit.text).unwrap();
                let method = if smell.is_method_level() { unit.method.as_str() } else { "" };
                let _ = writeln!(csv, "{system},1.{s},{rel},fixture.{},{method},{}", unit.class, smell.display_name());
            }
        }
    }
    let dataset = dir.join("dataset.csv");
    std::fs::write(&dataset, csv).unwrap();
    CorpusPaths { dataset, project_root }
}

fn gt_count(smell: SmellKind) -> usize {
    GROUND_TRUTH.iter().find(|(k, _)| *k == smell).unwrap().1
}

/// Rater scores per candidate. Within each smell the first candidates in
/// manifest order are the smelly ones; non-smelly ones include means of
/// exactly 3.
pub fn scores_for(manifest: &Manifest) -> Vec<(String, Vec<u8>)> {
    let mut seen: BTreeMap<SmellKind, usize> = BTreeMap::new();
    let total = manifest.entries.len();
    manifest
        .entries
        .iter()
        .enumerate()
        .map(|(j, e)| {
            let rank = seen.entry(e.smell).or_default();
            let smelly = *rank < gt_count(e.smell);
            *rank += 1;
            let two = (j * TWO_RATING_CANDIDATES) % total < TWO_RATING_CANDIDATES;
            let scores: &[u8] = match (smelly, two, j % 3) {
                (true, true, 0) => &[4, 3],
                (true, true, 1) => &[5, 4],
                (true, true, _) => &[5, 2],
                (true, false, 0) => &[4, 3, 3],
                (true, false, 1) => &[5, 4, 4],
                (true, false, _) => &[2, 5, 4],
                (false, true, 0) => &[3, 3],
                (false, true, 1) => &[2, 4],
                (false, true, _) => &[1, 2],
                (false, false, 0) => &[3, 3, 3],
                (false, false, 1) => &[4, 3, 2],
                (false, false, _) => &[1, 2, 5],
            };
            (e.id.clone(), scores.to_vec())
        })
        .collect()
}

pub fn ratings_csv(manifest: &Manifest) -> String {
    let mut out = String::from("rater_id,candidate_id,score\n");
    let mut slot = 0;
    for (id, scores) in scores_for(manifest) {
        for s in scores {
            let _ = writeln!(out, "R{:02},{id},{s}", slot % RATERS + 1);
            slot += 1;
        }
    }
    out
}

/// A report from every tool on every smell it is assigned to, plus one row
/// naming a class outside the manifest. The first tool of each smell mostly
/// agrees with the ratings; the second flags a fixed pattern.
pub fn tool_reports_csv(manifest: &Manifest) -> String {
    let smelly: Vec<bool> = scores_for(manifest)
        .iter()
        .map(|(_, s)| s.iter().map(|&x| u32::from(x)).sum::<u32>() > 3 * s.len() as u32)
        .collect();
    let mut out = String::from("system,class_name,method_name,smell,tool\n");
    for (i, e) in manifest.entries.iter().enumerate() {
        for (t, tool) in e.smell.assigned_tools().into_iter().enumerate() {
            let flagged = if t == 0 { smelly[i] != (i % 9 == 0) } else { (i + 2) % 3 == 0 };
            if flagged {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    e.system,
                    e.class_name,
                    e.method_name.as_deref().unwrap_or(""),
                    e.smell.display_name(),
                    tool
                );
            }
        }
    }
    let _ = writeln!(out, "system99,fixture.Ghost,,Data Class,{}", Tool::Pmd);
    out
}

pub fn config_toml(cache_dir: Option<&Path>) -> String {
    let mut out = format!("seed = {SEED}\nthreshold = 3\n");
    if let Some(d) = cache_dir {
        let _ = writeln!(out, "cache_dir = {:?}", d.display().to_string());
    }
    for name in LLMS {
        let _ = write!(
            out,
            "\n[[models]]\nname = \"{name}\"\nendpoint_url = \"http://127.0.0.1:9/v1/chat/completions\"\n"
        );
    }
    out
}

/// Runs the CLI in-process, returning (exit code, stdout, stderr).
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("smellvote").chain(args.iter().copied());
    let code = smellvote::cli::run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}
