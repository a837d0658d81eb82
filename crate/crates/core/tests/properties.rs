use num_rational::Ratio;
use proptest::prelude::*;

use smellvote::eval::{hundredths, metrics, Band, ConfusionCounts};
use smellvote::llm::truncate_chars;
use smellvote::model::{candidate_id, normalize_source, Decision, SmellKind};
use smellvote::prompt::{no_prefix, parse_reply, yes_prefix};
use smellvote::segment::{line_range, segment_file};
use smellvote::truth::aggregate;

fn smell() -> impl Strategy<Value = SmellKind> {
    prop::sample::select(SmellKind::ALL.to_vec())
}

proptest! {
    #[test]
    fn label_is_exact_mean_above_three(scores in prop::collection::vec(1u8..=5, 2..12)) {
        let label = aggregate("c", SmellKind::LargeClass, &scores).unwrap();
        let sum: u64 = scores.iter().map(|&s| u64::from(s)).sum();
        let mean = Ratio::new(sum, scores.len() as u64);
        prop_assert_eq!(label.smelly, mean > Ratio::from_integer(3));
        let mut rev = scores.clone();
        rev.reverse();
        prop_assert_eq!(aggregate("c", SmellKind::LargeClass, &rev).unwrap().smelly, label.smelly);
    }

    #[test]
    fn f1_sits_between_precision_and_recall(tp in 0u64..500, fp in 0u64..500, fn_ in 0u64..500, tn in 0u64..500) {
        let m = metrics(&ConfusionCounts::new(tp, fp, fn_, tn));
        prop_assert!((0.0..=1.0).contains(&m.f1));
        prop_assert!(m.f1_h <= 100);
        if tp > 0 {
            let lo = m.precision.min(m.recall) - 1e-12;
            let hi = m.precision.max(m.recall) + 1e-12;
            prop_assert!(lo <= m.f1 && m.f1 <= hi);
            let harmonic = 2.0 * m.precision * m.recall / (m.precision + m.recall);
            prop_assert!((harmonic - m.f1).abs() < 1e-12);
        } else {
            prop_assert_eq!(m.f1_h, 0);
        }
        prop_assert!((f64::from(m.f1_h) - m.f1 * 100.0).abs() <= 0.5 + 1e-9);
        // tn never moves precision, recall or F1.
        let shifted = metrics(&ConfusionCounts::new(tp, fp, fn_, tn + 7));
        prop_assert_eq!((shifted.precision_h, shifted.recall_h, shifted.f1_h), (m.precision_h, m.recall_h, m.f1_h));
    }

    #[test]
    fn hundredths_rounds_half_up(num in 0u64..10_000, den in 1u64..10_000) {
        let h = u64::from(hundredths(num, den));
        // h - 1/2 <= 100 num / den < h + 1/2
        prop_assert!(200 * num >= (2 * h).saturating_sub(1) * den);
        prop_assert!(200 * num < (2 * h + 1) * den);
    }

    #[test]
    fn bands_are_monotone_in_f1(a in 0u32..=100, b in 0u32..=100) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(Band::from_hundredths(lo) <= Band::from_hundredths(hi));
    }

    #[test]
    fn prefixes_round_trip(s in smell(), tail in "[ -~]{0,80}") {
        let yes = parse_reply(s, &format!("{}{tail}", yes_prefix(s)));
        prop_assert_eq!(yes.decision, Decision::Positive);
        let no = parse_reply(s, &format!("{}{tail}", no_prefix(s)));
        prop_assert_eq!(no.decision, Decision::Negative);
    }

    #[test]
    fn free_text_abstains(s in smell(), text in "[a-z ,.]{0,80}") {
        prop_assert_eq!(parse_reply(s, &text).decision, Decision::Abstain);
    }

    #[test]
    fn truncation_respects_char_boundaries(text in "\\PC{0,300}", max in 0usize..200) {
        let cut = truncate_chars(&text, max);
        prop_assert!(cut.chars().count() <= max);
        prop_assert!(text.starts_with(cut));
        if text.chars().count() <= max {
            prop_assert_eq!(cut, text.as_str());
        }
    }

    #[test]
    fn segmenter_finds_generated_methods(names in prop::collection::btree_set("m[a-z]{1,8}", 1..6), comment in "[a-z{}()\"' ]{0,20}", literal in "[a-z{}()' ]{0,20}") {
        let mut src = String::from("package p;\n\npublic class Gen {\n");
        for (i, n) in names.iter().enumerate() {
            src.push_str(&format!("    // {comment}\n    int {n}(int a{i}) {{\n        String s = \"{{{literal}\";\n        return a{i};\n    }}\n\n"));
        }
        src.push_str("}\n");
        let classes = segment_file(&src).unwrap();
        prop_assert_eq!(classes.len(), 1);
        let found: Vec<&str> = classes[0].methods.iter().map(|m| m.method_name.as_str()).collect();
        let expect: Vec<&str> = names.iter().map(String::as_str).collect();
        prop_assert_eq!(found, expect);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn candidate_ids_separate_fields(a in "[a-z]{1,6}", b in "[a-z]{1,6}", c in "[a-z]{1,6}") {
        let joined = format!("{a}{b}");
        let x = candidate_id(&a, "F.java", &format!("{b}{c}"), None, SmellKind::LargeClass).unwrap();
        let y = candidate_id(&joined, "F.java", &c, None, SmellKind::LargeClass).unwrap();
        prop_assert_ne!(x.clone(), y);
        prop_assert_eq!(x.clone(), candidate_id(&a, "F.java", &format!("{b}{c}"), None, SmellKind::LargeClass).unwrap());
        prop_assert!(x.starts_with("LC-"));
    }

    #[test]
    fn candidate_ids_differ_by_method_and_smell(sys in "[a-z]{1,8}", class in "[A-Z][a-z]{0,8}", m1 in "[a-z]{1,8}", m2 in "[a-z]{1,8}") {
        let lm = SmellKind::LongMethod;
        let a = candidate_id(&sys, "F.java", &class, Some(&m1), lm).unwrap();
        prop_assert_eq!(a == candidate_id(&sys, "F.java", &class, Some(&m2), lm).unwrap(), m1 == m2);
        prop_assert_ne!(a, candidate_id(&sys, "F.java", &class, Some(&m1), SmellKind::FeatureEnvy).unwrap());
    }
}

proptest! {
    #[test]
    fn normalize_is_idempotent(text in "[a-z \t\r\n{}]{0,200}") {
        let once = normalize_source(&text);
        prop_assert_eq!(normalize_source(&once), once.clone());
        prop_assert!(!once.contains('\r'));
        prop_assert!(once.lines().all(|l| l == l.trim_end()));
    }

    #[test]
    fn spans_are_the_original_lines(nested in 0usize..3, methods in 0usize..4, pad in 0usize..3) {
        let mut src = "\n".repeat(pad);
        src.push_str("/* { */\npublic class Outer {\n");
        for i in 0..methods {
            src.push_str(&format!("    void m{i}() {{ String s = \"}}\"; }}\n"));
        }
        for j in 0..nested {
            src.push_str(&format!("    static class Inner{j} {{\n        int x;\n    }}\n"));
        }
        src.push_str("}\n");
        let spans = segment_file(&src).unwrap();
        prop_assert_eq!(spans.len(), 1 + nested);
        for span in &spans {
            prop_assert!(span.start_line <= span.end_line);
            prop_assert_eq!(line_range(&src, span.start_line, span.end_line), span.source.clone());
        }
        prop_assert_eq!(spans[0].methods.len(), methods);
    }
}
