mod common;

use scenefuse::backend::{DefaultVerdict, FixtureExtraction, PrefsFixture};
use scenefuse::prefs::{
    extract_facts, is_filtered, prefs, prefs_multi_reference, score_direction, FactCounts, FactOrigin,
    ScoringOptions, VerdictReason,
};

fn expected_colors() -> Vec<(String, String)> {
    common::read_fixture("fact_scoring", "facts_expected.tsv")
        .lines()
        .map(|l| {
            let (color, fact) = l.split_once('\t').unwrap();
            (color.to_string(), fact.to_string())
        })
        .collect()
}

#[test]
fn extraction_yields_every_fact_in_order() {
    let judge = common::fact_scoring_judge();
    let generated = common::read_fixture("fact_scoring", "generated.txt");
    let facts = extract_facts(&generated, FactOrigin::Generated, &judge).unwrap();
    let texts: Vec<&str> = facts.iter().map(|f| f.text.as_str()).collect();
    let expected = expected_colors();
    assert_eq!(texts.len(), 83);
    assert_eq!(texts, expected.iter().map(|(_, f)| f.as_str()).collect::<Vec<_>>());
}

#[test]
fn filter_removes_exactly_the_uncolored_facts() {
    let judge = common::fact_scoring_judge();
    let generated = common::read_fixture("fact_scoring", "generated.txt");
    let facts = extract_facts(&generated, FactOrigin::Generated, &judge).unwrap();
    for (fact, (color, _)) in facts.iter().zip(expected_colors()) {
        assert_eq!(is_filtered(fact), color == "black", "{}", fact.text);
    }
}

#[test]
fn fact_precision_of_the_example() {
    let judge = common::fact_scoring_judge();
    let generated = common::read_fixture("fact_scoring", "generated.txt");
    let gold = common::read_fixture("fact_scoring", "gold.txt");
    let d = score_direction(&generated, &gold, FactOrigin::Generated, &judge, ScoringOptions::default()).unwrap();
    assert_eq!(d.counts, FactCounts { extracted: 83, filtered: 16, judged: 67, supported: 33 });
    assert!((d.score - 49.25).abs() < 0.01);
    let colors = expected_colors();
    for v in d.verdicts.iter().filter(|v| v.reason == VerdictReason::Judge) {
        let color = &colors.iter().find(|(_, f)| *f == v.fact.text).unwrap().0;
        assert_eq!(v.supported, color == "blue", "{}", v.fact.text);
    }
}

#[test]
fn concurrency_does_not_change_the_report() {
    let generated = common::read_fixture("fact_scoring", "generated.txt");
    let gold = common::read_fixture("fact_scoring", "gold.txt");
    let reports: Vec<String> = [1, 3, 16]
        .into_iter()
        .map(|concurrency| {
            let judge = common::fact_scoring_judge();
            let r = prefs_multi_reference(&generated, &[&gold], &judge, ScoringOptions { concurrency }).unwrap();
            serde_json::to_string(&r).unwrap()
        })
        .collect();
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[0], reports[2]);
}

#[test]
fn one_judge_request_per_judged_fact() {
    let judge = common::fact_scoring_judge();
    let generated = common::read_fixture("fact_scoring", "generated.txt");
    let gold = common::read_fixture("fact_scoring", "gold.txt");
    let d = score_direction(&generated, &gold, FactOrigin::Generated, &judge, ScoringOptions::default()).unwrap();
    let queried = d.verdicts.iter().filter(|v| v.reason == VerdictReason::Judge).count() as u64;
    assert_eq!(judge.verifier.client.upstream_calls(), queried);
    assert_eq!(judge.extractor.client.upstream_calls(), 20);
}

#[test]
fn identical_summary_scores_100() {
    let judge = common::judge_with(PrefsFixture::self_supporting());
    let gold = "Ridge asks Brooke to marry him. Brooke refuses the offer. Nick leaves the company.";
    let r = prefs_multi_reference(gold, &[gold], &judge, ScoringOptions::default()).unwrap();
    assert_eq!((r.fact_precision, r.fact_recall, r.prefs), (100.0, 100.0, 100.0));
}

#[test]
fn malformed_sentence_counts_against_precision() {
    let mut fixture = PrefsFixture { default_verdict: DefaultVerdict::KnowledgeContains, ..Default::default() };
    fixture.extractions.insert("Blah blah blah.".into(), FixtureExtraction::Signal("MALFORMED".into()));
    let judge = common::judge_with(fixture);
    let r = prefs_multi_reference(
        "Ridge asks Brooke to marry him. Blah blah blah.",
        &["Ridge asks Brooke to marry him."],
        &judge,
        ScoringOptions::default(),
    )
    .unwrap();
    assert_eq!(r.precision.counts, FactCounts { extracted: 2, filtered: 0, judged: 2, supported: 1 });
    assert_eq!(r.fact_precision, 50.0);
    assert_eq!(r.fact_recall, 100.0);
}

#[test]
fn harmonic_mean_grid() {
    assert!((prefs(42.29f64, 48.54) - 45.20).abs() < 0.02);
    for i in 0..=100 {
        let x = i as f64;
        assert!((prefs(x, x) - x).abs() < 1e-9);
        assert_eq!(prefs(x, 0.0), 0.0);
        assert_eq!(prefs(0.0, x), 0.0);
        for j in (1..=100).step_by(7) {
            let y = j as f64;
            let h = prefs(x, y);
            assert!(h <= x.max(y) + 1e-9 && h >= 0.0);
            assert!((h - prefs(y, x)).abs() < 1e-12);
        }
    }
}
