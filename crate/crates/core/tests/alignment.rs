mod common;

use proptest::prelude::*;
use rand::Rng;
use scenefuse::align::{dtw_align, dtw_path, lcs_length, line_similarity, scene_time_spans, AlignError, TimeSpan};
use scenefuse::segment::partition_from_breaks;
use scenefuse::{parse_captions, Alignment, CaptionCue, CaptionTrack, Partition, Transcript};

/// Cheapest monotone path cost by enumerating every path.
fn exhaustive(cost: &[Vec<f64>]) -> f64 {
    fn walk(cost: &[Vec<f64>], i: usize, j: usize) -> f64 {
        let here = cost[i][j];
        if i == 0 && j == 0 {
            return here;
        }
        let mut best = f64::INFINITY;
        if i > 0 && j > 0 {
            best = best.min(walk(cost, i - 1, j - 1));
        }
        if i > 0 {
            best = best.min(walk(cost, i - 1, j));
        }
        if j > 0 {
            best = best.min(walk(cost, i, j - 1));
        }
        here + best
    }
    walk(cost, cost.len() - 1, cost[0].len() - 1)
}

fn check_path(a: &Alignment, rows: usize, cols: usize) {
    assert_eq!(a.pairs.first(), Some(&(0, 0)));
    assert_eq!(a.pairs.last(), Some(&(rows - 1, cols - 1)));
    for w in a.pairs.windows(2) {
        let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
        assert!(matches!((di, dj), (1, 1) | (1, 0) | (0, 1)), "{w:?}");
    }
}

#[test]
fn dtw_matches_enumeration() {
    let mut rng = common::rng(11);
    for _ in 0..200 {
        let rows = rng.gen_range(1..=6);
        let cols = rng.gen_range(1..=7);
        let cost: Vec<Vec<f64>> =
            (0..rows).map(|_| (0..cols).map(|_| rng.gen_range(0..10) as f64 / 4.0).collect()).collect();
        let a = dtw_path(&cost).unwrap();
        check_path(&a, rows, cols);
        assert_eq!(a.total_cost, exhaustive(&cost));
        let along: f64 = a.pairs.iter().map(|&(i, j)| cost[i][j]).sum();
        assert_eq!(along, a.total_cost);
    }
}

#[test]
fn identical_sequences() {
    let lines = ["Where were you last night?", "At the office.", "Until midnight?", "Yes."];
    let a: Alignment = dtw_align(&lines, &lines).unwrap();
    assert_eq!(a.total_cost, 0.0);
    assert_eq!(a.pairs, [(0, 0), (1, 1), (2, 2), (3, 3)]);
}

#[test]
fn split_cue_maps_both_lines() {
    let lines = ["I can't believe you did that.", "Neither can I."];
    let cues = ["I can't believe", "you did that.", "Neither can I."];
    let a: Alignment = dtw_align(&lines, &cues).unwrap();
    assert_eq!(a.pairs, [(0, 0), (0, 1), (1, 2)]);
}

#[test]
fn similarity_uses_shorter_length() {
    assert_eq!(lcs_length("abc", "xaybzc"), 3);
    assert_eq!(line_similarity::<f64>("abc", "xaybzc"), 1.0);
    assert_eq!(line_similarity::<f64>("ABC  d", "abc d"), 1.0);
    assert_eq!(dtw_align::<f64, &str, &str>(&[], &["x"]), Err(AlignError::EmptySequence));
}

#[test]
fn scene_spans_from_alignment() {
    let t = Transcript::from_speakers(&["A", "B", "C", "D"]).unwrap();
    let p: Partition = partition_from_breaks(&t, &[2]).unwrap();
    let track = CaptionTrack::from_cues(
        (0..3u64).map(|i| CaptionCue { start: i * 1000, end: i * 1000 + 900, text: format!("c{i}") }).collect(),
    );
    let a = Alignment { pairs: vec![(0, 0), (1, 0), (2, 1), (3, 2)], total_cost: 0.0 };
    let spans = scene_time_spans(&p, &a, &track).unwrap();
    assert_eq!(spans, [TimeSpan { start: 0, end: 900 }, TimeSpan { start: 1000, end: 2900 }]);
    let bad = Alignment { pairs: vec![(0, 0), (1, 7)], total_cost: 0.0 };
    assert!(matches!(scene_time_spans(&p, &bad, &track), Err(AlignError::OutOfRange { .. })));
}

#[test]
fn fixture_episode_aligns_diagonally() {
    let dir = common::fixture("three_scenes");
    let transcript = scenefuse::parse_transcript(&common::read_fixture("three_scenes", "transcript.txt")).unwrap().value;
    let track = parse_captions(&std::fs::read_to_string(dir.join("captions.srt")).unwrap()).unwrap().value;
    let lines: Vec<&str> = transcript.lines().iter().map(|l| l.text.as_str()).collect();
    let a: Alignment = dtw_align(&lines, &track.texts()).unwrap();
    assert_eq!(a.total_cost, 0.0);
    assert!(a.pairs.iter().all(|&(i, j)| i == j));
}

proptest! {
    #[test]
    fn lcs_properties(a in "[a-c ]{0,12}", b in "[a-c ]{0,12}") {
        let l = lcs_length(&a, &b);
        prop_assert_eq!(l, lcs_length(&b, &a));
        prop_assert!(l <= a.chars().count().min(b.chars().count()));
        let s = line_similarity::<f64>(&a, &b);
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn dtw_path_is_monotone(cost in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 1..6)) {
        let a = dtw_path(&cost).unwrap();
        check_path(&a, cost.len(), 4);
        prop_assert!((a.total_cost - exhaustive(&cost)).abs() < 1e-9);
    }
}
