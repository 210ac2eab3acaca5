//! Transcript-to-caption alignment.
//!
//! Lines and cues are compared by longest common subsequence over
//! normalized characters; dynamic time warping then finds the cheapest
//! monotone pairing, which carries scene breaks over to caption time.

use serde::{Deserialize, Serialize};

use crate::model::CaptionTrack;
use crate::scalar::Real;
use crate::segment::Partition;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AlignError {
    #[error("cannot align an empty sequence")]
    EmptySequence,
    #[error("scene {0} has no matched caption cue")]
    UncoveredScene(usize),
    #[error("alignment refers to line {line} / cue {cue} outside the inputs")]
    OutOfRange { line: usize, cue: usize },
}

/// Monotone warping path from line indices to cue indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment<T> {
    #[serde(rename = "path")]
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: T,
}

/// A closed time interval in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSpan {
    #[serde(rename = "start_ms")]
    pub start: u64,
    #[serde(rename = "end_ms")]
    pub end: u64,
}

fn normalize(s: &str) -> Vec<char> {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
        .chars()
        .collect()
}

fn lcs_chars(a: &[char], b: &[char]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut prev = vec![0usize; short.len() + 1];
    let mut cur = vec![0usize; short.len() + 1];
    for &x in long {
        for (j, &y) in short.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// Character-level LCS length after lowercasing and collapsing whitespace.
pub fn lcs_length(a: &str, b: &str) -> usize {
    lcs_chars(&normalize(a), &normalize(b))
}

/// `lcs / min(|a|, |b|)` over normalized text; 0 if either side is empty.
pub fn line_similarity<T: Real>(a: &str, b: &str) -> T {
    similarity_chars(&normalize(a), &normalize(b))
}

fn similarity_chars<T: Real>(a: &[char], b: &[char]) -> T {
    let shorter = a.len().min(b.len());
    if shorter == 0 {
        return T::zero();
    }
    T::from_count(lcs_chars(a, b)) / T::from_count(shorter)
}

/// Minimum-cost monotone path through a dense `rows x cols` cost grid.
///
/// Steps are `(1,1)`, `(1,0)` and `(0,1)`; every visited cell pays its own
/// cost. Cost ties prefer the diagonal predecessor, then `(1,0)`.
pub fn dtw_path<T: Real>(cost: &[Vec<T>]) -> Result<Alignment<T>, AlignError> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(AlignError::EmptySequence);
    }
    let mut acc = vec![vec![T::zero(); cols]; rows];
    for i in 0..rows {
        for j in 0..cols {
            let here = cost[i][j];
            acc[i][j] = match (i, j) {
                (0, 0) => here,
                (0, _) => acc[0][j - 1] + here,
                (_, 0) => acc[i - 1][0] + here,
                _ => here + acc[i - 1][j - 1].min(acc[i - 1][j]).min(acc[i][j - 1]),
            };
        }
    }
    let (mut i, mut j) = (rows - 1, cols - 1);
    let mut pairs = vec![(i, j)];
    while (i, j) != (0, 0) {
        (i, j) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = acc[i - 1][j - 1];
            let up = acc[i - 1][j];
            let left = acc[i][j - 1];
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up <= left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        pairs.push((i, j));
    }
    pairs.reverse();
    Ok(Alignment { pairs, total_cost: acc[rows - 1][cols - 1] })
}

/// Aligns transcript lines to caption cues with step cost `1 - similarity`.
pub fn dtw_align<T: Real, A: AsRef<str>, B: AsRef<str>>(
    lines: &[A],
    cues: &[B],
) -> Result<Alignment<T>, AlignError> {
    if lines.is_empty() || cues.is_empty() {
        return Err(AlignError::EmptySequence);
    }
    let cues: Vec<Vec<char>> = cues.iter().map(|c| normalize(c.as_ref())).collect();
    let grid: Vec<Vec<T>> = lines
        .iter()
        .map(|l| {
            let l = normalize(l.as_ref());
            cues.iter().map(|c| T::one() - similarity_chars::<T>(&l, c)).collect()
        })
        .collect();
    dtw_path(&grid)
}

/// Time span of each scene: earliest matched cue start to latest matched cue end.
pub fn scene_time_spans<T, U: Real>(
    partition: &Partition<T>,
    alignment: &Alignment<U>,
    cues: &CaptionTrack,
) -> Result<Vec<TimeSpan>, AlignError> {
    let mut spans: Vec<Option<TimeSpan>> = vec![None; partition.scenes.len()];
    let mut scene = 0;
    for &(line, cue_index) in &alignment.pairs {
        while scene < partition.scenes.len() && line >= partition.scenes[scene].end {
            scene += 1;
        }
        let Some(cue) = cues.cues().get(cue_index) else {
            return Err(AlignError::OutOfRange { line, cue: cue_index });
        };
        if scene == partition.scenes.len() || line < partition.scenes[scene].start {
            return Err(AlignError::OutOfRange { line, cue: cue_index });
        }
        let span = spans[scene].get_or_insert(TimeSpan { start: cue.start, end: cue.end });
        span.start = span.start.min(cue.start);
        span.end = span.end.max(cue.end);
    }
    spans
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or(AlignError::UncoveredScene(i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CaptionCue;
    use crate::segment::partition_from_breaks;
    use crate::Transcript;

    #[test]
    fn lcs_examples() {
        assert_eq!(lcs_length("abc", "abc"), 3);
        assert_eq!(lcs_length("kitten", "sitting"), 4);
        assert_eq!(lcs_length("", "xyz"), 0);
        assert_eq!(lcs_length("Hello  World", "hello world"), 11);
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(line_similarity::<f64>("same", "same"), 1.0);
        assert!((line_similarity::<f64>("kitten", "sitting") - 4.0 / 6.0).abs() < 1e-12);
        assert_eq!(line_similarity::<f64>("anything", ""), 0.0);
        assert_eq!(line_similarity::<f64>("   ", "x"), 0.0);
    }

    #[test]
    fn identical_sequences_align_diagonally() {
        let a = ["one fish", "two fish", "red fish"];
        let al = dtw_align::<f64, _, _>(&a, &a).unwrap();
        assert_eq!(al.pairs, [(0, 0), (1, 1), (2, 2)]);
        assert_eq!(al.total_cost, 0.0);
    }

    #[test]
    fn empty_inputs() {
        let none: [&str; 0] = [];
        assert_eq!(dtw_align::<f64, _, _>(&none, &["x"]), Err(AlignError::EmptySequence));
        assert_eq!(dtw_align::<f64, _, _>(&["x"], &none), Err(AlignError::EmptySequence));
    }

    #[test]
    fn extra_line_warps_onto_neighbor() {
        let al = dtw_align::<f64, _, _>(&["aa", "bb", "cc"], &["aa", "cc"]).unwrap();
        assert_eq!(al.pairs.first(), Some(&(0, 0)));
        assert_eq!(al.pairs.last(), Some(&(2, 1)));
        assert_eq!(al.pairs.len(), 3);
        assert_eq!(al.total_cost, 1.0);
    }

    fn track(n: u64) -> CaptionTrack {
        CaptionTrack::from_cues(
            (0..n).map(|i| CaptionCue { start: i * 1000, end: i * 1000 + 900, text: format!("c{i}") }).collect(),
        )
    }

    #[test]
    fn spans_for_two_scenes() {
        let t = Transcript::from_speakers(&["A", "A", "B", "B"]).unwrap();
        let p = partition_from_breaks::<f64>(&t, &[2]).unwrap();
        let al = Alignment { pairs: vec![(0, 0), (1, 1), (2, 2), (3, 3)], total_cost: 0.0 };
        let spans = scene_time_spans(&p, &al, &track(4)).unwrap();
        assert_eq!(spans, [TimeSpan { start: 0, end: 1900 }, TimeSpan { start: 2000, end: 3900 }]);
    }

    #[test]
    fn single_scene_covers_track() {
        let t = Transcript::from_speakers(&["A"]).unwrap();
        let p = partition_from_breaks::<f64>(&t, &[]).unwrap();
        let al = Alignment { pairs: vec![(0, 0)], total_cost: 0.0 };
        assert_eq!(scene_time_spans(&p, &al, &track(1)).unwrap(), [TimeSpan { start: 0, end: 900 }]);
        let al = Alignment { pairs: vec![(0, 0), (0, 1), (0, 2)], total_cost: 0.0 };
        assert_eq!(scene_time_spans(&p, &al, &track(3)).unwrap(), [TimeSpan { start: 0, end: 2900 }]);
    }

    #[test]
    fn uncovered_scene_is_reported() {
        let t = Transcript::from_speakers(&["A", "B"]).unwrap();
        let p = partition_from_breaks::<f64>(&t, &[1]).unwrap();
        let al = Alignment { pairs: vec![(0, 0)], total_cost: 0.0 };
        assert_eq!(scene_time_spans(&p, &al, &track(1)), Err(AlignError::UncoveredScene(1)));
    }
}
