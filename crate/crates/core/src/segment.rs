//! Minimum-description-length scene detection.
//!
//! A scene over `l` lines with `n` of the transcript's `N` speakers costs
//! `log2 C(N, n) + l * log2 n` bits: first name the scene's speaker codebook,
//! then spend `log2 n` bits per line on who speaks. The optimal partition
//! minimizes the summed cost over all contiguous partitions; the number of
//! scenes falls out of the optimization.

use serde::{Deserialize, Serialize};

use crate::model::Transcript;
use crate::scalar::Real;

/// Largest transcript [`brute_force_partition`] accepts.
pub const BRUTE_FORCE_MAX_LINES: usize = 18;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SegmentError {
    #[error("invalid speaker counts: scene has {present} of {vocab} speakers")]
    InvalidCount { vocab: usize, present: usize },
    #[error("scene must contain at least one line")]
    EmptyScene,
    #[error("transcript has no lines")]
    EmptyTranscript,
    #[error("brute force limited to {max} lines, transcript has {lines}")]
    TooLarge { lines: usize, max: usize },
    #[error("invalid break set {breaks:?} for {lines} lines")]
    InvalidBreaks { breaks: Vec<usize>, lines: usize },
}

/// Inputs to the per-scene cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SceneCostParams {
    /// Distinct speakers in the whole transcript (N).
    pub vocab: usize,
    /// Distinct speakers in the scene (n).
    pub speakers: usize,
    /// Lines in the scene (l).
    pub lines: usize,
}

/// `log2` of the binomial coefficient `C(vocab, present)`, summed in log space.
pub fn codebook_cost<T: Real>(vocab: usize, present: usize) -> Result<T, SegmentError> {
    if vocab < 1 || present < 1 || present > vocab {
        return Err(SegmentError::InvalidCount { vocab, present });
    }
    let k = present.min(vocab - present);
    let mut bits = T::zero();
    for i in 1..=k {
        bits = bits + T::from_count(vocab - k + i).log2() - T::from_count(i).log2();
    }
    Ok(bits)
}

/// Cost in bits of one scene.
pub fn scene_cost<T: Real>(params: SceneCostParams) -> Result<T, SegmentError> {
    if params.lines == 0 {
        return Err(SegmentError::EmptyScene);
    }
    let codebook = codebook_cost::<T>(params.vocab, params.speakers)?;
    let per_line = if params.speakers == 1 {
        T::zero()
    } else {
        T::from_count(params.lines) * T::from_count(params.speakers).log2()
    };
    Ok(codebook + per_line)
}

/// Precomputed codebook and per-line costs for a fixed vocabulary.
struct CostModel<T> {
    codebook: Vec<T>,
    per_line: Vec<T>,
}

impl<T: Real> CostModel<T> {
    fn new(vocab: usize) -> Self {
        let mut codebook = vec![T::zero(); vocab + 1];
        let mut per_line = vec![T::zero(); vocab + 1];
        for n in 1..=vocab {
            codebook[n] = codebook_cost(vocab, n).expect("1 <= n <= vocab");
            per_line[n] = T::from_count(n).log2();
        }
        CostModel { codebook, per_line }
    }

    /// Matches [`scene_cost`] bit for bit.
    fn cost(&self, speakers: usize, lines: usize) -> T {
        let per_line = if speakers == 1 {
            T::zero()
        } else {
            T::from_count(lines) * self.per_line[speakers]
        };
        self.codebook[speakers] + per_line
    }
}

/// One contiguous scene `[start, end)` of a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene<T> {
    pub start: usize,
    pub end: usize,
    pub roster: Vec<String>,
    #[serde(rename = "cost_bits")]
    pub cost: T,
}

impl<T> Scene<T> {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn span(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

/// An exhaustive, ordered tiling of a transcript into scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition<T> {
    pub breaks: Vec<usize>,
    pub scenes: Vec<Scene<T>>,
    #[serde(rename = "total_cost_bits")]
    pub total_cost: T,
}

impl<T: Copy> Partition<T> {
    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }

    /// Per-line scene labels (0-based, in scene order).
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = Vec::new();
        for (i, scene) in self.scenes.iter().enumerate() {
            labels.extend(std::iter::repeat(i).take(scene.len()));
        }
        labels
    }
}

fn check_breaks(breaks: &[usize], lines: usize) -> Result<(), SegmentError> {
    let increasing = breaks.windows(2).all(|w| w[0] < w[1]);
    let in_range = breaks.iter().all(|&b| b >= 1 && b < lines);
    if increasing && in_range {
        Ok(())
    } else {
        Err(SegmentError::InvalidBreaks { breaks: breaks.to_vec(), lines })
    }
}

/// Builds the partition induced by `breaks`, costing each scene.
///
/// The total is summed left to right over scenes, so two routes that agree
/// on the breaks agree on the total exactly.
pub fn partition_from_breaks<T: Real>(
    transcript: &Transcript,
    breaks: &[usize],
) -> Result<Partition<T>, SegmentError> {
    let m = transcript.len();
    check_breaks(breaks, m)?;
    let vocab = transcript.roster_size();
    let bounds: Vec<usize> =
        std::iter::once(0).chain(breaks.iter().copied()).chain(std::iter::once(m)).collect();
    let mut scenes = Vec::with_capacity(bounds.len() - 1);
    let mut total = T::zero();
    for w in bounds.windows(2) {
        let (start, end) = (w[0], w[1]);
        let roster: Vec<String> =
            transcript
                .scene_roster(start..end)
                .map_err(|_| SegmentError::InvalidBreaks { breaks: breaks.to_vec(), lines: m })?
                .into_iter()
                .map(str::to_string)
                .collect();
        let cost = scene_cost(SceneCostParams { vocab, speakers: roster.len(), lines: end - start })?;
        total = total + cost;
        scenes.push(Scene { start, end, roster, cost });
    }
    Ok(Partition { breaks: breaks.to_vec(), scenes, total_cost: total })
}

/// Optimal span costs S(i, j) for every `0 <= i < j <= m`.
///
/// Alongside each cost the table keeps the fewest scenes that achieve it.
pub struct PartitionTable<T> {
    lines: usize,
    cost: Vec<T>,
    scenes: Vec<u32>,
    single: Vec<T>,
}

impl<T: Real> PartitionTable<T> {
    /// Fills the table bottom-up over span length.
    ///
    /// `speaker_ids` are interned speakers; `vocab` is N and must be at least
    /// the number of distinct ids.
    pub fn build(speaker_ids: &[usize], vocab: usize) -> Result<Self, SegmentError> {
        let m = speaker_ids.len();
        if m == 0 {
            return Err(SegmentError::EmptyTranscript);
        }
        let present = distinct(speaker_ids);
        if present > vocab {
            return Err(SegmentError::InvalidCount { vocab, present });
        }
        let max_id = speaker_ids.iter().copied().max().unwrap_or(0);
        let model = CostModel::<T>::new(vocab);
        let w = m + 1;
        let mut single = vec![T::zero(); w * w];
        // Distinct-speaker counts grow incrementally as each span extends.
        let mut seen = vec![usize::MAX; max_id + 1];
        for i in 0..m {
            let mut n = 0;
            for j in i..m {
                let id = speaker_ids[j];
                if seen[id] != i {
                    seen[id] = i;
                    n += 1;
                }
                single[i * w + j + 1] = model.cost(n, j + 1 - i);
            }
        }

        let mut cost = vec![T::zero(); w * w];
        let mut scenes = vec![0u32; w * w];
        for len in 1..=m {
            for i in 0..=(m - len) {
                let j = i + len;
                let mut best = single[i * w + j];
                let mut best_scenes = 1u32;
                for k in (i + 1)..j {
                    let c = cost[i * w + k] + cost[k * w + j];
                    let s = scenes[i * w + k] + scenes[k * w + j];
                    if T::approx_eq(c, best) {
                        if s < best_scenes {
                            best_scenes = s;
                        }
                    } else if c < best {
                        best = c;
                        best_scenes = s;
                    }
                }
                cost[i * w + j] = best;
                scenes[i * w + j] = best_scenes;
            }
        }
        Ok(PartitionTable { lines: m, cost, scenes, single })
    }

    pub fn lines(&self) -> usize {
        self.lines
    }

    /// Optimal cost of lines `[i, j)`.
    pub fn cost(&self, i: usize, j: usize) -> T {
        assert!(i < j && j <= self.lines, "span {i}..{j} outside table");
        self.cost[i * (self.lines + 1) + j]
    }

    /// Fewest scenes among optimal partitions of `[i, j)`.
    pub fn min_scenes(&self, i: usize, j: usize) -> usize {
        assert!(i < j && j <= self.lines, "span {i}..{j} outside table");
        self.scenes[i * (self.lines + 1) + j] as usize
    }

    /// Breaks of the optimal partition of the whole transcript.
    ///
    /// Among cost ties the fewest scenes win, then the lexicographically
    /// smallest break list: each step takes the earliest first break that
    /// keeps both the optimal cost and the minimal scene count.
    pub fn breaks(&self) -> Vec<usize> {
        let m = self.lines;
        let w = m + 1;
        let mut breaks = Vec::new();
        let mut i = 0;
        while self.min_scenes(i, m) > 1 {
            let target = self.cost(i, m);
            let want = self.min_scenes(i, m);
            let k = ((i + 1)..m)
                .find(|&k| {
                    1 + self.min_scenes(k, m) == want
                        && T::approx_eq(self.single[i * w + k] + self.cost(k, m), target)
                })
                .expect("optimal table admits a first break");
            breaks.push(k);
            i = k;
        }
        breaks
    }
}

fn distinct(ids: &[usize]) -> usize {
    let mut v = ids.to_vec();
    v.sort_unstable();
    v.dedup();
    v.len()
}

/// Optimal break positions for a raw speaker-id sequence over `vocab` names.
pub fn optimal_breaks<T: Real>(speaker_ids: &[usize], vocab: usize) -> Result<Vec<usize>, SegmentError> {
    Ok(PartitionTable::<T>::build(speaker_ids, vocab)?.breaks())
}

/// Breaks of the exhaustive minimum over all `2^(m-1)` partitions, with the
/// same tie-breaking as [`optimal_breaks`].
pub fn brute_force_breaks<T: Real>(
    speaker_ids: &[usize],
    vocab: usize,
) -> Result<Vec<usize>, SegmentError> {
    let m = speaker_ids.len();
    if m == 0 {
        return Err(SegmentError::EmptyTranscript);
    }
    if m > BRUTE_FORCE_MAX_LINES {
        return Err(SegmentError::TooLarge { lines: m, max: BRUTE_FORCE_MAX_LINES });
    }
    let mut best: Option<(T, Vec<usize>)> = None;
    for mask in 0u32..(1u32 << (m - 1)) {
        let breaks: Vec<usize> = (1..m).filter(|b| mask & (1 << (b - 1)) != 0).collect();
        let mut total = T::zero();
        let mut start = 0;
        for &end in breaks.iter().chain(std::iter::once(&m)) {
            let span = &speaker_ids[start..end];
            total = total
                + scene_cost::<T>(SceneCostParams { vocab, speakers: distinct(span), lines: span.len() })?;
            start = end;
        }
        let better = match &best {
            None => true,
            Some((c, b)) => {
                if T::approx_eq(total, *c) {
                    (breaks.len(), &breaks) < (b.len(), b)
                } else {
                    total < *c
                }
            }
        };
        if better {
            best = Some((total, breaks));
        }
    }
    Ok(best.expect("at least one partition").1)
}

/// Globally optimal MDL partition of a transcript.
pub fn optimal_partition<T: Real>(transcript: &Transcript) -> Result<Partition<T>, SegmentError> {
    let breaks = optimal_breaks::<T>(transcript.speaker_ids(), transcript.roster_size())?;
    partition_from_breaks(transcript, &breaks)
}

/// Exhaustive-search partition; test oracle for [`optimal_partition`].
pub fn brute_force_partition<T: Real>(transcript: &Transcript) -> Result<Partition<T>, SegmentError> {
    let breaks = brute_force_breaks::<T>(transcript.speaker_ids(), transcript.roster_size())?;
    partition_from_breaks(transcript, &breaks)
}

/// Explicit scene markers when the transcript has them, the MDL optimum otherwise.
pub fn effective_partition<T: Real>(transcript: &Transcript) -> Result<Partition<T>, SegmentError> {
    match transcript.explicit_breaks() {
        Some(breaks) => partition_from_breaks(transcript, breaks),
        None => optimal_partition(transcript),
    }
}

/// Consecutive chunks of at most `max_tokens` whitespace tokens per chunk,
/// counting `Speaker: text` for each line. A single oversized line forms its
/// own chunk.
pub fn uniform_token_chunks<T: Real>(
    transcript: &Transcript,
    max_tokens: usize,
) -> Result<Partition<T>, SegmentError> {
    let mut breaks = Vec::new();
    let mut used = 0;
    for (i, line) in transcript.lines().iter().enumerate() {
        let tokens = line.speaker.split_whitespace().count() + line.text.split_whitespace().count();
        if i > 0 && used + tokens > max_tokens {
            breaks.push(i);
            used = 0;
        }
        used += tokens;
    }
    partition_from_breaks(transcript, &breaks)
}

/// `scenes` near-equal chunks; chunk `i` starts at line `floor(i * m / scenes)`.
pub fn uniform_partition<T: Real>(
    transcript: &Transcript,
    scenes: usize,
) -> Result<Partition<T>, SegmentError> {
    let m = transcript.len();
    let k = scenes.clamp(1, m);
    let breaks: Vec<usize> = (1..k).map(|i| i * m / k).collect();
    partition_from_breaks(transcript, &breaks)
}
