use std::collections::{BTreeSet, HashMap};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{ModelError, Parsed};

/// Literal line that records an explicit scene boundary.
pub const SCENE_BREAK_MARKER: &str = "[SCENE_BREAK]";

const MAX_SPEAKER_CHARS: usize = 40;
const MAX_SPEAKER_WORDS: usize = 5;

/// One speaker-attributed utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub index: usize,
    pub speaker: String,
    pub text: String,
    /// Stage directions and narration that followed this line in the source.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annotations: Vec<String>,
}

/// An ordered sequence of dialogue lines with an interned speaker roster.
///
/// Speakers compare case-insensitively; the roster keeps the spelling of
/// each speaker's first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    lines: Vec<TranscriptLine>,
    explicit_breaks: Option<Vec<usize>>,
    roster: Vec<String>,
    speaker_ids: Vec<usize>,
}

/// Trims, collapses internal whitespace and strips trailing colons.
pub fn normalize_speaker(raw: &str) -> String {
    let collapsed = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.trim_end_matches(':').trim_end().to_string()
}

fn speaker_key(name: &str) -> String {
    name.to_lowercase()
}

impl Transcript {
    /// Builds a transcript from `(speaker, text)` pairs.
    ///
    /// Breaks outside `1..len` are rejected; duplicates are merged.
    pub fn new<S, T>(
        lines: impl IntoIterator<Item = (S, T)>,
        explicit_breaks: Option<Vec<usize>>,
    ) -> Result<Self, ModelError>
    where
        S: AsRef<str>,
        T: Into<String>,
    {
        let lines = lines
            .into_iter()
            .enumerate()
            .map(|(index, (speaker, text))| TranscriptLine {
                index,
                speaker: normalize_speaker(speaker.as_ref()),
                text: text.into(),
                annotations: Vec::new(),
            })
            .collect();
        Self::from_lines(lines, explicit_breaks)
    }

    /// Builds a transcript whose lines carry only speaker names.
    pub fn from_speakers<S: AsRef<str>>(speakers: &[S]) -> Result<Self, ModelError> {
        Self::new(speakers.iter().map(|s| (s.as_ref(), String::new())), None)
    }

    fn from_lines(
        mut lines: Vec<TranscriptLine>,
        explicit_breaks: Option<Vec<usize>>,
    ) -> Result<Self, ModelError> {
        if lines.is_empty() {
            return Err(ModelError::EmptyTranscript);
        }
        let mut ids: HashMap<String, usize> = HashMap::new();
        let mut roster = Vec::new();
        let mut speaker_ids = Vec::with_capacity(lines.len());
        for (index, line) in lines.iter_mut().enumerate() {
            if line.speaker.is_empty() {
                return Err(ModelError::EmptyTranscript);
            }
            line.index = index;
            let id = *ids.entry(speaker_key(&line.speaker)).or_insert_with(|| {
                roster.push(line.speaker.clone());
                roster.len() - 1
            });
            speaker_ids.push(id);
        }
        let len = lines.len();
        let explicit_breaks = match explicit_breaks {
            Some(breaks) => {
                let mut sorted = BTreeSet::new();
                for b in breaks {
                    if b == 0 || b >= len {
                        return Err(ModelError::InvalidBreak { position: b, len });
                    }
                    sorted.insert(b);
                }
                if sorted.is_empty() {
                    None
                } else {
                    Some(sorted.into_iter().collect())
                }
            }
            None => None,
        };
        Ok(Transcript { lines, explicit_breaks, roster, speaker_ids })
    }

    pub fn lines(&self) -> &[TranscriptLine] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    /// Always false: construction rejects empty transcripts.
    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn explicit_breaks(&self) -> Option<&[usize]> {
        self.explicit_breaks.as_deref()
    }

    /// Distinct speaker names in order of first appearance.
    pub fn roster(&self) -> &[String] {
        &self.roster
    }

    /// N, the number of distinct speakers.
    pub fn roster_size(&self) -> usize {
        self.roster.len()
    }

    /// Interned speaker id of every line (ids index [`Transcript::roster`]).
    pub fn speaker_ids(&self) -> &[usize] {
        &self.speaker_ids
    }

    /// The same transcript with explicit breaks removed.
    pub fn without_breaks(&self) -> Transcript {
        Transcript { explicit_breaks: None, ..self.clone() }
    }

    /// The same transcript with the given explicit breaks.
    pub fn with_breaks(&self, breaks: Vec<usize>) -> Result<Transcript, ModelError> {
        Self::from_lines(self.lines.clone(), Some(breaks))
    }

    fn check_range(&self, span: &Range<usize>) -> Result<(), ModelError> {
        if span.start >= span.end || span.end > self.len() {
            return Err(ModelError::RangeOutOfBounds {
                start: span.start,
                end: span.end,
                len: self.len(),
            });
        }
        Ok(())
    }

    /// Distinct speakers in lines `span`.
    pub fn scene_roster(&self, span: Range<usize>) -> Result<BTreeSet<&str>, ModelError> {
        self.check_range(&span)?;
        Ok(self.speaker_ids[span].iter().map(|&id| self.roster[id].as_str()).collect())
    }

    /// Number of distinct speakers in lines `span`.
    pub fn distinct_speakers(&self, span: Range<usize>) -> Result<usize, ModelError> {
        self.check_range(&span)?;
        let mut seen = vec![false; self.roster.len()];
        let mut count = 0;
        for &id in &self.speaker_ids[span] {
            if !seen[id] {
                seen[id] = true;
                count += 1;
            }
        }
        Ok(count)
    }

    /// Renders the transcript in the format accepted by [`parse_transcript`].
    pub fn to_text(&self) -> String {
        let breaks = self.explicit_breaks.as_deref().unwrap_or(&[]);
        let mut out = String::new();
        for line in &self.lines {
            if breaks.binary_search(&line.index).is_ok() {
                out.push_str(SCENE_BREAK_MARKER);
                out.push('\n');
            }
            out.push_str(&line.speaker);
            out.push(':');
            if !line.text.is_empty() {
                out.push(' ');
                out.push_str(&line.text);
            }
            out.push('\n');
            for note in &line.annotations {
                out.push_str(note);
                out.push('\n');
            }
        }
        out
    }
}

/// Splits a `Name: utterance` line, or returns `None` for stage directions.
fn split_dialogue(line: &str) -> Option<(String, &str)> {
    let (name, text) = line.split_once(':')?;
    if text.starts_with("//") {
        return None;
    }
    let name = normalize_speaker(name);
    let first = name.chars().next()?;
    if !first.is_alphabetic()
        || name.chars().count() > MAX_SPEAKER_CHARS
        || name.split(' ').count() > MAX_SPEAKER_WORDS
        || name.contains(['(', ')', '[', ']', '{', '}', '<', '>', '"'])
    {
        return None;
    }
    Some((name, text.trim()))
}

/// Parses a `Name: utterance` transcript with optional `[SCENE_BREAK]` lines.
///
/// Lines without a speaker prefix are attached to the preceding dialogue line
/// as annotations. Leading ones have nothing to attach to and are skipped,
/// each counting one warning.
pub fn parse_transcript(text: &str) -> Result<Parsed<Transcript>, ModelError> {
    let mut lines: Vec<TranscriptLine> = Vec::new();
    let mut breaks = Vec::new();
    let mut saw_marker = false;
    let mut warnings = 0;
    for raw in text.lines() {
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed == SCENE_BREAK_MARKER {
            saw_marker = true;
            // Markers before the first or after the last line carry no boundary.
            if !lines.is_empty() && breaks.last() != Some(&lines.len()) {
                breaks.push(lines.len());
            }
            continue;
        }
        match split_dialogue(trimmed) {
            Some((speaker, utterance)) => lines.push(TranscriptLine {
                index: lines.len(),
                speaker,
                text: utterance.to_string(),
                annotations: Vec::new(),
            }),
            None => match lines.last_mut() {
                Some(prev) => prev.annotations.push(trimmed.to_string()),
                None => warnings += 1,
            },
        }
    }
    if lines.is_empty() {
        return Err(ModelError::EmptyTranscript);
    }
    if breaks.last() == Some(&lines.len()) {
        breaks.pop();
    }
    let explicit = if saw_marker && !breaks.is_empty() { Some(breaks) } else { None };
    let value = Transcript::from_lines(lines, explicit)?;
    Ok(Parsed { value, warnings })
}
