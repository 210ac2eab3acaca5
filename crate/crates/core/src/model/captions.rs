use serde::{Deserialize, Serialize};

use super::{ModelError, Parsed};

/// A timed subtitle cue. Times are milliseconds from episode start.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionCue {
    pub start: u64,
    pub end: u64,
    pub text: String,
}

/// Cues sorted by start time with no overlaps.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CaptionTrack {
    cues: Vec<CaptionCue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaptionFormat {
    /// Numbered cues with `HH:MM:SS,mmm --> HH:MM:SS,mmm` timing lines.
    Srt,
    /// `start_ms<TAB>end_ms<TAB>text` rows.
    Tsv,
}

impl CaptionTrack {
    /// Sorts cues and resolves overlaps.
    ///
    /// Cues sharing a start time are merged; otherwise an overlapping cue is
    /// cut at the start of its successor. Cues with `end <= start` must be
    /// filtered out by the caller.
    pub fn from_cues(mut cues: Vec<CaptionCue>) -> Self {
        cues.sort_by_key(|c| (c.start, c.end));
        let mut out: Vec<CaptionCue> = Vec::with_capacity(cues.len());
        for cue in cues {
            match out.last_mut() {
                Some(prev) if prev.start == cue.start => {
                    prev.end = prev.end.max(cue.end);
                    if !cue.text.is_empty() {
                        if !prev.text.is_empty() {
                            prev.text.push(' ');
                        }
                        prev.text.push_str(&cue.text);
                    }
                }
                Some(prev) => {
                    if prev.end > cue.start {
                        prev.end = cue.start;
                    }
                    out.push(cue);
                }
                None => out.push(cue),
            }
        }
        CaptionTrack { cues: out }
    }

    pub fn cues(&self) -> &[CaptionCue] {
        &self.cues
    }

    pub fn len(&self) -> usize {
        self.cues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cues.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.cues.iter().map(|c| c.text.as_str()).collect()
    }
}

/// Parses `HH:MM:SS,mmm` (a `.` separator is also accepted).
fn parse_clock(s: &str) -> Option<u64> {
    let s = s.trim();
    let (hms, millis) = s.split_once([',', '.'])?;
    let mut parts = hms.split(':');
    let h: u64 = parts.next()?.trim().parse().ok()?;
    let m: u64 = parts.next()?.parse().ok()?;
    let sec: u64 = parts.next()?.parse().ok()?;
    if parts.next().is_some() || m >= 60 || sec >= 60 || millis.len() != 3 {
        return None;
    }
    let ms: u64 = millis.parse().ok()?;
    Some(((h * 60 + m) * 60 + sec) * 1000 + ms)
}

fn parse_timing(line: &str) -> Option<(u64, u64)> {
    let (a, b) = line.split_once("-->")?;
    // Trailing cue settings ("align:start") follow the end stamp.
    let b = b.split_whitespace().next()?;
    Some((parse_clock(a)?, parse_clock(b)?))
}

fn is_tsv_row(line: &str) -> bool {
    let mut fields = line.splitn(3, '\t');
    matches!(
        (fields.next(), fields.next()),
        (Some(a), Some(b)) if a.trim().parse::<u64>().is_ok() && b.trim().parse::<u64>().is_ok()
    )
}

fn detect_format(text: &str) -> Option<CaptionFormat> {
    for line in text.lines() {
        if line.contains("-->") {
            return Some(CaptionFormat::Srt);
        }
        if is_tsv_row(line) {
            return Some(CaptionFormat::Tsv);
        }
    }
    None
}

fn push_cue(cues: &mut Vec<CaptionCue>, warnings: &mut usize, timing: Option<(u64, u64)>, text: String) {
    match timing {
        Some((start, end)) if start < end => cues.push(CaptionCue { start, end, text }),
        _ => *warnings += 1,
    }
}

fn parse_srt(text: &str, cues: &mut Vec<CaptionCue>, warnings: &mut usize) {
    let mut timing: Option<Option<(u64, u64)>> = None;
    let mut body: Vec<&str> = Vec::new();
    // Text seen in the current block before any timing line.
    let mut orphan = false;
    for raw in text.lines().chain(std::iter::once("")) {
        let line = raw.trim();
        if line.is_empty() || line.contains("-->") {
            if let Some(t) = timing.take() {
                push_cue(cues, warnings, t, body.join(" "));
            } else if orphan {
                *warnings += 1;
            }
            body.clear();
            orphan = false;
            if !line.is_empty() {
                timing = Some(parse_timing(line));
            }
        } else if timing.is_some() {
            body.push(line);
        } else if line.parse::<u64>().is_err() {
            orphan = true;
        }
    }
}

fn parse_tsv(text: &str, cues: &mut Vec<CaptionCue>, warnings: &mut usize) {
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let start = fields.next().and_then(|f| f.trim().parse().ok());
        let end = fields.next().and_then(|f| f.trim().parse().ok());
        let body = fields.next().unwrap_or("").trim().to_string();
        push_cue(cues, warnings, start.zip(end), body);
    }
}

/// Parses a subtitle document, auto-detecting SRT or tab-separated input.
///
/// Invalid cues (bad timestamps, `end <= start`) are skipped and counted.
pub fn parse_captions(text: &str) -> Result<Parsed<CaptionTrack>, ModelError> {
    let text = text.trim_start_matches('\u{feff}');
    let mut cues = Vec::new();
    let mut warnings = 0;
    match detect_format(text) {
        Some(CaptionFormat::Srt) => parse_srt(text, &mut cues, &mut warnings),
        Some(CaptionFormat::Tsv) => parse_tsv(text, &mut cues, &mut warnings),
        None => return Err(ModelError::NoCues),
    }
    if cues.is_empty() {
        return Err(ModelError::NoCues);
    }
    Ok(Parsed { value: CaptionTrack::from_cues(cues), warnings })
}
