//! Transcript, caption and episode types with their on-disk parsers.

mod captions;
mod episode;
mod transcript;

pub use captions::{parse_captions, CaptionCue, CaptionFormat, CaptionTrack};
pub use episode::{Episode, VisualInput};
pub use transcript::{normalize_speaker, parse_transcript, Transcript, TranscriptLine, SCENE_BREAK_MARKER};

use std::path::PathBuf;

/// A parsed value together with the number of tolerated malformed inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("transcript contains no dialogue lines")]
    EmptyTranscript,
    #[error("caption document contains no valid cues")]
    NoCues,
    #[error("line range {start}..{end} out of bounds for transcript of {len} lines")]
    RangeOutOfBounds { start: usize, end: usize, len: usize },
    #[error("invalid scene break {position} for transcript of {len} lines")]
    InvalidBreak { position: usize, len: usize },
    #[error("episode directory {0} has no transcript.txt")]
    MissingTranscript(PathBuf),
    #[error("episode {0} declares more than one visual input")]
    AmbiguousVisualInput(String),
    #[error("invalid episode data in {path}: {message}")]
    InvalidData { path: PathBuf, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ModelError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ModelError::Io { path: path.into(), source }
    }
}
