//! Scene-aware multimodal summarization of TV episodes.
//!
//! The crate segments speaker-attributed transcripts into scenes by minimum
//! description length, reorders scenes to group recurring casts, aligns
//! transcripts with timed captions, cleans visual captions, drives remote or
//! mock text-generation backends, and scores summaries with PREFS, the
//! harmonic mean of fact precision and fact recall.
//!
//! Numeric code is generic over the scalar type; the aliases below fix the
//! common `f64` instantiations.

pub mod align;
pub mod backend;
pub mod config;
pub mod model;
pub mod pipeline;
pub mod postprocess;
pub mod prefs;
pub mod reorder;
pub mod scalar;
pub mod segment;
pub mod stats;
pub mod text;

pub use model::{parse_captions, parse_transcript, CaptionCue, CaptionTrack, Episode, Transcript, TranscriptLine};
pub use scalar::{Real, Scalar};

/// Exact rational scalar for count-based costs.
pub type Exact = num_rational::Ratio<i64>;

pub type Partition = segment::Partition<f64>;
pub type Scene = segment::Scene<f64>;
pub type SceneOrder = reorder::SceneOrder<f64>;
pub type Alignment = align::Alignment<f64>;
pub type ExactSceneOrder = reorder::SceneOrder<Exact>;
