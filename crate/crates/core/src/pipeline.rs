//! End-to-end episode processing.
//!
//! Stages run in a fixed order and each persists its output under
//! `<output>/<episode id>/` before the next starts. A rerun reuses every
//! stage whose artifact is present until the first missing one; from there
//! on everything is recomputed. Artifacts from a different configuration
//! (see [`PipelineConfig::fingerprint`]) are ignored.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::align::{dtw_align, scene_time_spans, AlignError, TimeSpan};
use crate::backend::{caption_scene, summarize_scene, BackendError, CaptionInput, Role};
use crate::config::{Backends, ConfigError, PipelineConfig};
use crate::model::{Episode, ModelError, VisualInput};
use crate::postprocess::{postprocess_scene, GenderLexicon, SceneCaption};
use crate::prefs::{prefs_multi_reference, BackendJudge, PrefsError, PrefsReport, ScoringOptions};
use crate::reorder::{order_cost, reorder};
use crate::segment::{effective_partition, uniform_token_chunks, SegmentError};
use crate::text::{split_sentences, token_count};
use crate::{Alignment, Partition, SceneOrder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Segment,
    Align,
    Caption,
    Summarize,
    Reorder,
    Fuse,
    Summary,
}

impl Stage {
    pub const ALL: [Stage; 7] =
        [Stage::Segment, Stage::Align, Stage::Caption, Stage::Summarize, Stage::Reorder, Stage::Fuse, Stage::Summary];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Segment => "segment",
            Stage::Align => "align",
            Stage::Caption => "caption",
            Stage::Summarize => "summarize",
            Stage::Reorder => "reorder",
            Stage::Fuse => "fuse",
            Stage::Summary => "summary",
        }
    }

    /// Artifact file written by this stage.
    pub fn artifact(self) -> &'static str {
        match self {
            Stage::Segment => "partition.json",
            Stage::Align => "alignment.json",
            Stage::Caption => "captions.json",
            Stage::Summarize => "summaries.json",
            Stage::Reorder => "order.json",
            Stage::Fuse => "fusion_input.txt",
            Stage::Summary => "summary.txt",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PREFS_FILE: &str = "prefs.json";

#[derive(Debug, thiserror::Error)]
pub enum FusionError {
    #[error("context budget of {budget} tokens cannot hold one sentence per scene ({needed} needed)")]
    BudgetTooSmall { budget: usize, needed: usize },
    #[error("no captions or summaries to fuse")]
    NothingToFuse,
    #[error("order does not cover the scenes")]
    InvalidOrder,
}

#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] ModelError),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: StageError,
    },
    #[error("evaluation failed: {0}")]
    Eval(#[from] PrefsError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Process exit status: 2 configuration, 3 backend, 4 data.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Stage { source, .. } => match source {
                StageError::Backend(BackendError::NotConfigured(_)) => 2,
                StageError::Backend(_) => 3,
                StageError::Fusion(FusionError::BudgetTooSmall { .. }) => 2,
                _ => 4,
            },
            PipelineError::Eval(PrefsError::Extraction { .. } | PrefsError::Judge { .. }) => 3,
            PipelineError::Data(_) | PipelineError::Eval(_) | PipelineError::Io { .. } => 4,
        }
    }
}

/// Alignment stage output; both fields are absent without a caption track.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AlignmentArtifact {
    pub alignment: Option<Alignment>,
    pub spans: Option<Vec<TimeSpan>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    episode: String,
    fingerprint: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeArtifacts {
    pub dir: PathBuf,
    pub partition: Partition,
    pub alignment: AlignmentArtifact,
    /// Post-processed captions per scene; empty when vision is skipped.
    pub captions: Vec<SceneCaption>,
    /// Dialogue summary per scene; empty when the transcript is skipped.
    pub summaries: Vec<String>,
    pub order: SceneOrder,
    pub fusion_input: String,
    pub summary: String,
    pub prefs: Option<PrefsReport>,
    /// Stages executed by this run, in order; the rest were reused.
    pub executed: Vec<Stage>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s.into_bytes()
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Option<T> {
    let text = fs::read_to_string(path).ok()?;
    match serde_json::from_str(&text) {
        Ok(v) => Some(v),
        Err(e) => {
            log::warn!("ignoring unreadable artifact {}: {e}", path.display());
            None
        }
    }
}

/// Tracks reuse across the stage chain.
struct Runner<'a> {
    dir: &'a Path,
    reuse: bool,
    executed: Vec<Stage>,
}

impl Runner<'_> {
    fn json<T, F>(&mut self, stage: Stage, compute: F) -> Result<T, PipelineError>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T, StageError>,
    {
        let path = self.dir.join(stage.artifact());
        if self.reuse {
            if let Some(v) = read_json(&path) {
                log::debug!("reusing {}", path.display());
                return Ok(v);
            }
        }
        let value = self.run(stage, compute)?;
        self.persist(stage, &path, &to_json(&value))?;
        Ok(value)
    }

    fn text<F>(&mut self, stage: Stage, compute: F) -> Result<String, PipelineError>
    where
        F: FnOnce() -> Result<String, StageError>,
    {
        let path = self.dir.join(stage.artifact());
        if self.reuse {
            if let Ok(v) = fs::read_to_string(&path) {
                return Ok(v);
            }
        }
        let value = self.run(stage, compute)?;
        self.persist(stage, &path, value.as_bytes())?;
        Ok(value)
    }

    fn run<T, F>(&mut self, stage: Stage, compute: F) -> Result<T, PipelineError>
    where
        F: FnOnce() -> Result<T, StageError>,
    {
        self.reuse = false;
        log::info!("running stage {stage}");
        let value = compute().map_err(|source| PipelineError::Stage { stage, source })?;
        self.executed.push(stage);
        Ok(value)
    }

    fn persist(&self, stage: Stage, path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
        write_atomic(path, bytes).map_err(|source| PipelineError::Stage {
            stage,
            source: StageError::Io { path: path.to_path_buf(), source },
        })
    }
}

/// Runs `f` over `0..n` on at most `threads` threads; the first error by
/// index wins.
fn par_indexed<T, E, F>(n: usize, threads: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().expect("worker pool");
    let results: Vec<Result<T, E>> = pool.install(|| (0..n).into_par_iter().map(&f).collect());
    results.into_iter().collect()
}

fn scene_lines(episode: &Episode, start: usize, end: usize) -> Vec<(&str, &str)> {
    episode.transcript.lines()[start..end].iter().map(|l| (l.speaker.as_str(), l.text.as_str())).collect()
}

fn caption_stage(
    episode: &Episode,
    partition: &Partition,
    config: &PipelineConfig,
    backends: &Backends,
) -> Result<Vec<SceneCaption>, StageError> {
    let Some(visual) = (!config.flags.skip_vision).then_some(episode.visual.as_ref()).flatten() else {
        return Ok(Vec::new());
    };
    let (lists, source) = match visual {
        VisualInput::Captions(l) => (l, "captions"),
        VisualInput::Keyframes(l) => (l, "keyframes"),
    };
    let scenes = &partition.scenes;
    if lists.len() != scenes.len() {
        log::warn!("{}: {} visual entries for {} scenes", episode.id, lists.len(), scenes.len());
    }
    let vision = match visual {
        VisualInput::Keyframes(_) => Some(backends.get(Role::VisionCaptioner)?),
        VisualInput::Captions(_) => None,
    };
    let lexicon = GenderLexicon::bundled();
    par_indexed(scenes.len(), config.concurrency, |i| {
        let items = lists.get(i).map(Vec::as_slice).unwrap_or_default();
        let raw = if items.is_empty() {
            Vec::new()
        } else {
            let input = match visual {
                VisualInput::Captions(_) => CaptionInput::Precomputed(items),
                VisualInput::Keyframes(_) => CaptionInput::Images(items),
            };
            caption_scene(input, vision)?
        };
        let speakers = scenes[i].roster.iter().map(String::as_str);
        Ok(postprocess_scene(i, &raw, speakers, lexicon, source))
    })
}

/// Per-scene texts for fusion assembly, indexed by original scene.
struct FusionParts {
    /// Caption line per scene; cleared when dropped for budget.
    captions: Vec<String>,
    /// Primary text split into sentences.
    sentences: Vec<Vec<String>>,
    /// Primary text as given, used until a scene is truncated.
    verbatim: Vec<String>,
    truncated: Vec<bool>,
}

impl FusionParts {
    /// Blocks in `order`: caption line, then primary text; blocks separated
    /// by a blank line. Scenes with neither are omitted.
    fn render(&self, order: &[usize]) -> String {
        let mut blocks = Vec::new();
        for &scene in order {
            let primary =
                if self.truncated[scene] { self.sentences[scene].join(" ") } else { self.verbatim[scene].clone() };
            let parts: Vec<&str> =
                [self.captions[scene].as_str(), primary.as_str()].into_iter().filter(|p| !p.is_empty()).collect();
            if !parts.is_empty() {
                blocks.push(parts.join("\n"));
            }
        }
        blocks.join("\n\n")
    }
}

/// Builds the fusion summarizer's input within `budget` whitespace tokens.
///
/// `summaries` and `captions` are indexed by original scene and either may
/// be empty. Over budget, whole scenes' captions are dropped starting from
/// the last scene in `order`; then summaries lose sentences from the end,
/// down to one sentence per scene. Without summaries the captions are
/// truncated like summaries instead.
pub fn assemble_fusion_input<S: AsRef<str>>(
    summaries: &[S],
    captions: &[SceneCaption],
    order: &[usize],
    budget: usize,
) -> Result<String, FusionError> {
    let n = order.len();
    let distinct: BTreeSet<usize> = order.iter().copied().collect();
    if distinct.len() != n || order.iter().any(|&i| i >= n) {
        return Err(FusionError::InvalidOrder);
    }
    let mut caption_sentences: Vec<Vec<String>> = vec![Vec::new(); n];
    for c in captions.iter().filter(|c| c.scene_index < n) {
        caption_sentences[c.scene_index] = c.sentences.iter().filter(|s| !s.trim().is_empty()).cloned().collect();
    }
    let summary_at = |i: usize| summaries.get(i).map_or("", |s| s.as_ref().trim());
    let mut parts = if (0..n).any(|i| !summary_at(i).is_empty()) {
        FusionParts {
            captions: caption_sentences.iter().map(|c| c.join(" ")).collect(),
            sentences: (0..n).map(|i| split_sentences(summary_at(i)).into_iter().map(str::to_string).collect()).collect(),
            verbatim: (0..n).map(|i| summary_at(i).to_string()).collect(),
            truncated: vec![false; n],
        }
    } else {
        FusionParts {
            captions: vec![String::new(); n],
            verbatim: caption_sentences.iter().map(|c| c.join(" ")).collect(),
            sentences: caption_sentences,
            truncated: vec![false; n],
        }
    };
    let text = parts.render(order);
    if text.is_empty() {
        return Err(FusionError::NothingToFuse);
    }
    if token_count(&text) <= budget {
        return Ok(text);
    }
    for &scene in order.iter().rev() {
        if !parts.captions[scene].is_empty() {
            parts.captions[scene].clear();
            let text = parts.render(order);
            if token_count(&text) <= budget {
                return Ok(text);
            }
        }
    }
    for &scene in order.iter().rev() {
        while parts.sentences[scene].len() > 1 {
            parts.sentences[scene].pop();
            parts.truncated[scene] = true;
            let text = parts.render(order);
            if token_count(&text) <= budget {
                return Ok(text);
            }
        }
    }
    let needed = token_count(&parts.render(order));
    Err(FusionError::BudgetTooSmall { budget, needed })
}

fn identity_order(partition: &Partition) -> SceneOrder {
    let rosters = rosters(partition);
    let cost = order_cost(&rosters);
    SceneOrder { permutation: (0..rosters.len()).collect(), original_cost: cost, cost }
}

fn rosters(partition: &Partition) -> Vec<BTreeSet<String>> {
    partition.scenes.iter().map(|s| s.roster.iter().map(|r| r.to_lowercase()).collect()).collect()
}

/// Output directory for one episode.
pub fn episode_dir(config: &PipelineConfig, episode: &Episode) -> PathBuf {
    config.paths.output.join(&episode.id)
}

fn prepare_dir(dir: &Path, manifest: &Manifest) -> Result<bool, PipelineError> {
    fs::create_dir_all(dir).map_err(|source| PipelineError::Io { path: dir.to_path_buf(), source })?;
    let path = dir.join(MANIFEST_FILE);
    let reuse = read_json::<Manifest>(&path).is_some_and(|m| &m == manifest);
    if !reuse {
        write_atomic(&path, &to_json(manifest)).map_err(|source| PipelineError::Io { path, source })?;
    }
    Ok(reuse)
}

/// Runs every stage for one episode, then evaluates if configured and gold
/// summaries exist.
pub fn run_pipeline(
    episode: &Episode,
    config: &PipelineConfig,
    backends: &Backends,
) -> Result<EpisodeArtifacts, PipelineError> {
    config.validate()?;
    let dir = episode_dir(config, episode);
    let manifest = Manifest { episode: episode.id.clone(), fingerprint: config.fingerprint() };
    let reuse = prepare_dir(&dir, &manifest)?;
    let mut runner = Runner { dir: &dir, reuse, executed: Vec::new() };
    let flags = config.flags;

    let partition: Partition = runner.json(Stage::Segment, || {
        Ok(if flags.uniform_chunks {
            uniform_token_chunks(&episode.transcript, config.uniform_chunk_tokens)?
        } else {
            effective_partition(&episode.transcript)?
        })
    })?;

    let alignment: AlignmentArtifact = runner.json(Stage::Align, || {
        let Some(track) = episode.captions.as_ref() else {
            return Ok(AlignmentArtifact::default());
        };
        let lines: Vec<&str> = episode.transcript.lines().iter().map(|l| l.text.as_str()).collect();
        let alignment: Alignment = dtw_align(&lines, &track.texts())?;
        let spans = scene_time_spans(&partition, &alignment, track)?;
        Ok(AlignmentArtifact { alignment: Some(alignment), spans: Some(spans) })
    })?;

    let captions: Vec<SceneCaption> =
        runner.json(Stage::Caption, || caption_stage(episode, &partition, config, backends))?;

    let summaries: Vec<String> = runner.json(Stage::Summarize, || {
        if flags.skip_transcript {
            return Ok(Vec::new());
        }
        let backend = backends.get(Role::DialogueSummarizer)?;
        let scenes = &partition.scenes;
        Ok(par_indexed(scenes.len(), config.concurrency, |i| {
            summarize_scene(&scene_lines(episode, scenes[i].start, scenes[i].end), backend)
        })?)
    })?;

    let order: SceneOrder = runner.json(Stage::Reorder, || {
        Ok(if flags.skip_reorder { identity_order(&partition) } else { reorder(&rosters(&partition)) })
    })?;

    let fusion_input = runner.text(Stage::Fuse, || {
        Ok(assemble_fusion_input(&summaries, &captions, &order.permutation, config.context_budget)?)
    })?;

    let summary = runner.text(Stage::Summary, || {
        let backend = backends.get(Role::FusionSummarizer)?;
        let reply = backend.complete(&[("input", &fusion_input)])?;
        let reply = reply.trim();
        if reply.is_empty() {
            return Err(BackendError::EmptyCompletion { role: Role::FusionSummarizer }.into());
        }
        Ok(format!("{reply}\n"))
    })?;

    let prefs = if config.evaluate && !episode.gold_summaries.is_empty() {
        Some(run_eval(episode, &summary, config, backends)?)
    } else {
        None
    };

    Ok(EpisodeArtifacts {
        executed: runner.executed,
        dir,
        partition,
        alignment,
        captions,
        summaries,
        order,
        fusion_input,
        summary,
        prefs,
    })
}

/// Runs several episodes with at most `config.concurrency` in flight.
pub fn run_batch(
    episodes: &[Episode],
    config: &PipelineConfig,
    backends: &Backends,
) -> Vec<Result<EpisodeArtifacts, PipelineError>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(config.concurrency.max(1)).build().expect("worker pool");
    pool.install(|| episodes.par_iter().map(|e| run_pipeline(e, config, backends)).collect())
}

/// Scores `summary` against the episode's gold summaries and writes the
/// report next to the other artifacts.
pub fn run_eval(
    episode: &Episode,
    summary: &str,
    config: &PipelineConfig,
    backends: &Backends,
) -> Result<PrefsReport, PipelineError> {
    if episode.gold_summaries.is_empty() {
        return Err(PrefsError::NoReferences.into());
    }
    let backend_err = |e: BackendError| PipelineError::Stage { stage: Stage::Summary, source: e.into() };
    let judge = BackendJudge {
        extractor: backends.get(Role::FactExtractor).map_err(backend_err)?.clone(),
        verifier: backends.get(Role::FactJudge).map_err(backend_err)?.clone(),
    };
    let report = prefs_multi_reference(
        summary,
        &episode.gold_summaries,
        &judge,
        ScoringOptions { concurrency: config.concurrency },
    )?;
    let dir = episode_dir(config, episode);
    fs::create_dir_all(&dir).map_err(|source| PipelineError::Io { path: dir.clone(), source })?;
    let path = dir.join(PREFS_FILE);
    write_atomic(&path, &to_json(&report)).map_err(|source| PipelineError::Io { path, source })?;
    Ok(report)
}
