use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{parse_captions, parse_transcript, CaptionTrack, ModelError, Transcript};

/// Per-scene visual input for the captioning stage.
#[derive(Debug, Clone, PartialEq)]
pub enum VisualInput {
    /// Precomputed caption sentences, one list per scene.
    Captions(Vec<Vec<String>>),
    /// Keyframe image references (paths or URLs), one list per scene.
    Keyframes(Vec<Vec<String>>),
}

/// One episode bundle loaded from disk.
#[derive(Debug, Clone)]
pub struct Episode {
    pub id: String,
    pub transcript: Transcript,
    pub captions: Option<CaptionTrack>,
    pub visual: Option<VisualInput>,
    pub gold_summaries: Vec<String>,
    /// Tolerated malformed inputs across all files.
    pub warnings: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SceneEntry {
    One(String),
    Many(Vec<String>),
}

impl SceneEntry {
    fn into_vec(self) -> Vec<String> {
        match self {
            SceneEntry::One(s) => vec![s],
            SceneEntry::Many(v) => v,
        }
    }
}

fn read(path: &Path) -> Result<String, ModelError> {
    fs::read_to_string(path).map_err(|e| ModelError::io(path, e))
}

fn read_scene_lists(path: &Path) -> Result<Vec<Vec<String>>, ModelError> {
    let entries: Vec<SceneEntry> = serde_json::from_str(&read(path)?).map_err(|e| {
        ModelError::InvalidData { path: path.to_path_buf(), message: e.to_string() }
    })?;
    Ok(entries.into_iter().map(SceneEntry::into_vec).collect())
}

impl Episode {
    /// Builds an in-memory episode.
    pub fn new(id: impl Into<String>, transcript: Transcript) -> Self {
        Episode {
            id: id.into(),
            transcript,
            captions: None,
            visual: None,
            gold_summaries: Vec::new(),
            warnings: 0,
        }
    }

    /// Adds a gold summary unless an identical one is already present.
    pub fn add_gold(&mut self, summary: impl Into<String>) {
        let summary = summary.into();
        if !self.gold_summaries.contains(&summary) {
            self.gold_summaries.push(summary);
        }
    }

    /// Loads an episode directory.
    ///
    /// Layout: `transcript.txt`, optional `captions.srt` or `captions.tsv`,
    /// optional `captions.visual.json` or `keyframes.json` (per-scene
    /// arrays), optional `gold/*.txt`. The id is the directory name.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, ModelError> {
        let dir = dir.as_ref();
        let transcript_path = dir.join("transcript.txt");
        if !transcript_path.is_file() {
            return Err(ModelError::MissingTranscript(dir.to_path_buf()));
        }
        let parsed = parse_transcript(&read(&transcript_path)?)?;
        let id = dir
            .canonicalize()
            .ok()
            .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "episode".to_string());
        let mut episode = Episode::new(id, parsed.value);
        episode.warnings = parsed.warnings;

        for name in ["captions.srt", "captions.tsv"] {
            let path = dir.join(name);
            if path.is_file() {
                let parsed = parse_captions(&read(&path)?)?;
                episode.warnings += parsed.warnings;
                episode.captions = Some(parsed.value);
                break;
            }
        }

        let visual = dir.join("captions.visual.json");
        let keyframes = dir.join("keyframes.json");
        episode.visual = match (visual.is_file(), keyframes.is_file()) {
            (true, true) => return Err(ModelError::AmbiguousVisualInput(episode.id)),
            (true, false) => Some(VisualInput::Captions(read_scene_lists(&visual)?)),
            (false, true) => {
                let lists = read_scene_lists(&keyframes)?
                    .into_iter()
                    .map(|scene| scene.into_iter().map(|r| resolve_ref(dir, r)).collect())
                    .collect();
                Some(VisualInput::Keyframes(lists))
            }
            (false, false) => None,
        };

        let gold_dir = dir.join("gold");
        if gold_dir.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(&gold_dir)
                .map_err(|e| ModelError::io(&gold_dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "txt"))
                .collect();
            files.sort();
            for f in files {
                let text = read(&f)?;
                let text = text.trim();
                if !text.is_empty() {
                    episode.add_gold(text);
                }
            }
        }
        Ok(episode)
    }
}

fn resolve_ref(dir: &Path, reference: String) -> String {
    if reference.contains("://") || Path::new(&reference).is_absolute() {
        reference
    } else {
        dir.join(reference).to_string_lossy().into_owned()
    }
}
