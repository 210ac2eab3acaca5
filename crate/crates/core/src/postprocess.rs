//! Cleanup of visual captions before fusion.
//!
//! Uninformative captions are dropped, passive "is/are seen" phrasing is
//! rewritten, and generic noun phrases ("a man", "she") are replaced with the
//! scene's only speaker of the matching gender.

use std::collections::{BTreeSet, HashSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Captions containing any of these (case-insensitive) are discarded.
pub const CAPTION_BLACKLIST: [&str; 7] = [
    "a commercial",
    "talking",
    "is shown",
    "sitting on a chair",
    "sitting on a couch",
    "sitting in a chair",
    "walking around",
];

/// Male noun phrases, multi-word phrases first.
pub const MALE_PHRASES: [&str; 3] = ["a man", "a boy", "he"];
/// Female noun phrases, multi-word phrases first.
pub const FEMALE_PHRASES: [&str; 3] = ["a woman", "a girl", "she"];

const BUNDLED_LEXICON: &str = include_str!("../data/names.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
    Neutral,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("lexicon line {line}: {message}")]
pub struct LexiconError {
    pub line: usize,
    pub message: String,
}

/// Given-name gender lists. Lookups are case-insensitive.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GenderLexicon {
    male: HashSet<String>,
    female: HashSet<String>,
}

impl GenderLexicon {
    pub fn new<I, S>(male: I, female: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        GenderLexicon {
            male: male.into_iter().map(|s| s.as_ref().to_lowercase()).collect(),
            female: female.into_iter().map(|s| s.as_ref().to_lowercase()).collect(),
        }
    }

    /// Parses `name<TAB>m|f` lines; blank lines and `#` comments are skipped.
    pub fn from_tsv(text: &str) -> Result<Self, LexiconError> {
        let mut lex = GenderLexicon::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: &str| LexiconError { line: i + 1, message: message.to_string() };
            let (name, tag) = line.split_once('\t').ok_or_else(|| err("expected name<TAB>m|f"))?;
            let name = name.trim().to_lowercase();
            if name.is_empty() {
                return Err(err("empty name"));
            }
            match tag.trim() {
                "m" | "M" => lex.male.insert(name),
                "f" | "F" => lex.female.insert(name),
                _ => return Err(err("gender must be m or f")),
            };
        }
        Ok(lex)
    }

    /// The lexicon shipped with the crate.
    pub fn bundled() -> &'static GenderLexicon {
        static LEXICON: OnceLock<GenderLexicon> = OnceLock::new();
        LEXICON.get_or_init(|| GenderLexicon::from_tsv(BUNDLED_LEXICON).expect("bundled lexicon parses"))
    }

    pub fn classify(&self, name: &str) -> Gender {
        let key = name.trim().to_lowercase();
        match (self.male.contains(&key), self.female.contains(&key)) {
            (true, false) => Gender::Male,
            (false, true) => Gender::Female,
            _ => Gender::Neutral,
        }
    }
}

pub fn classify_name(name: &str, lexicon: &GenderLexicon) -> Gender {
    lexicon.classify(name)
}

/// Caption sentences for one scene after postprocessing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneCaption {
    pub scene_index: usize,
    pub sentences: Vec<String>,
    #[serde(default)]
    pub source: String,
}

fn seen_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(is|are) seen\b").unwrap())
}

fn phrase_pattern(phrases: &[&str]) -> Regex {
    let alternation: Vec<String> = phrases.iter().map(|p| regex::escape(p)).collect();
    Regex::new(&format!(r"(?i)\b(?:{})\b", alternation.join("|"))).unwrap()
}

fn male_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| phrase_pattern(&MALE_PHRASES))
}

fn female_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| phrase_pattern(&FEMALE_PHRASES))
}

/// Drops blacklisted captions and rewrites "is/are seen" to "is/are".
pub fn filter_captions<S: AsRef<str>>(sentences: &[S]) -> Vec<String> {
    sentences
        .iter()
        .map(|s| s.as_ref().trim())
        .filter(|s| !s.is_empty())
        .filter(|s| {
            let lower = s.to_lowercase();
            !CAPTION_BLACKLIST.iter().any(|phrase| lower.contains(phrase))
        })
        .map(|s| seen_pattern().replace_all(s, "$1").into_owned())
        .collect()
}

fn sole_speaker<'a, I>(speakers: I, gender: Gender, lexicon: &GenderLexicon) -> Option<&'a str>
where
    I: IntoIterator<Item = &'a str>,
{
    let matches: BTreeSet<&str> = speakers
        .into_iter()
        .filter(|s| lexicon.classify(s) == gender)
        .collect();
    let mut it = matches.into_iter();
    match (it.next(), it.next()) {
        (Some(name), None) => Some(name),
        _ => None,
    }
}

/// Replaces gendered noun phrases with the scene's only speaker of that gender.
pub fn insert_names<'a, I>(sentence: &str, scene_speakers: I, lexicon: &GenderLexicon) -> String
where
    I: IntoIterator<Item = &'a str>,
{
    let speakers: Vec<&str> = scene_speakers.into_iter().collect();
    let mut out = sentence.to_string();
    if let Some(name) = sole_speaker(speakers.iter().copied(), Gender::Male, lexicon) {
        out = male_pattern().replace_all(&out, regex::NoExpand(name)).into_owned();
    }
    if let Some(name) = sole_speaker(speakers.iter().copied(), Gender::Female, lexicon) {
        out = female_pattern().replace_all(&out, regex::NoExpand(name)).into_owned();
    }
    out
}

/// Filters a scene's raw captions and inserts speaker names.
pub fn postprocess_scene<'a, S, I>(
    scene_index: usize,
    raw: &[S],
    scene_speakers: I,
    lexicon: &GenderLexicon,
    source: &str,
) -> SceneCaption
where
    S: AsRef<str>,
    I: IntoIterator<Item = &'a str>,
{
    let speakers: Vec<&str> = scene_speakers.into_iter().collect();
    let sentences = filter_captions(raw)
        .into_iter()
        .map(|s| insert_names(&s, speakers.iter().copied(), lexicon))
        .collect();
    SceneCaption { scene_index, sentences, source: source.to_string() }
}
