//! PREFS: fact precision, fact recall and their harmonic mean.
//!
//! A summary is broken into atomic facts, one extraction query per
//! sentence. Vague facts are filtered out, repeats and malformed sentences
//! count as unsupported, and every remaining fact is checked against the
//! other text with its own judge query. Precision checks generated facts
//! against the reference; recall checks reference facts against the
//! generated summary.

use std::collections::HashSet;
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, BackendRequest, RoleBackend};
use crate::scalar::Real;
use crate::text::{collapse_whitespace, split_sentences};

/// Facts containing any of these (case-insensitive, whole words) are dropped.
pub const FACT_BLACKLIST: [&str; 7] = [
    "someone",
    "somebody",
    "something",
    "is a person",
    "are people",
    "is a character",
    "are characters",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactOrigin {
    Generated,
    Reference,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub text: String,
    pub origin: FactOrigin,
    pub source_sentence_index: usize,
    #[serde(default)]
    pub malformed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictReason {
    Judge,
    FilteredOut,
    Duplicate,
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactVerdict {
    pub fact: Fact,
    pub supported: bool,
    pub reason: VerdictReason,
}

/// Fact counts for one scoring direction.
///
/// `filtered` facts were removed before scoring; `judged` is the score
/// denominator and includes duplicate and malformed facts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FactCounts {
    pub extracted: usize,
    pub filtered: usize,
    pub judged: usize,
    pub supported: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionReport {
    /// Percent of judged facts that are supported.
    pub score: f64,
    pub counts: FactCounts,
    pub verdicts: Vec<FactVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRecall {
    pub reference_index: usize,
    pub fact_recall: f64,
    pub counts: FactCounts,
    pub verdicts: Vec<FactVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefsReport {
    pub fact_precision: f64,
    pub fact_recall: f64,
    pub prefs: f64,
    pub precision: DirectionReport,
    pub recall: Vec<ReferenceRecall>,
}

#[derive(Debug, thiserror::Error)]
pub enum PrefsError {
    #[error("{0:?} text is empty")]
    EmptyText(FactOrigin),
    #[error("at least one reference summary is required")]
    NoReferences,
    #[error("fact extraction failed for sentence {sentence_index}: {source}")]
    Extraction {
        sentence_index: usize,
        #[source]
        source: BackendError,
    },
    #[error("fact judgment failed for fact {fact_index}: {source}")]
    Judge {
        fact_index: usize,
        #[source]
        source: BackendError,
    },
    #[error("no {0:?} facts left after filtering")]
    NoFactsAfterFiltering(FactOrigin),
}

/// Result of asking the extractor about one sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Extraction {
    Facts(Vec<String>),
    Malformed,
}

/// Extraction and verification services.
pub trait FactJudge: Sync {
    fn extract(&self, sentence: &str) -> Result<Extraction, BackendError>;

    /// `None` when the answer is neither True nor False. `fresh` asks for a
    /// new completion rather than a cached one.
    fn verify(&self, fact: &str, knowledge: &str, fresh: bool) -> Result<Option<bool>, BackendError>;
}

/// Parses a bulleted or numbered fact list; `MALFORMED` or an empty list
/// means the sentence was not a proper statement.
pub fn parse_extraction(reply: &str) -> Extraction {
    let trimmed = reply.trim();
    if trimmed.trim_end_matches(['.', '!']).eq_ignore_ascii_case("malformed") {
        return Extraction::Malformed;
    }
    let facts: Vec<String> = trimmed
        .lines()
        .map(|line| {
            let line = line.trim();
            let line = line.trim_start_matches(['-', '*', '•']).trim_start();
            let digits = line.len() - line.trim_start_matches(|c: char| c.is_ascii_digit()).len();
            if digits > 0 && line[digits..].starts_with(['.', ')']) {
                line[digits + 1..].trim()
            } else {
                line
            }
        })
        .filter(|line| !line.is_empty())
        .map(collapse_whitespace)
        .collect();
    if facts.is_empty() {
        Extraction::Malformed
    } else {
        Extraction::Facts(facts)
    }
}

/// The first of the words "true"/"false" in the reply decides.
pub fn parse_verdict(reply: &str) -> Option<bool> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"(?i)\b(true|false)\b").unwrap());
    re.captures(reply).map(|c| c[1].eq_ignore_ascii_case("true"))
}

/// [`FactJudge`] over extraction and verification backends.
#[derive(Debug, Clone)]
pub struct BackendJudge {
    pub extractor: RoleBackend,
    pub verifier: RoleBackend,
}

impl FactJudge for BackendJudge {
    fn extract(&self, sentence: &str) -> Result<Extraction, BackendError> {
        self.extractor.complete(&[("sentence", sentence)]).map(|r| parse_extraction(&r))
    }

    fn verify(&self, fact: &str, knowledge: &str, fresh: bool) -> Result<Option<bool>, BackendError> {
        let request: BackendRequest = self.verifier.request(&[("knowledge", knowledge), ("fact", fact)]);
        let reply = if fresh {
            self.verifier.client.complete_fresh(&request)?
        } else {
            self.verifier.client.complete(&request)?
        };
        Ok(parse_verdict(&reply))
    }
}

/// Extracts atomic facts sentence by sentence.
pub fn extract_facts(summary: &str, origin: FactOrigin, judge: &dyn FactJudge) -> Result<Vec<Fact>, PrefsError> {
    if summary.trim().is_empty() {
        return Err(PrefsError::EmptyText(origin));
    }
    let mut facts = Vec::new();
    for (i, sentence) in split_sentences(summary).into_iter().enumerate() {
        let extraction = judge
            .extract(sentence)
            .map_err(|source| PrefsError::Extraction { sentence_index: i, source })?;
        match extraction {
            Extraction::Malformed => facts.push(Fact {
                text: sentence.to_string(),
                origin,
                source_sentence_index: i,
                malformed: true,
            }),
            Extraction::Facts(list) => facts.extend(list.into_iter().map(|text| Fact {
                text,
                origin,
                source_sentence_index: i,
                malformed: false,
            })),
        }
    }
    Ok(facts)
}

fn blacklist() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let alternation: Vec<String> =
            FACT_BLACKLIST.iter().map(|p| p.split(' ').map(regex::escape).collect::<Vec<_>>().join(r"\s+")).collect();
        Regex::new(&format!(r"(?i)\b(?:{})\b", alternation.join("|"))).unwrap()
    })
}

/// Word count with a punctuation-only final token ignored.
fn word_count(text: &str) -> usize {
    let mut tokens: Vec<&str> = text.split_whitespace().collect();
    if let Some(last) = tokens.last() {
        if last.trim_end_matches(|c: char| c.is_ascii_punctuation()).is_empty() {
            tokens.pop();
        }
    }
    tokens.len()
}

/// Whether filtering removes `fact`. Malformed facts are never removed.
pub fn is_filtered(fact: &Fact) -> bool {
    !fact.malformed && (blacklist().is_match(&fact.text) || word_count(&fact.text) == 2)
}

/// Drops vague facts, keeping order.
pub fn filter_facts(facts: Vec<Fact>) -> Vec<Fact> {
    facts.into_iter().filter(|f| !is_filtered(f)).collect()
}

/// Lowercase, collapse whitespace, strip terminal punctuation.
pub fn normalize_fact(text: &str) -> String {
    collapse_whitespace(text)
        .to_lowercase()
        .trim_end_matches(|c: char| matches!(c, '.' | '!' | '?' | ';' | ':' | ','))
        .trim_end()
        .to_string()
}

/// Pre-assigns unsupported verdicts to malformed facts and to repeats of an
/// earlier fact. `None` entries still need a judge query.
pub fn mark_duplicates(facts: &[Fact]) -> Vec<Option<FactVerdict>> {
    let mut seen = HashSet::new();
    facts
        .iter()
        .map(|fact| {
            if fact.malformed {
                return Some(FactVerdict { fact: fact.clone(), supported: false, reason: VerdictReason::Malformed });
            }
            if seen.insert(normalize_fact(&fact.text)) {
                None
            } else {
                Some(FactVerdict { fact: fact.clone(), supported: false, reason: VerdictReason::Duplicate })
            }
        })
        .collect()
}

/// One judge query; an unparseable answer is retried once with a fresh
/// completion, then counted unsupported.
pub fn judge_support(fact: &Fact, reference: &str, judge: &dyn FactJudge) -> Result<FactVerdict, BackendError> {
    if fact.malformed {
        return Ok(FactVerdict { fact: fact.clone(), supported: false, reason: VerdictReason::Malformed });
    }
    let answer = match judge.verify(&fact.text, reference, false)? {
        Some(v) => Some(v),
        None => judge.verify(&fact.text, reference, true)?,
    };
    Ok(FactVerdict { fact: fact.clone(), supported: answer.unwrap_or(false), reason: VerdictReason::Judge })
}

/// Options for scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoringOptions {
    /// Maximum judge queries in flight.
    pub concurrency: usize,
}

impl Default for ScoringOptions {
    fn default() -> Self {
        ScoringOptions { concurrency: 4 }
    }
}

/// Scores facts from `source` against `knowledge`.
pub fn score_direction(
    source: &str,
    knowledge: &str,
    origin: FactOrigin,
    judge: &dyn FactJudge,
    options: ScoringOptions,
) -> Result<DirectionReport, PrefsError> {
    if knowledge.trim().is_empty() {
        let other = match origin {
            FactOrigin::Generated => FactOrigin::Reference,
            FactOrigin::Reference => FactOrigin::Generated,
        };
        return Err(PrefsError::EmptyText(other));
    }
    let extracted = extract_facts(source, origin, judge)?;
    let (kept, dropped): (Vec<Fact>, Vec<Fact>) = extracted.iter().cloned().partition(|f| !is_filtered(f));
    if kept.is_empty() {
        return Err(PrefsError::NoFactsAfterFiltering(origin));
    }
    let premarked = mark_duplicates(&kept);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.concurrency.max(1))
        .build()
        .expect("judge thread pool");
    let results: Vec<Result<FactVerdict, BackendError>> = pool.install(|| {
        kept.par_iter()
            .zip(premarked.into_par_iter())
            .map(|(fact, pre)| match pre {
                Some(verdict) => Ok(verdict),
                None => judge_support(fact, knowledge, judge),
            })
            .collect()
    });
    let mut verdicts = Vec::with_capacity(extracted.len());
    for (fact_index, r) in results.into_iter().enumerate() {
        verdicts.push(r.map_err(|source| PrefsError::Judge { fact_index, source })?);
    }
    let judged = verdicts.len();
    let supported = verdicts.iter().filter(|v| v.supported).count();
    let filtered = dropped.len();
    verdicts.extend(
        dropped
            .into_iter()
            .map(|fact| FactVerdict { fact, supported: false, reason: VerdictReason::FilteredOut }),
    );
    Ok(DirectionReport {
        score: 100.0 * supported as f64 / judged as f64,
        counts: FactCounts { extracted: extracted.len(), filtered, judged, supported },
        verdicts,
    })
}

/// Percent of the generated summary's facts supported by the reference.
pub fn fact_precision(generated: &str, reference: &str, judge: &dyn FactJudge) -> Result<f64, PrefsError> {
    score_direction(generated, reference, FactOrigin::Generated, judge, ScoringOptions::default()).map(|d| d.score)
}

/// Percent of the reference's facts supported by the generated summary.
pub fn fact_recall(generated: &str, reference: &str, judge: &dyn FactJudge) -> Result<f64, PrefsError> {
    score_direction(reference, generated, FactOrigin::Reference, judge, ScoringOptions::default()).map(|d| d.score)
}

/// Harmonic mean of precision and recall; 0 when either is 0.
pub fn prefs<T: Real>(precision: T, recall: T) -> T {
    if precision <= T::zero() || recall <= T::zero() {
        return T::zero();
    }
    let two = T::one() + T::one();
    two / (precision.recip() + recall.recip())
}

/// Scores against several references: precision uses their concatenation as
/// knowledge, recall is averaged over references. Identical references are
/// scored once.
pub fn prefs_multi_reference<S: AsRef<str>>(
    generated: &str,
    references: &[S],
    judge: &dyn FactJudge,
    options: ScoringOptions,
) -> Result<PrefsReport, PrefsError> {
    let mut unique: Vec<&str> = Vec::new();
    for r in references {
        let r = r.as_ref().trim();
        if !r.is_empty() && !unique.contains(&r) {
            unique.push(r);
        }
    }
    if unique.is_empty() {
        return Err(PrefsError::NoReferences);
    }
    let knowledge = unique.join("\n\n");
    let precision = score_direction(generated, &knowledge, FactOrigin::Generated, judge, options)?;
    let mut recall = Vec::with_capacity(unique.len());
    for (reference_index, reference) in unique.iter().enumerate() {
        let d = score_direction(reference, generated, FactOrigin::Reference, judge, options)?;
        recall.push(ReferenceRecall {
            reference_index,
            fact_recall: d.score,
            counts: d.counts,
            verdicts: d.verdicts,
        });
    }
    let fact_recall = recall.iter().map(|r| r.fact_recall).sum::<f64>() / recall.len() as f64;
    Ok(PrefsReport {
        fact_precision: precision.score,
        fact_recall,
        prefs: prefs(precision.score, fact_recall),
        precision,
        recall,
    })
}
