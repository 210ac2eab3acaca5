use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BackendError, BackendRequest, PromptTemplates, Role, Transport};

/// Returns the prompt, followed by the image reference if there is one.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoTransport;

impl Transport for EchoTransport {
    fn send(&self, request: &BackendRequest) -> Result<String, BackendError> {
        Ok(match &request.image {
            Some(image) => format!("{} {image}", request.prompt),
            None => request.prompt.clone(),
        })
    }
}

/// What a [`TableTransport`] looks up.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum MockKey {
    /// The full rendered prompt.
    #[default]
    Prompt,
    /// The request's image reference.
    Image,
}

/// Fixed lookup table from prompt (or image reference) to completion.
#[derive(Debug, Clone, Default)]
pub struct TableTransport {
    table: BTreeMap<String, String>,
    key: MockKey,
}

impl TableTransport {
    pub fn new(table: BTreeMap<String, String>, key: MockKey) -> Self {
        TableTransport { table, key }
    }

    /// Loads a JSON object `{key: completion}`.
    pub fn from_file(path: &Path, key: MockKey) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)?;
        let table = serde_json::from_str(&text)
            .map_err(|e| BackendError::Parse(format!("{}: {e}", path.display())))?;
        Ok(TableTransport { table, key })
    }
}

impl Transport for TableTransport {
    fn send(&self, request: &BackendRequest) -> Result<String, BackendError> {
        let key = match self.key {
            MockKey::Prompt => request.prompt.as_str(),
            MockKey::Image => request.image.as_deref().unwrap_or(""),
        };
        self.table.get(key).cloned().ok_or_else(|| BackendError::MockMiss(key.to_string()))
    }
}

/// Extraction outcome for one sentence in a [`PrefsFixture`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FixtureExtraction {
    Facts(Vec<String>),
    /// Only the literal `"MALFORMED"` is meaningful here.
    Signal(String),
}

/// Verdict for facts missing from the fixture's table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefaultVerdict {
    #[default]
    Unsupported,
    /// Supported iff the normalized fact occurs in the normalized knowledge.
    KnowledgeContains,
}

/// Offline fact extraction and judging tables.
///
/// Sentences missing from `extractions` pass through as a single fact.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PrefsFixture {
    #[serde(default)]
    pub extractions: BTreeMap<String, FixtureExtraction>,
    #[serde(default)]
    pub verdicts: BTreeMap<String, bool>,
    #[serde(default)]
    pub default_verdict: DefaultVerdict,
}

impl PrefsFixture {
    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| BackendError::Parse(format!("{}: {e}", path.display())))
    }

    /// A fixture whose judge supports any fact found verbatim in the knowledge.
    pub fn self_supporting() -> Self {
        PrefsFixture { default_verdict: DefaultVerdict::KnowledgeContains, ..Default::default() }
    }
}

fn loose(text: &str) -> String {
    crate::text::collapse_whitespace(text)
        .to_lowercase()
        .trim_end_matches(['.', '!', '?'])
        .to_string()
}

/// Serves [`Role::FactExtractor`] and [`Role::FactJudge`] requests from a
/// [`PrefsFixture`], recovering the sentence or fact from the rendered
/// prompt via the configured templates.
#[derive(Debug, Clone)]
pub struct FixtureJudgeTransport {
    fixture: PrefsFixture,
    templates: PromptTemplates,
}

impl FixtureJudgeTransport {
    pub fn new(fixture: PrefsFixture, templates: PromptTemplates) -> Self {
        FixtureJudgeTransport { fixture, templates }
    }

    fn extract(&self, prompt: &str) -> Result<String, BackendError> {
        let sentence = self
            .templates
            .get(Role::FactExtractor)
            .extract("sentence", prompt)
            .map_err(|e| BackendError::Parse(e.to_string()))?;
        Ok(match self.fixture.extractions.get(sentence.trim()) {
            Some(FixtureExtraction::Facts(facts)) => {
                facts.iter().map(|f| format!("- {f}")).collect::<Vec<_>>().join("\n")
            }
            Some(FixtureExtraction::Signal(s)) => s.clone(),
            None => format!("- {}", sentence.trim()),
        })
    }

    fn judge(&self, prompt: &str) -> Result<String, BackendError> {
        let (knowledge, fact) = self
            .templates
            .get(Role::FactJudge)
            .split_at_slot("fact", prompt)
            .map_err(|e| BackendError::Parse(e.to_string()))?;
        let fact = fact.trim();
        let verdict = match self.fixture.verdicts.get(fact) {
            Some(&v) => v,
            None => match self.fixture.default_verdict {
                DefaultVerdict::Unsupported => false,
                DefaultVerdict::KnowledgeContains => loose(knowledge).contains(&loose(fact)),
            },
        };
        Ok(if verdict { "True" } else { "False" }.to_string())
    }
}

impl Transport for FixtureJudgeTransport {
    fn send(&self, request: &BackendRequest) -> Result<String, BackendError> {
        match request.role {
            Role::FactExtractor => self.extract(&request.prompt),
            Role::FactJudge => self.judge(&request.prompt),
            other => Err(BackendError::NotConfigured(other)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::GenerationParams;

    #[test]
    fn table_lookup() {
        let t = TableTransport::new(BTreeMap::from([("p".into(), "out".into())]), MockKey::Prompt);
        let req = BackendRequest::new(Role::DialogueSummarizer, "p", GenerationParams::default());
        assert_eq!(t.send(&req).unwrap(), "out");
        let miss = BackendRequest::new(Role::DialogueSummarizer, "q", GenerationParams::default());
        assert!(matches!(t.send(&miss), Err(BackendError::MockMiss(_))));
    }

    #[test]
    fn fixture_parses_malformed_signal() {
        let fx: PrefsFixture = serde_json::from_str(
            r#"{"extractions": {"a.": ["x y z."], "b": "MALFORMED"}, "verdicts": {"x y z.": true}}"#,
        )
        .unwrap();
        assert_eq!(fx.extractions["b"], FixtureExtraction::Signal("MALFORMED".into()));
        assert_eq!(fx.default_verdict, DefaultVerdict::Unsupported);
    }

    #[test]
    fn judge_reads_fact_from_prompt() {
        let templates = PromptTemplates::default();
        let judge = templates.get(Role::FactJudge);
        let t = FixtureJudgeTransport::new(PrefsFixture::self_supporting(), templates.clone());
        let ask = |k: &str, f: &str| {
            let req = BackendRequest::new(
                Role::FactJudge,
                judge.render(&[("knowledge", k), ("fact", f)]),
                GenerationParams::default(),
            );
            t.send(&req).unwrap()
        };
        assert_eq!(ask("Nick flies to Paris. Brooke stays.", "Nick flies to Paris."), "True");
        assert_eq!(ask("Brooke stays.", "Nick flies to Paris."), "False");
    }
}
