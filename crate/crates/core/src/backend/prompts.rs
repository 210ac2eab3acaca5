use std::collections::BTreeMap;
use std::path::Path;

use super::Role;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template has no {{{0}}} placeholder")]
    MissingPlaceholder(String),
    #[error("template must end with {{{0}}} followed by fixed text to locate it in a rendered prompt")]
    UnrecoverableSlot(String),
    #[error("prompt does not match the template")]
    NoMatch,
    #[error("cannot read template {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Literal(String),
    Slot(String),
}

/// Prompt text with `{name}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
    pieces: Vec<Piece>,
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let mut pieces = Vec::new();
        let mut literal = String::new();
        let mut rest = text.as_str();
        while let Some(open) = rest.find('{') {
            let after = &rest[open + 1..];
            let close = after.find('}');
            let name = close.map(|c| &after[..c]);
            match name {
                Some(n) if !n.is_empty() && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') => {
                    literal.push_str(&rest[..open]);
                    if !literal.is_empty() {
                        pieces.push(Piece::Literal(std::mem::take(&mut literal)));
                    }
                    pieces.push(Piece::Slot(n.to_string()));
                    rest = &after[n.len() + 1..];
                }
                _ => {
                    literal.push_str(&rest[..=open]);
                    rest = after;
                }
            }
        }
        literal.push_str(rest);
        if !literal.is_empty() {
            pieces.push(Piece::Literal(literal));
        }
        PromptTemplate { text, pieces }
    }

    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        std::fs::read_to_string(path)
            .map(Self::new)
            .map_err(|e| TemplateError::Io { path: path.display().to_string(), message: e.to_string() })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn has_slot(&self, name: &str) -> bool {
        self.pieces.iter().any(|p| matches!(p, Piece::Slot(s) if s == name))
    }

    /// Substitutes placeholders in one pass; inserted values are not rescanned.
    /// Unknown placeholders render as empty text.
    pub fn render(&self, values: &[(&str, &str)]) -> String {
        let mut out = String::with_capacity(self.text.len());
        for piece in &self.pieces {
            match piece {
                Piece::Literal(l) => out.push_str(l),
                Piece::Slot(name) => {
                    if let Some((_, v)) = values.iter().find(|(k, _)| k == name) {
                        out.push_str(v);
                    }
                }
            }
        }
        out
    }

    /// Recovers the value substituted for `name` in `prompt`.
    ///
    /// Works when `name` is the last placeholder and is preceded by literal
    /// text (or is the only placeholder).
    pub fn extract<'p>(&self, name: &str, prompt: &'p str) -> Result<&'p str, TemplateError> {
        self.split_at_slot(name, prompt).map(|(_, value)| value)
    }

    /// Like [`PromptTemplate::extract`], also returning the rendered text
    /// that precedes the slot's leading literal.
    pub fn split_at_slot<'p>(&self, name: &str, prompt: &'p str) -> Result<(&'p str, &'p str), TemplateError> {
        let idx = self
            .pieces
            .iter()
            .rposition(|p| matches!(p, Piece::Slot(s) if s == name))
            .ok_or_else(|| TemplateError::MissingPlaceholder(name.to_string()))?;
        if self.pieces[idx + 1..].iter().any(|p| matches!(p, Piece::Slot(_))) {
            return Err(TemplateError::UnrecoverableSlot(name.to_string()));
        }
        let suffix = match self.pieces.get(idx + 1) {
            Some(Piece::Literal(l)) => l.as_str(),
            _ => "",
        };
        let body = prompt.strip_suffix(suffix).ok_or(TemplateError::NoMatch)?;
        let only_slot = self.pieces.iter().filter(|p| matches!(p, Piece::Slot(_))).count() == 1;
        match idx.checked_sub(1).map(|i| &self.pieces[i]) {
            None => Ok(("", body)),
            Some(Piece::Literal(prefix)) if only_slot => body
                .strip_prefix(prefix.as_str())
                .map(|v| ("", v))
                .ok_or(TemplateError::NoMatch),
            Some(Piece::Literal(prefix)) => {
                let at = body.rfind(prefix.as_str()).ok_or(TemplateError::NoMatch)?;
                Ok((&body[..at], &body[at + prefix.len()..]))
            }
            Some(Piece::Slot(_)) => Err(TemplateError::UnrecoverableSlot(name.to_string())),
        }
    }
}

/// The template for each backend role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    by_role: BTreeMap<Role, PromptTemplate>,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        let by_role = Role::ALL.iter().map(|&r| (r, PromptTemplate::new(Self::shipped(r)))).collect();
        PromptTemplates { by_role }
    }
}

impl PromptTemplates {
    /// Shipped default template text for `role`.
    pub fn shipped(role: Role) -> &'static str {
        match role {
            Role::DialogueSummarizer => include_str!("../../prompts/dialogue_summarizer.txt"),
            Role::FusionSummarizer => include_str!("../../prompts/fusion_summarizer.txt"),
            Role::FactExtractor => include_str!("../../prompts/fact_extractor.txt"),
            Role::FactJudge => include_str!("../../prompts/fact_judge.txt"),
            Role::VisionCaptioner => include_str!("../../prompts/vision_captioner.txt"),
        }
    }

    pub fn get(&self, role: Role) -> &PromptTemplate {
        &self.by_role[&role]
    }

    pub fn set(&mut self, role: Role, template: PromptTemplate) {
        self.by_role.insert(role, template);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_is_single_pass() {
        let t = PromptTemplate::new("K: {knowledge}\nF: {fact}?");
        assert_eq!(t.render(&[("knowledge", "{fact}"), ("fact", "x")]), "K: {fact}\nF: x?");
    }

    #[test]
    fn braces_that_are_not_slots_stay_literal() {
        let t = PromptTemplate::new("json {\"a\": 1} {x}");
        assert_eq!(t.render(&[("x", "y")]), "json {\"a\": 1} y");
    }

    #[test]
    fn extracts_last_slot() {
        let t = PromptTemplates::default();
        let judge = t.get(Role::FactJudge);
        let p = judge.render(&[("knowledge", "Input: tricky"), ("fact", "Nick left.")]);
        assert_eq!(judge.extract("fact", &p).unwrap(), "Nick left.");
        let ex = t.get(Role::FactExtractor);
        let p = ex.render(&[("sentence", "Sentence: nested. Ok.")]);
        assert_eq!(ex.extract("sentence", &p).unwrap(), "Sentence: nested. Ok.");
        let plain = PromptTemplate::new("{dialogue}");
        assert_eq!(plain.extract("dialogue", "A: hi").unwrap(), "A: hi");
    }

    #[test]
    fn extraction_failures() {
        let t = PromptTemplate::new("{a}{b}");
        assert_eq!(t.extract("b", "xy"), Err(TemplateError::UnrecoverableSlot("b".into())));
        assert_eq!(t.extract("c", "xy"), Err(TemplateError::MissingPlaceholder("c".into())));
        let t = PromptTemplate::new("Q: {a}!");
        assert_eq!(t.extract("a", "nope"), Err(TemplateError::NoMatch));
    }

    #[test]
    fn vision_default() {
        assert_eq!(PromptTemplates::default().get(Role::VisionCaptioner).text(), "A scene from a TV show in which");
    }
}
