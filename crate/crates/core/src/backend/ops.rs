use std::sync::Arc;

use super::{BackendClient, BackendError, BackendRequest, GenerationParams, PromptTemplate, Role};

/// A client bound to its prompt template and generation parameters.
#[derive(Debug, Clone)]
pub struct RoleBackend {
    pub client: Arc<BackendClient>,
    pub template: PromptTemplate,
    pub params: GenerationParams,
}

impl RoleBackend {
    pub fn new(client: Arc<BackendClient>, template: PromptTemplate, params: GenerationParams) -> Self {
        RoleBackend { client, template, params }
    }

    pub fn role(&self) -> Role {
        self.client.role()
    }

    pub fn request(&self, values: &[(&str, &str)]) -> BackendRequest {
        BackendRequest::new(self.role(), self.template.render(values), self.params.clone())
    }

    pub fn complete(&self, values: &[(&str, &str)]) -> Result<String, BackendError> {
        self.client.complete(&self.request(values))
    }
}

/// Where a scene's raw visual captions come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaptionInput<'a> {
    /// Caption sentences computed offline; returned verbatim.
    Precomputed(&'a [String]),
    /// Keyframe references sent to the vision captioner, one request each.
    Images(&'a [String]),
}

/// Summarizes one scene's dialogue with a single request.
///
/// The `{dialogue}` slot receives one `Speaker: text` line per utterance.
pub fn summarize_scene<S: AsRef<str>, T: AsRef<str>>(
    lines: &[(S, T)],
    backend: &RoleBackend,
) -> Result<String, BackendError> {
    if lines.is_empty() {
        return Err(BackendError::EmptyPrompt(backend.role()));
    }
    let dialogue = lines
        .iter()
        .map(|(s, t)| format!("{}: {}", s.as_ref(), t.as_ref()).trim_end().to_string())
        .collect::<Vec<_>>()
        .join("\n");
    let summary = backend.complete(&[("dialogue", &dialogue)])?;
    let summary = summary.trim_end();
    if summary.trim().is_empty() {
        return Err(BackendError::EmptyCompletion { role: backend.role() });
    }
    Ok(summary.to_string())
}

/// Raw caption sentences for one scene, before filtering.
pub fn caption_scene(input: CaptionInput<'_>, backend: Option<&RoleBackend>) -> Result<Vec<String>, BackendError> {
    match input {
        CaptionInput::Precomputed(sentences) => {
            if sentences.is_empty() {
                return Err(BackendError::EmptyPrompt(Role::VisionCaptioner));
            }
            Ok(sentences.to_vec())
        }
        CaptionInput::Images(images) => {
            if images.is_empty() {
                return Err(BackendError::EmptyPrompt(Role::VisionCaptioner));
            }
            let backend = backend.ok_or(BackendError::NotConfigured(Role::VisionCaptioner))?;
            let prompt = backend.template.render(&[]);
            images
                .iter()
                .map(|image| {
                    let request =
                        BackendRequest::new(backend.role(), prompt.clone(), backend.params.clone()).with_image(image);
                    let reply = backend.client.complete(&request)?;
                    // Captioners that continue the prompt may echo it back.
                    let reply = reply.trim();
                    Ok(reply.strip_prefix(prompt.trim()).unwrap_or(reply).trim().to_string())
                })
                .collect()
        }
    }
}
