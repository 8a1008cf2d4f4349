use super::{Backend, BackendError, BackendKind, CompletionRequest};

/// Deterministic offline backend.
///
/// Replies `AUG[<first 8 digest hex chars>] <final user message, words reversed>`.
/// The digest covers the whole transcript, so two turns of one session never
/// produce the same tag.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockBackend;

impl MockBackend {
    pub fn reply(request: &CompletionRequest, digest: &str) -> String {
        let last = request.final_user_message().unwrap_or_default();
        let reversed: Vec<&str> = last.split_whitespace().rev().collect();
        format!("AUG[{}] {}", &digest[..8], reversed.join(" "))
    }
}

impl Backend for MockBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Mock
    }

    fn call(&self, request: &CompletionRequest, digest: &str) -> Result<String, BackendError> {
        Ok(Self::reply(request, digest))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::LlmClient;
    use crate::prompt::{render_prompt, ChatMessage, PromptStrategy};

    #[test]
    fn reverses_final_user_words() {
        let req = CompletionRequest::new("m", vec![ChatMessage::user("a b c")]);
        let out = LlmClient::mock().complete(&req).unwrap();
        assert_eq!(out.content, format!("AUG[{}] c b a", &req.digest()[..8]));
        assert_eq!(out.backend, BackendKind::Mock);
    }

    #[test]
    fn second_turn_has_different_tag() {
        let client = LlmClient::mock();
        let first = CompletionRequest::new(
            "m",
            vec![render_prompt(PromptStrategy::Para, "good food", None).unwrap()],
        );
        let r1 = client.complete(&first).unwrap();
        let mut msgs = first.messages.clone();
        msgs.push(ChatMessage::assistant(r1.content.clone()));
        msgs.push(render_prompt(PromptStrategy::ParaConv, "good food", None).unwrap());
        let r2 = client.complete(&CompletionRequest::new("m", msgs)).unwrap();
        assert_ne!(r1.content[..13], r2.content[..13]);
    }

    #[test]
    fn different_documents_differ() {
        let client = LlmClient::mock();
        let a = CompletionRequest::new(
            "m",
            vec![render_prompt(PromptStrategy::Insp, "good food", None).unwrap()],
        );
        let b = CompletionRequest::new(
            "m",
            vec![render_prompt(PromptStrategy::Insp, "bad food", None).unwrap()],
        );
        assert_ne!(
            client.complete(&a).unwrap().content,
            client.complete(&b).unwrap().content
        );
    }
}
