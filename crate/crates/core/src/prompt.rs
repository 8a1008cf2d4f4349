//! The four augmentation prompts and the chat sessions that carry them.
//!
//! Para and ParaConv share one conversation: the ParaConv turn is only sent
//! after the assistant has answered Para, so its request transcript holds the
//! earlier exchange. Insp and InspLab each get a fresh session.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledDocument, SentimentLabel};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("strategy {0} does not take a label")]
    UnexpectedLabel(PromptStrategy),
    #[error("strategy insp-lab requires the gold label")]
    MissingLabel,
    #[error("prompt text is empty")]
    EmptyText,
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error("document {id:?} is not an original training document")]
    NotOriginalTrain { id: String },
    #[error("session protocol violation: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptStrategy {
    Para,
    ParaConv,
    Insp,
    InspLab,
}

impl PromptStrategy {
    pub const ALL: [PromptStrategy; 4] = [
        PromptStrategy::Para,
        PromptStrategy::ParaConv,
        PromptStrategy::Insp,
        PromptStrategy::InspLab,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            PromptStrategy::Para => "para",
            PromptStrategy::ParaConv => "para-conv",
            PromptStrategy::Insp => "insp",
            PromptStrategy::InspLab => "insp-lab",
        }
    }

    /// Raw template with `{text}` and `{label}` placeholders.
    pub fn template(self) -> &'static str {
        match self {
            PromptStrategy::Para => PARA_TEMPLATE,
            PromptStrategy::ParaConv => PARA_CONV_TEMPLATE,
            PromptStrategy::Insp => INSP_TEMPLATE,
            PromptStrategy::InspLab => INSP_LAB_TEMPLATE,
        }
    }

    pub fn takes_label(self) -> bool {
        self == PromptStrategy::InspLab
    }

    /// Parses a comma-separated strategy list such as `para,insp-lab`.
    pub fn parse_list(list: &str) -> Result<Vec<PromptStrategy>, PromptError> {
        let mut out: Vec<PromptStrategy> = list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()?;
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl fmt::Display for PromptStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for PromptStrategy {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        PromptStrategy::ALL
            .into_iter()
            .find(|p| p.slug() == norm || p.slug().replace('-', "") == norm)
            .ok_or_else(|| PromptError::UnknownStrategy(s.to_string()))
    }
}

pub const PARA_TEMPLATE: &str =
    "Generate a paraphrase for the following text, preserving the sentiment of the following statement: {text}";
pub const PARA_CONV_TEMPLATE: &str = "Generate another paraphrase by changing more words also keeping the sentiment";
pub const INSP_TEMPLATE: &str = "Based on the given text, generate another text with a completely new theme, but be inspired by the original text and keep the sentiment of the old one in the new text. Original text: {text}";
pub const INSP_LAB_TEMPLATE: &str = "Based on the given text, generate another text with a completely new theme, but be inspired by the original text and keep the {label} sentiment. Original text: {text}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Renders the user turn for `strategy`.
///
/// The label must be given for InspLab and only for InspLab. Substitution is
/// literal; the document text is not otherwise touched.
pub fn render_prompt(
    strategy: PromptStrategy,
    text: &str,
    label: Option<SentimentLabel>,
) -> Result<ChatMessage, PromptError> {
    if text.is_empty() {
        return Err(PromptError::EmptyText);
    }
    let content = match (strategy, label) {
        (PromptStrategy::InspLab, None) => return Err(PromptError::MissingLabel),
        // {label} first: the document text may itself contain "{label}".
        (PromptStrategy::InspLab, Some(label)) => INSP_LAB_TEMPLATE
            .replacen("{label}", label.name(), 1)
            .replacen("{text}", text, 1),
        (s, Some(_)) => return Err(PromptError::UnexpectedLabel(s)),
        (s, None) => s.template().replacen("{text}", text, 1),
    };
    Ok(ChatMessage::user(content))
}

/// Human-readable listing of all four templates, one block per strategy.
pub fn show_templates() -> String {
    let mut out = String::new();
    for s in PromptStrategy::ALL {
        out.push_str(&format!("[{}]\n{}\n\n", s.slug(), s.template()));
    }
    out
}

/// An ordered chat transcript.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatSession {
    messages: Vec<ChatMessage>,
    strategy_tags: Vec<PromptStrategy>,
}

impl ChatSession {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn messages(&self) -> &[ChatMessage] {
        &self.messages
    }

    pub fn strategy_tags(&self) -> &[PromptStrategy] {
        &self.strategy_tags
    }

    fn expected_role(&self) -> Role {
        match self.messages.iter().rev().find(|m| m.role != Role::System) {
            Some(m) if m.role == Role::User => Role::Assistant,
            _ => Role::User,
        }
    }

    /// Appends a user turn tagged with the strategy that produced it.
    pub fn push_user(&mut self, strategy: PromptStrategy, msg: ChatMessage) -> Result<(), PromptError> {
        if msg.role != Role::User {
            return Err(PromptError::Protocol("expected a user message".into()));
        }
        if self.expected_role() != Role::User {
            return Err(PromptError::Protocol(
                "a user turn must follow an assistant reply".into(),
            ));
        }
        if msg.content.is_empty() {
            return Err(PromptError::Protocol("empty user message".into()));
        }
        let mixes_insp = |a: PromptStrategy, b: PromptStrategy| {
            matches!(
                (a, b),
                (PromptStrategy::Insp, PromptStrategy::InspLab) | (PromptStrategy::InspLab, PromptStrategy::Insp)
            )
        };
        if self.strategy_tags.iter().any(|t| mixes_insp(*t, strategy)) {
            return Err(PromptError::Protocol(
                "insp and insp-lab must not share a session".into(),
            ));
        }
        self.messages.push(msg);
        if !self.strategy_tags.contains(&strategy) {
            self.strategy_tags.push(strategy);
        }
        Ok(())
    }

    pub fn push_assistant(&mut self, content: impl Into<String>) -> Result<(), PromptError> {
        let content = content.into();
        if self.expected_role() != Role::Assistant {
            return Err(PromptError::Protocol(
                "an assistant reply must follow a user turn".into(),
            ));
        }
        if content.is_empty() {
            return Err(PromptError::Protocol("empty assistant message".into()));
        }
        self.messages.push(ChatMessage::assistant(content));
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionKind {
    /// Para, then ParaConv in the same conversation.
    Paraphrase,
    Inspiration,
    LabeledInspiration,
}

/// One planned conversation: the user turns to send, in order, each followed
/// by an assistant reply before the next is issued.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionBlueprint {
    pub kind: SessionKind,
    pub turns: Vec<(PromptStrategy, ChatMessage)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionPlan {
    pub doc_id: String,
    pub sessions: Vec<SessionBlueprint>,
}

impl SessionPlan {
    pub fn expected_completions(&self) -> usize {
        self.sessions.iter().map(|s| s.turns.len()).sum()
    }
}

/// Plans the three sessions (four completions) needed for one training document.
pub fn build_session_plan(doc: &LabeledDocument) -> Result<SessionPlan, PromptError> {
    if !doc.is_original_train() {
        return Err(PromptError::NotOriginalTrain { id: doc.id.clone() });
    }
    let turn = |s: PromptStrategy| -> Result<(PromptStrategy, ChatMessage), PromptError> {
        let label = s.takes_label().then_some(doc.label);
        Ok((s, render_prompt(s, &doc.text, label)?))
    };
    Ok(SessionPlan {
        doc_id: doc.id.clone(),
        sessions: vec![
            SessionBlueprint {
                kind: SessionKind::Paraphrase,
                turns: vec![turn(PromptStrategy::Para)?, turn(PromptStrategy::ParaConv)?],
            },
            SessionBlueprint {
                kind: SessionKind::Inspiration,
                turns: vec![turn(PromptStrategy::Insp)?],
            },
            SessionBlueprint {
                kind: SessionKind::LabeledInspiration,
                turns: vec![turn(PromptStrategy::InspLab)?],
            },
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Origin, Split};

    #[test]
    fn para_example() {
        let msg = render_prompt(PromptStrategy::Para, "I love it", None).unwrap();
        assert_eq!(msg.role, Role::User);
        assert_eq!(
            msg.content,
            "Generate a paraphrase for the following text, preserving the sentiment of the following statement: I love it"
        );
    }

    #[test]
    fn insp_lab_interpolates_label() {
        let msg = render_prompt(PromptStrategy::InspLab, "Bad service.", Some(SentimentLabel::Negative)).unwrap();
        assert!(msg.content.contains("keep the Negative sentiment"));
        assert!(msg.content.ends_with("Original text: Bad service."));
    }

    #[test]
    fn para_conv_ignores_text() {
        let a = render_prompt(PromptStrategy::ParaConv, "one", None).unwrap();
        let b = render_prompt(PromptStrategy::ParaConv, "two", None).unwrap();
        assert_eq!(a, b);
        assert!(a.content.contains("changing more words also keeping the sentiment"));
    }

    #[test]
    fn label_rules() {
        assert_eq!(
            render_prompt(PromptStrategy::InspLab, "x", None),
            Err(PromptError::MissingLabel)
        );
        assert_eq!(
            render_prompt(PromptStrategy::Insp, "x", Some(SentimentLabel::Positive)),
            Err(PromptError::UnexpectedLabel(PromptStrategy::Insp))
        );
        assert_eq!(
            render_prompt(PromptStrategy::Para, "", None),
            Err(PromptError::EmptyText)
        );
    }

    #[test]
    fn text_is_substituted_literally() {
        let text = "  {label} stays {text}  ";
        let msg = render_prompt(PromptStrategy::Insp, text, None).unwrap();
        assert!(msg.content.ends_with("Original text:   {label} stays {text}  "));
    }

    #[test]
    fn plan_has_three_sessions_and_four_completions() {
        let doc = LabeledDocument::original("d1", "good food", SentimentLabel::Positive, Split::Train);
        let plan = build_session_plan(&doc).unwrap();
        assert_eq!(plan.sessions.len(), 3);
        assert_eq!(plan.expected_completions(), 4);
        let strategies: Vec<_> = plan.sessions.iter().flat_map(|s| s.turns.iter().map(|t| t.0)).collect();
        assert_eq!(strategies, PromptStrategy::ALL);
        let b = &plan.sessions[1].turns;
        let c = &plan.sessions[2].turns;
        assert!(b.iter().all(|m| !c.contains(m)));
    }

    #[test]
    fn plan_rejects_non_train_or_augmented() {
        let test_doc = LabeledDocument::original("d1", "x", SentimentLabel::Positive, Split::Test);
        assert!(build_session_plan(&test_doc).is_err());
        let mut aug = LabeledDocument::original("d2", "x", SentimentLabel::Positive, Split::Train);
        aug.origin = Origin::Augmented;
        assert!(build_session_plan(&aug).is_err());
    }

    #[test]
    fn session_transcript_before_second_turn() {
        let doc = LabeledDocument::original("d1", "good food", SentimentLabel::Positive, Split::Train);
        let plan = build_session_plan(&doc).unwrap();
        let mut session = ChatSession::new();
        let [(s1, m1), (s2, m2)] = <[_; 2]>::try_from(plan.sessions[0].turns.clone()).unwrap();
        session.push_user(s1, m1).unwrap();
        assert!(session.push_user(s2, m2.clone()).is_err());
        session.push_assistant("reply one").unwrap();
        session.push_user(s2, m2).unwrap();
        let roles: Vec<_> = session.messages().iter().map(|m| m.role).collect();
        assert_eq!(roles, [Role::User, Role::Assistant, Role::User]);
    }

    #[test]
    fn session_never_mixes_insp_variants() {
        let mut s = ChatSession::new();
        s.push_user(PromptStrategy::Insp, ChatMessage::user("a")).unwrap();
        s.push_assistant("b").unwrap();
        assert!(s.push_user(PromptStrategy::InspLab, ChatMessage::user("c")).is_err());
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!(
            PromptStrategy::parse_list("insp-lab,para,para_conv,insp").unwrap(),
            PromptStrategy::ALL
        );
        assert_eq!("ParaConv".parse::<PromptStrategy>().unwrap(), PromptStrategy::ParaConv);
        assert!("para-x".parse::<PromptStrategy>().is_err());
    }
}
