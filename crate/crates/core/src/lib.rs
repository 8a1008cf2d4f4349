//! Sentiment data augmentation with chat-model prompts.
//!
//! The crate covers the whole experiment pipeline: loading labeled corpora,
//! rendering the four augmentation prompts, calling a chat-completion
//! backend through a caching client, building the eight training-set
//! combinations, training a reference classifier, scoring it and
//! benchmarking inference speed.
//!
//! ```
//! use sentaug::prompt::{render_prompt, PromptStrategy};
//!
//! let msg = render_prompt(PromptStrategy::Para, "The staff were lovely.", None).unwrap();
//! assert!(msg.content.ends_with("statement: The staff were lovely."));
//! ```

pub mod augment;
pub mod bench;
pub mod combine;
pub mod corpus;
pub mod fixtures;
pub mod llm;
pub mod metrics;
pub mod profile;
pub mod prompt;
pub mod runner;
pub mod train;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpora.md")]
    mod corpora {}
    #[doc = include_str!("../../../book/src/prompts.md")]
    mod prompts {}
    #[doc = include_str!("../../../book/src/augmentation.md")]
    mod augmentation {}
    #[doc = include_str!("../../../book/src/combinations.md")]
    mod combinations {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/benchmarking.md")]
    mod benchmarking {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
