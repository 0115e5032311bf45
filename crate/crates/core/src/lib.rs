//! glaudit: a corpus-audit toolkit for measuring and mitigating gender
//! leakage in evaluative text.
//!
//! The pipeline: load or synthesize a labeled corpus, explicitly de-gender
//! it with a lexicon of gender markers, train a gender classifier, surface
//! the implicit cues the classifier leans on (Shapley attributions and
//! gender-contrastive TF-IDF), mask those cues, re-train, and quantify the
//! residual leakage with prediction-flip analysis.

pub mod attribution;
pub mod audit;
pub mod corpus;
pub mod degender;
pub mod error;
pub mod features;
pub mod flip;
pub mod lexicon;
pub mod model;
pub mod report;
pub mod seeding;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{Gender, PartOfSpeech};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
