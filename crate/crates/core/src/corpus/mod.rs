//! Question/snippet datasets: tokenization, loading of SQuAD and BioASQ
//! files, gold span annotation and dataset statistics.
//!
//! All character offsets in this module are Unicode code point offsets,
//! never byte offsets.

mod annotate;
mod loaders;
mod stats;
mod tokenize;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use annotate::{annotate_spans, fold_case};
pub use loaders::{load_bioasq, load_squad, parse_bioasq, parse_squad};
pub use stats::{dataset_stats, DatasetStats};
pub use tokenize::tokenize;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// Offset of the first character in the source text.
    pub char_begin: usize,
    /// Exclusive end offset.
    pub char_end: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snippet {
    pub id: String,
    pub text: String,
    pub tokens: Vec<Token>,
}

impl Snippet {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Snippet {
            id: id.into(),
            text,
            tokens,
        }
    }

    /// Character range covered by tokens `start..=end`.
    pub fn char_range(&self, start: usize, end: usize) -> (usize, usize) {
        (self.tokens[start].char_begin, self.tokens[end].char_end)
    }

    /// Original surface text of tokens `start..=end`, including the
    /// whitespace between them as it appears in the snippet.
    pub fn surface(&self, start: usize, end: usize) -> String {
        let (begin, end) = self.char_range(start, end);
        self.text.chars().skip(begin).take(end - begin).collect()
    }
}

/// A token span inside one snippet; `token_end` is inclusive.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpanRef {
    pub snippet_id: String,
    pub token_start: usize,
    pub token_end: usize,
}

/// One gold answer with its accepted synonyms and every place it occurs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnswerGroup {
    pub synonyms: Vec<String>,
    #[serde(default)]
    pub spans: Vec<SpanRef>,
}

impl AnswerGroup {
    pub fn is_extractable(&self) -> bool {
        !self.spans.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionType {
    Factoid,
    List,
}

impl QuestionType {
    pub fn as_str(self) -> &'static str {
        match self {
            QuestionType::Factoid => "factoid",
            QuestionType::List => "list",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub qtype: QuestionType,
    pub text: String,
    pub question_tokens: Vec<Token>,
    pub snippets: Vec<Snippet>,
    pub gold: Vec<AnswerGroup>,
}

impl Question {
    /// Builds a question, tokenizing its text and annotating every gold
    /// group against the snippets.
    pub fn annotated(
        id: impl Into<String>,
        qtype: QuestionType,
        text: impl Into<String>,
        snippets: Vec<Snippet>,
        synonym_groups: Vec<Vec<String>>,
    ) -> Self {
        let text = text.into();
        let gold = synonym_groups
            .into_iter()
            .map(|synonyms| AnswerGroup {
                spans: annotate_spans(&snippets, &synonyms),
                synonyms,
            })
            .collect();
        Question {
            id: id.into(),
            qtype,
            question_tokens: tokenize(&text),
            text,
            snippets,
            gold,
        }
    }

    /// True when at least one gold group occurs in the snippets.
    pub fn is_extractable(&self) -> bool {
        self.gold.iter().any(AnswerGroup::is_extractable)
    }

    pub fn snippet_index(&self, snippet_id: &str) -> Option<usize> {
        self.snippets.iter().position(|s| s.id == snippet_id)
    }
}

/// Lowercases and collapses runs of whitespace to single spaces. Used both
/// to deduplicate predicted answers and to match them against gold strings.
pub fn normalize_answer(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Returns the questions that have at least one annotated gold span, in
/// their original order.
pub fn filter_trainable(questions: &[Question]) -> Vec<Question> {
    questions
        .iter()
        .filter(|q| q.is_extractable())
        .cloned()
        .collect()
}

/// Canonical on-disk dataset consumed by every downstream command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub questions: Vec<Question>,
}

impl Dataset {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path)?;
        serde_json::from_str(&raw)
            .map_err(|e| Error::malformed(path.display().to_string(), e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("dataset serializes");
        out.push('\n');
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }
}
