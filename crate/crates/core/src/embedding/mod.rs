//! Per-token input vectors.
//!
//! Each row is the concatenation, in this order, of the open-domain word
//! vector, the character-convolution vector, the domain word vector, the
//! entity type bits and the question type one-hot (`[1, 0]` for factoid,
//! `[0, 1]` for list). Disabled sources contribute no columns.

mod charcnn;
mod entities;
mod vectors;

use std::ops::Range;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::corpus::{QuestionType, Token};
use crate::error::{Error, Result};

pub use charcnn::{
    char_backward, char_embed, char_embed_traced, char_index, CharCnnConfig, CharCnnGrads,
    CharCnnParams, CharCnnWeights, CharTrace, ALPHABET_SIZE, UNK_CHAR,
};
pub use entities::{entity_features, EntityDictionary, DEFAULT_MAX_WINDOW, N_ENTITY_TYPES};
pub use vectors::WordVectorTable;

pub const QTYPE_DIM: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct EmbeddingConfig {
    /// Width of the open-domain vectors, `None` when unused.
    pub open_domain_dim: Option<usize>,
    pub domain_dim: Option<usize>,
    pub use_entity_features: bool,
    pub char_cnn: CharCnnConfig,
}

/// Column ranges of each source inside an embedded row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub open_domain: Range<usize>,
    pub chars: Range<usize>,
    pub domain: Range<usize>,
    pub entities: Range<usize>,
    pub qtype: Range<usize>,
}

impl EmbeddingConfig {
    pub fn layout(&self) -> Layout {
        let mut at = 0;
        let mut next = |width: usize| {
            let r = at..at + width;
            at += width;
            r
        };
        Layout {
            open_domain: next(self.open_domain_dim.unwrap_or(0)),
            chars: next(self.char_cnn.n_filters),
            domain: next(self.domain_dim.unwrap_or(0)),
            entities: next(if self.use_entity_features {
                N_ENTITY_TYPES
            } else {
                0
            }),
            qtype: next(QTYPE_DIM),
        }
    }

    pub fn total_dim(&self) -> usize {
        self.layout().qtype.end
    }
}

/// Frozen lookup resources shared by every model.
#[derive(Clone, Debug, Default)]
pub struct Resources {
    pub open_domain: Option<WordVectorTable>,
    pub domain: Option<WordVectorTable>,
    pub entities: Option<EntityDictionary>,
}

impl Resources {
    pub fn check(&self, config: &EmbeddingConfig) -> Result<()> {
        check_table(
            "open-domain",
            config.open_domain_dim,
            self.open_domain.as_ref(),
        )?;
        check_table("domain", config.domain_dim, self.domain.as_ref())?;
        if config.use_entity_features && self.entities.is_none() {
            return Err(Error::ConfigMismatch(
                "entity features requested but no entity dictionary given".into(),
            ));
        }
        Ok(())
    }

    /// Concatenation of every available word vector for `word`; used for the
    /// weighted word-in-question feature.
    pub fn word_vector(&self, word: &str) -> Vec<f64> {
        let mut v = Vec::new();
        for table in [&self.open_domain, &self.domain].into_iter().flatten() {
            v.extend_from_slice(table.lookup(word));
        }
        v
    }
}

fn check_table(name: &str, dim: Option<usize>, table: Option<&WordVectorTable>) -> Result<()> {
    match (dim, table) {
        (None, _) => Ok(()),
        (Some(_), None) => Err(Error::ConfigMismatch(format!(
            "{name} vectors requested but not loaded"
        ))),
        (Some(d), Some(t)) if t.dim() != d => Err(Error::ConfigMismatch(format!(
            "{name} vectors have dimension {}, configuration expects {d}",
            t.dim()
        ))),
        _ => Ok(()),
    }
}

pub fn qtype_one_hot(qtype: QuestionType) -> [f64; QTYPE_DIM] {
    match qtype {
        QuestionType::Factoid => [1.0, 0.0],
        QuestionType::List => [0.0, 1.0],
    }
}

/// Every column except the character vectors, which are left at zero and
/// filled in per step by [`fill_char_columns`] because they are trainable.
pub fn static_features(
    tokens: &[Token],
    qtype: QuestionType,
    resources: &Resources,
    config: &EmbeddingConfig,
) -> Result<Array2<f64>> {
    resources.check(config)?;
    let layout = config.layout();
    let mut out = Array2::zeros((tokens.len(), config.total_dim()));
    if let (Some(table), true) = (&resources.open_domain, !layout.open_domain.is_empty()) {
        for (row, tok) in tokens.iter().enumerate() {
            let v = table.lookup(&tok.text);
            out.slice_mut(s![row, layout.open_domain.clone()])
                .assign(&ndarray::ArrayView1::from(v));
        }
    }
    if let (Some(table), true) = (&resources.domain, !layout.domain.is_empty()) {
        for (row, tok) in tokens.iter().enumerate() {
            let v = table.lookup(&tok.text);
            out.slice_mut(s![row, layout.domain.clone()])
                .assign(&ndarray::ArrayView1::from(v));
        }
    }
    if config.use_entity_features {
        let dict = resources.entities.as_ref().expect("checked above");
        out.slice_mut(s![.., layout.entities.clone()])
            .assign(&entity_features(tokens, dict));
    }
    let one_hot = qtype_one_hot(qtype);
    for row in 0..tokens.len() {
        for (k, col) in layout.qtype.clone().enumerate() {
            out[[row, col]] = one_hot[k];
        }
    }
    Ok(out)
}

/// Writes the character-convolution vectors of `tokens` into `matrix` and
/// returns the traces needed for backpropagation.
pub fn fill_char_columns(
    matrix: &mut Array2<f64>,
    tokens: &[Token],
    params: CharCnnParams<'_>,
    config: &EmbeddingConfig,
) -> Result<Vec<CharTrace>> {
    let cols = config.layout().chars;
    if params.n_filters() != cols.len() {
        return Err(Error::ConfigMismatch(format!(
            "char-CNN has {} filters, configuration expects {}",
            params.n_filters(),
            cols.len()
        )));
    }
    tokens
        .iter()
        .enumerate()
        .map(|(row, tok)| {
            let trace = char_embed_traced(&tok.text, params)?;
            matrix
                .slice_mut(s![row, cols.clone()])
                .assign(&trace.output);
            Ok(trace)
        })
        .collect()
}

/// Full input matrix `[tokens × total_dim]`.
pub fn embed_sequence(
    tokens: &[Token],
    qtype: QuestionType,
    resources: &Resources,
    char_params: CharCnnParams<'_>,
    config: &EmbeddingConfig,
) -> Result<Array2<f64>> {
    let mut m = static_features(tokens, qtype, resources, config)?;
    fill_char_columns(&mut m, tokens, char_params, config)?;
    Ok(m)
}
