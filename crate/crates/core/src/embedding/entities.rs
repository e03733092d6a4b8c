//! Dictionary-based entity type features.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::Array2;

use crate::corpus::{tokenize, Token};
use crate::error::{Error, Result};

/// Number of semantic type bits per token.
pub const N_ENTITY_TYPES: usize = 127;
pub const DEFAULT_MAX_WINDOW: usize = 8;

/// Surface strings (tokenized, lowercased, single-spaced) mapped to the
/// set of entity types they denote.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EntityDictionary {
    entries: HashMap<String, BTreeSet<usize>>,
    max_window: usize,
}

fn normalize(surface: &str) -> String {
    tokenize(surface)
        .iter()
        .map(|t| t.text.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

impl EntityDictionary {
    pub fn new() -> Self {
        EntityDictionary {
            entries: HashMap::new(),
            max_window: DEFAULT_MAX_WINDOW,
        }
    }

    pub fn with_max_window(mut self, max_window: usize) -> Self {
        self.max_window = max_window.max(1);
        self
    }

    pub fn insert(&mut self, surface: &str, type_index: usize) -> Result<()> {
        if type_index >= N_ENTITY_TYPES {
            return Err(Error::malformed(
                surface,
                format!("entity type {type_index} out of range 0..{N_ENTITY_TYPES}"),
            ));
        }
        let key = normalize(surface);
        if key.is_empty() {
            return Err(Error::malformed(surface, "empty entity surface"));
        }
        self.entries.entry(key).or_default().insert(type_index);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reads `surface<TAB>type_index` lines; repeated surfaces OR their types.
    pub fn read_tsv<R: BufRead>(reader: R, source: &str) -> Result<Self> {
        let mut dict = EntityDictionary::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let at = || format!("{source}:{}", n + 1);
            let (surface, index) = line
                .split_once('\t')
                .ok_or_else(|| Error::malformed(at(), "expected `surface<TAB>type_index`"))?;
            let index: usize = index
                .trim()
                .parse()
                .map_err(|e: std::num::ParseIntError| Error::malformed(at(), e.to_string()))?;
            dict.insert(surface, index).map_err(|e| match e {
                Error::MalformedInput { message, .. } => Error::malformed(at(), message),
                other => other,
            })?;
        }
        Ok(dict)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::read_tsv(
            BufReader::new(File::open(path)?),
            &path.display().to_string(),
        )
    }
}

/// Bit matrix `[tokens × 127]`. Every token window of up to
/// `max_window` tokens whose normalized text is a dictionary entry sets
/// that entry's type bits on all covered tokens.
pub fn entity_features(tokens: &[Token], dict: &EntityDictionary) -> Array2<f64> {
    let mut bits = Array2::zeros((tokens.len(), N_ENTITY_TYPES));
    if dict.is_empty() {
        return bits;
    }
    let lowered: Vec<String> = tokens.iter().map(|t| t.text.to_lowercase()).collect();
    for start in 0..tokens.len() {
        let mut window = String::new();
        for end in start..tokens.len().min(start + dict.max_window) {
            if end > start {
                window.push(' ');
            }
            window.push_str(&lowered[end]);
            if let Some(types) = dict.entries.get(&window) {
                for row in start..=end {
                    for &t in types {
                        bits[[row, t]] = 1.0;
                    }
                }
            }
        }
    }
    bits
}
