//! Pretrained word vectors in the plain text format used by GloVe: one
//! entry per line, the word followed by its space-separated components.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Frozen lookup table. Keys are lowercased; unknown words map to the
/// all-zero vector.
#[derive(Clone, Debug, PartialEq)]
pub struct WordVectorTable {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
    oov: Vec<f64>,
}

impl WordVectorTable {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "word vectors need a positive dimension");
        WordVectorTable {
            dim,
            entries: HashMap::new(),
            oov: vec![0.0; dim],
        }
    }

    /// Inserts `vector` under the lowercased `word` unless the key exists.
    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "vector for `{word}` has {} components, table has {}",
                vector.len(),
                self.dim
            )));
        }
        self.entries.entry(word.to_lowercase()).or_insert(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(&word.to_lowercase())
    }

    pub fn lookup(&self, word: &str) -> &[f64] {
        self.entries
            .get(&word.to_lowercase())
            .map(Vec::as_slice)
            .unwrap_or(&self.oov)
    }

    pub fn read_text<R: BufRead>(reader: R, expected_dim: usize, source: &str) -> Result<Self> {
        let mut table = WordVectorTable::new(expected_dim);
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = n + 1;
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else {
                continue;
            };
            let values = parts
                .map(|p| p.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::malformed(format!("{source}:{line_no}"), e.to_string()))?;
            if values.len() != expected_dim {
                return Err(Error::DimensionMismatch {
                    line: line_no,
                    expected: expected_dim,
                    found: values.len(),
                });
            }
            table.insert(word, values)?;
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>, expected_dim: usize) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(File::open(path)?);
        Self::read_text(reader, expected_dim, &path.display().to_string())
    }

    /// Loads a table whose width is taken from its first entry.
    pub fn load_inferred(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let dim = text
            .lines()
            .find(|l| !l.trim().is_empty())
            .map_or(0, |l| l.split_whitespace().count() - 1);
        if dim == 0 {
            return Err(Error::malformed(
                path.display().to_string(),
                "no vectors found",
            ));
        }
        Self::read_text(text.as_bytes(), dim, &path.display().to_string())
    }

    /// Writes entries sorted by word so output is reproducible.
    pub fn write_text<W: Write>(&self, mut writer: W) -> Result<()> {
        let mut words: Vec<_> = self.entries.keys().collect();
        words.sort();
        for word in words {
            write!(writer, "{word}")?;
            for v in &self.entries[word] {
                write!(writer, " {v}")?;
            }
            writeln!(writer)?;
        }
        Ok(())
    }
}
