//! Character-level convolution producing one vector per word.
//!
//! Characters are embedded through a trainable table, the sequence is
//! zero-padded to at least the filter width, every window is convolved
//! with the filter bank, passed through `tanh` and max-pooled over window
//! positions.

use ndarray::{
    Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayView3, ArrayViewMut1, ArrayViewMut2,
    ArrayViewMut3,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row 0 is reserved for characters outside the fixed alphabet.
pub const UNK_CHAR: usize = 0;
const ASCII_FIRST: u32 = 0x20;
const ASCII_LAST: u32 = 0x7e;
const GREEK_FIRST: u32 = 0x391;
const GREEK_LAST: u32 = 0x3c9;
/// Printable ASCII plus the Greek block, plus the UNK row.
pub const ALPHABET_SIZE: usize =
    1 + (ASCII_LAST - ASCII_FIRST + 1) as usize + (GREEK_LAST - GREEK_FIRST + 1) as usize;

pub fn char_index(c: char) -> usize {
    let code = c as u32;
    if (ASCII_FIRST..=ASCII_LAST).contains(&code) {
        1 + (code - ASCII_FIRST) as usize
    } else if (GREEK_FIRST..=GREEK_LAST).contains(&code) {
        2 + (ASCII_LAST - ASCII_FIRST) as usize + (code - GREEK_FIRST) as usize
    } else {
        UNK_CHAR
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharCnnConfig {
    /// Width of each character vector.
    pub char_dim: usize,
    pub width: usize,
    pub n_filters: usize,
}

impl Default for CharCnnConfig {
    fn default() -> Self {
        CharCnnConfig {
            char_dim: 8,
            width: 5,
            n_filters: 8,
        }
    }
}

/// Borrowed view of the convolution weights.
#[derive(Clone, Copy, Debug)]
pub struct CharCnnParams<'a> {
    /// `[alphabet × char_dim]`
    pub char_table: ArrayView2<'a, f64>,
    /// `[width × char_dim × n_filters]`
    pub filters: ArrayView3<'a, f64>,
    pub bias: ArrayView1<'a, f64>,
}

pub struct CharCnnGrads<'a> {
    pub char_table: ArrayViewMut2<'a, f64>,
    pub filters: ArrayViewMut3<'a, f64>,
    pub bias: ArrayViewMut1<'a, f64>,
}

/// Owned convolution weights, mostly useful outside a full model.
#[derive(Clone, Debug, PartialEq)]
pub struct CharCnnWeights {
    pub char_table: Array2<f64>,
    pub filters: Array3<f64>,
    pub bias: Array1<f64>,
}

impl CharCnnWeights {
    pub fn view(&self) -> CharCnnParams<'_> {
        CharCnnParams {
            char_table: self.char_table.view(),
            filters: self.filters.view(),
            bias: self.bias.view(),
        }
    }
}

impl CharCnnParams<'_> {
    pub fn width(&self) -> usize {
        self.filters.shape()[0]
    }

    pub fn n_filters(&self) -> usize {
        self.filters.shape()[2]
    }
}

/// What the backward pass needs from one word.
#[derive(Clone, Debug)]
pub struct CharTrace {
    pub chars: Vec<usize>,
    /// Winning window start per filter.
    pub argmax: Vec<usize>,
    pub output: Array1<f64>,
}

pub fn char_embed(word: &str, params: CharCnnParams<'_>) -> Result<Array1<f64>> {
    char_embed_traced(word, params).map(|t| t.output)
}

pub fn char_embed_traced(word: &str, params: CharCnnParams<'_>) -> Result<CharTrace> {
    if word.is_empty() {
        return Err(Error::EmptyWord);
    }
    let chars: Vec<usize> = word.chars().map(char_index).collect();
    let width = params.width();
    let n_filters = params.n_filters();
    let padded = chars.len().max(width);
    let windows = padded - width + 1;

    let mut best = Array1::from_elem(n_filters, f64::NEG_INFINITY);
    let mut argmax = vec![0; n_filters];
    for p in 0..windows {
        let mut act = params.bias.to_owned();
        for k in 0..width {
            if let Some(&c) = chars.get(p + k) {
                let emb = params.char_table.row(c);
                act += &emb.dot(&params.filters.index_axis(ndarray::Axis(0), k));
            }
        }
        for f in 0..n_filters {
            let v = act[f].tanh();
            if v > best[f] {
                best[f] = v;
                argmax[f] = p;
            }
        }
    }
    Ok(CharTrace {
        chars,
        argmax,
        output: best,
    })
}

/// Accumulates gradients of the pooled output into `grads`.
pub fn char_backward(
    trace: &CharTrace,
    d_output: ArrayView1<'_, f64>,
    params: CharCnnParams<'_>,
    grads: &mut CharCnnGrads<'_>,
) {
    let width = params.width();
    for (f, &p) in trace.argmax.iter().enumerate() {
        let y = trace.output[f];
        let d_pre = d_output[f] * (1.0 - y * y);
        if d_pre == 0.0 {
            continue;
        }
        grads.bias[f] += d_pre;
        for k in 0..width {
            let Some(&c) = trace.chars.get(p + k) else {
                continue;
            };
            let emb = params.char_table.row(c);
            let mut d_filter = grads.filters.slice_mut(ndarray::s![k, .., f]);
            d_filter.scaled_add(d_pre, &emb);
            let filter = params.filters.slice(ndarray::s![k, .., f]);
            grads.char_table.row_mut(c).scaled_add(d_pre, &filter);
        }
    }
}
