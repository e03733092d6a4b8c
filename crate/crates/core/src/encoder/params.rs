//! Named trainable tensors.

use std::collections::BTreeMap;

use ndarray::{ArrayD, ArrayView1, ArrayView2, ArrayView3, Ix1, Ix2, Ix3, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{CharCnnGrads, CharCnnParams, EmbeddingConfig, ALPHABET_SIZE};
use crate::error::{Error, Result};

/// Width of the word-in-question features appended to projected inputs.
pub const WIQ_DIM: usize = 2;

pub const CHAR_TABLE: &str = "char.table";
pub const CHAR_FILTERS: &str = "char.filters";
pub const CHAR_BIAS: &str = "char.bias";
pub const PROJ_W: &str = "proj.w";
pub const PROJ_B: &str = "proj.b";
pub const OUT_W: &str = "out.w";
pub const OUT_B: &str = "out.b";
pub const QUESTION_ATTN: &str = "question.attn";
pub const START_W: &str = "start.w";
pub const START_B: &str = "start.b";
pub const END_W: &str = "end.w";
pub const END_B: &str = "end.b";
pub const GRU_DIRECTIONS: [&str; 2] = ["gru_fw", "gru_bw"];
pub const GRU_GATES: [&str; 3] = ["z", "r", "h"];
/// `GRU_WEIGHTS[direction][gate]`, e.g. `gru_bw.wr`.
pub const GRU_WEIGHTS: [[&str; 3]; 2] = [
    ["gru_fw.wz", "gru_fw.wr", "gru_fw.wh"],
    ["gru_bw.wz", "gru_bw.wr", "gru_bw.wh"],
];
pub const GRU_BIASES: [[&str; 3]; 2] = [
    ["gru_fw.bz", "gru_fw.br", "gru_fw.bh"],
    ["gru_bw.bz", "gru_bw.br", "gru_bw.bh"],
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embedding: EmbeddingConfig,
    pub hidden: usize,
}

impl ModelConfig {
    pub fn new(embedding: EmbeddingConfig, hidden: usize) -> Self {
        ModelConfig { embedding, hidden }
    }

    /// Name and shape of every tensor, in storage order.
    pub fn manifest(&self) -> Vec<(String, Vec<usize>)> {
        let h = self.hidden;
        let d = self.embedding.total_dim();
        let cc = self.embedding.char_cnn;
        let gru_in = h + WIQ_DIM + h;
        let mut m = vec![
            (CHAR_TABLE.to_string(), vec![ALPHABET_SIZE, cc.char_dim]),
            (
                CHAR_FILTERS.to_string(),
                vec![cc.width, cc.char_dim, cc.n_filters],
            ),
            (CHAR_BIAS.to_string(), vec![cc.n_filters]),
            (PROJ_W.to_string(), vec![d, h]),
            (PROJ_B.to_string(), vec![h]),
        ];
        for dir in GRU_DIRECTIONS {
            for gate in GRU_GATES {
                m.push((format!("{dir}.w{gate}"), vec![gru_in, h]));
                m.push((format!("{dir}.b{gate}"), vec![h]));
            }
        }
        m.extend([
            (OUT_W.to_string(), vec![2 * h, h]),
            (OUT_B.to_string(), vec![h]),
            (QUESTION_ATTN.to_string(), vec![h]),
            (START_W.to_string(), vec![3 * h]),
            (START_B.to_string(), vec![1]),
            (END_W.to_string(), vec![4 * h]),
            (END_B.to_string(), vec![1]),
        ]);
        m.sort_by(|a, b| a.0.cmp(&b.0));
        m
    }
}

/// Every trainable tensor of a model, keyed by name. Gradients use the
/// same container.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    tensors: BTreeMap<String, ArrayD<f64>>,
}

impl ModelParams {
    pub fn zeros(config: ModelConfig) -> Self {
        let tensors = config
            .manifest()
            .into_iter()
            .map(|(name, shape)| (name, ArrayD::zeros(IxDyn(&shape))))
            .collect();
        ModelParams { config, tensors }
    }

    /// Uniform Glorot initialization for matrices, zero biases, small
    /// uniform values for the character table and the vector heads.
    pub fn init(config: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ModelParams::zeros(config);
        for (name, tensor) in params.tensors.iter_mut() {
            let shape = tensor.shape().to_vec();
            let bound = if is_bias(name) {
                0.0
            } else if name == CHAR_TABLE {
                0.5
            } else if name == CHAR_FILTERS {
                (6.0 / ((shape[0] * shape[1] + shape[2]) as f64)).sqrt()
            } else if shape.len() == 2 {
                (6.0 / ((shape[0] + shape[1]) as f64)).sqrt()
            } else {
                (3.0 / shape[0] as f64).sqrt()
            };
            if bound > 0.0 {
                tensor.mapv_inplace(|_| rng.gen_range(-bound..bound));
            }
        }
        params
    }

    pub fn from_tensors(
        config: ModelConfig,
        tensors: BTreeMap<String, ArrayD<f64>>,
    ) -> Result<Self> {
        let manifest = config.manifest();
        if manifest.len() != tensors.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} tensors, found {}",
                manifest.len(),
                tensors.len()
            )));
        }
        for (name, shape) in &manifest {
            match tensors.get(name) {
                Some(t) if t.shape() == shape.as_slice() => {}
                Some(t) => {
                    return Err(Error::ShapeMismatch(format!(
                        "{name}: expected {shape:?}, found {:?}",
                        t.shape()
                    )))
                }
                None => return Err(Error::ShapeMismatch(format!("missing tensor {name}"))),
            }
        }
        Ok(ModelParams { config, tensors })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn hidden(&self) -> usize {
        self.config.hidden
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams::zeros(self.config)
    }

    pub fn get(&self, name: &str) -> &ArrayD<f64> {
        self.tensors
            .get(name)
            .unwrap_or_else(|| panic!("unknown tensor {name}"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut ArrayD<f64> {
        self.tensors
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown tensor {name}"))
    }

    pub fn vector(&self, name: &str) -> ArrayView1<'_, f64> {
        self.get(name)
            .view()
            .into_dimensionality::<Ix1>()
            .expect("rank-1 tensor")
    }

    pub fn matrix(&self, name: &str) -> ArrayView2<'_, f64> {
        self.get(name)
            .view()
            .into_dimensionality::<Ix2>()
            .expect("rank-2 tensor")
    }

    pub fn cube(&self, name: &str) -> ArrayView3<'_, f64> {
        self.get(name)
            .view()
            .into_dimensionality::<Ix3>()
            .expect("rank-3 tensor")
    }

    pub fn char_cnn(&self) -> CharCnnParams<'_> {
        CharCnnParams {
            char_table: self.matrix(CHAR_TABLE),
            filters: self.cube(CHAR_FILTERS),
            bias: self.vector(CHAR_BIAS),
        }
    }

    /// Mutable char-convolution views, used when the container holds
    /// gradients.
    pub fn char_cnn_mut(&mut self) -> CharCnnGrads<'_> {
        let mut table = None;
        let mut filters = None;
        let mut bias = None;
        for (name, t) in self.tensors.iter_mut() {
            match name.as_str() {
                CHAR_TABLE => {
                    table = Some(
                        t.view_mut()
                            .into_dimensionality::<Ix2>()
                            .expect("rank-2 tensor"),
                    )
                }
                CHAR_FILTERS => {
                    filters = Some(
                        t.view_mut()
                            .into_dimensionality::<Ix3>()
                            .expect("rank-3 tensor"),
                    )
                }
                CHAR_BIAS => {
                    bias = Some(
                        t.view_mut()
                            .into_dimensionality::<Ix1>()
                            .expect("rank-1 tensor"),
                    )
                }
                _ => {}
            }
        }
        CharCnnGrads {
            char_table: table.expect("char table present"),
            filters: filters.expect("char filters present"),
            bias: bias.expect("char bias present"),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ArrayD<f64>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut ArrayD<f64>)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn n_elements(&self) -> usize {
        self.tensors.values().map(|t| t.len()).sum()
    }

    pub fn same_shapes(&self, other: &ModelParams) -> bool {
        self.config == other.config
    }

    pub fn check_same_shapes(&self, other: &ModelParams) -> Result<()> {
        if self.same_shapes(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "model configurations differ: {:?} vs {:?}",
                self.config, other.config
            )))
        }
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        assert!(self.same_shapes(other), "tensor layouts differ");
        for (a, b) in self.tensors.values_mut().zip(other.tensors.values()) {
            a.scaled_add(scale, b);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors.values_mut() {
            t.mapv_inplace(|v| v * factor);
        }
    }

    pub fn max_abs_diff(&self, other: &ModelParams) -> f64 {
        self.tensors
            .values()
            .zip(other.tensors.values())
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.tensors
            .values()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }
}

fn is_bias(name: &str) -> bool {
    name.rsplit('.')
        .next()
        .is_some_and(|leaf| leaf.starts_with('b'))
}
