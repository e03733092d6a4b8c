//! Ensembles average the raw start and end scores of their members before
//! the sigmoid and softmax, then decode exactly like a single model.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{checkpoint, top_k_indices, EndRows, ModelParams, ScoreSet};
use crate::error::{Error, Result};
use crate::pipeline::{forward_question, predict_from_scores, PredictionRecord, PreparedQuestion};
use crate::spanner::DecodingConfig;

/// Checkpoint paths with optional weights (uniform when absent).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub checkpoints: Vec<PathBuf>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

impl EnsembleSpec {
    /// Reads the JSON spec; relative paths are resolved against its folder.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut spec: EnsembleSpec = serde_json::from_str(&text)
            .map_err(|e| Error::malformed(path.display().to_string(), e.to_string()))?;
        if let Some(dir) = path.parent() {
            for c in &mut spec.checkpoints {
                if c.is_relative() {
                    *c = dir.join(&*c);
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.checkpoints.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        if let Some(w) = &self.weights {
            check_weights(w, self.checkpoints.len())?;
        }
        Ok(())
    }
}

fn check_weights(w: &[f64], n: usize) -> Result<()> {
    let sum: f64 = w.iter().sum();
    if w.len() != n || w.iter().any(|&x| !x.is_finite() || x < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::ConfigMismatch(format!(
            "ensemble weights must be {n} non-negative numbers summing to 1, got {w:?}"
        )));
    }
    Ok(())
}

/// Weighted mean of one element across members. Values are visited in
/// sorted order with a running mean, so the result is independent of
/// member order and exact when all values are equal.
fn mean_of(pairs: &mut [(f64, f64)]) -> f64 {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let (mut mean, mut seen) = (0.0, 0.0);
    for &(x, w) in pairs.iter() {
        seen += w;
        if seen > 0.0 {
            mean += (x - mean) * (w / seen);
        }
    }
    mean
}

pub fn average_scores(sets: &[ScoreSet]) -> Result<ScoreSet> {
    weighted_average_scores(sets, &vec![1.0; sets.len()])
}

/// Elementwise weighted mean of start scores and of every end row. All
/// members must cover the same context and the same end rows.
pub fn weighted_average_scores(sets: &[ScoreSet], weights: &[f64]) -> Result<ScoreSet> {
    let first = sets.first().ok_or(Error::EmptyEnsemble)?;
    if weights.len() != sets.len() {
        return Err(Error::ShapeMismatch(
            "one weight per member required".into(),
        ));
    }
    for s in sets {
        s.validate()?;
        if s.n() != first.n() || !s.y_end.keys().eq(first.y_end.keys()) {
            return Err(Error::ShapeMismatch(
                "members disagree on context length or end rows".into(),
            ));
        }
    }
    let mut buf = Vec::with_capacity(sets.len());
    let mut avg = |get: &dyn Fn(&ScoreSet) -> f64| {
        buf.clear();
        buf.extend(sets.iter().zip(weights).map(|(s, &w)| (get(s), w)));
        mean_of(&mut buf)
    };
    let y_start = (0..first.n()).map(|i| avg(&|s| s.y_start[i])).collect();
    let y_end = first
        .y_end
        .iter()
        .map(|(&i, row)| {
            (
                i,
                (0..row.len()).map(|j| avg(&|s| s.y_end[&i][j])).collect(),
            )
        })
        .collect();
    Ok(ScoreSet { y_start, y_end })
}

#[derive(Clone, Debug)]
pub struct Ensemble {
    pub members: Vec<ModelParams>,
    pub weights: Vec<f64>,
}

impl Ensemble {
    pub fn new(members: Vec<ModelParams>, weights: Option<Vec<f64>>) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptyEnsemble)?;
        for m in &members[1..] {
            first.check_same_shapes(m)?;
        }
        let weights = match weights {
            Some(w) => {
                check_weights(&w, members.len())?;
                w
            }
            None => vec![1.0; members.len()],
        };
        Ok(Ensemble { members, weights })
    }

    pub fn load(spec: &EnsembleSpec) -> Result<Self> {
        spec.validate()?;
        let members = spec
            .checkpoints
            .iter()
            .map(checkpoint::load)
            .collect::<Result<_>>()?;
        Ensemble::new(members, spec.weights.clone())
    }

    pub fn config(&self) -> &crate::encoder::ModelConfig {
        self.members[0].config()
    }

    /// Averaged scores per snippet. End rows cover the union of every
    /// member's best starts and the best starts of the averaged scores, so
    /// decoding sees each start it could select.
    pub fn question_scores(
        &self,
        prep: &PreparedQuestion,
        cfg: &DecodingConfig,
    ) -> Result<Vec<ScoreSet>> {
        let passes = self
            .members
            .par_iter()
            .map(|m| forward_question(prep, m, None, |_, _| EndRows::Starts(Vec::new())))
            .collect::<Result<Vec<_>>>()?;
        (0..prep.n_snippets())
            .map(|k| {
                let starts: Vec<ScoreSet> = passes.iter().map(|p| p.scores[k].clone()).collect();
                let avg = weighted_average_scores(&starts, &self.weights)?;
                let mut rows: BTreeSet<usize> = top_k_indices(&avg.y_start, cfg.k_starts)
                    .into_iter()
                    .collect();
                for s in &starts {
                    rows.extend(top_k_indices(&s.y_start, cfg.k_starts));
                }
                let rows = EndRows::Starts(rows.into_iter().collect());
                let full: Vec<ScoreSet> = passes
                    .iter()
                    .zip(&self.members)
                    .map(|(p, m)| p.rescore(m, k, &rows))
                    .collect();
                weighted_average_scores(&full, &self.weights)
            })
            .collect()
    }

    pub fn predict(
        &self,
        prep: &PreparedQuestion,
        cfg: &DecodingConfig,
    ) -> Result<PredictionRecord> {
        let scores = self.question_scores(prep, cfg)?;
        Ok(predict_from_scores(&prep.question, &scores, cfg))
    }

    pub fn predict_all(
        &self,
        preps: &[PreparedQuestion],
        cfg: &DecodingConfig,
    ) -> Result<Vec<PredictionRecord>> {
        preps.iter().map(|p| self.predict(p, cfg)).collect()
    }
}
