//! Ensembles of identical members reproduce the single model; member
//! order does not matter.

use super::{Outcome, TOY_HIDDEN};
use crate::common;
use spanqa::encoder::checkpoint;
use spanqa::ensemble::{Ensemble, EnsembleSpec};
use spanqa::pipeline::{predict_all, PredictionRecord};
use spanqa::spanner::DecodingConfig;

const SIZES: [usize; 3] = [1, 2, 5];

/// Largest probability difference, or `None` when the spans differ.
fn probability_gap(a: &[PredictionRecord], b: &[PredictionRecord]) -> Option<f64> {
    let mut gap: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        if x.id != y.id
            || x.candidates.len() != y.candidates.len()
            || x.answers.len() != y.answers.len()
        {
            return None;
        }
        for (s, t) in x
            .candidates
            .iter()
            .chain(&x.answers)
            .zip(y.candidates.iter().chain(&y.answers))
        {
            if (s.snippet_index, s.token_start, s.token_end)
                != (t.snippet_index, t.token_start, t.token_end)
            {
                return None;
            }
            gap = gap.max((s.probability - t.probability).abs());
        }
    }
    Some(gap)
}

pub fn check() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (preps, config) = common::toy_set(77, 12, 12, TOY_HIDDEN);
    let cfg = DecodingConfig {
        k_starts: 5,
        ..Default::default()
    };
    let models: Vec<_> = (0..3)
        .map(|s| common::random_params(config, 500 + s, 0.5))
        .collect();
    let paths: Vec<_> = models
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let p = dir.path().join(format!("m{k}.ckpt"));
            checkpoint::save(m, &p).unwrap();
            p
        })
        .collect();
    let single = predict_all(&preps, &models[0], &cfg).unwrap();

    let mut worst: f64 = 0.0;
    for n in SIZES {
        let spec = EnsembleSpec {
            checkpoints: vec![paths[0].clone(); n],
            weights: None,
        };
        let out = Ensemble::load(&spec)
            .unwrap()
            .predict_all(&preps, &cfg)
            .unwrap();
        if n == 1 && out != single {
            return Outcome::Fail("ensemble of one differs from the single model".into());
        }
        match probability_gap(&out, &single) {
            Some(g) if g <= 1e-12 => worst = worst.max(g),
            Some(g) => return Outcome::Fail(format!("{n} copies: probability gap {g:e}")),
            None => return Outcome::Fail(format!("{n} copies: different spans")),
        }
    }

    let order = |idx: [usize; 3]| {
        let spec = EnsembleSpec {
            checkpoints: idx.iter().map(|&i| paths[i].clone()).collect(),
            weights: None,
        };
        Ensemble::load(&spec)
            .unwrap()
            .predict_all(&preps, &cfg)
            .unwrap()
    };
    let reference = order([0, 1, 2]);
    let permuted_equal = [[2, 0, 1], [1, 2, 0], [2, 1, 0]]
        .into_iter()
        .all(|p| order(p) == reference);
    Outcome::check(
        permuted_equal,
        format!("N = 1, 2, 5 copies within {worst:.1e} of one model; 3 member orders identical"),
    )
}
