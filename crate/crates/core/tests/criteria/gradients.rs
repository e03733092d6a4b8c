//! Analytic gradients of the full objective against central differences.

use rand::Rng;

use super::Outcome;
use crate::common;
use spanqa::encoder::{DropoutMasks, EndRows, ModelParams};
use spanqa::pipeline::forward_question;
use spanqa::training::{
    base_argmax_start, forgetting_cost, gold_spans, l2_param_loss, objective, required_starts,
    span_loss, LossConfig,
};

const EPS: f64 = 1e-4;
/// Floor on the relative-error denominator; below it errors are absolute.
const FLOOR: f64 = 1e-6;

fn max_relative_error(seed: u64) -> (f64, String) {
    let (preps, config) = common::toy_set(seed, 1, 8, 16);
    let prep = &preps[0];
    let params = common::random_params(config, seed, 0.3);
    let base = common::random_params(config, seed + 7, 0.3);
    let loss = LossConfig {
        c_fc: 1.0,
        c_l2: 0.3,
        dropout_rate: 0.0,
    };
    let width = config.embedding.total_dim();
    let mut r = common::rng(seed + 99);
    let mut mask =
        || ndarray::Array1::from_shape_fn(width, |_| if r.gen_bool(0.8) { 1.25 } else { 0.0 });
    let masks = vec![DropoutMasks {
        question: mask(),
        context: mask(),
    }];
    // value-only evaluation of the same objective, base scores computed once
    let groups = gold_spans(&prep.question).unwrap();
    let base_scores = forward_question(prep, &base, None, |_, _| EndRows::All)
        .unwrap()
        .scores;
    let mut rows = required_starts(&groups, prep.n_snippets());
    for (k, s) in base_scores.iter().enumerate() {
        rows[k].insert(base_argmax_start(s));
    }
    let f = |p: &ModelParams| {
        let current = forward_question(prep, p, Some(&masks[0]), |k, _| {
            EndRows::Starts(rows[k].iter().copied().collect())
        })
        .unwrap()
        .scores;
        let original = span_loss(&current, &groups).unwrap().0.value;
        let fc = forgetting_cost(&current, &base_scores).unwrap().value;
        let l2 = l2_param_loss(p, &base).unwrap().0;
        original + loss.c_fc * fc + loss.c_l2 * l2
    };
    let (parts, grads) = objective(&[prep], &params, Some(&base), &loss, Some(&masks)).unwrap();
    assert!((parts.l_final - f(&params)).abs() <= 1e-12 * parts.l_final.abs().max(1.0));

    let mut worst = (0.0, String::new());
    let mut probe = params.clone();
    let names: Vec<String> = params.iter().map(|(n, _)| n.to_string()).collect();
    for name in names {
        let n = params.get(&name).len();
        for k in 0..n {
            let orig = params.get(&name).as_slice().unwrap()[k];
            probe.get_mut(&name).as_slice_mut().unwrap()[k] = orig + EPS;
            let up = f(&probe);
            probe.get_mut(&name).as_slice_mut().unwrap()[k] = orig - EPS;
            let down = f(&probe);
            probe.get_mut(&name).as_slice_mut().unwrap()[k] = orig;
            let numeric = (up - down) / (2.0 * EPS);
            let analytic = grads.get(&name).as_slice().unwrap()[k];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR);
            if rel > worst.0 {
                worst = (
                    rel,
                    format!("{name}[{k}] analytic={analytic:e} numeric={numeric:e}"),
                );
            }
        }
    }
    worst
}

const SEEDS: u64 = 20;
const LIMIT_SECS: f64 = 120.0;

pub fn check() -> Outcome {
    let started = std::time::Instant::now();
    let mut worst = (0.0, String::new());
    for seed in 0..SEEDS {
        let (err, at) = max_relative_error(seed);
        if err > worst.0 {
            worst = (err, format!("seed {seed} {at}"));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    Outcome::check(
        worst.0 < 1e-4 && secs < LIMIT_SECS,
        format!(
            "{SEEDS} instances, max relative error {:.2e} ({}), {secs:.0}s",
            worst.0, worst.1
        ),
    )
}
