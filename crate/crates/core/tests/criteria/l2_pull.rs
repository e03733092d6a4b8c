//! A larger L2 weight keeps parameters closer to the base model.

use super::{finetune, toy_transfer, Outcome};
use spanqa::encoder::ModelParams;
use spanqa::training::l2_param_loss;

const WEIGHTS: [f64; 3] = [0.0, 0.3, 1e6];

fn max_deviation(a: &ModelParams, b: &ModelParams) -> f64 {
    a.iter()
        .zip(b.iter())
        .flat_map(|((_, x), (_, y))| x.iter().zip(y.iter()).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

pub fn check() -> Outcome {
    let t = toy_transfer();
    let tuned: Vec<ModelParams> = WEIGHTS
        .iter()
        .map(|&c| finetune(&t, 0.0, c, 1e-4, 200))
        .collect();
    let l2: Vec<f64> = tuned
        .iter()
        .map(|p| l2_param_loss(p, &t.base).unwrap().0)
        .collect();
    let deviation = max_deviation(&tuned[2], &t.base);
    let monotone = l2.windows(2).all(|w| w[1] <= w[0]);
    Outcome::check(
        monotone && deviation < 1e-3,
        format!(
            "L2 to base {:.3e} / {:.3e} / {:.3e} for C_l2 = 0 / 0.3 / 1e6, max deviation at 1e6 {deviation:.2e}",
            l2[0], l2[1], l2[2]
        ),
    )
}
