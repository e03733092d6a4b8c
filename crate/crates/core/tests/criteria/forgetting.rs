//! A larger forgetting cost keeps predictions closer to the base model.

use super::{finetune, toy_transfer, Outcome};
use spanqa::training::mean_forgetting_cost;

const WEIGHTS: [f64; 3] = [0.0, 1.0, 100.0];

pub fn check() -> Outcome {
    let t = toy_transfer();
    let floor = mean_forgetting_cost(&t.held_out, &t.base, &t.base).unwrap();
    let divergence: Vec<f64> = WEIGHTS
        .iter()
        .map(|&c| {
            let tuned = finetune(&t, c, 0.0, 1e-3, 120);
            mean_forgetting_cost(&t.held_out, &tuned, &t.base).unwrap()
        })
        .collect();
    let monotone = divergence.windows(2).all(|w| w[1] <= w[0]);
    let shown: Vec<String> = WEIGHTS
        .iter()
        .zip(&divergence)
        .map(|(c, d)| format!("C_fc={c}: {d:.5}"))
        .collect();
    Outcome::check(
        monotone,
        format!(
            "held-out L_fc {} (base itself {floor:.5})",
            shown.join(", ")
        ),
    )
}
