use ndarray::Array1;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::encoder::DropoutMasks;

/// One inverted-dropout mask per input sequence, shared by all of its time
/// steps. Kept entries are scaled by `1 / (1 - rate)`.
pub fn variational_masks(width: usize, rate: f64, rng: &mut ChaCha8Rng) -> DropoutMasks {
    assert!(
        (0.0..1.0).contains(&rate),
        "dropout rate must lie in [0, 1)"
    );
    let mut draw = || -> Array1<f64> {
        if rate == 0.0 {
            return Array1::ones(width);
        }
        let keep = 1.0 - rate;
        Array1::from_shape_fn(width, |_| {
            if rng.gen::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        })
    };
    let question = draw();
    let context = draw();
    DropoutMasks { question, context }
}
