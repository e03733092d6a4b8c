use ndarray::Array2;

use crate::corpus::Token;
use crate::embedding::Resources;

/// Word-in-question features for each context token: column 0 is 1 when
/// the lowercased token equals some question token; column 1 is the
/// largest cosine similarity to any question token's word vector, clamped
/// to `[0, 1]` (0 when either vector is zero or no vectors are loaded).
pub fn wiq_features(question: &[Token], context: &[Token], resources: &Resources) -> Array2<f64> {
    let q_lower: Vec<String> = question.iter().map(|t| t.text.to_lowercase()).collect();
    let q_vecs: Vec<Vec<f64>> = question
        .iter()
        .map(|t| resources.word_vector(&t.text))
        .collect();
    let mut out = Array2::zeros((context.len(), 2));
    for (row, tok) in context.iter().enumerate() {
        let lower = tok.text.to_lowercase();
        if q_lower.contains(&lower) {
            out[[row, 0]] = 1.0;
        }
        let v = resources.word_vector(&tok.text);
        let best = q_vecs.iter().map(|q| cosine(q, &v)).fold(0.0, f64::max);
        out[[row, 1]] = best.clamp(0.0, 1.0);
    }
    out
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
