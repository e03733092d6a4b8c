//! Optional check against the real BioASQ 2017 training file, located by
//! the `BIOASQ_TRAIN` environment variable.

use super::Outcome;
use spanqa::corpus::{dataset_stats, load_bioasq};

const TOLERANCE: f64 = 0.03;

pub fn check() -> Outcome {
    let Some(path) = std::env::var_os("BIOASQ_TRAIN") else {
        return Outcome::Skip("set BIOASQ_TRAIN to the BioASQ 2017 training file to run".into());
    };
    let questions = match load_bioasq(&path) {
        Ok(q) => q,
        Err(e) => return Outcome::Fail(format!("cannot ingest {}: {e}", path.to_string_lossy())),
    };
    let s = dataset_stats(&questions).unwrap();
    Outcome::check(
        s.n_factoid == 413
            && s.n_list == 486
            && (s.extractable_fraction_factoid - 0.65).abs() <= TOLERANCE
            && (s.extractable_fraction_list - 0.92).abs() <= TOLERANCE,
        format!(
            "{} factoid / {} list, extractable {:.1}% / {:.1}%",
            s.n_factoid,
            s.n_list,
            100.0 * s.extractable_fraction_factoid,
            100.0 * s.extractable_fraction_list
        ),
    )
}
