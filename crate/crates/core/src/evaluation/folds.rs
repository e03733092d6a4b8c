use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EvalReport, MetricSummary};
use crate::corpus::Question;
use crate::error::{Error, Result};

/// Splits `0..n` into `k` disjoint folds after a seeded shuffle. The first
/// `n % k` folds hold one extra item.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || n < k {
        return Err(Error::TooFewQuestions {
            available: n,
            folds: k,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut rest = order.as_slice();
    for f in 0..k {
        let (head, tail) = rest.split_at(base + usize::from(f < extra));
        folds.push(head.to_vec());
        rest = tail;
    }
    Ok(folds)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub reports: Vec<EvalReport>,
    pub mean: MetricSummary,
}

impl CvReport {
    /// One row per fold followed by a `mean` row.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "fold",
            "factoid_mrr",
            "list_precision",
            "list_recall",
            "list_f1",
        ])
        .map_err(|e| Error::Io(e.into()))?;
        let rows = self
            .reports
            .iter()
            .enumerate()
            .map(|(i, r)| (i.to_string(), r.summary()))
            .chain(std::iter::once(("mean".to_string(), self.mean)));
        for (label, m) in rows {
            w.write_record([
                label,
                m.factoid_mrr.to_string(),
                m.list_precision.to_string(),
                m.list_recall.to_string(),
                m.list_f1.to_string(),
            ])
            .map_err(|e| Error::Io(e.into()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `run_fold(fold, train, test)` for every fold and averages the
/// resulting reports. Folds run in parallel; reports keep fold order.
pub fn cross_validate<F>(
    questions: &[Question],
    k: usize,
    seed: u64,
    run_fold: F,
) -> Result<CvReport>
where
    F: Fn(usize, &[Question], &[Question]) -> Result<EvalReport> + Sync,
{
    let folds = make_folds(questions.len(), k, seed)?;
    let reports: Vec<EvalReport> = folds
        .par_iter()
        .enumerate()
        .map(|(f, test_idx)| {
            let test: Vec<Question> = test_idx.iter().map(|&i| questions[i].clone()).collect();
            let train: Vec<Question> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, idx)| idx.iter().map(|&i| questions[i].clone()))
                .collect();
            run_fold(f, &train, &test)
        })
        .collect::<Result<_>>()?;
    let summaries: Vec<MetricSummary> = reports.iter().map(EvalReport::summary).collect();
    Ok(CvReport {
        mean: MetricSummary::mean(&summaries),
        reports,
    })
}
