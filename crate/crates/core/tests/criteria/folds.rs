//! Folds partition the dataset into balanced disjoint parts.

use std::collections::BTreeSet;
use std::sync::Mutex;

use super::Outcome;
use crate::common;
use spanqa::evaluation::{cross_validate, evaluate, make_folds};

const SIZES: [usize; 3] = [10, 11, 487];
const K: usize = 5;

fn partition_problem(n: usize, seed: u64) -> Option<String> {
    let folds = make_folds(n, K, seed).ok()?;
    let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
    let all: BTreeSet<usize> = folds.iter().flatten().copied().collect();
    if folds.len() != K {
        return Some(format!("n={n}: {} folds", folds.len()));
    }
    if sizes.iter().sum::<usize>() != n || all.len() != n || all.iter().any(|&i| i >= n) {
        return Some(format!("n={n}: not a partition"));
    }
    if sizes.iter().max()? - sizes.iter().min()? > 1 {
        return Some(format!("n={n}: sizes {sizes:?}"));
    }
    None
}

pub fn check() -> Outcome {
    for n in SIZES {
        for seed in 0..5 {
            if let Some(p) = partition_problem(n, seed) {
                return Outcome::Fail(p);
            }
        }
    }
    // the runner hands every fold the complement as training data
    let (preps, _) = common::toy_set(3, 11, 4, 4);
    let questions: Vec<_> = preps.iter().map(|p| p.question.clone()).collect();
    let seen = Mutex::new(Vec::new());
    cross_validate(&questions, K, 9, |_, train, test| {
        let ids = |qs: &[spanqa::corpus::Question]| {
            qs.iter().map(|q| q.id.clone()).collect::<BTreeSet<_>>()
        };
        seen.lock().unwrap().push((ids(train), ids(test)));
        Ok(evaluate(&Default::default(), test))
    })
    .unwrap();
    let seen = seen.into_inner().unwrap();
    let every: BTreeSet<String> = questions.iter().map(|q| q.id.clone()).collect();
    let complement = seen.iter().all(|(tr, te)| {
        tr.is_disjoint(te) && tr.union(te).cloned().collect::<BTreeSet<_>>() == every
    });
    let tests_cover: BTreeSet<String> =
        seen.iter().flat_map(|(_, te)| te.iter().cloned()).collect();
    Outcome::check(
        complement && tests_cover == every,
        format!("sizes {SIZES:?} into {K} folds: disjoint, complete, balanced within one"),
    )
}
