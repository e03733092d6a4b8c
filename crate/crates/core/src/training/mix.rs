use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Index of a drawn training example.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Draw {
    Target(usize),
    Source(usize),
}

/// Endless stream alternating target and source examples, starting with
/// the target. Target examples are drawn with replacement, so a small
/// target set is upsampled; the source set is walked in a fresh random
/// order on every pass.
#[derive(Clone, Debug)]
pub struct MixedStream {
    target_len: usize,
    source_order: Vec<usize>,
    source_pos: usize,
    next_is_target: bool,
    rng: ChaCha8Rng,
}

pub fn mix_datasets(target_len: usize, source_len: usize, seed: u64) -> Result<MixedStream> {
    if target_len == 0 || source_len == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut source_order: Vec<usize> = (0..source_len).collect();
    source_order.shuffle(&mut rng);
    Ok(MixedStream {
        target_len,
        source_order,
        source_pos: 0,
        next_is_target: true,
        rng,
    })
}

impl Iterator for MixedStream {
    type Item = Draw;

    fn next(&mut self) -> Option<Draw> {
        let draw = if self.next_is_target {
            Draw::Target(self.rng.gen_range(0..self.target_len))
        } else {
            if self.source_pos == self.source_order.len() {
                self.source_order.shuffle(&mut self.rng);
                self.source_pos = 0;
            }
            self.source_pos += 1;
            Draw::Source(self.source_order[self.source_pos - 1])
        };
        self.next_is_target = !self.next_is_target;
        Some(draw)
    }
}

/// Endless stream over one dataset, reshuffled every epoch.
#[derive(Clone, Debug)]
pub struct EpochStream {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

pub fn epochs(len: usize, seed: u64) -> Result<EpochStream> {
    if len == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(EpochStream {
        order: (0..len).collect(),
        pos: len,
        rng: ChaCha8Rng::seed_from_u64(seed),
    })
}

impl Iterator for EpochStream {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.pos == self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        self.pos += 1;
        Some(self.order[self.pos - 1])
    }
}
