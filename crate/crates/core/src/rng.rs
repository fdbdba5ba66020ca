//! Counter-based random streams addressed by a path.
//!
//! A stream is identified by the master seed and a path of integers such as
//! `[tree, CELL, cell_id, CANDIDATE, candidate]`. The master seed keys a
//! ChaCha8 generator and the hashed path selects its 64-bit stream id, so the
//! sequence a task sees depends only on where it sits in the forest and never
//! on scheduling.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Path tags separating the purposes a stream is drawn for.
pub mod purpose {
    pub const STAGE_ONE: u64 = 1;
    pub const CELL: u64 = 2;
    pub const CANDIDATE: u64 = 3;
    pub const HOLDOUT: u64 = 4;
    pub const LEAF: u64 = 5;
    pub const SPLIT: u64 = 6;
    pub const SYNTH: u64 = 7;
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn path_key(path: &[u64]) -> u64 {
    // Length is folded in so that [0] and [0, 0] differ.
    let mut h = splitmix64(path.len() as u64);
    for &p in path {
        h = splitmix64(h ^ splitmix64(p));
    }
    h
}

#[derive(Clone, Debug)]
pub struct RandomStream {
    master_seed: u64,
    path: Vec<u64>,
    rng: ChaCha8Rng,
}

impl RandomStream {
    /// The root stream for `master_seed` (empty path).
    pub fn new(master_seed: u64) -> Self {
        Self::at(master_seed, Vec::new())
    }

    pub fn at(master_seed: u64, path: Vec<u64>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(path_key(&path));
        RandomStream {
            master_seed,
            path,
            rng,
        }
    }

    /// A fresh stream one level below this one. Independent of how many
    /// values have already been drawn from `self`.
    pub fn child(&self, tag: u64) -> Self {
        let mut path = self.path.clone();
        path.push(tag);
        Self::at(self.master_seed, path)
    }

    pub fn descend(&self, tags: &[u64]) -> Self {
        let mut path = self.path.clone();
        path.extend_from_slice(tags);
        Self::at(self.master_seed, path)
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform on the open interval (0, 1); exact zeros are redrawn.
    pub fn open_unit(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draws(s: &mut RandomStream, n: usize) -> Vec<u64> {
        (0..n).map(|_| s.next_u64()).collect()
    }

    #[test]
    fn same_path_same_sequence() {
        let mut a = RandomStream::at(42, vec![3, purpose::CELL, 7]);
        let mut b = RandomStream::new(42).descend(&[3, purpose::CELL, 7]);
        assert_eq!(draws(&mut a, 64), draws(&mut b, 64));
    }

    #[test]
    fn child_ignores_parent_position() {
        let mut parent = RandomStream::new(9);
        let before = parent.child(1);
        draws(&mut parent, 10);
        let after = parent.child(1);
        assert_eq!(draws(&mut before.clone(), 8), draws(&mut after.clone(), 8));
    }

    #[test]
    fn distinct_paths_and_seeds_differ() {
        let base = draws(&mut RandomStream::at(1, vec![0]), 16);
        assert_ne!(base, draws(&mut RandomStream::at(1, vec![1]), 16));
        assert_ne!(base, draws(&mut RandomStream::at(1, vec![0, 0]), 16));
        assert_ne!(base, draws(&mut RandomStream::at(2, vec![0]), 16));
    }

    #[test]
    fn sibling_streams_are_uncorrelated() {
        let n = 20_000;
        let mut a = RandomStream::at(5, vec![0, purpose::CANDIDATE, 0]);
        let mut b = RandomStream::at(5, vec![0, purpose::CANDIDATE, 1]);
        let xs: Vec<f64> = (0..n).map(|_| a.uniform() - 0.5).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.uniform() - 0.5).collect();
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        let corr = cov / (1.0 / 12.0);
        // 5 standard errors of the sample correlation.
        assert!(corr.abs() < 5.0 / (n as f64).sqrt(), "corr = {corr}");
    }

    #[test]
    fn open_unit_and_index_ranges() {
        let mut s = RandomStream::new(0);
        for _ in 0..1000 {
            let u = s.open_unit();
            assert!(u > 0.0 && u < 1.0);
            assert!(s.index(3) < 3);
        }
    }
}
