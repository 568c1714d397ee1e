//! Deterministic random helpers shared by unit, property, and acceptance
//! tests. Not part of the public API.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct TestRng(pub ChaCha8Rng);

pub fn test_rng(seed: u64) -> TestRng {
    TestRng(ChaCha8Rng::seed_from_u64(seed))
}

impl TestRng {
    pub fn f64_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.0.gen::<f64>()
    }

    /// Inclusive on both ends.
    pub fn usize_in(&mut self, lo: usize, hi: usize) -> usize {
        self.0.gen_range(lo..=hi)
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1: f64 = self.0.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = self.0.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.0.gen_range(0..=i);
            xs.swap(i, j);
        }
    }
}
