use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded random stream: ChaCha8 keyed by `seed` (expanded with
/// `seed_from_u64`), with the 64-bit ChaCha stream id set to `stream`.
/// The output sequence is identical on every platform.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
    seed: u64,
    stream: u64,
}

impl Rng {
    pub fn new(seed: u64, stream: u64) -> Rng {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Rng { inner, seed, stream }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi]`; returns `lo` when the range is degenerate.
    pub fn range_f64(&mut self, lo: f64, hi: f64) -> f64 {
        let u = self.uniform();
        if hi > lo {
            lo + (hi - lo) * u
        } else {
            lo
        }
    }

    /// Uniform index in `0..n`. Panics when `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n as u64) as usize
    }

    /// Uniform integer in `lo..=hi`.
    pub fn range_usize(&mut self, lo: usize, hi: usize) -> usize {
        if hi <= lo {
            lo
        } else {
            self.inner.random_range(lo as u64..=hi as u64) as usize
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_and_stream_repeat() {
        let a: Vec<u64> = (0..8).scan(Rng::new(42, 3), |r, _| Some(r.next_u64())).collect();
        let b: Vec<u64> = (0..8).scan(Rng::new(42, 3), |r, _| Some(r.next_u64())).collect();
        assert_eq!(a, b);
        let c: Vec<u64> = (0..8).scan(Rng::new(42, 4), |r, _| Some(r.next_u64())).collect();
        assert_ne!(a, c);
    }

    const PINNED: [u64; 3] = [0xb585f767a79a3b6c, 0x7746a55fbad8c037, 0xc16a7b0fc8d48f13];

    #[test]
    fn known_first_output() {
        // pins the generator so silent algorithm changes are caught
        let mut r = Rng::new(0, 0);
        assert_eq!(r.next_u64(), PINNED[0]);
        assert_eq!(r.next_u64(), PINNED[1]);
        assert_eq!(Rng::new(0, 1).next_u64(), PINNED[2]);
    }

    #[test]
    fn ranges_stay_in_bounds() {
        let mut r = Rng::new(7, 0);
        for _ in 0..1000 {
            let x = r.range_f64(6.0, 15.0);
            assert!((6.0..=15.0).contains(&x));
            assert!(r.index(5) < 5);
            assert!((3..=9).contains(&r.range_usize(3, 9)));
        }
        assert_eq!(r.range_f64(2.0, 2.0), 2.0);
    }
}
