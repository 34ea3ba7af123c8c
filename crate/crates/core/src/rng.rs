//! Counter-keyed SplitMix64.
//!
//! Every random stream is identified by `(seed, frame_index, stream)` and is
//! independent of how many values other streams consumed, so a frame can be
//! regenerated alone and frames can be produced in any order.
//!
//! The algorithm is part of the phantom file format:
//!
//! ```text
//! mix(z):  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!          z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!          return z ^ (z >> 31)
//! key    = mix(mix(seed) ^ (frame_index + 1) * 0x9E3779B97F4A7C15
//!                        ^ (stream + 1)      * 0xD1B54A32D192ED03)
//! u64 #n = mix(key + (n + 1) * 0x9E3779B97F4A7C15)        n = 0, 1, ...
//! f64 #n = (u64 #n >> 11) * 2^-53                           in [0, 1)
//! ```
//!
//! All arithmetic wraps modulo 2^64.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM_MUL: u64 = 0xD1B5_4A32_D192_ED03;

pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, frame_index: u64, stream: u64) -> Self {
        let key = mix64(
            mix64(seed)
                ^ frame_index.wrapping_add(1).wrapping_mul(GOLDEN)
                ^ stream.wrapping_add(1).wrapping_mul(STREAM_MUL),
        );
        Self { key, counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `lo..=hi` as `lo + floor(f * (hi - lo + 1))`.
    pub fn int_inclusive(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        let span = (hi - lo + 1) as f64;
        lo + ((self.next_f64() * span) as i64).min(hi - lo)
    }

    /// `true` with probability `p`.
    pub fn chance(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_matches_reference_splitmix64() {
        // first outputs of the reference SplitMix64 seeded with 0
        let mut state = 0u64;
        let mut next = || {
            state = state.wrapping_add(GOLDEN);
            mix64(state)
        };
        assert_eq!(next(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(next(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(next(), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = {
            let mut r = CounterRng::new(7, 3, 1);
            (0..4).map(|_| r.next_u64()).collect()
        };
        let mut again = CounterRng::new(7, 3, 1);
        assert_eq!(a, (0..4).map(|_| again.next_u64()).collect::<Vec<_>>());
        assert_ne!(a[0], CounterRng::new(7, 3, 2).next_u64());
        assert_ne!(a[0], CounterRng::new(7, 4, 1).next_u64());
        assert_ne!(a[0], CounterRng::new(8, 3, 1).next_u64());
    }

    #[test]
    fn ranges() {
        let mut r = CounterRng::new(1, 0, 0);
        let mut seen = [false; 5];
        for _ in 0..2000 {
            let f = r.next_f64();
            assert!((0.0..1.0).contains(&f));
            let k = r.int_inclusive(-2, 2);
            assert!((-2..=2).contains(&k));
            seen[(k + 2) as usize] = true;
            let u = r.uniform(5.0, 6.0);
            assert!((5.0..6.0).contains(&u));
        }
        assert!(seen.iter().all(|&s| s));
    }
}
