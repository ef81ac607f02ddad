//! Seeded, splittable pseudo-random numbers.
//!
//! Every stochastic decision in the crate (weight init, scene generation,
//! augmentation, shuffling) draws from [`SplitMix64`], so a run is a pure
//! function of its seed. The generator is the standard SplitMix64:
//!
//! ```text
//! state  = state + 0x9E3779B97F4A7C15
//! z      = state
//! z      = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z      = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! output = z ^ (z >> 31)
//! ```
//!
//! Floats take the top 53 bits: `(output >> 11) * 2^-53`, giving `[0, 1)`.
//! Child streams are derived with [`SplitMix64::fork`], which mixes the
//! parent seed with a stream index through the same finalizer, so other
//! languages can reproduce identical sequences.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitMix64 {
    seed: u64,
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { seed, state: seed }
    }

    /// Independent child stream `index` of a generator seeded with this
    /// generator's original seed. Does not advance `self`.
    pub fn fork(&self, index: u64) -> Self {
        Self::new(mix64(self.seed ^ mix64(index.wrapping_add(GOLDEN_GAMMA))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[lo, hi]` (inclusive).
    pub fn range_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        assert!(lo <= hi, "empty range {lo}..={hi}");
        let span = (hi - lo + 1) as u64;
        lo + (self.next_u64() % span) as usize
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.range_inclusive(0, i);
            items.swap(i, j);
        }
    }
}
