//! Deterministic pseudorandom numbers.
//!
//! Every seeded stage in the toolkit draws from [`SplitMix64`] so results can
//! be reproduced from the seed alone, in any language:
//!
//! ```text
//! state  = state + 0x9E3779B97F4A7C15            (wrapping)
//! z      = state
//! z      = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9   (wrapping)
//! z      = (z ^ (z >> 27)) * 0x94D049BB133111EB   (wrapping)
//! output = z ^ (z >> 31)
//! ```
//!
//! Bounded integers use Lemire's multiply-and-reject method; shuffles are
//! Fisher–Yates running from the last index down to 1, swapping index `i`
//! with `below(i + 1)`.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Independent generator for `(seed, stream)`. Used for counter-based
    /// seeding, where each unit of work (a permutation, a worker shard) gets
    /// its own stream so results do not depend on execution order.
    pub fn stream(seed: u64, stream: u64) -> Self {
        let mut mixer = SplitMix64::new(seed ^ mix64(stream.wrapping_add(GOLDEN_GAMMA)));
        SplitMix64::new(mixer.next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)`. `bound` must be non-zero.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let mut product = (self.next_u64() as u128) * (bound as u128);
        let mut low = product as u64;
        if low < bound {
            let threshold = bound.wrapping_neg() % bound;
            while low < threshold {
                product = (self.next_u64() as u128) * (bound as u128);
                low = product as u64;
            }
        }
        (product >> 64) as u64
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
