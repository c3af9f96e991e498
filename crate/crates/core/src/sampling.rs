//! Categorical draws from unnormalized log-weights, plus deterministic
//! per-worker random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream used by every sampler in the crate.
pub type SamplerRng = ChaCha8Rng;

pub fn log_sum_exp(log_weights: &[f64]) -> f64 {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + log_weights.iter().map(|w| (w - max).exp()).sum::<f64>().ln()
}

/// Inverse-CDF draw from `softmax(log_weights)` using one uniform `u ∈ [0, 1)`.
pub fn sample_log_categorical(log_weights: &[f64], u: f64) -> usize {
    debug_assert!(!log_weights.is_empty());
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = log_weights.iter().map(|w| (w - max).exp()).sum();
    let target = u * total;
    let mut acc = 0.0;
    for (k, w) in log_weights.iter().enumerate() {
        acc += (w - max).exp();
        if target < acc {
            return k;
        }
    }
    // u·total rounded up to the full sum: fall back to the last positive weight
    log_weights
        .iter()
        .rposition(|w| (w - max).exp() > 0.0)
        .unwrap_or(log_weights.len() - 1)
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for `worker` at `iteration`, independent of thread scheduling.
pub fn worker_rng(seed: u64, worker: usize, iteration: usize) -> SamplerRng {
    let h = splitmix64(splitmix64(splitmix64(seed) ^ worker as u64) ^ iteration as u64);
    SamplerRng::seed_from_u64(h)
}

pub fn master_rng(seed: u64) -> SamplerRng {
    SamplerRng::seed_from_u64(seed)
}
