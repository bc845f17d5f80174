//! Counter-based deterministic random numbers.
//!
//! All randomness in the crate flows through keyed, stateless streams: a
//! draw is a pure function of `(key, counter)`, so parallel evaluation in
//! any order reproduces the sequential result bit for bit. Keys are derived
//! from a user seed by labelled hashing, which keeps the streams of
//! different pipeline stages independent of each other.

use std::f64::consts::TAU;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold one word into a hash state. Not commutative: `mix(a, b) != mix(b, a)`.
pub fn mix(state: u64, word: u64) -> u64 {
    splitmix64(splitmix64(state).wrapping_add(word))
}

/// Derive an independent stream key from a seed and a textual label.
pub fn derive_stream(seed: u64, label: &str) -> u64 {
    label
        .bytes()
        .fold(splitmix64(seed), |h, b| mix(h, u64::from(b)))
}

/// Uniform draw in the open interval (0, 1).
pub fn uniform_open01(key: u64, counter: u64) -> f64 {
    let bits = mix(key, counter);
    // 53 mantissa bits, offset by half an ulp so 0 and 1 are excluded.
    ((bits >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

/// Standard normal draw via Box-Muller. Consumes uniform counters
/// `2 * counter` and `2 * counter + 1`, so distinct counters never overlap.
pub fn standard_normal(key: u64, counter: u64) -> f64 {
    let u1 = uniform_open01(key, 2 * counter);
    let u2 = uniform_open01(key, 2 * counter + 1);
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}
