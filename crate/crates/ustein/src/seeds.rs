//! Deterministic sub-stream derivation.
//!
//! Every randomized task in the library draws from a [`rand_pcg::Pcg64`]
//! whose seed is derived from the root seed and a list of label words via
//! SplitMix64. Chunk and task boundaries are fixed constants, so results
//! are bit-identical under any parallel schedule.
//!
//! The mix function is part of the output contract (reports are
//! reproducible from `(seed, budgets, flags)` alone) and must not change
//! between releases: starting from the root seed, each label word is
//! multiplied by the 64-bit golden ratio constant, XORed into the state,
//! and the state is advanced by one SplitMix64 step.

use rand_pcg::Pcg64;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// One SplitMix64 output step; advances `state` and returns the mixed word.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a sub-seed from a root seed and label words.
pub fn mix(root: u64, words: &[u64]) -> u64 {
    let mut state = root;
    let mut out = splitmix64(&mut state);
    for &w in words {
        state ^= w.wrapping_mul(GOLDEN);
        out = splitmix64(&mut state);
    }
    out
}

/// RNG for the sub-stream labelled by `words` under `root`.
pub fn rng_for(root: u64, words: &[u64]) -> Pcg64 {
    let mut state = mix(root, words);
    // Expand the 64-bit sub-seed into the full 128+128-bit Pcg64 state.
    let a = splitmix64(&mut state);
    let b = splitmix64(&mut state);
    let c = splitmix64(&mut state);
    let d = splitmix64(&mut state);
    let seed_state = ((a as u128) << 64) | b as u128;
    let seed_stream = ((c as u128) << 64) | d as u128;
    Pcg64::new(seed_state, seed_stream)
}

/// Folds point coordinates into label words for point-keyed sub-streams.
pub fn coord_words(coords: &[f64]) -> Vec<u64> {
    coords.iter().map(|c| c.to_bits()).collect()
}

/// Fixed task labels. New tags may be appended; existing values are frozen.
pub mod tag {
    pub const MC_CHUNK: u64 = 1;
    pub const REPLICATE: u64 = 2;
    pub const PROJECTION: u64 = 3;
    pub const COVARIANCE: u64 = 4;
    pub const M_VARIANCE: u64 = 5;
    pub const M_FOURTH: u64 = 6;
    pub const DICTIONARY: u64 = 7;
    pub const SYMMETRY: u64 = 8;
    pub const EXPECTATION: u64 = 9;
    pub const POISSON: u64 = 10;
    pub const SELFTEST: u64 = 11;
}

/// Standard normal pair via Box–Muller from two uniforms.
pub fn normal_pair(rng: &mut Pcg64) -> (f64, f64) {
    use rand::Rng;
    // 1 - u ∈ (0, 1] keeps the log finite.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    (r * theta.cos(), r * theta.sin())
}
