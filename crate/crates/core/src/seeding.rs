//! Stable hashing and seeded random streams.
//!
//! Everything random in this crate is derived from explicit 64-bit seeds so
//! that two runs with the same configuration are bit-identical on every
//! platform. `ChaCha8Rng` is used for streams, `splitmix64` for cheap
//! position-keyed coins.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One round of the splitmix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a over a byte string.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Order-dependent combination of two hashes.
pub fn combine(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b).rotate_left(17))
}

/// Independent stream `stream` derived from `seed`.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

const TIE_SEED: u64 = 0x7e1e_b4ea_c0ff_ee01;

/// Fixed coin for component `index`: +1.0 or -1.0.
///
/// Used wherever a sign of exactly zero must be resolved. The coin depends
/// only on the component index, so results do not depend on evaluation order
/// or on how a vector is split into blocks.
pub fn tie_coin(index: usize) -> f64 {
    if splitmix64(TIE_SEED ^ index as u64) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}
