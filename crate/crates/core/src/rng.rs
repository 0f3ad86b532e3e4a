//! Deterministic seed families. Every random stream in a run is derived from
//! the scenario seed plus a small tuple of stream labels.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(splitmix(base), |acc, &l| splitmix(acc ^ splitmix(l)))
}

pub fn stream(base: u64, labels: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, labels))
}

/// Stream labels, kept distinct so that seeds never collide across roles.
pub mod label {
    pub const LOADING: u64 = 1;
    pub const SPAN: u64 = 2;
    pub const KICKER: u64 = 3;
    pub const PROBE_SOP: u64 = 4;
    pub const REPEATER_ASE: u64 = 5;
    pub const DETECT: u64 = 6;
    pub const MEMBER: u64 = 7;
}
