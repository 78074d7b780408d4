//! Deterministic random streams.
//!
//! Every random quantity in the crate is drawn from a `ChaCha8Rng` whose key
//! is derived from a user seed and a path of labels (experiment, replication
//! pool, outer sample, ...) and whose stream number is the replication index.
//! A replication therefore owns its generator outright, and results do not
//! depend on how replications are scheduled across worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used project-wide.
pub type StreamRng = ChaCha8Rng;

/// Stream labels used by the crate. Distinct labels give disjoint key spaces.
pub mod label {
    pub const SIMULATE: u64 = 0x5349_4d55;
    pub const FORGETTING: u64 = 0x464f_5247;
    pub const CERTIFY: u64 = 0x4345_5254;
    pub const INNER: u64 = 0x494e_4e52;
    pub const OUTER_X1: u64 = 0x4f58_3131;
    pub const OUTER_EPS: u64 = 0x4f45_5053;
    pub const STATIONARY: u64 = 0x5354_4154;
    pub const MEAN: u64 = 0x4d45_414e;
    pub const TAIL: u64 = 0x5441_494c;
    pub const MGF: u64 = 0x4d47_4621;
    pub const RATES: u64 = 0x5241_5445;
    pub const LIPSCHITZ: u64 = 0x4c49_5053;
    pub const MOMENT: u64 = 0x4d4f_4d54;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A node in a tree of derived seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedTree {
    key: [u64; 4],
}

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        let a = splitmix64(seed);
        let b = splitmix64(a ^ 0x6a09_e667_f3bc_c908);
        let c = splitmix64(b ^ 0xbb67_ae85_84ca_a73b);
        let d = splitmix64(c ^ 0x3c6e_f372_fe94_f82b);
        Self { key: [a, b, c, d] }
    }

    /// Derives an independent child node for `label`.
    #[must_use]
    pub fn child(&self, label: u64) -> Self {
        let mut key = [0u64; 4];
        let mut acc = splitmix64(label ^ 0xa54f_f53a_5f1d_36f1);
        for (i, k) in self.key.iter().enumerate() {
            acc = splitmix64(acc ^ k.rotate_left(17 * i as u32));
            key[i] = acc;
        }
        Self { key }
    }

    /// Generator for stream `index` under this node.
    pub fn rng(&self, index: u64) -> StreamRng {
        let mut bytes = [0u8; 32];
        for (chunk, k) in bytes.chunks_exact_mut(8).zip(self.key.iter()) {
            chunk.copy_from_slice(&k.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(bytes);
        rng.set_stream(index);
        rng
    }
}
