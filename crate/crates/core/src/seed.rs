//! Seed derivation so every image (and every experiment variant) owns an
//! independent random stream regardless of generation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Dataset split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Split {
    Train,
    Val,
}

impl Split {
    pub const ALL: [Split; 2] = [Split::Train, Split::Val];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Split::Train => 0x7472_6169_6e00_0001, // "train"
            Split::Val => 0x7661_6c00_0000_0002,   // "val"
        }
    }
}

impl core::fmt::Display for Split {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Weyl increment (2^64 / golden ratio, odd).
const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer; a bijection on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of image `index` in `split`.
///
/// `mix64(mix64(master ^ split_tag) + (index + 1) * GOLDEN_GAMMA)`. For a fixed
/// master seed and split the map from index to seed is injective, since both
/// the odd multiply and `mix64` are bijections.
pub fn derive_image_seed(master_seed: u64, split: Split, image_index: u64) -> u64 {
    let base = mix64(master_seed ^ split.tag());
    mix64(base.wrapping_add(image_index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Master seed of an experiment variant, mixed from the experiment seed and
/// the variant name.
pub fn derive_variant_seed(master_seed: u64, variant_name: &str) -> u64 {
    mix64(master_seed ^ mix64(fnv1a(variant_name.as_bytes())))
}

/// The generator's RNG for one image.
pub fn image_rng(master_seed: u64, split: Split, image_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_image_seed(master_seed, split, image_index))
}
