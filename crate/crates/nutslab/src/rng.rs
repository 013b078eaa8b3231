//! Seeded random streams.
//!
//! A master seed and a chain index produce four independent ChaCha streams,
//! so that the momentum draws, the direction bits, the selection uniforms and
//! any experiment noise never share state. Changing how many uniforms one
//! consumer draws leaves the others untouched.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MOMENTUM: u64 = 1;
const BITS: u64 = 2;
const SELECTION: u64 = 3;
const NOISE: u64 = 4;

/// SplitMix64 finaliser, used to spread (seed, chain) pairs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream(seed: u64, chain: u64, which: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ mix(chain)));
    rng.set_stream(which);
    rng
}

/// The named random streams owned by one chain.
#[derive(Debug, Clone)]
pub struct ChainStreams {
    pub momentum: ChaCha8Rng,
    pub bits: ChaCha8Rng,
    pub selection: ChaCha8Rng,
    pub noise: ChaCha8Rng,
}

impl ChainStreams {
    pub fn new(seed: u64, chain: u64) -> Self {
        Self {
            momentum: stream(seed, chain, MOMENTUM),
            bits: stream(seed, chain, BITS),
            selection: stream(seed, chain, SELECTION),
            noise: stream(seed, chain, NOISE),
        }
    }
}

/// Source of the uniform direction bits that drive orbit doubling.
pub trait BitSource {
    fn next_bit(&mut self) -> bool;
}

impl BitSource for ChaCha8Rng {
    fn next_bit(&mut self) -> bool {
        self.random::<bool>()
    }
}

impl<T: BitSource + ?Sized> BitSource for &mut T {
    fn next_bit(&mut self) -> bool {
        (**self).next_bit()
    }
}

/// A fixed bit string, for exhaustive enumeration. Reading past the end
/// panics since callers size the string to the maximum depth.
#[derive(Debug, Clone)]
pub struct FixedBits {
    bits: Vec<bool>,
    pos: usize,
}

impl FixedBits {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits, pos: 0 }
    }

    /// The bits of `value`, least significant first.
    pub fn from_integer(value: u64, len: usize) -> Self {
        Self::new((0..len).map(|i| (value >> i) & 1 == 1).collect())
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }
}

impl BitSource for FixedBits {
    fn next_bit(&mut self) -> bool {
        let b = self.bits[self.pos];
        self.pos += 1;
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = ChainStreams::new(7, 0);
        let mut b = ChainStreams::new(7, 0);
        let xs: Vec<u64> = (0..4).map(|_| a.momentum.next_u64()).collect();
        let ys: Vec<u64> = (0..4).map(|_| b.momentum.next_u64()).collect();
        assert_eq!(xs, ys);
        let zs: Vec<u64> = (0..4).map(|_| b.bits.next_u64()).collect();
        assert_ne!(ys, zs);
        let mut c = ChainStreams::new(7, 1);
        assert_ne!(xs[0], c.momentum.next_u64());
    }

    #[test]
    fn fixed_bits_little_endian() {
        let mut f = FixedBits::from_integer(0b110, 3);
        assert_eq!([f.next_bit(), f.next_bit(), f.next_bit()], [false, true, true]);
        assert_eq!(f.consumed(), 3);
    }
}
