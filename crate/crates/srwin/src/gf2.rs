//! Incremental linear algebra over GF(2).
//!
//! A random fountain code transmits XOR combinations of the packets in a
//! coding block. The receiver tracks, per block, the span of the coefficient
//! vectors seen so far; a packet is *innovative* when its coefficient vector
//! is independent of that span. Once the span reaches full rank the block is
//! solvable and the original packets can be read back out.
//!
//! [`Gf2Decoder`] keeps its pivot rows fully reduced as packets are absorbed,
//! so innovation detection costs one elimination pass and decoding at full
//! rank is a straight read of the payload rows.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum Gf2Error {
    #[error("mask length {got} does not match block size {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("payload length {got} does not match packet length {expected}")]
    PayloadMismatch { expected: usize, got: usize },
    #[error("decode requires full rank (rank {rank} of {block_size})")]
    NotFullRank { rank: usize, block_size: usize },
}

/// Characteristic vector of the XOR'ed packet subset of one coded packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMask {
    len: usize,
    words: Vec<u64>,
}

impl BitMask {
    pub fn zero(len: usize) -> Self {
        BitMask {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_indices(len: usize, indices: &[usize]) -> Self {
        let mut mask = Self::zero(len);
        for &i in indices {
            mask.set(i, true);
        }
        mask
    }

    /// Unit vector with a single bit set.
    pub fn unit(len: usize, index: usize) -> Self {
        Self::from_indices(len, &[index])
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, index: usize) -> bool {
        debug_assert!(index < self.len);
        self.words[index / 64] >> (index % 64) & 1 == 1
    }

    pub fn set(&mut self, index: usize, value: bool) {
        debug_assert!(index < self.len);
        let word = &mut self.words[index / 64];
        if value {
            *word |= 1 << (index % 64);
        } else {
            *word &= !(1 << (index % 64));
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Index of the lowest set bit, the pivot position used for elimination.
    pub fn leading_bit(&self) -> Option<usize> {
        for (i, &w) in self.words.iter().enumerate() {
            if w != 0 {
                return Some(i * 64 + w.trailing_zeros() as usize);
            }
        }
        None
    }

    pub fn xor_assign(&mut self, other: &BitMask) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    /// Builds a mask of `len` bits from a little-endian word stream.
    pub fn from_words(len: usize, words: impl Iterator<Item = u64>) -> Self {
        let n_words = len.div_ceil(64);
        let mut out: Vec<u64> = words.take(n_words).collect();
        debug_assert_eq!(out.len(), n_words);
        // clear bits past len
        if len % 64 != 0 {
            if let Some(last) = out.last_mut() {
                *last &= (1u64 << (len % 64)) - 1;
            }
        }
        BitMask { len, words: out }
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

struct PivotRow {
    mask: BitMask,
    payload: Vec<u8>,
}

/// Incremental rank/solve state for one coding block.
///
/// Pivot rows are kept row-reduced: each stored row has a distinct leading
/// bit and no stored row has any other row's leading bit set. Payload rows
/// receive exactly the same XOR operations as their masks, so at full rank
/// every mask is a unit vector and decoding is a direct read.
pub struct Gf2Decoder {
    block_size: usize,
    packet_len: usize,
    // indexed by leading-bit position
    pivots: Vec<Option<PivotRow>>,
    rank: usize,
}

impl Gf2Decoder {
    pub fn new(block_size: usize, packet_len: usize) -> Self {
        assert!(block_size >= 1, "block size must be positive");
        let mut pivots = Vec::with_capacity(block_size);
        pivots.resize_with(block_size, || None);
        Gf2Decoder {
            block_size,
            packet_len,
            pivots,
            rank: 0,
        }
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.block_size
    }

    /// Absorbs one coded packet. Returns `true` iff the mask was linearly
    /// independent of the rows stored so far (the packet is innovative); a
    /// dependent packet leaves the decoder untouched.
    pub fn absorb(&mut self, mask: &BitMask, payload: &[u8]) -> Result<bool, Gf2Error> {
        if mask.len() != self.block_size {
            return Err(Gf2Error::DimensionMismatch {
                expected: self.block_size,
                got: mask.len(),
            });
        }
        if payload.len() != self.packet_len {
            return Err(Gf2Error::PayloadMismatch {
                expected: self.packet_len,
                got: payload.len(),
            });
        }

        // Reduce against existing pivots, ascending. A pivot row's mask has
        // no set bits below its own pivot and none at other pivot positions,
        // so one pass leaves the new row zero at every pivot position.
        let mut mask = mask.clone();
        let mut payload = payload.to_vec();
        for j in 0..self.block_size {
            if mask.get(j) {
                if let Some(row) = &self.pivots[j] {
                    mask.xor_assign(&row.mask);
                    xor_bytes(&mut payload, &row.payload);
                }
            }
        }
        let Some(lead) = mask.leading_bit() else {
            return Ok(false);
        };

        // Eliminate the new pivot bit from all stored rows to keep the basis
        // row-reduced.
        for i in 0..self.block_size {
            if let Some(row) = self.pivots[i].as_mut() {
                if row.mask.get(lead) {
                    row.mask.xor_assign(&mask);
                    xor_bytes(&mut row.payload, &payload);
                }
            }
        }
        self.pivots[lead] = Some(PivotRow { mask, payload });
        self.rank += 1;
        Ok(true)
    }

    /// Solves the block. At full rank every pivot mask is a unit vector, so
    /// the payload rows *are* the original packets in order.
    pub fn decode(&self) -> Result<Vec<Vec<u8>>, Gf2Error> {
        if !self.is_full_rank() {
            return Err(Gf2Error::NotFullRank {
                rank: self.rank,
                block_size: self.block_size,
            });
        }
        Ok(self
            .pivots
            .iter()
            .map(|row| {
                let row = row.as_ref().expect("full rank implies every pivot present");
                debug_assert_eq!(row.mask.count_ones(), 1);
                row.payload.clone()
            })
            .collect())
    }
}

fn xor_bytes(dst: &mut [u8], src: &[u8]) {
    debug_assert_eq!(dst.len(), src.len());
    for (a, b) in dst.iter_mut().zip(src) {
        *a ^= b;
    }
}

/// XOR of the payloads selected by `mask` out of `packets`.
pub fn encode_subset(mask: &BitMask, packets: &[Vec<u8>], packet_len: usize) -> Vec<u8> {
    debug_assert_eq!(mask.len(), packets.len());
    let mut out = vec![0u8; packet_len];
    for (i, packet) in packets.iter().enumerate() {
        if mask.get(i) {
            xor_bytes(&mut out, packet);
        }
    }
    out
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// 64-bit avalanche mix (splitmix64 finalizer).
fn mix64(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Deterministic coefficient mask for one coded packet.
///
/// The sender and receiver both derive the mask of the packet identified by
/// `(block_seq, tx_index)` from the shared seed, so no coefficients travel on
/// the wire. The mask is uniform over all `2^block_size` subsets, including
/// the empty one. This function is pinned by test vectors; changing it breaks
/// sender/receiver synchronization across versions.
pub fn mask_from(seed: u64, block_seq: u64, tx_index: u32, block_size: usize) -> BitMask {
    let mut state = mix64(seed ^ GOLDEN_GAMMA)
        ^ mix64(block_seq.wrapping_add(0x8000_0000_0000_0000))
        ^ mix64((tx_index as u64).wrapping_mul(GOLDEN_GAMMA) ^ 0x5851_f42d_4c95_7f2d);
    BitMask::from_words(
        block_size,
        std::iter::from_fn(move || {
            state = state.wrapping_add(GOLDEN_GAMMA);
            Some(mix64(state))
        }),
    )
}
