//! Wire units exchanged between sender and receiver.

/// A transmitted data unit: a sequenced packet under SR-ARQ or a coded
/// packet identified by (block sequence, within-block transmission index)
/// under SR-FEC. Coded packets carry no coefficient vector; the receiver
/// reproduces it from the identity pair and the shared seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataUnit {
    Packet {
        seq: u64,
        /// transmission count of this copy, 1-based
        tx_count: u32,
    },
    Coded {
        block_seq: u64,
        /// per-block transmission counter, 1-based
        tx_index: u32,
        /// XOR'ed payload; absent in ideal coding mode
        payload: Option<Vec<u8>>,
    },
}

/// Feedback unit: per-packet ACK (ARQ) or per-block ACK (FEC).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AckUnit {
    Packet { seq: u64 },
    Block { block_seq: u64 },
}
