//! SR-FEC sender and receiver: block-structured rateless coding with
//! per-block ACK counting, full-rank decoding and in-order block delivery.
//!
//! Two coding modes are supported. In *ideal* mode every packet arriving for
//! an undecoded block is innovative, which matches the negative-binomial
//! per-block transmission count assumed by the exact analysis. In
//! *oblivious* mode the sender draws a uniformly random coefficient mask
//! (empty subset allowed) for every transmission and the receiver runs real
//! GF(2) elimination, paying the dependent-packet overhead.
//!
//! Coefficient masks never travel on the wire: both ends derive the mask of
//! packet `(block_seq, tx_index)` from the shared seed via
//! [`crate::gf2::mask_from`].

use crate::gf2::{encode_subset, mask_from, Gf2Decoder};
use crate::units::DataUnit;
use std::collections::{BTreeMap, VecDeque};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodingMode {
    Ideal,
    Oblivious,
}

/// Deterministic synthetic payload of original packet `index` of a block.
/// Sender and receiver share this, standing in for application data.
pub fn payload_of(seed: u64, block_seq: u64, index: usize, len: usize) -> Vec<u8> {
    let mut x = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(block_seq.rotate_left(17))
        .wrapping_add((index as u64).rotate_left(41));
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        x ^= x >> 31;
        out.extend_from_slice(&x.to_le_bytes());
    }
    out.truncate(len);
    out
}

struct BlockTx {
    acked: u32,
    acked_full: bool,
    next_tx_index: u32,
    /// (expiry slot, timer id) of live in-flight transmissions, FIFO
    live_timers: VecDeque<(u64, u64)>,
    /// cached originals, oblivious mode only
    originals: Option<Vec<Vec<u8>>>,
}

impl BlockTx {
    fn new() -> Self {
        BlockTx {
            acked: 0,
            acked_full: false,
            next_tx_index: 0,
            live_timers: VecDeque::new(),
            originals: None,
        }
    }

    fn pending(&self) -> usize {
        self.live_timers.len()
    }
}

pub struct FecSender {
    window: usize,
    block_size: usize,
    packet_len: usize,
    timeout: u32,
    mode: CodingMode,
    seed: u64,
    /// b*: block currently being credited toward B pending-plus-received ACKs
    next_block: u64,
    /// smallest block not yet released from the sender window
    base_block: u64,
    blocks: BTreeMap<u64, BlockTx>,
    in_flight: usize,
    /// (expiry, block, timer id), non-decreasing in expiry
    timer_queue: VecDeque<(u64, u64, u64)>,
    next_timer_id: u64,
    retransmit_queue: VecDeque<u64>,
}

impl FecSender {
    pub fn new(
        window: usize,
        block_size: usize,
        packet_len: usize,
        rtt: u32,
        mode: CodingMode,
        seed: u64,
    ) -> Self {
        assert!(block_size >= 1 && window >= block_size);
        FecSender {
            window,
            block_size,
            packet_len,
            timeout: rtt,
            mode,
            seed,
            next_block: 0,
            base_block: 0,
            blocks: BTreeMap::new(),
            in_flight: 0,
            timer_queue: VecDeque::new(),
            next_timer_id: 0,
            retransmit_queue: VecDeque::new(),
        }
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight
    }

    pub fn base_block(&self) -> u64 {
        self.base_block
    }

    fn expire_timers(&mut self, slot: u64) {
        while let Some(&(expiry, block_seq, timer_id)) = self.timer_queue.front() {
            if expiry > slot {
                break;
            }
            self.timer_queue.pop_front();
            if let Some(block) = self.blocks.get_mut(&block_seq) {
                if let Some(&(_, front_id)) = block.live_timers.front() {
                    if front_id == timer_id {
                        // this transmission got neither ACK nor cancellation
                        block.live_timers.pop_front();
                        self.in_flight -= 1;
                        self.retransmit_queue.push_back(block_seq);
                    }
                }
            }
        }
    }

    /// Emits a fresh coded packet for `block_seq` (never a byte-identical
    /// resend: the transmission index always advances).
    fn make_coded_packet(&mut self, block_seq: u64, slot: u64) -> DataUnit {
        let block_size = self.block_size;
        let packet_len = self.packet_len;
        let (mode, seed) = (self.mode, self.seed);
        let block = self.blocks.entry(block_seq).or_insert_with(BlockTx::new);
        debug_assert!(!block.acked_full, "coded packet requested for fully ACKed block");
        block.next_tx_index += 1;
        let tx_index = block.next_tx_index;

        let payload = match mode {
            CodingMode::Ideal => None,
            CodingMode::Oblivious => {
                let originals = block.originals.get_or_insert_with(|| {
                    (0..block_size)
                        .map(|i| payload_of(seed, block_seq, i, packet_len))
                        .collect()
                });
                let mask = mask_from(seed, block_seq, tx_index, block_size);
                Some(encode_subset(&mask, originals, packet_len))
            }
        };

        let timer_id = self.next_timer_id;
        self.next_timer_id += 1;
        let expiry = slot + self.timeout as u64;
        block.live_timers.push_back((expiry, timer_id));
        self.timer_queue.push_back((expiry, block_seq, timer_id));
        self.in_flight += 1;

        DataUnit::Coded { block_seq, tx_index, payload }
    }

    /// One transmission opportunity. Timed-out blocks are served first with
    /// a fresh coded packet; otherwise a packet for b* goes out while the
    /// in-flight total is below the window.
    pub fn on_slot(&mut self, slot: u64) -> Option<DataUnit> {
        self.expire_timers(slot);

        while let Some(block_seq) = self.retransmit_queue.pop_front() {
            // skip blocks released or fully ACKed meanwhile
            let needs_more = self.blocks.get(&block_seq).is_some_and(|b| !b.acked_full);
            if needs_more {
                return Some(self.make_coded_packet(block_seq, slot));
            }
        }

        if self.in_flight < self.window {
            let block_seq = self.next_block;
            let unit = self.make_coded_packet(block_seq, slot);
            let block = &self.blocks[&block_seq];
            if block.acked as usize + block.pending() >= self.block_size {
                self.next_block += 1;
            }
            return Some(unit);
        }
        None
    }

    /// Credits one ACK to `block_seq`. The oldest live transmission timer is
    /// cancelled; on the B-th ACK the block is marked ACKed and in-order
    /// ACKed blocks are released from the window. ACKs beyond B, or for
    /// already released blocks, are ignored.
    pub fn on_ack(&mut self, block_seq: u64) {
        let Some(block) = self.blocks.get_mut(&block_seq) else {
            return;
        };
        if block.acked_full {
            return;
        }
        block.acked += 1;
        if block.live_timers.pop_front().is_some() {
            self.in_flight -= 1;
        }
        if block.acked as usize >= self.block_size {
            block.acked_full = true;
            self.in_flight -= block.live_timers.len();
            block.live_timers.clear();
            while let Some(front) = self.blocks.get(&self.base_block) {
                if !front.acked_full {
                    break;
                }
                self.blocks.remove(&self.base_block);
                self.base_block += 1;
            }
        }
    }
}

struct BlockRx {
    /// ideal-mode arrival counter; oblivious mode mirrors `decoder.rank()`
    rank: usize,
    decoder: Option<Gf2Decoder>,
    /// arrival slot of each innovative packet
    arrival_slots: Vec<u64>,
    decoded: Option<Vec<Vec<u8>>>,
    /// transmission index of the packet that completed the block
    completing_tx_index: Option<u32>,
}

pub struct DeliveredBlock {
    pub block_seq: u64,
    pub payloads: Vec<Vec<u8>>,
    pub arrival_slots: Vec<u64>,
    pub completing_tx_index: u32,
    pub delivered_slot: u64,
}

pub struct FecReception {
    /// block to ACK; only innovative packets earn an ACK
    pub ack: Option<u64>,
    pub innovative: bool,
    pub delivered: Vec<DeliveredBlock>,
}

pub struct FecReceiver {
    block_size: usize,
    packet_len: usize,
    mode: CodingMode,
    seed: u64,
    next_expected_block: u64,
    active: BTreeMap<u64, BlockRx>,
    /// buffered innovative packets of undecoded blocks plus all B packets of
    /// each decoded-but-blocked block
    occupancy: usize,
    pub wasted: u64,
}

impl FecReceiver {
    pub fn new(block_size: usize, packet_len: usize, mode: CodingMode, seed: u64) -> Self {
        FecReceiver {
            block_size,
            packet_len,
            mode,
            seed,
            next_expected_block: 0,
            active: BTreeMap::new(),
            occupancy: 0,
            wasted: 0,
        }
    }

    pub fn occupancy(&self) -> usize {
        self.occupancy
    }

    pub fn next_expected_block(&self) -> u64 {
        self.next_expected_block
    }

    pub fn block_rank(&self, block_seq: u64) -> usize {
        self.active.get(&block_seq).map_or(0, |b| b.rank)
    }

    pub fn on_packet(
        &mut self,
        block_seq: u64,
        tx_index: u32,
        payload: Option<&[u8]>,
        slot: u64,
    ) -> FecReception {
        if block_seq < self.next_expected_block {
            // block already delivered; packet is late surplus
            self.wasted += 1;
            return FecReception { ack: None, innovative: false, delivered: Vec::new() };
        }

        let block_size = self.block_size;
        let packet_len = self.packet_len;
        let (mode, seed) = (self.mode, self.seed);
        let block = self.active.entry(block_seq).or_insert_with(|| BlockRx {
            rank: 0,
            decoder: match mode {
                CodingMode::Ideal => None,
                CodingMode::Oblivious => Some(Gf2Decoder::new(block_size, packet_len)),
            },
            arrival_slots: Vec::new(),
            decoded: None,
            completing_tx_index: None,
        });

        let innovative = match mode {
            CodingMode::Ideal => block.decoded.is_none(),
            CodingMode::Oblivious => {
                let decoder = block.decoder.as_mut().expect("oblivious block has a decoder");
                let mask = mask_from(seed, block_seq, tx_index, block_size);
                let payload = payload.expect("oblivious coded packet carries a payload");
                decoder
                    .absorb(&mask, payload)
                    .expect("mask and payload sized by construction")
            }
        };

        if innovative {
            block.rank += 1;
            block.arrival_slots.push(slot);
            self.occupancy += 1;
            if block.rank == block_size && block.decoded.is_none() {
                block.completing_tx_index = Some(tx_index);
                block.decoded = Some(match mode {
                    CodingMode::Ideal => (0..block_size)
                        .map(|i| payload_of(seed, block_seq, i, packet_len))
                        .collect(),
                    CodingMode::Oblivious => block
                        .decoder
                        .as_ref()
                        .expect("oblivious block has a decoder")
                        .decode()
                        .expect("decoder is full rank"),
                });
            }
        } else {
            self.wasted += 1;
        }

        let mut delivered = Vec::new();
        while let Some(front) = self.active.get(&self.next_expected_block) {
            if front.decoded.is_none() {
                break;
            }
            let block_seq = self.next_expected_block;
            let block = self.active.remove(&block_seq).unwrap();
            self.occupancy -= self.block_size;
            delivered.push(DeliveredBlock {
                block_seq,
                payloads: block.decoded.unwrap(),
                arrival_slots: block.arrival_slots,
                completing_tx_index: block.completing_tx_index.unwrap(),
                delivered_slot: slot,
            });
            self.next_expected_block += 1;
        }

        FecReception {
            ack: innovative.then_some(block_seq),
            innovative,
            delivered,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coded(unit: &DataUnit) -> (u64, u32) {
        match unit {
            DataUnit::Coded { block_seq, tx_index, .. } => (*block_seq, *tx_index),
            _ => panic!("expected coded unit"),
        }
    }

    #[test]
    fn ideal_block_decodes_after_exactly_b_arrivals() {
        let b = 4;
        let mut rx = FecReceiver::new(b, 8, CodingMode::Ideal, 1);
        for i in 1..=b as u32 {
            let rec = rx.on_packet(0, i, None, i as u64);
            assert!(rec.innovative);
            assert_eq!(rec.ack, Some(0));
            if (i as usize) < b {
                assert!(rec.delivered.is_empty());
            } else {
                assert_eq!(rec.delivered.len(), 1);
                assert_eq!(rec.delivered[0].completing_tx_index, b as u32);
            }
        }
        assert_eq!(rx.occupancy(), 0);
    }

    #[test]
    fn ideal_surplus_arrival_is_wasted() {
        let mut rx = FecReceiver::new(1, 8, CodingMode::Ideal, 1);
        rx.on_packet(0, 1, None, 0);
        let rec = rx.on_packet(0, 2, None, 1);
        assert!(!rec.innovative);
        assert!(rec.ack.is_none());
        assert_eq!(rx.wasted, 1);
    }

    #[test]
    fn out_of_order_block_held_until_gap_closes() {
        let mut rx = FecReceiver::new(1, 8, CodingMode::Ideal, 1);
        // block 1 decodes first
        let rec = rx.on_packet(1, 1, None, 0);
        assert!(rec.delivered.is_empty());
        assert_eq!(rx.occupancy(), 1); // decoded-but-blocked counts its B packets
        let rec = rx.on_packet(0, 1, None, 5);
        let seqs: Vec<u64> = rec.delivered.iter().map(|d| d.block_seq).collect();
        assert_eq!(seqs, vec![0, 1]);
        assert_eq!(rx.occupancy(), 0);
    }

    #[test]
    fn oblivious_roundtrip_delivers_original_payloads() {
        let seed = 42;
        let (b, len) = (8, 8);
        let mut tx = FecSender::new(64, b, len, 4, CodingMode::Oblivious, seed);
        let mut rx = FecReceiver::new(b, len, CodingMode::Oblivious, seed);
        let mut slot = 0u64;
        loop {
            if let Some(DataUnit::Coded { block_seq, tx_index, payload }) = tx.on_slot(slot) {
                let rec = rx.on_packet(block_seq, tx_index, payload.as_deref(), slot);
                if let Some(block) = rec.ack {
                    tx.on_ack(block);
                }
                if let Some(delivered) = rec.delivered.first() {
                    if delivered.block_seq == 0 {
                        for (i, payload) in delivered.payloads.iter().enumerate() {
                            assert_eq!(payload, &payload_of(seed, 0, i, len));
                        }
                        return;
                    }
                }
            }
            slot += 1;
            assert!(slot < 10_000, "block never decoded");
        }
    }

    #[test]
    fn sender_b_equals_one_releases_on_single_ack() {
        let mut tx = FecSender::new(4, 1, 8, 4, CodingMode::Ideal, 1);
        let (block, _) = coded(&tx.on_slot(0).unwrap());
        assert_eq!(block, 0);
        tx.on_ack(0);
        assert_eq!(tx.base_block(), 1);
    }

    #[test]
    fn sender_retains_block_until_b_acks() {
        let mut tx = FecSender::new(8, 3, 8, 100, CodingMode::Ideal, 1);
        for slot in 0..3 {
            tx.on_slot(slot);
        }
        tx.on_ack(0);
        tx.on_ack(0);
        assert_eq!(tx.base_block(), 0);
        tx.on_ack(0);
        assert_eq!(tx.base_block(), 1);
    }

    #[test]
    fn in_order_release_waits_for_head_block() {
        let mut tx = FecSender::new(8, 1, 8, 100, CodingMode::Ideal, 1);
        assert_eq!(coded(&tx.on_slot(0).unwrap()).0, 0);
        assert_eq!(coded(&tx.on_slot(1).unwrap()).0, 1);
        tx.on_ack(1); // block 1 fully ACKed first
        assert_eq!(tx.base_block(), 0);
        tx.on_ack(0);
        assert_eq!(tx.base_block(), 2);
    }

    #[test]
    fn timeout_emits_fresh_tx_index() {
        let mut tx = FecSender::new(1, 1, 8, 4, CodingMode::Ideal, 1); // timeout 4
        assert_eq!(coded(&tx.on_slot(0).unwrap()), (0, 1));
        assert!(tx.on_slot(3).is_none()); // window full, no timeout yet
        assert_eq!(coded(&tx.on_slot(4).unwrap()), (0, 2));
    }

    #[test]
    fn b_star_advances_on_pending_plus_acked() {
        let mut tx = FecSender::new(16, 2, 8, 100, CodingMode::Ideal, 1);
        // two pending transmissions for block 0 satisfy the advance rule
        assert_eq!(coded(&tx.on_slot(0).unwrap()).0, 0);
        assert_eq!(coded(&tx.on_slot(1).unwrap()).0, 0);
        assert_eq!(coded(&tx.on_slot(2).unwrap()).0, 1);
    }

    #[test]
    fn window_bounds_in_flight() {
        let w = 4;
        let mut tx = FecSender::new(w, 2, 8, 1000, CodingMode::Ideal, 1);
        for slot in 0..w as u64 {
            assert!(tx.on_slot(slot).is_some());
        }
        assert!(tx.on_slot(w as u64).is_none());
        assert_eq!(tx.in_flight(), w);
        tx.on_ack(0);
        assert_eq!(tx.in_flight(), w - 1);
        assert!(tx.on_slot(w as u64 + 1).is_some());
    }

    #[test]
    fn payload_of_is_deterministic_and_length_exact() {
        assert_eq!(payload_of(1, 2, 3, 10), payload_of(1, 2, 3, 10));
        assert_ne!(payload_of(1, 2, 3, 10), payload_of(1, 2, 4, 10));
        assert_eq!(payload_of(9, 9, 9, 13).len(), 13);
    }
}
