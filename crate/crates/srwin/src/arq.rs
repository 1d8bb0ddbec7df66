//! SR-ARQ sender and receiver state machines.
//!
//! The sender keeps up to `W` un-ACKed packets outstanding regardless of
//! their sequence-number range, transmitting one eligible packet per slot
//! with timed-out retransmissions served before new packets. The receiver
//! accepts every arrival, ACKs it, and holds out-of-order packets in the
//! re-sequencing buffer until the in-order gap closes.

use crate::units::DataUnit;
use std::collections::{BTreeMap, HashMap, VecDeque};

struct Outstanding {
    tx_count: u32,
    /// bumped on every (re)transmission; stale timer entries are skipped
    timer_gen: u32,
}

pub struct ArqSender {
    window: usize,
    timeout: u32,
    next_seq: u64,
    outstanding: HashMap<u64, Outstanding>,
    /// (expiry slot, seq, timer generation), non-decreasing in expiry
    timers: VecDeque<(u64, u64, u32)>,
    retransmit_queue: VecDeque<u64>,
}

impl ArqSender {
    /// Timeout is exactly `rtt`: the ACK of a surviving packet returns after
    /// `rtt` slots and ACKs are handled before timers within a slot, so the
    /// timer never fires spuriously and a lost packet's transmission slot is
    /// recycled with the same period as a successful one.
    pub fn new(window: usize, rtt: u32) -> Self {
        assert!(window >= 1);
        ArqSender {
            window,
            timeout: rtt,
            next_seq: 0,
            outstanding: HashMap::new(),
            timers: VecDeque::new(),
            retransmit_queue: VecDeque::new(),
        }
    }

    pub fn outstanding_len(&self) -> usize {
        self.outstanding.len()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    fn expire_timers(&mut self, slot: u64) {
        while let Some(&(expiry, seq, gen)) = self.timers.front() {
            if expiry > slot {
                break;
            }
            self.timers.pop_front();
            if let Some(out) = self.outstanding.get(&seq) {
                if out.timer_gen == gen {
                    self.retransmit_queue.push_back(seq);
                }
            }
        }
    }

    /// One transmission opportunity. Retransmissions take priority; a new
    /// packet goes out only while fewer than `W` packets are outstanding.
    pub fn on_slot(&mut self, slot: u64) -> Option<DataUnit> {
        self.expire_timers(slot);

        while let Some(seq) = self.retransmit_queue.pop_front() {
            // an ACK may have landed between timeout and this slot
            if let Some(out) = self.outstanding.get_mut(&seq) {
                out.tx_count += 1;
                out.timer_gen += 1;
                let gen = out.timer_gen;
                let tx_count = out.tx_count;
                self.timers.push_back((slot + self.timeout as u64, seq, gen));
                return Some(DataUnit::Packet { seq, tx_count });
            }
        }

        if self.outstanding.len() < self.window {
            let seq = self.next_seq;
            self.next_seq += 1;
            self.outstanding.insert(seq, Outstanding { tx_count: 1, timer_gen: 0 });
            self.timers.push_back((slot + self.timeout as u64, seq, 0));
            return Some(DataUnit::Packet { seq, tx_count: 1 });
        }
        None
    }

    /// Removes `seq` from the outstanding set. Duplicate or unknown ACKs are
    /// ignored. Returns the final transmission count on first ACK.
    pub fn on_ack(&mut self, seq: u64) -> Option<u32> {
        self.outstanding.remove(&seq).map(|out| out.tx_count)
    }
}

/// Packets released to the application by one arrival.
pub struct ArqReception {
    /// sequence number to ACK (every arrival is ACKed)
    pub ack: u64,
    /// `(seq, arrival slot)` of each packet delivered in order
    pub delivered: Vec<(u64, u64)>,
    /// transmission count of the arriving copy, on first arrival only
    pub first_arrival_tx: Option<u32>,
    pub duplicate: bool,
}

pub struct ArqReceiver {
    next_expected: u64,
    /// out-of-order packets, seq -> arrival slot
    buffer: BTreeMap<u64, u64>,
}

impl ArqReceiver {
    pub fn new() -> Self {
        ArqReceiver { next_expected: 0, buffer: BTreeMap::new() }
    }

    pub fn next_expected(&self) -> u64 {
        self.next_expected
    }

    /// Current re-sequencing buffer occupancy in packets.
    pub fn occupancy(&self) -> usize {
        self.buffer.len()
    }

    pub fn on_packet(&mut self, seq: u64, tx_count: u32, slot: u64) -> ArqReception {
        let duplicate = seq < self.next_expected || self.buffer.contains_key(&seq);
        let mut delivered = Vec::new();
        let mut first_arrival_tx = None;
        if !duplicate {
            first_arrival_tx = Some(tx_count);
            if seq == self.next_expected {
                delivered.push((seq, slot));
                self.next_expected += 1;
                // drain the maximal in-order run
                while let Some(entry) = self.buffer.remove(&self.next_expected) {
                    delivered.push((self.next_expected, entry));
                    self.next_expected += 1;
                }
            } else {
                self.buffer.insert(seq, slot);
            }
        }
        ArqReception { ack: seq, delivered, first_arrival_tx, duplicate }
    }
}

impl Default for ArqReceiver {
    fn default() -> Self {
        Self::new()
    }
}
