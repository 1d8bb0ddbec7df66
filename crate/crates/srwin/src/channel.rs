//! Bernoulli-loss, fixed-latency forward and feedback channels.
//!
//! Loss is decided at injection from a seeded generator, so a run's loss
//! pattern is reproducible and independent of anything the protocols do.
//! Surviving units are delivered after a fixed one-way latency in injection
//! order; the model has no reordering and no duplication. The forward one-way
//! latency is `ceil(R/2)` and the feedback one-way latency `floor(R/2)`, so a
//! packet and its immediate ACK complete in exactly `R` slots.

use crate::units::{AckUnit, DataUnit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
pub struct ChannelConfig {
    /// forward loss probability
    pub p: f64,
    /// feedback loss probability
    pub pa: f64,
    /// round-trip time in slots
    pub rtt: u32,
    pub seed: u64,
}

/// Fixed stream offsets deriving per-process seeds from the master seed, so
/// changing one random process cannot perturb the others.
const STREAM_FORWARD: u64 = 0x464f_5257;
const STREAM_FEEDBACK: u64 = 0x4645_4544;

fn stream_seed(master: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over master ^ stream tag
    let mut x = master ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// One direction of the channel. Latency is constant, so the in-flight queue
/// stays sorted by delivery slot with plain FIFO pushes.
pub struct Link<T> {
    latency: u32,
    loss: f64,
    rng: ChaCha8Rng,
    in_flight: VecDeque<(u64, T)>,
    last_poll: Option<u64>,
    pub injected: u64,
    pub dropped: u64,
    pub delivered: u64,
}

impl<T> Link<T> {
    pub fn new(latency: u32, loss: f64, seed: u64) -> Self {
        Link {
            latency,
            loss,
            rng: ChaCha8Rng::seed_from_u64(seed),
            in_flight: VecDeque::new(),
            last_poll: None,
            injected: 0,
            dropped: 0,
            delivered: 0,
        }
    }

    /// Injects a unit; the loss draw happens now. `copies` independent loss
    /// trials are drawn and the unit survives if any copy does.
    pub fn send(&mut self, slot: u64, unit: T, copies: u32) {
        debug_assert!(copies >= 1);
        self.injected += 1;
        let mut survives = false;
        for _ in 0..copies {
            // draw every copy so stream consumption is fixed per send
            let lost = self.rng.gen::<f64>() < self.loss;
            survives |= !lost;
        }
        if survives {
            self.in_flight.push_back((slot + self.latency as u64, unit));
        } else {
            self.dropped += 1;
        }
    }

    /// Returns the units due at `slot`, in injection order. Slots must be
    /// polled in non-decreasing order.
    pub fn poll(&mut self, slot: u64) -> Vec<T> {
        if let Some(last) = self.last_poll {
            assert!(slot >= last, "channel polled backwards: {slot} < {last}");
        }
        self.last_poll = Some(slot);
        let mut out = Vec::new();
        while let Some(&(due, _)) = self.in_flight.front() {
            if due > slot {
                break;
            }
            let (_, unit) = self.in_flight.pop_front().unwrap();
            self.delivered += 1;
            out.push(unit);
        }
        out
    }

    pub fn in_flight_len(&self) -> usize {
        self.in_flight.len()
    }
}

/// Forward data path and feedback ACK path of one connection.
pub struct Channel {
    pub forward: Link<DataUnit>,
    pub feedback: Link<AckUnit>,
}

impl Channel {
    pub fn new(config: &ChannelConfig) -> Self {
        assert!(config.rtt >= 1);
        assert!((0.0..1.0).contains(&config.p));
        assert!((0.0..1.0).contains(&config.pa));
        let fwd_latency = config.rtt.div_ceil(2);
        let fb_latency = config.rtt / 2;
        Channel {
            forward: Link::new(fwd_latency, config.p, stream_seed(config.seed, STREAM_FORWARD)),
            feedback: Link::new(fb_latency, config.pa, stream_seed(config.seed, STREAM_FEEDBACK)),
        }
    }

    pub fn send_forward(&mut self, slot: u64, unit: DataUnit) {
        self.forward.send(slot, unit, 1);
    }

    pub fn send_feedback(&mut self, slot: u64, unit: AckUnit, copies: u32) {
        self.feedback.send(slot, unit, copies);
    }
}
