//! Slot-driven deterministic discrete-event loop.
//!
//! One slot is one packet transmission time. Each slot processes, in order:
//! forward-channel deliveries (receiver events and ACK emission), feedback
//! deliveries (sender ACK handling), sender timeouts, then one transmission
//! opportunity; occupancy is sampled at the end of the slot. A packet and
//! its ACK complete in exactly `R` slots and ACKs are handled before timers,
//! so the `R`-slot timeout never fires spuriously and every transmission
//! slot is recycled once per round trip whether the packet survived or not.
//!
//! Invariant violations (window overflow, out-of-order delivery, payload
//! corruption) abort the run: simulation bugs must never read as protocol
//! performance.

use crate::arq::{ArqReceiver, ArqSender};
use crate::channel::{Channel, ChannelConfig};
use crate::fec::{payload_of, CodingMode, FecReceiver, FecSender};
use crate::units::{AckUnit, DataUnit};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("insufficient data: {needed} complete cohorts required, observed {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("trace I/O failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Arq,
    FecIdeal,
    FecOblivious,
}

impl Protocol {
    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::Arq => "arq",
            Protocol::FecIdeal => "fec-ideal",
            Protocol::FecOblivious => "fec-oblivious",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "arq" => Ok(Protocol::Arq),
            "fec-ideal" => Ok(Protocol::FecIdeal),
            "fec-oblivious" => Ok(Protocol::FecOblivious),
            other => Err(format!("unknown protocol '{other}' (arq | fec-ideal | fec-oblivious)")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub w: u32,
    pub b: u32,
    pub p: f64,
    pub pa: f64,
    pub rtt: u32,
    /// redundant ACK copies per received packet
    pub copies: u32,
    pub horizon: u64,
    /// measurement start slot; `None` selects the automatic warmup (the
    /// later of 10 RTTs and the first 10 W deliveries)
    pub warmup: Option<u64>,
    pub seed: u64,
    pub replications: u32,
    /// synthetic payload bytes per packet (oblivious coding only)
    pub packet_len: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |name, reason: String| Err(SimError::InvalidParameter { name, reason });
        if !(0.0..1.0).contains(&self.p) {
            return fail("p", format!("{} outside [0, 1)", self.p));
        }
        if !(0.0..1.0).contains(&self.pa) {
            return fail("pa", format!("{} outside [0, 1)", self.pa));
        }
        if self.w < 1 {
            return fail("W", "window must be at least 1".into());
        }
        if self.b < 1 || self.w % self.b != 0 {
            return fail("B", format!("W is an integer multiple of B required (W={}, B={})", self.w, self.b));
        }
        if self.rtt < 1 {
            return fail("R", "round-trip time must be at least 1 slot".into());
        }
        if self.copies < 1 {
            return fail("copies", "at least one ACK copy required".into());
        }
        if self.replications < 1 {
            return fail("reps", "at least one replication required".into());
        }
        if let Some(warmup) = self.warmup {
            if warmup >= self.horizon {
                return fail("warmup", format!("warmup {warmup} must be below horizon {}", self.horizon));
            }
        }
        Ok(())
    }

    /// Per-connection capacity implied by W = R * C, capped by the one
    /// packet per slot the slotted sender can emit.
    pub fn capacity(&self) -> f64 {
        (self.w as f64 / self.rtt as f64).min(1.0)
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            protocol: Protocol::Arq,
            w: 64,
            b: 1,
            p: 0.1,
            pa: 0.0,
            rtt: 64,
            copies: 1,
            horizon: 200_000,
            warmup: None,
            seed: 1,
            replications: 10,
            packet_len: 8,
        }
    }
}

/// Metrics of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationMetrics {
    pub seed: u64,
    /// delivered packets per post-warmup slot
    pub throughput: f64,
    /// time-averaged re-sequencing buffer occupancy, packets
    pub mean_occupancy: f64,
    /// mean re-sequencing delay per delivered packet, slots
    pub mean_delay: f64,
    /// mean over cohorts of the per-window maximum transmission count
    pub window_max_tx: f64,
    /// mean transmissions per coding block (FEC; NaN for ARQ)
    pub block_tx_mean: f64,
    /// mean transmissions per packet (FEC; NaN for ARQ)
    pub per_packet_tx: f64,
    /// duplicate (ARQ) or non-innovative (FEC) arrivals
    pub wasted_tx: u64,
    pub delivered: u64,
    /// relative Little's-law residual |E[D] - E[Q]/throughput| / E[D]
    pub littles_residual: f64,
    pub warmup_end: u64,
}

/// Mean and standard error of one metric across replications.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

fn estimate(samples: impl Iterator<Item = f64> + Clone) -> Estimate {
    let n = samples.clone().count() as f64;
    let mean = samples.clone().sum::<f64>() / n;
    let var = if n > 1.0 {
        samples.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Estimate { mean, stderr: (var / n).sqrt() }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: ExperimentConfig,
    pub replications: Vec<ReplicationMetrics>,
    pub throughput: Estimate,
    pub mean_occupancy: Estimate,
    pub mean_delay: Estimate,
    pub window_max_tx: Estimate,
    pub block_tx_mean: Estimate,
    pub per_packet_tx: Estimate,
    pub littles_residual: Estimate,
}

impl MetricsReport {
    fn aggregate(config: ExperimentConfig, replications: Vec<ReplicationMetrics>) -> Self {
        let field = |f: fn(&ReplicationMetrics) -> f64| {
            estimate(replications.iter().map(f).collect::<Vec<_>>().into_iter())
        };
        MetricsReport {
            throughput: field(|r| r.throughput),
            mean_occupancy: field(|r| r.mean_occupancy),
            mean_delay: field(|r| r.mean_delay),
            window_max_tx: field(|r| r.window_max_tx),
            block_tx_mean: field(|r| r.block_tx_mean),
            per_packet_tx: field(|r| r.per_packet_tx),
            littles_residual: field(|r| r.littles_residual),
            config,
            replications,
        }
    }
}

/// Runs all replications (seeds `seed+1`, `seed+2`, ...) and aggregates.
pub fn run(config: &ExperimentConfig) -> Result<MetricsReport, SimError> {
    config.validate()?;
    let replications: Result<Vec<_>, SimError> = (1..=config.replications)
        .into_par_iter()
        .map(|rep| run_once(config, config.seed + rep as u64, None))
        .collect();
    Ok(MetricsReport::aggregate(config.clone(), replications?))
}

/// Runs the first replication (seed `seed+1`) with an event trace written
/// as CSV.
pub fn run_traced(config: &ExperimentConfig, trace: &mut dyn Write) -> Result<ReplicationMetrics, SimError> {
    config.validate()?;
    writeln!(trace, "slot,actor,event,seq,block_seq,rank,buffer_size")?;
    run_once(config, config.seed + 1, Some(trace))
}

/// One replication of the slot loop.
pub fn run_once(
    config: &ExperimentConfig,
    seed: u64,
    trace: Option<&mut dyn Write>,
) -> Result<ReplicationMetrics, SimError> {
    match config.protocol {
        Protocol::Arq => run_arq(config, seed, trace),
        Protocol::FecIdeal => run_fec(config, seed, CodingMode::Ideal, trace),
        Protocol::FecOblivious => run_fec(config, seed, CodingMode::Oblivious, trace),
    }
}

struct Measurement {
    explicit_warmup: Option<u64>,
    min_slot: u64,
    min_deliveries: u64,
    measuring: bool,
    warmup_end: u64,
    slots: u64,
    occupancy_sum: u64,
    delivered: u64,
    delay_sum: u64,
}

impl Measurement {
    fn new(config: &ExperimentConfig) -> Self {
        Measurement {
            explicit_warmup: config.warmup,
            min_slot: 10 * config.rtt as u64,
            min_deliveries: 10 * config.w as u64,
            measuring: false,
            warmup_end: 0,
            slots: 0,
            occupancy_sum: 0,
            delivered: 0,
            delay_sum: 0,
        }
    }

    fn maybe_start(&mut self, slot: u64, delivered_total: u64) {
        if self.measuring {
            return;
        }
        let ready = match self.explicit_warmup {
            Some(warmup) => slot >= warmup,
            None => slot >= self.min_slot && delivered_total >= self.min_deliveries,
        };
        if ready {
            self.measuring = true;
            self.warmup_end = slot;
        }
    }

    fn sample_occupancy(&mut self, occupancy: usize) {
        if self.measuring {
            self.slots += 1;
            self.occupancy_sum += occupancy as u64;
        }
    }

    fn record_delivery(&mut self, delay: u64) {
        if self.measuring {
            self.delivered += 1;
            self.delay_sum += delay;
        }
    }

    fn finish(&self, window_max_tx: f64, block_tx_mean: f64, per_packet_tx: f64, wasted: u64, seed: u64) -> ReplicationMetrics {
        let slots = self.slots.max(1) as f64;
        let throughput = self.delivered as f64 / slots;
        let mean_occupancy = self.occupancy_sum as f64 / slots;
        let mean_delay = if self.delivered > 0 {
            self.delay_sum as f64 / self.delivered as f64
        } else {
            0.0
        };
        // Little's law over the re-sequencing buffer: occupancy, delay and
        // delivery rate are accumulated independently, so their residual is
        // a self-consistency oracle (boundary packets keep it from being 0)
        let littles_q = if throughput > 0.0 {
            mean_occupancy / throughput
        } else {
            mean_occupancy
        };
        let littles_residual = if mean_delay > 1e-9 {
            (mean_delay - littles_q).abs() / mean_delay
        } else {
            littles_q.abs()
        };
        ReplicationMetrics {
            seed,
            throughput,
            mean_occupancy,
            mean_delay,
            window_max_tx,
            block_tx_mean,
            per_packet_tx,
            wasted_tx: wasted,
            delivered: self.delivered,
            littles_residual,
            warmup_end: self.warmup_end,
        }
    }
}

/// Mean over completed cohorts of the cohort maximum, tracked online.
struct CohortMax {
    cohort_size: u64,
    open: HashMap<u64, (u64, u32)>,
    completed: u64,
    max_sum: u64,
}

impl CohortMax {
    fn new(cohort_size: u64) -> Self {
        CohortMax { cohort_size, open: HashMap::new(), completed: 0, max_sum: 0 }
    }

    fn record(&mut self, index: u64, tx_count: u32) {
        let cohort = index / self.cohort_size;
        let entry = self.open.entry(cohort).or_insert((0, 0));
        entry.0 += 1;
        entry.1 = entry.1.max(tx_count);
        if entry.0 == self.cohort_size {
            let (_, max) = self.open.remove(&cohort).unwrap();
            self.completed += 1;
            self.max_sum += max as u64;
        }
    }

    fn mean(&self) -> f64 {
        if self.completed == 0 {
            f64::NAN
        } else {
            self.max_sum as f64 / self.completed as f64
        }
    }
}

fn trace_event(
    trace: &mut Option<&mut dyn Write>,
    slot: u64,
    actor: &str,
    event: &str,
    seq: u64,
    block_seq: Option<u64>,
    rank: Option<usize>,
    buffer: usize,
) -> Result<(), SimError> {
    if let Some(w) = trace {
        let block = block_seq.map_or(String::new(), |b| b.to_string());
        let rank = rank.map_or(String::new(), |r| r.to_string());
        writeln!(w, "{slot},{actor},{event},{seq},{block},{rank},{buffer}")?;
    }
    Ok(())
}

fn run_arq(
    config: &ExperimentConfig,
    seed: u64,
    mut trace: Option<&mut dyn Write>,
) -> Result<ReplicationMetrics, SimError> {
    let mut channel = Channel::new(&ChannelConfig { p: config.p, pa: config.pa, rtt: config.rtt, seed });
    let mut sender = ArqSender::new(config.w as usize, config.rtt);
    let mut receiver = ArqReceiver::new();
    let mut meas = Measurement::new(config);
    let mut cohorts = CohortMax::new(config.w as u64);
    let mut delivered_total = 0u64;
    let mut next_delivery = 0u64;
    let mut wasted = 0u64;

    for slot in 0..config.horizon {
        meas.maybe_start(slot, delivered_total);

        for unit in channel.forward.poll(slot) {
            let DataUnit::Packet { seq, tx_count } = unit else {
                unreachable!("ARQ channel carries sequenced packets");
            };
            let reception = receiver.on_packet(seq, tx_count, slot);
            channel.send_feedback(slot, AckUnit::Packet { seq: reception.ack }, config.copies);
            if reception.duplicate {
                wasted += 1;
            }
            if let Some(tx) = reception.first_arrival_tx {
                cohorts.record(seq, tx);
            }
            trace_event(&mut trace, slot, "receiver", "recv", seq, None, None, receiver.occupancy())?;
            for (dseq, arrival) in reception.delivered {
                if dseq != next_delivery {
                    return Err(SimError::InvariantViolation(format!(
                        "out-of-order delivery: got seq {dseq}, expected {next_delivery}"
                    )));
                }
                next_delivery += 1;
                delivered_total += 1;
                meas.record_delivery(slot - arrival);
                trace_event(&mut trace, slot, "receiver", "deliver", dseq, None, None, receiver.occupancy())?;
            }
        }

        for ack in channel.feedback.poll(slot) {
            let AckUnit::Packet { seq } = ack else {
                unreachable!("ARQ feedback carries packet ACKs");
            };
            sender.on_ack(seq);
        }

        if let Some(unit) = sender.on_slot(slot) {
            if sender.outstanding_len() > config.w as usize {
                return Err(SimError::InvariantViolation(format!(
                    "window exceeded: {} outstanding with W = {}",
                    sender.outstanding_len(),
                    config.w
                )));
            }
            if let DataUnit::Packet { seq, .. } = &unit {
                trace_event(&mut trace, slot, "sender", "send", *seq, None, None, sender.outstanding_len())?;
            }
            channel.send_forward(slot, unit);
        }

        meas.sample_occupancy(receiver.occupancy());
    }

    Ok(meas.finish(cohorts.mean(), f64::NAN, f64::NAN, wasted, seed))
}

fn run_fec(
    config: &ExperimentConfig,
    seed: u64,
    mode: CodingMode,
    mut trace: Option<&mut dyn Write>,
) -> Result<ReplicationMetrics, SimError> {
    let block_size = config.b as usize;
    let blocks_per_window = (config.w / config.b) as u64;
    let mut channel = Channel::new(&ChannelConfig { p: config.p, pa: config.pa, rtt: config.rtt, seed });
    let mut sender = FecSender::new(config.w as usize, block_size, config.packet_len, config.rtt, mode, seed);
    let mut receiver = FecReceiver::new(block_size, config.packet_len, mode, seed);
    let mut meas = Measurement::new(config);
    let mut cohorts = CohortMax::new(blocks_per_window);
    let mut delivered_total = 0u64;
    let mut next_block = 0u64;
    let mut block_tx_sum = 0u64;
    let mut block_count = 0u64;

    for slot in 0..config.horizon {
        meas.maybe_start(slot, delivered_total);

        for unit in channel.forward.poll(slot) {
            let DataUnit::Coded { block_seq, tx_index, payload } = unit else {
                unreachable!("FEC channel carries coded packets");
            };
            let reception = receiver.on_packet(block_seq, tx_index, payload.as_deref(), slot);
            if let Some(acked) = reception.ack {
                channel.send_feedback(slot, AckUnit::Block { block_seq: acked }, config.copies);
            }
            trace_event(
                &mut trace,
                slot,
                "receiver",
                if reception.innovative { "recv" } else { "recv-dependent" },
                tx_index as u64,
                Some(block_seq),
                Some(receiver.block_rank(block_seq)),
                receiver.occupancy(),
            )?;
            for block in reception.delivered {
                if block.block_seq != next_block {
                    return Err(SimError::InvariantViolation(format!(
                        "out-of-order block delivery: got {}, expected {next_block}",
                        block.block_seq
                    )));
                }
                if mode == CodingMode::Oblivious {
                    for (i, payload) in block.payloads.iter().enumerate() {
                        if *payload != payload_of(seed, block.block_seq, i, config.packet_len) {
                            return Err(SimError::InvariantViolation(format!(
                                "decoded payload mismatch in block {} packet {i}",
                                block.block_seq
                            )));
                        }
                    }
                }
                next_block += 1;
                delivered_total += block_size as u64;
                cohorts.record(block.block_seq, block.completing_tx_index);
                if meas.measuring {
                    block_tx_sum += block.completing_tx_index as u64;
                    block_count += 1;
                }
                for arrival in &block.arrival_slots {
                    meas.record_delivery(block.delivered_slot - arrival);
                }
                trace_event(&mut trace, slot, "receiver", "deliver", 0, Some(block.block_seq), None, receiver.occupancy())?;
            }
        }

        for ack in channel.feedback.poll(slot) {
            let AckUnit::Block { block_seq } = ack else {
                unreachable!("FEC feedback carries block ACKs");
            };
            sender.on_ack(block_seq);
        }

        if let Some(unit) = sender.on_slot(slot) {
            if sender.in_flight() > config.w as usize {
                return Err(SimError::InvariantViolation(format!(
                    "window exceeded: {} coded packets in flight with W = {}",
                    sender.in_flight(),
                    config.w
                )));
            }
            if let DataUnit::Coded { block_seq, tx_index, .. } = &unit {
                trace_event(&mut trace, slot, "sender", "send", *tx_index as u64, Some(*block_seq), None, sender.in_flight())?;
            }
            channel.send_forward(slot, unit);
        }

        meas.sample_occupancy(receiver.occupancy());
    }

    let (block_tx_mean, per_packet_tx) = if block_count > 0 {
        let mean = block_tx_sum as f64 / block_count as f64;
        (mean, mean / block_size as f64)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(meas.finish(cohorts.mean(), block_tx_mean, per_packet_tx, receiver.wasted, seed))
}

/// Mean over consecutive `w`-packet cohorts of the cohort maximum of a
/// per-packet transmission-count trace (packet `i` of the trace is sequence
/// number `i`). At least 10 complete cohorts are required.
pub fn measure_window_max_tx(tx_counts: &[u32], w: usize) -> Result<f64, SimError> {
    assert!(w >= 1);
    let complete = tx_counts.len() / w;
    if complete < 10 {
        return Err(SimError::InsufficientData { needed: 10, got: complete });
    }
    let sum: u64 = tx_counts
        .chunks_exact(w)
        .map(|cohort| *cohort.iter().max().unwrap() as u64)
        .sum();
    Ok(sum as f64 / complete as f64)
}

/// Sweep axis for [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    W,
    P,
    B,
    Pa,
    Copies,
}

impl std::str::FromStr for Axis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "W" | "w" => Ok(Axis::W),
            "p" => Ok(Axis::P),
            "B" | "b" => Ok(Axis::B),
            "pa" | "p_a" => Ok(Axis::Pa),
            "copies" => Ok(Axis::Copies),
            other => Err(format!("unknown sweep axis '{other}' (W | p | B | pa | copies)")),
        }
    }
}

impl Axis {
    pub fn as_str(&self) -> &'static str {
        match self {
            Axis::W => "W",
            Axis::P => "p",
            Axis::B => "B",
            Axis::Pa => "pa",
            Axis::Copies => "copies",
        }
    }

    pub fn apply(&self, config: &mut ExperimentConfig, value: f64) {
        match self {
            Axis::W => {
                config.w = value as u32;
                // keep the pipe matched to the window unless R was decoupled
                if config.rtt == 0 {
                    config.rtt = config.w;
                }
            }
            Axis::P => config.p = value,
            Axis::B => config.b = value as u32,
            Axis::Pa => config.pa = value,
            Axis::Copies => config.copies = value as u32,
        }
    }
}

/// One run-set per axis value with a shared base-seed policy.
pub fn sweep(
    base: &ExperimentConfig,
    axis: Axis,
    values: &[f64],
) -> Result<Vec<(f64, MetricsReport)>, SimError> {
    values
        .iter()
        .map(|&value| {
            let mut config = base.clone();
            axis.apply(&mut config, value);
            run(&config).map(|report| (value, report))
        })
        .collect()
}
