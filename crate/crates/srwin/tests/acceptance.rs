//! Acceptance gate: one pass/fail line per criterion.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the report
//! when everything passes; on failure the report is printed automatically.
//!
//! Known honest failure: criterion 5's coded-protocol occupancy check pins
//! the time-averaged buffer to W/(1-p), a transmission-count idealization
//! that ignores the R-slot feedback latency of straggler recovery. In a
//! faithful ACK-clocked simulation each straggler chain of depth k delays
//! block completion by ~k RTTs, during which later blocks sit decoded but
//! blocked, so E[Q]/W grows like log W instead of staying at 1/(1-p). The
//! check is kept as specified and reports its measured values.

use srwin::analytics;
use srwin::gf2::{encode_subset, BitMask, Gf2Decoder};
use srwin::sim::{self, ExperimentConfig, Protocol};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::time::Instant;

/// One simulation run retained for the cross-cutting criteria (Little's law,
/// delivery-oracle coverage).
struct RunRecord {
    label: String,
    report: Option<sim::MetricsReport>,
    error: Option<String>,
}

struct Gate {
    runs: Vec<RunRecord>,
}

impl Gate {
    fn run(&mut self, label: &str, config: ExperimentConfig) -> Option<sim::MetricsReport> {
        let outcome = sim::run(&config);
        let record = match outcome {
            Ok(report) => RunRecord {
                label: label.to_string(),
                report: Some(report),
                error: None,
            },
            Err(e) => RunRecord {
                label: label.to_string(),
                report: None,
                error: Some(e.to_string()),
            },
        };
        self.runs.push(record);
        self.runs.last().unwrap().report.clone()
    }
}

fn config(protocol: Protocol, w: u32, b: u32, p: f64, horizon: u64, reps: u32) -> ExperimentConfig {
    ExperimentConfig {
        protocol,
        w,
        b,
        p,
        rtt: w,
        horizon,
        replications: reps,
        ..ExperimentConfig::default()
    }
}

fn rel_err(measured: f64, target: f64) -> f64 {
    (measured - target).abs() / target
}

type Verdict = Result<String, String>;

/// Exact alternating sum vs truncated series, all W <= 64, p in 0.1..=0.9.
fn criterion_01() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for w in 1..=64u32 {
        for dp in 1..=9u32 {
            let p = dp as f64 / 10.0;
            let alt = analytics::arq_max_retx_alternating(w, p).unwrap();
            let series = analytics::arq_max_retx_series(w, p).unwrap();
            worst = worst.max((alt - series).abs());
        }
    }
    let elapsed = start.elapsed();
    let detail = format!("max |alternating - series| = {worst:.2e} over 576 cells in {elapsed:.2?}");
    if worst <= 1e-8 && elapsed.as_secs_f64() < 1.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Simulated per-window max transmission count vs the exact formula,
/// >= 1e5 cohorts per cell.
fn criterion_02(gate: &mut Gate) -> Verdict {
    let start = Instant::now();
    let reps = 8u32;
    let mut detail = String::new();
    let mut ok = true;
    for &w in &[16u32, 64, 256] {
        for &p in &[0.01f64, 0.05, 0.1] {
            // enough post-warmup deliveries for >= 1e5 cohorts across reps
            let horizon = (12_500.0 * w as f64 / (1.0 - p) * 1.05) as u64 + 30 * w as u64;
            let cfg = config(Protocol::Arq, w, 1, p, horizon, reps);
            let Some(report) = gate.run(&format!("maxtx W={w} p={p}"), cfg) else {
                return Err(format!("run aborted at W={w} p={p}"));
            };
            let cohorts: u64 = report.replications.iter().map(|r| r.delivered).sum::<u64>() / w as u64;
            let exact = analytics::arq_max_retx_exact(w, p).unwrap();
            let err = rel_err(report.window_max_tx.mean, exact);
            let cell_ok = err <= 0.05 && cohorts >= 100_000;
            ok &= cell_ok;
            if !cell_ok || (w == 256 && p == 0.1) {
                let _ = write!(
                    detail,
                    "[W={w} p={p}: sim {:.4} vs exact {exact:.4} ({:.2}%), {cohorts} cohorts] ",
                    report.window_max_tx.mean,
                    100.0 * err
                );
            }
        }
    }
    let elapsed = start.elapsed();
    let _ = write!(detail, "9 cells in {elapsed:.1?}");
    ok &= elapsed.as_secs_f64() < 120.0;
    if ok { Ok(detail) } else { Err(detail) }
}

/// Throughput matches (1-p)C, and (1-p)(1-pa)C under single lossy ACKs.
fn criterion_03(gate: &mut Gate) -> Verdict {
    let mut detail = String::new();
    let mut ok = true;
    for &p in &[0.05f64, 0.1] {
        for (proto, b) in [(Protocol::Arq, 1u32), (Protocol::FecIdeal, 32)] {
            let cfg = config(proto, 256, b, p, 300_000, 4);
            let target = (1.0 - p) * cfg.capacity();
            let Some(report) = gate.run(&format!("tp {} p={p}", proto.as_str()), cfg) else {
                return Err(format!("run aborted ({} p={p})", proto.as_str()));
            };
            let err = rel_err(report.throughput.mean, target);
            ok &= err <= 0.01;
            let _ = write!(detail, "[{} p={p}: {:.4} vs {target:.4}] ", proto.as_str(), report.throughput.mean);
        }
    }
    for &pa in &[0.1f64, 0.3] {
        let cfg = ExperimentConfig { pa, ..config(Protocol::Arq, 256, 1, 0.1, 300_000, 4) };
        let target = analytics::lossy_feedback_throughput(0.1, pa, 1, cfg.capacity());
        let Some(report) = gate.run(&format!("tp arq pa={pa}"), cfg) else {
            return Err(format!("run aborted (pa={pa})"));
        };
        let err = rel_err(report.throughput.mean, target);
        ok &= err <= 0.02;
        let _ = write!(detail, "[pa={pa}: {:.4} vs {target:.4}] ", report.throughput.mean);
    }
    if ok { Ok(detail) } else { Err(detail) }
}

/// Little's-law residual below 2% on every acceptance run with >= 1e5
/// post-warmup deliveries.
fn criterion_04(gate: &Gate) -> Verdict {
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    let mut worst_label = String::new();
    for record in &gate.runs {
        let Some(report) = &record.report else { continue };
        for rep in &report.replications {
            if rep.delivered >= 100_000 {
                checked += 1;
                if rep.littles_residual > worst {
                    worst = rep.littles_residual;
                    worst_label = format!("{} seed {}", record.label, rep.seed);
                }
            }
        }
    }
    let detail = format!("{checked} qualifying replications, worst residual {:.3}% ({worst_label})", 100.0 * worst);
    if checked > 0 && worst < 0.02 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Buffer-occupancy scaling across W: ARQ tracks W ln W within a factor-4
/// bracket; the coded protocol with B = W is pinned to W/(1-p).
fn criterion_05(gate: &mut Gate) -> Verdict {
    let start = Instant::now();
    let p = 0.1f64;
    let mut detail = String::new();
    let mut ok = true;

    let mut ratios = Vec::new();
    for &w in &[64u32, 256, 1024, 4096] {
        // long horizons keep boundary packets (delay paid, occupancy not,
        // and vice versa) a small fraction of the measured mass
        let horizon = 200_000 + 400 * w as u64;
        let cfg = config(Protocol::Arq, w, 1, p, horizon, 3);
        let Some(report) = gate.run(&format!("buffer arq W={w}"), cfg) else {
            return Err(format!("run aborted (arq W={w})"));
        };
        ratios.push(report.mean_occupancy.mean / (w as f64 * (w as f64).ln()));
    }
    let (lo, hi) = (
        ratios.iter().cloned().fold(f64::INFINITY, f64::min),
        ratios.iter().cloned().fold(0.0f64, f64::max),
    );
    let spread = hi / lo;
    ok &= spread < 4.0;
    let _ = write!(detail, "ARQ E[Q]/(W ln W) in [{lo:.3}, {hi:.3}], spread x{spread:.2}; ");

    let fec_target = 1.0 / (1.0 - p);
    for &w in &[64u32, 256, 1024, 4096] {
        let horizon = 200_000 + 400 * w as u64;
        let cfg = config(Protocol::FecIdeal, w, w, p, horizon, 3);
        let Some(report) = gate.run(&format!("buffer fec W={w}"), cfg) else {
            return Err(format!("run aborted (fec W={w})"));
        };
        let ratio = report.mean_occupancy.mean / w as f64;
        let err = rel_err(ratio, fec_target);
        ok &= err <= 0.05;
        let _ = write!(detail, "[FEC B=W={w}: E[Q]/W = {ratio:.3} vs {fec_target:.3}] ");
    }
    let elapsed = start.elapsed();
    let _ = write!(detail, "in {elapsed:.1?}");
    ok &= elapsed.as_secs_f64() < 300.0;
    if ok { Ok(detail) } else { Err(detail) }
}

/// Ideal coding, single block in the window: transmissions per packet at
/// 1/(1-p).
fn criterion_06(gate: &mut Gate) -> Verdict {
    let mut detail = String::new();
    let mut ok = true;
    let target = 1.0 / 0.9;
    for &b in &[256u32, 1024] {
        let cfg = config(Protocol::FecIdeal, b, b, 0.1, 400_000, 3);
        let Some(report) = gate.run(&format!("pertx B={b}"), cfg) else {
            return Err(format!("run aborted (B={b})"));
        };
        let err = rel_err(report.per_packet_tx.mean, target);
        ok &= err <= 0.02;
        let _ = write!(detail, "[B={b}: {:.4} vs {target:.4} ({:.2}%)] ", report.per_packet_tx.mean, 100.0 * err);
    }
    if ok { Ok(detail) } else { Err(detail) }
}

/// Oblivious coding over a lossless channel: mean extra transmissions per
/// block converges to sum_k 1/(2^k - 1).
fn criterion_07(gate: &mut Gate) -> Verdict {
    let b = 30u32;
    let target = 1.606695;
    let cfg = config(Protocol::FecOblivious, b, b, 0.0, 150_000, 3);
    let Some(report) = gate.run("oblivious extra", cfg) else {
        return Err("run aborted (oblivious p=0)".into());
    };
    let blocks: u64 = report.replications.iter().map(|r| r.delivered).sum::<u64>() / b as u64;
    let extra = report.block_tx_mean.mean - b as f64;
    let detail = format!("extra/block {extra:.4} vs {target} over {blocks} blocks");
    if (extra - target).abs() <= 0.05 && blocks >= 10_000 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Full-rank rate of B + delta uniform masks at least 1 - 2^-delta minus
/// three binomial standard errors.
fn criterion_08() -> Verdict {
    let trials = 20_000u32;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c8);
    let payload = [0u8; 1];
    let mut worst_margin = f64::INFINITY;
    let mut worst_cell = String::new();
    for &b in &[8usize, 16, 32] {
        for delta in 0..=8u32 {
            let mut full = 0u32;
            for _ in 0..trials {
                let mut dec = Gf2Decoder::new(b, 1);
                for _ in 0..(b + delta as usize) {
                    let mask = BitMask::from_words(b, std::iter::once(rng.gen::<u64>()));
                    dec.absorb(&mask, &payload).unwrap();
                }
                full += dec.is_full_rank() as u32;
            }
            let rate = full as f64 / trials as f64;
            let bound = 1.0 - 0.5f64.powi(delta as i32);
            let sigma = (bound.max(1e-12) * (1.0 - bound).max(1e-12) / trials as f64).sqrt();
            let margin = rate - (bound - 3.0 * sigma);
            if margin < worst_margin {
                worst_margin = margin;
                worst_cell = format!("B={b} delta={delta}: rate {rate:.4} vs bound {:.4}", bound - 3.0 * sigma);
            }
        }
    }
    let detail = format!("27 cells x {trials} trials, tightest cell {worst_cell}");
    if worst_margin >= 0.0 { Ok(detail) } else { Err(detail) }
}

/// GF(2) decoder: encode/decode roundtrip, rank monotonicity, and the
/// known full-rank probability of exactly B uniform masks at B = 32.
fn criterion_09() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c9);
    let packet_len = 16usize;
    for trial in 0..1_000u32 {
        let b = rng.gen_range(1..=64usize);
        let packets: Vec<Vec<u8>> = (0..b).map(|_| (0..packet_len).map(|_| rng.gen()).collect()).collect();
        let mut dec = Gf2Decoder::new(b, packet_len);
        let mut prev_rank = 0usize;
        let mut absorbed = 0u32;
        while !dec.is_full_rank() {
            let mask = BitMask::from_words(b, std::iter::once(rng.gen::<u64>()));
            let innovative = dec.absorb(&mask, &encode_subset(&mask, &packets, packet_len)).unwrap();
            let rank = dec.rank();
            if rank < prev_rank || rank > prev_rank + 1 || (rank == prev_rank) == innovative {
                return Err(format!("rank not monotone-by-innovation at trial {trial}"));
            }
            prev_rank = rank;
            absorbed += 1;
            if absorbed > 64 * (b as u32 + 64) {
                return Err(format!("decoder failed to reach full rank at trial {trial}"));
            }
        }
        if dec.decode().unwrap() != packets {
            return Err(format!("roundtrip mismatch at trial {trial} (B={b})"));
        }
    }

    let trials = 10_000u32;
    let mut full = 0u32;
    for _ in 0..trials {
        let mut dec = Gf2Decoder::new(32, 1);
        for _ in 0..32 {
            let mask = BitMask::from_words(32, std::iter::once(rng.gen::<u64>()));
            dec.absorb(&mask, &[0]).unwrap();
        }
        full += dec.is_full_rank() as u32;
    }
    let rate = full as f64 / trials as f64;
    let detail = format!("1000 roundtrips ok; full-rank rate at B=32: {rate:.4} vs 0.2888");
    if (rate - 0.2888).abs() <= 0.01 { Ok(detail) } else { Err(detail) }
}

/// Delivery oracle: every acceptance run completed with the built-in
/// gap/duplicate/order checks armed and none tripped.
fn criterion_10(gate: &Gate) -> Verdict {
    let total = gate.runs.len();
    let violations: Vec<&RunRecord> = gate.runs.iter().filter(|r| r.error.is_some()).collect();
    if violations.is_empty() && total > 0 {
        Ok(format!("{total} runs, zero oracle violations"))
    } else {
        let mut detail = format!("{} of {total} runs aborted: ", violations.len());
        for v in violations.iter().take(3) {
            let _ = write!(detail, "[{}: {}] ", v.label, v.error.as_deref().unwrap_or(""));
        }
        Err(detail)
    }
}

/// Determinism: identical configurations give byte-identical reports.
fn criterion_11() -> Verdict {
    for (proto, b, p) in [
        (Protocol::Arq, 1u32, 0.2),
        (Protocol::FecOblivious, 8, 0.1),
    ] {
        let cfg = ExperimentConfig {
            packet_len: 8,
            seed: 77,
            ..config(proto, 32, b, p, 60_000, 3)
        };
        let a = sim::run(&cfg).map_err(|e| e.to_string())?;
        let b = sim::run(&cfg).map_err(|e| e.to_string())?;
        let (ja, jb) = (
            serde_json::to_vec(&a).map_err(|e| e.to_string())?,
            serde_json::to_vec(&b).map_err(|e| e.to_string())?,
        );
        if ja != jb || format!("{:?}", a.replications) != format!("{:?}", b.replications) {
            return Err(format!("reports diverged for {}", proto.as_str()));
        }
    }
    Ok("byte-identical serialized reports for repeated ARQ and coded runs".into())
}

#[test]
fn acceptance() {
    let mut gate = Gate { runs: Vec::new() };

    let results: Vec<(&str, Verdict)> = vec![
        ("01 exact-vs-series window max", criterion_01()),
        ("02 simulated window max vs exact", criterion_02(&mut gate)),
        ("03 throughput vs (1-p)C and lossy feedback", criterion_03(&mut gate)),
        // criteria 5-7 run before 4 so their runs feed the residual audit
        ("05 buffer scaling across W", criterion_05(&mut gate)),
        ("06 ideal-coding per-packet transmissions", criterion_06(&mut gate)),
        ("07 oblivious extra transmissions", criterion_07(&mut gate)),
        ("08 full-rank rate lower bound", criterion_08()),
        ("09 GF(2) roundtrip and rank laws", criterion_09()),
        ("04 Little's-law residual on all runs", criterion_04(&gate)),
        ("10 in-order delivery oracle", criterion_10(&gate)),
        ("11 determinism", criterion_11()),
    ];

    let mut ordered: Vec<&(&str, Verdict)> = results.iter().collect();
    ordered.sort_by_key(|(name, _)| *name);

    let mut failures = Vec::new();
    for (name, verdict) in ordered {
        match verdict {
            Ok(detail) => println!("criterion {name}: PASS — {detail}"),
            Err(detail) => {
                println!("criterion {name}: FAIL — {detail}");
                failures.push(*name);
            }
        }
    }
    assert!(failures.is_empty(), "acceptance criteria failed: {failures:?}");
}
