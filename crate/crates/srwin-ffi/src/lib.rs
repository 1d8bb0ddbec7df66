//! C ABI for the srwin simulator and analytics library.
//!
//! The interface follows the usual opaque-handle pattern: callers build an
//! [`SrwinConfig`] through `srwin_config_new`/`srwin_config_set`, run it with
//! `srwin_run` into a flat [`SrwinReport`], and free the handle with
//! `srwin_config_free`. Every entry point returns an [`SrwinStatus`] code and
//! never unwinds across the FFI boundary. The committed header at
//! `include/srwin.h` is generated by cbindgen and kept in sync by the
//! `header_is_current` test in this crate.

use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;

use srwin::sim::{self, ExperimentConfig, Protocol, SimError};

/// Status codes returned by every FFI entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrwinStatus {
    Ok = 0,
    InvalidParameter = 1,
    InsufficientData = 2,
    InvariantViolation = 3,
    NullPointer = 4,
    Utf8 = 5,
    Panic = 6,
}

impl From<&SimError> for SrwinStatus {
    fn from(err: &SimError) -> Self {
        match err {
            SimError::InvalidParameter { .. } => SrwinStatus::InvalidParameter,
            SimError::InsufficientData { .. } => SrwinStatus::InsufficientData,
            SimError::InvariantViolation(_) => SrwinStatus::InvariantViolation,
            SimError::Io(_) => SrwinStatus::InvalidParameter,
        }
    }
}

/// Opaque experiment configuration handle.
pub struct SrwinConfig {
    inner: ExperimentConfig,
}

/// Flat, C-layout summary of a replicated simulation run.
///
/// Fields that do not apply to a protocol (for example block statistics under
/// ARQ) are NaN, matching the library's reports.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SrwinReport {
    pub throughput_mean: f64,
    pub throughput_stderr: f64,
    pub occupancy_mean: f64,
    pub occupancy_stderr: f64,
    pub delay_mean: f64,
    pub delay_stderr: f64,
    pub window_max_tx_mean: f64,
    pub window_max_tx_stderr: f64,
    pub block_tx_mean: f64,
    pub block_tx_stderr: f64,
    pub per_packet_tx_mean: f64,
    pub per_packet_tx_stderr: f64,
    pub littles_residual_mean: f64,
    pub littles_residual_stderr: f64,
    pub delivered_total: u64,
    pub replications: u32,
}

fn guard<F: FnOnce() -> SrwinStatus>(f: F) -> SrwinStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(SrwinStatus::Panic)
}

/// Returns the library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn srwin_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Returns a static human-readable name for a status code.
#[no_mangle]
pub extern "C" fn srwin_status_name(status: SrwinStatus) -> *const c_char {
    let name: &'static str = match status {
        SrwinStatus::Ok => "ok\0",
        SrwinStatus::InvalidParameter => "invalid_parameter\0",
        SrwinStatus::InsufficientData => "insufficient_data\0",
        SrwinStatus::InvariantViolation => "invariant_violation\0",
        SrwinStatus::NullPointer => "null_pointer\0",
        SrwinStatus::Utf8 => "utf8\0",
        SrwinStatus::Panic => "panic\0",
    };
    name.as_ptr() as *const c_char
}

/// Allocates a configuration handle with the library defaults
/// (ARQ, W = 64, p = 0.1, 10 replications). Free with `srwin_config_free`.
#[no_mangle]
pub extern "C" fn srwin_config_new() -> *mut SrwinConfig {
    Box::into_raw(Box::new(SrwinConfig {
        inner: ExperimentConfig::default(),
    }))
}

/// Frees a configuration handle. Passing NULL is a no-op.
///
/// # Safety
/// `config` must be a pointer returned by `srwin_config_new` that has not
/// already been freed.
#[no_mangle]
pub unsafe extern "C" fn srwin_config_free(config: *mut SrwinConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Sets one configuration field by key. Keys match the CLI configuration-file
/// keys: `protocol`, `W`, `B`, `p`, `pa`, `R`, `copies`, `horizon`, `warmup`,
/// `seed`, `reps`. Values are parsed from their string form.
///
/// # Safety
/// `config` must be a live handle from `srwin_config_new`; `key` and `value`
/// must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn srwin_config_set(
    config: *mut SrwinConfig,
    key: *const c_char,
    value: *const c_char,
) -> SrwinStatus {
    if config.is_null() || key.is_null() || value.is_null() {
        return SrwinStatus::NullPointer;
    }
    let (key, value) = match (CStr::from_ptr(key).to_str(), CStr::from_ptr(value).to_str()) {
        (Ok(k), Ok(v)) => (k, v),
        _ => return SrwinStatus::Utf8,
    };
    let cfg = &mut (*config).inner;
    guard(|| set_field(cfg, key, value))
}

fn set_field(cfg: &mut ExperimentConfig, key: &str, value: &str) -> SrwinStatus {
    fn parse<T: FromStr>(value: &str, out: &mut T) -> SrwinStatus {
        match value.parse() {
            Ok(v) => {
                *out = v;
                SrwinStatus::Ok
            }
            Err(_) => SrwinStatus::InvalidParameter,
        }
    }
    match key {
        "protocol" => match Protocol::from_str(value) {
            Ok(p) => {
                cfg.protocol = p;
                SrwinStatus::Ok
            }
            Err(_) => SrwinStatus::InvalidParameter,
        },
        "W" => parse(value, &mut cfg.w),
        "B" => parse(value, &mut cfg.b),
        "p" => parse(value, &mut cfg.p),
        "pa" => parse(value, &mut cfg.pa),
        "R" => parse(value, &mut cfg.rtt),
        "copies" => parse(value, &mut cfg.copies),
        "horizon" => parse(value, &mut cfg.horizon),
        "warmup" => {
            let mut v = 0u64;
            let status = parse(value, &mut v);
            if status == SrwinStatus::Ok {
                cfg.warmup = Some(v);
            }
            status
        }
        "seed" => parse(value, &mut cfg.seed),
        "reps" => parse(value, &mut cfg.replications),
        _ => SrwinStatus::InvalidParameter,
    }
}

/// Validates the configuration without running it.
///
/// # Safety
/// `config` must be a live handle from `srwin_config_new`.
#[no_mangle]
pub unsafe extern "C" fn srwin_config_validate(config: *const SrwinConfig) -> SrwinStatus {
    if config.is_null() {
        return SrwinStatus::NullPointer;
    }
    let cfg = &(*config).inner;
    guard(|| match cfg.validate() {
        Ok(()) => SrwinStatus::Ok,
        Err(e) => SrwinStatus::from(&e),
    })
}

/// Runs the configured experiment (all replications) and fills `report`.
/// Identical configurations produce identical reports.
///
/// # Safety
/// `config` must be a live handle from `srwin_config_new`; `report` must point
/// to writable memory for one `SrwinReport`.
#[no_mangle]
pub unsafe extern "C" fn srwin_run(
    config: *const SrwinConfig,
    report: *mut SrwinReport,
) -> SrwinStatus {
    if config.is_null() || report.is_null() {
        return SrwinStatus::NullPointer;
    }
    let cfg = (*config).inner.clone();
    let out = &mut *report;
    guard(|| match sim::run(&cfg) {
        Ok(r) => {
            *out = SrwinReport {
                throughput_mean: r.throughput.mean,
                throughput_stderr: r.throughput.stderr,
                occupancy_mean: r.mean_occupancy.mean,
                occupancy_stderr: r.mean_occupancy.stderr,
                delay_mean: r.mean_delay.mean,
                delay_stderr: r.mean_delay.stderr,
                window_max_tx_mean: r.window_max_tx.mean,
                window_max_tx_stderr: r.window_max_tx.stderr,
                block_tx_mean: r.block_tx_mean.mean,
                block_tx_stderr: r.block_tx_mean.stderr,
                per_packet_tx_mean: r.per_packet_tx.mean,
                per_packet_tx_stderr: r.per_packet_tx.stderr,
                littles_residual_mean: r.littles_residual.mean,
                littles_residual_stderr: r.littles_residual.stderr,
                delivered_total: r.replications.iter().map(|m| m.delivered).sum(),
                replications: r.replications.len() as u32,
            };
            SrwinStatus::Ok
        }
        Err(e) => SrwinStatus::from(&e),
    })
}

fn analytic(out: *mut f64, f: impl FnOnce() -> Result<f64, srwin::analytics::AnalyticsError>) -> SrwinStatus {
    if out.is_null() {
        return SrwinStatus::NullPointer;
    }
    guard(|| match f() {
        Ok(v) => {
            unsafe { *out = v };
            SrwinStatus::Ok
        }
        Err(_) => SrwinStatus::InvalidParameter,
    })
}

/// Expected per-window maximum transmission count for selective-repeat ARQ
/// (exact finite-W value).
///
/// # Safety
/// `out` must point to writable memory for one double.
#[no_mangle]
pub unsafe extern "C" fn srwin_arq_max_retx_exact(w: u32, p: f64, out: *mut f64) -> SrwinStatus {
    analytic(out, || srwin::analytics::arq_max_retx_exact(w, p))
}

/// Asymptotic (large-W) counterpart of `srwin_arq_max_retx_exact`.
///
/// # Safety
/// `out` must point to writable memory for one double.
#[no_mangle]
pub unsafe extern "C" fn srwin_arq_max_retx_asymptotic(
    w: u32,
    p: f64,
    out: *mut f64,
) -> SrwinStatus {
    analytic(out, || srwin::analytics::arq_max_retx_asymptotic(w, p))
}

/// Expected transmissions per packet for block coding with ideal (always
/// innovative) packets: 1/(1-p).
///
/// # Safety
/// `out` must point to writable memory for one double.
#[no_mangle]
pub unsafe extern "C" fn srwin_fec_per_packet_tx(b: u32, p: f64, out: *mut f64) -> SrwinStatus {
    analytic(out, || srwin::analytics::fec_retx_regime2(b, p).map(|(_, per)| per))
}

/// Expected transmissions to decode a B-packet block with uniformly random
/// (possibly dependent) coded packets over a lossless channel.
///
/// # Safety
/// `out` must point to writable memory for one double.
#[no_mangle]
pub unsafe extern "C" fn srwin_dependent_tx_expected(b: u32, p: f64, out: *mut f64) -> SrwinStatus {
    analytic(out, || srwin::analytics::dependent_tx_expected(b, p))
}

/// Probability that B + delta uniformly random GF(2) combinations of B packets
/// have full rank.
#[no_mangle]
pub extern "C" fn srwin_decode_success_prob(b: u32, delta: u32) -> f64 {
    catch_unwind(|| srwin::analytics::decode_success_prob(b, delta)).unwrap_or(f64::NAN)
}

/// Throughput of ARQ when each data packet is acknowledged by `n_acks`
/// copies over a feedback link with loss probability `pa`.
#[no_mangle]
pub extern "C" fn srwin_lossy_feedback_throughput(
    p: f64,
    pa: f64,
    n_acks: u32,
    capacity: f64,
) -> f64 {
    catch_unwind(|| srwin::analytics::lossy_feedback_throughput(p, pa, n_acks, capacity))
        .unwrap_or(f64::NAN)
}

/// Inverse of the Gaussian tail function Q.
///
/// # Safety
/// `out` must point to writable memory for one double.
#[no_mangle]
pub unsafe extern "C" fn srwin_inverse_q(p: f64, out: *mut f64) -> SrwinStatus {
    analytic(out, || srwin::analytics::inverse_q(p))
}
