//! Command-line harness: evaluate the closed-form models, run simulations
//! and parameter sweeps, and validate simulation against analytics.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage/parameter error,
//! 3 simulation invariant violation, 4 I/O error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use srwin::analytics::{
    self, arq_max_retx_asymptotic, arq_max_retx_exact, buffer_bounds_arq, decode_success_prob,
    dependent_extra_budget, dependent_tx_expected, fec_buffer_regime2,
    fec_max_retx_asymptotic_regime1, fec_retx_regime2, littles_delay, lossy_feedback_throughput,
    redundant_ack_count, table1_summary, ProtocolParams,
};
use srwin::sim::{self, Axis, ExperimentConfig, MetricsReport, Protocol, SimError};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "srwin",
    version,
    about = "Selective-repeat window protocols: analytics, simulation, validation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every closed-form quantity for one parameter set
    Analyze(CommonArgs),
    /// Run a replicated simulation and report per-replication metrics
    Simulate(SimulateArgs),
    /// Run one simulation per value of a swept parameter
    Sweep(SweepArgs),
    /// Check simulation output against the analytic formulas
    Validate(ValidateArgs),
}

/// Parameter and output flags shared by all subcommands. Flags override
/// config-file values, which override the documented defaults.
#[derive(Args, Clone)]
struct CommonArgs {
    /// arq | fec-ideal | fec-oblivious [default: arq]
    #[arg(long)]
    protocol: Option<Protocol>,
    /// window size, packets [default: 64]
    #[arg(long = "W")]
    w: Option<u32>,
    /// coding block size; must divide W [default: 1]
    #[arg(long = "B")]
    b: Option<u32>,
    /// forward loss probability in [0, 1) [default: 0.1]
    #[arg(long)]
    p: Option<f64>,
    /// feedback loss probability in [0, 1) [default: 0]
    #[arg(long)]
    pa: Option<f64>,
    /// round-trip time, slots [default: W]
    #[arg(long = "R")]
    rtt: Option<u32>,
    /// capacity, packets/slot; when given, W = R*C is enforced [default: W/R]
    #[arg(long = "C")]
    capacity: Option<f64>,
    /// redundant ACK copies per received packet [default: 1]
    #[arg(long)]
    copies: Option<u32>,
    /// simulated slots per replication [default: 200000]
    #[arg(long)]
    horizon: Option<u64>,
    /// measurement start slot [default: automatic steady-state detection]
    #[arg(long)]
    warmup: Option<u64>,
    /// base RNG seed; replication k runs with seed+k [default: 1]
    #[arg(long, env = "SRWIN_SEED")]
    seed: Option<u64>,
    /// number of independent replications [default: 10]
    #[arg(long)]
    reps: Option<u32>,
    /// key = value config file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// output path [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv | json [default: csv]
    #[arg(long)]
    format: Option<OutputFormat>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// write a per-slot event trace of the first replication to this CSV file
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// parameter to sweep: W | p | B | pa | copies
    #[arg(long)]
    axis: String,
    /// comma-separated values for the swept parameter
    #[arg(long)]
    values: String,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// multiply every check tolerance by this factor (0 disables slack)
    #[arg(long, default_value_t = 1.0)]
    tolerance_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format '{other}' (csv | json)")),
        }
    }
}

enum CliError {
    Validation,
    Usage(String),
    Invariant(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation => 1,
            CliError::Usage(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvariantViolation(msg) => CliError::Invariant(msg),
            SimError::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<analytics::AnalyticsError> for CliError {
    fn from(e: analytics::AnalyticsError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Validation => eprintln!("error: validation failed"),
                CliError::Usage(msg) => eprintln!("error: {msg}"),
                CliError::Invariant(msg) => eprintln!("error: simulation invariant violated: {msg}"),
                CliError::Io(msg) => eprintln!("error: I/O: {msg}"),
            }
            ExitCode::from(e.code())
        }
    }
}

/// Fully resolved run parameters after merging flags, file, and defaults.
struct Resolved {
    config: ExperimentConfig,
    capacity: f64,
    out: Option<PathBuf>,
    format: OutputFormat,
}

fn parse_key<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Usage(format!("config key '{key}': {e}")))
}

fn resolve(args: &CommonArgs) -> Result<Resolved, CliError> {
    let mut file: HashMap<String, String> = HashMap::new();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "{}:{}: expected 'key = value'",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            const KNOWN: [&str; 13] = [
                "protocol", "W", "B", "p", "pa", "R", "C", "copies", "horizon", "warmup", "seed",
                "reps", "format",
            ];
            if !KNOWN.contains(&key.as_str()) {
                return Err(CliError::Usage(format!(
                    "{}:{}: unknown config key '{key}'",
                    path.display(),
                    lineno + 1
                )));
            }
            file.insert(key, value.trim().to_string());
        }
    }

    macro_rules! merge {
        ($flag:expr, $key:literal, $default:expr) => {
            match (&$flag, file.get($key)) {
                (Some(v), _) => v.clone(),
                (None, Some(s)) => parse_key($key, s)?,
                (None, None) => $default,
            }
        };
    }

    let protocol = merge!(args.protocol, "protocol", Protocol::Arq);
    let w = merge!(args.w, "W", 64);
    let b = merge!(args.b, "B", 1);
    let p = merge!(args.p, "p", 0.1);
    let pa = merge!(args.pa, "pa", 0.0);
    let rtt = merge!(args.rtt, "R", w);
    let copies = merge!(args.copies, "copies", 1);
    let horizon = merge!(args.horizon, "horizon", 200_000);
    let seed = merge!(args.seed, "seed", 1);
    let reps = merge!(args.reps, "reps", 10);
    let format = merge!(args.format, "format", OutputFormat::Csv);
    let warmup = match (args.warmup, file.get("warmup")) {
        (Some(v), _) => Some(v),
        (None, Some(s)) => Some(parse_key("warmup", s)?),
        (None, None) => None,
    };

    let capacity = match (args.capacity, file.get("C")) {
        (Some(c), _) => Some(c),
        (None, Some(s)) => Some(parse_key::<f64>("C", s)?),
        (None, None) => None,
    };
    let capacity = match capacity {
        Some(c) => {
            if (rtt as f64 * c - w as f64).abs() > 1e-9 {
                return Err(CliError::Usage(format!(
                    "W = R*C required: W={w}, R={rtt}, C={c}"
                )));
            }
            c
        }
        None => w as f64 / rtt as f64,
    };

    let config = ExperimentConfig {
        protocol,
        w,
        b,
        p,
        pa,
        rtt,
        copies,
        horizon,
        warmup,
        seed,
        replications: reps,
        packet_len: 8,
    };
    config.validate()?;
    Ok(Resolved {
        config,
        capacity,
        out: args.out.clone(),
        format,
    })
}

fn write_output(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

// ---------------------------------------------------------------- analyze

#[derive(Serialize)]
struct AnalyzeReport {
    params: ProtocolParams,
    copies: u32,
    arq_max_retx_exact: f64,
    arq_max_retx_asymptotic: Option<f64>,
    arq_buffer_lower: f64,
    arq_buffer_upper: f64,
    arq_delay_estimate: f64,
    fec_regime1_max_retx: Option<f64>,
    fec_block_tx_regime2: f64,
    fec_packet_tx_regime2: f64,
    fec_buffer_regime2: f64,
    dependent_tx_per_block: f64,
    dependent_extra_budget: u32,
    decode_success_at_budget: f64,
    lossy_feedback_throughput: f64,
    redundant_ack_suggested: u32,
    table: analytics::Table1Summary,
}

fn cmd_analyze(args: CommonArgs) -> Result<(), CliError> {
    let r = resolve(&args)?;
    let c = &r.config;
    let params = ProtocolParams::new(c.w, c.p, c.pa, c.rtt, r.capacity, c.b)?;

    let exact = arq_max_retx_exact(c.w, c.p)?;
    let (lower, upper) = buffer_bounds_arq(c.w.max(2), c.p)?;
    let (block_tx, packet_tx) = fec_retx_regime2(c.b, c.p)?;
    let budget = dependent_extra_budget(c.b);
    let report = AnalyzeReport {
        params,
        copies: c.copies,
        arq_max_retx_exact: exact,
        arq_max_retx_asymptotic: arq_max_retx_asymptotic(c.w, c.p).ok(),
        arq_buffer_lower: lower,
        arq_buffer_upper: upper,
        arq_delay_estimate: littles_delay((lower + upper) / 2.0, c.w, c.p, c.rtt),
        fec_regime1_max_retx: fec_max_retx_asymptotic_regime1(c.w, c.b, c.p).ok(),
        fec_block_tx_regime2: block_tx,
        fec_packet_tx_regime2: packet_tx,
        fec_buffer_regime2: fec_buffer_regime2(c.w, c.p)?,
        dependent_tx_per_block: dependent_tx_expected(c.b, c.p)?,
        dependent_extra_budget: budget,
        decode_success_at_budget: decode_success_prob(c.b, budget),
        lossy_feedback_throughput: lossy_feedback_throughput(c.p, c.pa, c.copies, r.capacity),
        redundant_ack_suggested: redundant_ack_count(c.w.max(2), 0.0),
        table: table1_summary(&params)?,
    };

    let text = match r.format {
        OutputFormat::Json => serde_json::to_string_pretty(&report).expect("serializable") + "\n",
        OutputFormat::Csv => {
            let mut s = String::from("quantity,value\n");
            let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
            let _ = writeln!(s, "arq_max_retx_exact,{}", report.arq_max_retx_exact);
            let _ = writeln!(s, "arq_max_retx_asymptotic,{}", opt(report.arq_max_retx_asymptotic));
            let _ = writeln!(s, "arq_buffer_lower,{}", report.arq_buffer_lower);
            let _ = writeln!(s, "arq_buffer_upper,{}", report.arq_buffer_upper);
            let _ = writeln!(s, "arq_delay_estimate,{}", report.arq_delay_estimate);
            let _ = writeln!(s, "fec_regime1_max_retx,{}", opt(report.fec_regime1_max_retx));
            let _ = writeln!(s, "fec_block_tx_regime2,{}", report.fec_block_tx_regime2);
            let _ = writeln!(s, "fec_packet_tx_regime2,{}", report.fec_packet_tx_regime2);
            let _ = writeln!(s, "fec_buffer_regime2,{}", report.fec_buffer_regime2);
            let _ = writeln!(s, "dependent_tx_per_block,{}", report.dependent_tx_per_block);
            let _ = writeln!(s, "dependent_extra_budget,{}", report.dependent_extra_budget);
            let _ = writeln!(s, "decode_success_at_budget,{}", report.decode_success_at_budget);
            let _ = writeln!(s, "lossy_feedback_throughput,{}", report.lossy_feedback_throughput);
            let _ = writeln!(s, "redundant_ack_suggested,{}", report.redundant_ack_suggested);
            for row in &report.table.rows {
                let name = row.protocol.replace(',', ";");
                let _ = writeln!(s, "class_buffer[{name}],{}", row.buffer_class);
                let _ = writeln!(s, "class_delay[{name}],{}", row.delay_class);
                let _ = writeln!(s, "class_feedback[{name}],{}", row.feedback_overhead_class);
            }
            s
        }
    };
    write_output(&r.out, &text)
}

// --------------------------------------------------------------- simulate

const SIM_CSV_HEADER: &str = "protocol,W,B,p,p_a,R,C,copies,seed,replication,\
throughput,mean_occupancy,mean_delay,window_max_tx,wasted_tx,littles_residual";

fn fmt_metric(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn sim_csv_rows(s: &mut String, report: &MetricsReport, capacity: f64) {
    let c = &report.config;
    let prefix = |s: &mut String| {
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{},{},",
            c.protocol.as_str(),
            c.w,
            c.b,
            c.p,
            c.pa,
            c.rtt,
            capacity,
            c.copies,
            c.seed
        );
    };
    for (i, rep) in report.replications.iter().enumerate() {
        prefix(s);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            i + 1,
            rep.throughput,
            rep.mean_occupancy,
            rep.mean_delay,
            fmt_metric(rep.window_max_tx),
            rep.wasted_tx,
            rep.littles_residual
        );
    }
    let picks: [(&str, fn(&sim::Estimate) -> f64); 2] =
        [("mean", |e| e.mean), ("stderr", |e| e.stderr)];
    for (label, pick) in picks {
        prefix(s);
        let _ = writeln!(
            s,
            "{label},{},{},{},{},,{}",
            fmt_metric(pick(&report.throughput)),
            fmt_metric(pick(&report.mean_occupancy)),
            fmt_metric(pick(&report.mean_delay)),
            fmt_metric(pick(&report.window_max_tx)),
            fmt_metric(pick(&report.littles_residual))
        );
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let r = resolve(&args.common)?;
    if let Some(path) = &args.trace {
        let mut file = std::io::BufWriter::new(fs::File::create(path)?);
        sim::run_traced(&r.config, &mut file)?;
    }
    let report = sim::run(&r.config)?;
    let text = match r.format {
        OutputFormat::Json => serde_json::to_string_pretty(&report).expect("serializable") + "\n",
        OutputFormat::Csv => {
            let mut s = String::from(SIM_CSV_HEADER);
            s.push('\n');
            sim_csv_rows(&mut s, &report, r.capacity);
            s
        }
    };
    write_output(&r.out, &text)
}

// ------------------------------------------------------------------ sweep

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let r = resolve(&args.common)?;
    let axis: Axis = args.axis.parse().map_err(CliError::Usage)?;
    let values: Vec<f64> = args
        .values
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Usage(format!("--values entry '{s}': {e}")))
        })
        .collect::<Result<_, _>>()?;

    // keep R matched to W along a window sweep unless R was pinned
    let follow_w = axis == Axis::W && args.common.rtt.is_none();
    let mut rows = Vec::new();
    for &value in &values {
        let mut config = r.config.clone();
        axis.apply(&mut config, value);
        if follow_w {
            config.rtt = config.w;
        }
        config.validate()?;
        let report = sim::run(&config)?;
        rows.push(report);
    }

    let text = match r.format {
        OutputFormat::Json => serde_json::to_string_pretty(&rows).expect("serializable") + "\n",
        OutputFormat::Csv => {
            let mut s = String::from(SIM_CSV_HEADER);
            s.push('\n');
            for report in &rows {
                let capacity = report.config.w as f64 / report.config.rtt as f64;
                sim_csv_rows(&mut s, report, capacity);
            }
            s
        }
    };
    write_output(&r.out, &text)
}

// --------------------------------------------------------------- validate

#[derive(Serialize)]
struct Check {
    name: String,
    simulated: f64,
    analytic: f64,
    tolerance: f64,
    pass: bool,
}

fn check(name: impl Into<String>, simulated: f64, analytic: f64, tolerance: f64) -> Check {
    let pass = (simulated - analytic).abs() <= tolerance;
    Check {
        name: name.into(),
        simulated,
        analytic,
        tolerance,
        pass,
    }
}

fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    let r = resolve(&args.common)?;
    if args.tolerance_scale < 0.0 {
        return Err(CliError::Usage("--tolerance-scale must be >= 0".into()));
    }
    let scale = args.tolerance_scale;
    let seed = r.config.seed;
    let mut checks = Vec::new();

    // lossless exactness
    let lossless = ExperimentConfig {
        protocol: Protocol::Arq,
        w: 32,
        b: 1,
        p: 0.0,
        pa: 0.0,
        rtt: 32,
        horizon: 30_000,
        replications: 2,
        seed,
        ..ExperimentConfig::default()
    };
    let m = sim::run(&lossless)?;
    checks.push(check("arq_p0_throughput", m.throughput.mean, 1.0, 1e-9 * scale));
    checks.push(check("arq_p0_occupancy", m.mean_occupancy.mean, 0.0, 1e-9 * scale));

    // ARQ throughput and Little's law under loss
    let arq = ExperimentConfig {
        protocol: Protocol::Arq,
        w: 64,
        b: 1,
        p: 0.1,
        rtt: 64,
        horizon: 150_000,
        replications: 4,
        seed,
        ..ExperimentConfig::default()
    };
    let m = sim::run(&arq)?;
    checks.push(check("arq_throughput", m.throughput.mean, 0.9, 0.009 * scale));
    checks.push(check("arq_littles_residual", m.littles_residual.mean, 0.0, 0.02 * scale));

    // window-max transmissions against the exact formula
    let wmax = ExperimentConfig {
        protocol: Protocol::Arq,
        w: 16,
        b: 1,
        p: 0.1,
        rtt: 16,
        horizon: 200_000,
        replications: 2,
        seed,
        ..ExperimentConfig::default()
    };
    let m = sim::run(&wmax)?;
    let exact = arq_max_retx_exact(16, 0.1)?;
    checks.push(check("arq_window_max_tx", m.window_max_tx.mean, exact, 0.05 * exact * scale));

    // FEC regime II: occupancy and per-packet transmissions
    let fec = ExperimentConfig {
        protocol: Protocol::FecIdeal,
        w: 256,
        b: 256,
        p: 0.1,
        rtt: 256,
        horizon: 200_000,
        replications: 4,
        seed,
        ..ExperimentConfig::default()
    };
    let m = sim::run(&fec)?;
    let q = fec_buffer_regime2(256, 0.1)?;
    checks.push(check("fec_bw_occupancy", m.mean_occupancy.mean, q, 0.05 * q * scale));
    let per_packet = 1.0 / 0.9;
    checks.push(check(
        "fec_per_packet_tx",
        m.per_packet_tx.mean,
        per_packet,
        0.02 * per_packet * scale,
    ));

    // oblivious-coding overhead constant
    let obl = ExperimentConfig {
        protocol: Protocol::FecOblivious,
        w: 30,
        b: 30,
        p: 0.0,
        rtt: 30,
        horizon: 400_000,
        replications: 2,
        seed,
        ..ExperimentConfig::default()
    };
    let m = sim::run(&obl)?;
    let extra = m.block_tx_mean.mean - 30.0;
    let expect = dependent_tx_expected(30, 0.0)? - 30.0;
    checks.push(check("fec_dependent_extra_tx", extra, expect, 0.05 * scale));

    // lossy feedback throughput
    let lossy = ExperimentConfig {
        protocol: Protocol::Arq,
        w: 64,
        b: 1,
        p: 0.1,
        pa: 0.3,
        rtt: 64,
        horizon: 150_000,
        replications: 4,
        seed,
        ..ExperimentConfig::default()
    };
    let m = sim::run(&lossy)?;
    let rho = lossy_feedback_throughput(0.1, 0.3, 1, 1.0);
    checks.push(check("arq_lossy_feedback_throughput", m.throughput.mean, rho, 0.02 * rho * scale));

    let all_pass = checks.iter().all(|c| c.pass);
    let text = match r.format {
        OutputFormat::Json => serde_json::to_string_pretty(&checks).expect("serializable") + "\n",
        OutputFormat::Csv => {
            let mut s = String::from("check,simulated,analytic,tolerance,verdict\n");
            for c in &checks {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    c.name,
                    c.simulated,
                    c.analytic,
                    c.tolerance,
                    if c.pass { "pass" } else { "FAIL" }
                );
            }
            s
        }
    };
    write_output(&r.out, &text)?;
    if all_pass {
        Ok(())
    } else {
        Err(CliError::Validation)
    }
}
