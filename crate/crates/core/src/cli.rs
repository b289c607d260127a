//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure or replay divergence,
//! 2 configuration error, 3 locality violation inside a protocol.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gates::{self, Gate};
use crate::network::Network;
use crate::protocols::{self, BranchOutcomes, Family, ProtocolError, ProtocolSpec};
use crate::statevector::StateVector;
use crate::trace::{TraceFile, TracePayload, SCHEMA_VERSION};
use crate::verify::{self, expected_costs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_LOCALITY: i32 = 3;

pub const THREADS_ENV: &str = "TELEGATE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "telegate",
    version,
    about = "Simulate and verify nonlocal controlled-gate teleportation over Bell-pair networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Verify a protocol on every measurement branch and write trace/report JSON.
    Run(RunArgs),
    /// Print measured vs closed-form ebit/cbit costs.
    Costs {
        /// Restrict to one family (default: all).
        #[arg(long)]
        family: Option<Family>,
        #[arg(long = "n-max", default_value_t = 6)]
        n_max: usize,
    },
    /// Re-execute a recorded trace and check its state hashes.
    Replay { trace: PathBuf },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// parallel-cu, series-ch or series-ncu
    #[arg(long)]
    pub family: Family,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// I, X, Z, H, randU:<seed>, randH:<seed> or matrix:<json>
    #[arg(long, default_value = "H")]
    pub payload: String,
    /// basis-sweep, random:<count> (basis sweep plus count random states)
    /// or a JSON list of [re, im] amplitudes
    #[arg(long, default_value = "random:20")]
    pub inputs: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "trace-out")]
    pub trace_out: Option<PathBuf>,
    #[arg(long = "report-out")]
    pub report_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputSpec {
    BasisSweep,
    Random(usize),
    Literal(Vec<Complex64>),
}

impl std::str::FromStr for InputSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "basis-sweep" {
            return Ok(InputSpec::BasisSweep);
        }
        if let Some(count) = s.strip_prefix("random:") {
            return count
                .parse()
                .map(InputSpec::Random)
                .map_err(|e| format!("bad random input count {count:?}: {e}"));
        }
        let literal = s.strip_prefix("literal:").unwrap_or(s);
        let pairs: Vec<(f64, f64)> = serde_json::from_str(literal).map_err(|e| {
            format!("inputs must be basis-sweep, random:<count> or [[re, im], ...]: {e}")
        })?;
        Ok(InputSpec::Literal(
            pairs
                .into_iter()
                .map(|(re, im)| Complex64::new(re, im))
                .collect(),
        ))
    }
}

/// Validated configuration for `run`.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec: ProtocolSpec,
    pub inputs: InputSpec,
    pub seed: u64,
    pub trace_out: Option<PathBuf>,
    pub report_out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_args(args: &RunArgs) -> Result<Self, String> {
        let payload: Gate = args.payload.parse().map_err(|e| format!("{e}"))?;
        let spec = ProtocolSpec::new(args.family, args.n, payload).map_err(|e| e.to_string())?;
        let inputs: InputSpec = args.inputs.parse()?;
        if let InputSpec::Literal(amps) = &inputs {
            if amps.len() != 1 << args.n {
                return Err(format!(
                    "literal input has {} amplitudes, expected {} for n = {}",
                    amps.len(),
                    1usize << args.n,
                    args.n
                ));
            }
        }
        Ok(RunConfig {
            spec,
            inputs,
            seed: args.seed,
            trace_out: args.trace_out.clone(),
            report_out: args.report_out.clone(),
        })
    }

    fn input_states(&self) -> Result<Vec<StateVector>, String> {
        let n = self.spec.n;
        match &self.inputs {
            InputSpec::BasisSweep => Ok(verify::standard_inputs(n, 0, self.seed)),
            InputSpec::Random(k) => Ok(verify::standard_inputs(n, *k, self.seed)),
            InputSpec::Literal(amps) => StateVector::normalized(amps.clone())
                .map(|s| vec![s])
                .map_err(|e| format!("literal input: {e}")),
        }
    }
}

/// Records one branch of `spec` on `input` as a replayable trace.
pub fn record_trace(
    spec: &ProtocolSpec,
    input: &StateVector,
    branch: &BranchOutcomes,
    seed: u64,
) -> Result<TraceFile, ProtocolError> {
    let mut net = Network::build(spec.family.topology(), spec.n, input)?;
    let initial = net.state().clone();
    let record = protocols::run(spec, &mut net, branch)?;
    Ok(TraceFile {
        schema: SCHEMA_VERSION,
        family: spec.family.name().to_string(),
        n: spec.n,
        payload: TracePayload {
            label: spec.payload.label().to_string(),
            matrix: spec.payload.matrix().rows(),
        },
        seed,
        branch: branch.to_string(),
        qubits: net.layout().qubits.clone(),
        initial_state: initial.amplitudes().to_vec(),
        events: net.trace().to_vec(),
        cost: record.ledger,
        final_state: record.final_state.amplitudes().to_vec(),
        final_state_hash: record.final_state.state_hash(),
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn exit_for(err: &ProtocolError) -> i32 {
    if err.is_locality_violation() {
        EXIT_LOCALITY
    } else {
        EXIT_FAILED
    }
}

pub fn cmd_run(config: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let spec = &config.spec;
    let inputs = match config.input_states() {
        Ok(inputs) => inputs,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_CONFIG;
        }
    };

    // The trace follows the first random input when there is one, on a
    // branch drawn from the seed.
    let traced = match config.inputs {
        InputSpec::Random(k) if k > 0 => &inputs[1 << spec.n],
        _ => &inputs[0],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let branch = BranchOutcomes::new(
        (0..spec.num_measurements())
            .map(|_| u8::from(rng.random::<bool>()))
            .collect(),
    )
    .expect("bits are 0 or 1");
    let trace = match record_trace(spec, traced, &branch, config.seed) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return exit_for(&e);
        }
    };

    let report = verify::verify_inputs(spec, &inputs);
    if let Some(path) = &config.trace_out {
        if let Err(e) = write_file(path, &trace.to_json()) {
            let _ = writeln!(err, "error: {e}");
            return EXIT_CONFIG;
        }
    }
    if let Some(path) = &config.report_out {
        if let Err(e) = write_file(path, &report.to_json()) {
            let _ = writeln!(err, "error: {e}");
            return EXIT_CONFIG;
        }
    }

    if let Some(reason) = &report.rejection {
        let _ = writeln!(err, "error: {reason}");
        return if reason.contains("locality violation") {
            EXIT_LOCALITY
        } else {
            EXIT_FAILED
        };
    }
    let cost = report
        .cost
        .map(|c| c.to_string())
        .unwrap_or_else(|| "n/a".into());
    let _ = writeln!(
        out,
        "{} n={} payload={}: {} inputs, {} branches, min fidelity {:.12}, cost {} (expected {}), {}",
        spec.family,
        spec.n,
        spec.payload.label(),
        report.trials,
        report.branches.len(),
        report.min_fidelity,
        cost,
        report.expected_cost,
        if report.pass { "PASS" } else { "FAIL" }
    );
    if report.pass {
        EXIT_OK
    } else {
        EXIT_FAILED
    }
}

/// One row per family and `n = 2..=n_max`, measured by actually running a
/// branch. Returns nonzero if any row disagrees with its formula.
pub fn cmd_costs(
    family: Option<Family>,
    n_max: usize,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    if n_max < 2 {
        let _ = writeln!(err, "error: --n-max must be at least 2");
        return EXIT_CONFIG;
    }
    let families: Vec<Family> = family
        .map(|f| vec![f])
        .unwrap_or_else(|| Family::ALL.to_vec());
    let mut code = EXIT_OK;
    for family in families {
        for n in 2..=n_max {
            let spec = ProtocolSpec::new(family, n, gates::hadamard()).expect("H is an involution");
            let input = StateVector::random(n, n as u64);
            let mut net = match Network::build(family.topology(), n, &input) {
                Ok(net) => net,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return EXIT_FAILED;
                }
            };
            let branch = BranchOutcomes::zeros(spec.num_measurements());
            let measured = match protocols::run(&spec, &mut net, &branch) {
                Ok(rec) => rec.ledger,
                Err(e) => {
                    let _ = writeln!(err, "error: {family} n={n}: {e}");
                    return exit_for(&e);
                }
            };
            let formula = expected_costs(family, n);
            let ok = measured == formula;
            if !ok {
                code = EXIT_FAILED;
            }
            let _ = writeln!(
                out,
                "{:<12} n={:<2} {}, formula {}, {}",
                family.name(),
                n,
                measured,
                formula.cbits,
                if ok { "OK" } else { "MISMATCH" }
            );
        }
    }
    code
}

pub fn cmd_trace_replay(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: cannot read {}: {e}", path.display());
            return EXIT_CONFIG;
        }
    };
    let trace = match TraceFile::from_json(&text) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: {} is not a trace: {e}", path.display());
            return EXIT_CONFIG;
        }
    };
    match trace.replay() {
        Ok(state) => {
            let _ = writeln!(
                out,
                "replay OK: {} events, final state hash {}",
                trace.events.len(),
                state.state_hash()
            );
            EXIT_OK
        }
        Err(d) => {
            let _ = writeln!(err, "replay diverged: {d}");
            EXIT_FAILED
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

/// Runs the parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let (mut out, mut err) = (stdout.lock(), stderr.lock());
    if let Err(e) = configure_threads() {
        let _ = writeln!(err, "error: {e}");
        return EXIT_CONFIG;
    }
    match cli.command {
        Command::Run(args) => match RunConfig::from_args(&args) {
            Ok(config) => cmd_run(&config, &mut out, &mut err),
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                EXIT_CONFIG
            }
        },
        Command::Costs { family, n_max } => cmd_costs(family, n_max, &mut out, &mut err),
        Command::Replay { trace } => cmd_trace_replay(&trace, &mut out, &mut err),
    }
}
