//! Command-line front end. The binary only calls [`run`].
//!
//! Exit codes: 0 success, 1 protocol failure (proof rejected, scenario
//! failed, worker unreachable), 2 usage error (bad flags, unreadable or
//! malformed input files).

mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

pub use config::Config;

use crate::bridge::app::lock_mint_demo;
use crate::bridge::Scenario;
use crate::circuit::light_client::{
    build_light_client_circuit, circuit_input, toy_public_key, toy_sign, LightClientParams, SignatureInstance,
};
use crate::circuit::{parse_circuit, write_circuit, DataParallelCircuit};
use crate::devirgo::{devirgo_prove, devirgo_verify, serve, split_input, Cluster, DeVirgoProof};
use crate::field::{FieldElement, MODULUS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Failure(m) => write!(f, "{m}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn failure(e: impl std::fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "zkbridge", version, about = "Distributed GKR proofs and a simulated light-client bridge")]
pub struct Cli {
    /// key = value configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a light-client statement circuit and a matching witness
    BuildCircuit {
        #[arg(long, default_value_t = 4)]
        signatures: usize,
        /// Output prefix: writes PREFIX.circuit and PREFIX.witness
        #[arg(long)]
        out: PathBuf,
    },
    /// Prove a circuit with an in-process cluster
    Prove {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        witness: PathBuf,
        /// Worker threads (power of two)
        #[arg(long)]
        workers: Option<usize>,
        /// Output prefix: writes PREFIX.proof, PREFIX.statement, PREFIX.json
        #[arg(long)]
        out: PathBuf,
    },
    /// Prove a circuit with remote workers
    Coordinate {
        /// Comma-separated worker addresses
        #[arg(long, value_delimiter = ',', required = true)]
        workers: Vec<String>,
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        witness: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a proof against a circuit and a statement file
    Verify {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        statement: PathBuf,
        #[arg(long)]
        proof: PathBuf,
    },
    /// Serve coordinator sessions
    Worker {
        #[arg(long)]
        listen: String,
        /// Exit after this many sessions
        #[arg(long)]
        sessions: Option<usize>,
    },
    /// Prover time and per-worker work over copy and worker counts
    BenchScaling {
        #[arg(long, value_delimiter = ',', required = true)]
        copies: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        workers: Vec<usize>,
        /// CSV output file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a scenario file
    Scenario {
        file: PathBuf,
        /// JSON report file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lock on the sender chain and mint on the receiving chain
    LockMint {
        #[arg(long, default_value = "alice")]
        user: String,
        #[arg(long, default_value_t = 5)]
        amount: u64,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(out) => {
            print!("{out}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("zkbridge: {e}");
            e.code()
        }
    }
}

/// Runs a parsed command and returns what it would print.
pub fn execute(cli: Cli) -> CliResult<String> {
    let mut config = match &cli.config {
        Some(p) => Config::parse(&read(p)?).map_err(usage)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    match cli.command {
        Command::BuildCircuit { signatures, out } => build_circuit(&config, signatures, &out),
        Command::Prove { circuit, witness, workers, out } => {
            if let Some(w) = workers {
                config.workers = w;
            }
            config.validate().map_err(usage)?;
            let (circuit, input) = load_job(&circuit, &witness)?;
            let cluster = Cluster::in_process(config.workers).map_err(usage)?;
            prove(&config, cluster, &circuit, &input, &out)
        }
        Command::Coordinate { workers, circuit, witness, out } => {
            config.workers = workers.len();
            config.validate().map_err(usage)?;
            let (circuit, input) = load_job(&circuit, &witness)?;
            let cluster = Cluster::connect(&workers, &config.proof.cluster(workers.len())).map_err(failure)?;
            prove(&config, cluster, &circuit, &input, &out)
        }
        Command::Verify { circuit, statement, proof } => verify(&config, &circuit, &statement, &proof),
        Command::Worker { listen, sessions } => {
            let listener = TcpListener::bind(&listen).map_err(usage)?;
            let expected = cli.config.is_some().then(|| config.proof.cluster(config.workers).hash());
            log::info!("listening on {}", listener.local_addr().map_err(failure)?);
            serve(&listener, expected, sessions).map_err(failure)?;
            Ok(String::new())
        }
        Command::BenchScaling { copies, workers, out } => bench_scaling(&config, &copies, &workers, out.as_deref()),
        Command::Scenario { file, out } => {
            let mut s = Scenario::parse_over(config.scenario(), &read(&file)?).map_err(usage)?;
            if let Some(seed) = cli.seed {
                s.seed = seed;
            }
            let report = s.run().map_err(failure)?;
            if let Some(out) = out {
                write(&out, serde_json::to_string_pretty(&report).map_err(failure)?)?;
            }
            if report.passed() {
                Ok(format!("{report}\n"))
            } else {
                Err(CliError::Failure(format!("scenario failed\n{report}")))
            }
        }
        Command::LockMint { user, amount } => {
            let r = lock_mint_demo(config.seed, &user, amount).map_err(usage)?;
            Ok(format!(
                "minted {} to {} from lock at height {}\npremature mint: {:?}\nreplayed mint: {:?}\nbalance: {}\n",
                r.receipt.amount, r.receipt.user, r.receipt.height, r.premature, r.replay, r.balance
            ))
        }
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| failure(format!("{}: {e}", path.display())))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Whitespace-separated decimal field elements; `#` starts a comment.
pub fn parse_values(text: &str) -> crate::Result<Vec<FieldElement>> {
    text.lines()
        .flat_map(|l| l.split('#').next().unwrap().split_whitespace())
        .map(|w| match w.parse::<u64>() {
            Ok(v) if v < MODULUS => Ok(FieldElement::new(v)),
            _ => Err(crate::Error::Decode(format!("not a field element: {w:?}"))),
        })
        .collect()
}

pub fn format_values(values: &[FieldElement]) -> String {
    let mut s = String::new();
    for chunk in values.chunks(8) {
        let line: Vec<String> = chunk.iter().map(|v| v.value().to_string()).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}

/// Statement file: public inputs, then outputs, each after a header line.
pub fn format_statement(public: &[FieldElement], outputs: &[FieldElement]) -> String {
    format!("public {}\n{}outputs {}\n{}", public.len(), format_values(public), outputs.len(), format_values(outputs))
}

pub fn parse_statement(text: &str) -> crate::Result<(Vec<FieldElement>, Vec<FieldElement>)> {
    let bad = || crate::Error::Decode("statement file needs `public N` and `outputs M` sections".into());
    let (head, rest) = text.split_once("outputs").ok_or_else(bad)?;
    let head = head.trim_start().strip_prefix("public").ok_or_else(bad)?;
    let section = |s: &str| -> crate::Result<Vec<FieldElement>> {
        let (count, body) = s.trim_start().split_once(char::is_whitespace).unwrap_or((s.trim(), ""));
        let n: usize = count.parse().map_err(|_| bad())?;
        let v = parse_values(body)?;
        if v.len() != n {
            return Err(crate::Error::Decode(format!("expected {n} values, found {}", v.len())));
        }
        Ok(v)
    };
    Ok((section(head)?, section(rest)?))
}

fn load_circuit(path: &Path) -> CliResult<DataParallelCircuit> {
    let (sub, copies) = parse_circuit(&read(path)?).map_err(usage)?;
    DataParallelCircuit::new(sub, copies).map_err(usage)
}

fn load_job(circuit: &Path, witness: &Path) -> CliResult<(DataParallelCircuit, Vec<FieldElement>)> {
    let circuit = load_circuit(circuit)?;
    let input = parse_values(&read(witness)?).map_err(usage)?;
    if input.len() != circuit.input_size() {
        return Err(usage(format!("witness has {} values, circuit expects {}", input.len(), circuit.input_size())));
    }
    Ok((circuit, input))
}

/// Random honest signature checks for a light-client statement.
pub fn sample_instances(signatures: usize, rounds: usize, seed: u64) -> Vec<SignatureInstance> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..signatures)
        .map(|_| {
            let secret = FieldElement::random(&mut rng);
            let nonce = FieldElement::random(&mut rng);
            let digest: [u8; 32] = rand::Rng::gen(&mut rng);
            SignatureInstance {
                public_key: toy_public_key(secret, rounds),
                signature: toy_sign(secret, nonce, &digest, rounds),
                digest,
                secret,
                nonce,
            }
        })
        .collect()
}

fn build_circuit(config: &Config, signatures: usize, out: &Path) -> CliResult<String> {
    if signatures == 0 || !signatures.is_power_of_two() {
        return Err(usage("signatures must be a power of two"));
    }
    let circuit = build_light_client_circuit(LightClientParams { signatures, rounds: config.rounds }).map_err(usage)?;
    let input = circuit_input(&sample_instances(signatures, config.rounds, config.seed));
    let circuit_path = with_suffix(out, ".circuit");
    let witness_path = with_suffix(out, ".witness");
    write(&circuit_path, write_circuit(circuit.sub(), circuit.copies()))?;
    write(&witness_path, format_values(&input))?;
    Ok(format!("wrote {} and {}\n", circuit_path.display(), witness_path.display()))
}

#[derive(Serialize)]
struct WorkerSidecar {
    gate_evals: u64,
    busy_ms: f64,
}

/// Stats written next to every proof.
#[derive(Serialize)]
struct ProveSidecar {
    copies: usize,
    workers: usize,
    prover_ms: f64,
    proof_bytes: usize,
    per_worker: Vec<WorkerSidecar>,
    frames_sent: u64,
    frames_received: u64,
    bytes_sent: u64,
    bytes_received: u64,
    broadcasts: u64,
    round_messages: u64,
}

fn prove(
    config: &Config,
    mut cluster: Cluster,
    circuit: &DataParallelCircuit,
    input: &[FieldElement],
    out: &Path,
) -> CliResult<String> {
    if circuit.copies() < cluster.workers() {
        return Err(usage(format!("{} copies cannot be split over {} workers", circuit.copies(), cluster.workers())));
    }
    let start = Instant::now();
    let (outputs, proof) =
        devirgo_prove(&mut cluster, circuit, input, config.identity.as_bytes(), &config.proof).map_err(failure)?;
    let elapsed = start.elapsed();
    let stats = cluster.stats();
    let per_worker = cluster
        .worker_stats()
        .map_err(failure)?
        .into_iter()
        .map(|w| WorkerSidecar { gate_evals: w.gate_evals, busy_ms: w.busy.as_secs_f64() * 1e3 })
        .collect();
    let (public, _) = split_input(circuit, input).map_err(usage)?;
    let bytes = proof.to_bytes();
    let sidecar = ProveSidecar {
        copies: circuit.copies(),
        workers: cluster.workers(),
        prover_ms: elapsed.as_secs_f64() * 1e3,
        proof_bytes: bytes.len(),
        per_worker,
        frames_sent: stats.frames_sent,
        frames_received: stats.frames_received,
        bytes_sent: stats.bytes_sent,
        bytes_received: stats.bytes_received,
        broadcasts: stats.broadcasts,
        round_messages: stats.round_messages,
    };
    let proof_path = with_suffix(out, ".proof");
    write(&proof_path, &bytes)?;
    write(&with_suffix(out, ".statement"), format_statement(&public, &outputs))?;
    write(&with_suffix(out, ".json"), serde_json::to_string_pretty(&sidecar).map_err(failure)?)?;
    Ok(format!(
        "proved {} copies on {} workers in {:.1} ms; {} proof bytes in {}\n",
        sidecar.copies,
        sidecar.workers,
        sidecar.prover_ms,
        sidecar.proof_bytes,
        proof_path.display()
    ))
}

fn verify(config: &Config, circuit: &Path, statement: &Path, proof: &Path) -> CliResult<String> {
    let circuit = load_circuit(circuit)?;
    let (public, outputs) = parse_statement(&read(statement)?).map_err(usage)?;
    let bytes = fs::read(proof).map_err(|e| usage(format!("{}: {e}", proof.display())))?;
    let proof = DeVirgoProof::from_bytes(&bytes).map_err(failure)?;
    if devirgo_verify(&circuit, &public, &outputs, &proof, config.identity.as_bytes(), &config.proof) {
        Ok("proof accepted\n".into())
    } else {
        Err(failure("proof rejected"))
    }
}

/// One row of the scaling table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub copies: usize,
    pub workers: usize,
    pub wall_ms: f64,
    /// Largest gate-evaluation count of any worker.
    pub per_worker_gates: u64,
    pub total_gates: u64,
}

pub fn bench_rows(config: &Config, copies: &[usize], workers: &[usize]) -> crate::Result<Vec<BenchRow>> {
    if copies.is_empty() || workers.is_empty() {
        return Err(crate::Error::InvalidArgument("copy and worker lists must be non-empty".into()));
    }
    if let Some(bad) = copies.iter().chain(workers).find(|n| **n == 0 || !n.is_power_of_two()) {
        return Err(crate::Error::InvalidArgument(format!("{bad} is not a power of two")));
    }
    let mut rows = Vec::new();
    for &c in copies {
        let circuit = build_light_client_circuit(LightClientParams { signatures: c, rounds: config.rounds })?;
        let input = circuit_input(&sample_instances(c, config.rounds, config.seed));
        for &w in workers.iter().filter(|w| **w <= c) {
            let mut cluster = Cluster::in_process(w)?;
            let start = Instant::now();
            devirgo_prove(&mut cluster, &circuit, &input, config.identity.as_bytes(), &config.proof)?;
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            let gates = cluster.setup_gate_evals();
            rows.push(BenchRow {
                copies: c,
                workers: w,
                wall_ms,
                per_worker_gates: gates.iter().copied().max().unwrap_or(0),
                total_gates: gates.iter().sum(),
            });
        }
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("copies,workers,wall_ms,per_worker_gates,total_gates\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{:.3},{},{}", r.copies, r.workers, r.wall_ms, r.per_worker_gates, r.total_gates);
    }
    s
}

fn bench_scaling(config: &Config, copies: &[usize], workers: &[usize], out: Option<&Path>) -> CliResult<String> {
    let rows = bench_rows(config, copies, workers).map_err(usage)?;
    let mut table = format!("{:>7} {:>7} {:>11} {:>17} {:>12}\n", "copies", "workers", "wall ms", "gates per worker", "total gates");
    for r in &rows {
        let _ = writeln!(
            table,
            "{:>7} {:>7} {:>11.2} {:>17} {:>12}",
            r.copies, r.workers, r.wall_ms, r.per_worker_gates, r.total_gates
        );
    }
    if let Some(out) = out {
        write(out, bench_csv(&rows))?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_and_statement_round_trip() {
        let v: Vec<FieldElement> = (0..11u64).map(|i| FieldElement::new(i * 1_000_003)).collect();
        assert_eq!(parse_values(&format_values(&v)).unwrap(), v);
        assert!(parse_values("1 2 x").is_err());
        assert!(parse_values(&MODULUS.to_string()).is_err());
        let text = format_statement(&v[..5], &v[5..]);
        assert_eq!(parse_statement(&text).unwrap(), (v[..5].to_vec(), v[5..].to_vec()));
        assert!(parse_statement("public 2\n1\noutputs 0\n").is_err());
    }

    #[test]
    fn bench_rejects_empty_lists() {
        assert!(bench_rows(&Config::default(), &[], &[1]).is_err());
        assert!(bench_rows(&Config::default(), &[2], &[3]).is_err());
    }

    #[test]
    fn bench_rows_split_work_evenly() {
        let rows = bench_rows(&Config::default(), &[1, 2, 4], &[1, 2, 4]).unwrap();
        let diag: Vec<_> = rows.iter().filter(|r| r.copies == r.workers).collect();
        assert_eq!(diag.len(), 3);
        assert!(diag.iter().all(|r| r.per_worker_gates == diag[0].per_worker_gates));
        for r in &rows {
            assert_eq!(r.per_worker_gates * r.workers as u64, r.total_gates);
        }
    }
}
