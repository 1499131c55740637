//! Command-line front end: run protocols, sweep configurations, verify the
//! two-qubit recovery catalog, and audit classical-communication widths.
//!
//! Exit codes are the success signal everywhere: 0 when every checked
//! contract holds, 1 on a contract failure (fidelity below the gate, audit
//! mismatch, catalog mismatch), 2 on a usage error (malformed flags, sizes
//! outside the supported range, unreadable input files).

use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use rio_core::protocol::{
    self, audit_messages, AuditReport, ClassicalMessage, Family, OpSpec, OutcomeMode,
    ProtocolConfig, RoleAssignment, Sabotage, UnknownState,
};
use rio_core::recovery2;
use rio_core::restricted::set_count;

#[derive(Parser)]
#[command(name = "rio", version, about = "Remote-operation protocol simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one protocol configuration and report every selected branch.
    Run(RunArgs),
    /// Check the two-qubit recovery catalog against the fixed forms.
    VerifyCatalog(VerifyCatalogArgs),
    /// Sweep set indices with randomized trials, emitting one CSV row per branch.
    Sweep(SweepArgs),
    /// Audit classical message routing and widths, live or from a stored report.
    Audit(AuditArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    #[value(name = "controlled1q")]
    Controlled1q,
    #[value(name = "combined1q")]
    Combined1q,
    #[value(name = "controlled-nq")]
    ControlledNq,
    #[value(name = "combined-nq")]
    CombinedNq,
}

impl FamilyArg {
    fn family(self) -> Family {
        match self {
            FamilyArg::Controlled1q => Family::Controlled1q,
            FamilyArg::Combined1q => Family::Combined1q,
            FamilyArg::ControlledNq => Family::ControlledNq,
            FamilyArg::CombinedNq => Family::CombinedNq,
        }
    }
}

fn family_from_str(s: &str) -> Option<Family> {
    match s {
        "controlled1q" => Some(Family::Controlled1q),
        "combined1q" => Some(Family::Combined1q),
        "controlled-nq" => Some(Family::ControlledNq),
        "combined-nq" => Some(Family::CombinedNq),
        _ => None,
    }
}

#[derive(Args)]
struct RunArgs {
    /// Protocol family.
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Register size N (defaults to 1 for the one-qubit families, 2 otherwise).
    #[arg(long)]
    n_qubits: Option<usize>,
    /// Controller count n (defaults to 1 for the controlled families, 0 otherwise).
    #[arg(long)]
    controllers: Option<usize>,
    /// Password routing variant 1..=4.
    #[arg(long, default_value_t = 1)]
    variant: u8,
    /// First sender's one-based set index.
    #[arg(long, default_value_t = 1)]
    x: u64,
    /// Second sender's one-based set index (combined families only).
    #[arg(long)]
    y: Option<u64>,
    /// First operation phases: angles "0.1,0.2", "pairs:re,im;re,im", or @file.
    #[arg(long)]
    phases: Option<String>,
    /// Second operation phases (combined families only), same syntax.
    #[arg(long)]
    phases2: Option<String>,
    /// Unknown input state: "seed", "seed:7", "pairs:re,im;re,im", or @file.
    #[arg(long)]
    state: Option<String>,
    /// Outcome selection: "all", explicit bits like "010", "seed", or "seed:9".
    #[arg(long, default_value = "all")]
    outcomes: String,
    /// Base seed; falls back to the RIO_SEED environment variable, then 7.
    #[arg(long)]
    seed: Option<u64>,
    /// Emit the full run report as JSON on stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct VerifyCatalogArgs {
    /// Pass only if catalog position x maps to set index x for all 24 entries,
    /// not merely the same set of matrices.
    #[arg(long)]
    strict_index: bool,
    /// Print only the catalog-to-set-index correspondence table.
    #[arg(long)]
    table_only: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Protocol family.
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Register size N (defaults to 1 for the one-qubit families, 2 otherwise).
    #[arg(long)]
    n_qubits: Option<usize>,
    /// Controller count n (defaults to 1 for the controlled families, 0 otherwise).
    #[arg(long)]
    controllers: Option<usize>,
    /// Password routing variant 1..=4.
    #[arg(long, default_value_t = 1)]
    variant: u8,
    /// Sweep every set index (every index pair for the combined families).
    #[arg(long, conflicts_with = "sample_x")]
    all_x: bool,
    /// Sample this many set indices (index pairs for the combined families).
    #[arg(long)]
    sample_x: Option<usize>,
    /// Random phase/state trials per index.
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Base seed; falls back to the RIO_SEED environment variable, then 7.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AuditArgs {
    /// Stored run report produced by `rio run --json`.
    #[arg(long)]
    input: Option<String>,
    /// Protocol family for a live audit run.
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// Register size N for a live audit run.
    #[arg(long)]
    n_qubits: Option<usize>,
    /// Controller count n for a live audit run.
    #[arg(long)]
    controllers: Option<usize>,
    /// Password routing variant for a live audit run.
    #[arg(long, default_value_t = 1)]
    variant: u8,
    /// Base seed; falls back to the RIO_SEED environment variable, then 7.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct ConfigEcho {
    family: String,
    n_qubits: usize,
    controllers: usize,
    variant: u8,
    x: u64,
    y: Option<u64>,
    phases: Vec<[f64; 2]>,
    phases2: Option<Vec<[f64; 2]>>,
    state: String,
    outcomes: String,
    seed: u64,
}

#[derive(Serialize)]
struct RunReport {
    tool_version: String,
    config: ConfigEcho,
    branches: Vec<serde_json::Value>,
    min_fidelity: f64,
    mean_fidelity: f64,
    audit_pass: bool,
    substitutions: Vec<String>,
    wall_time_ms: f64,
}

fn main() -> ExitCode {
    // Die quietly on a closed pipe (`rio sweep ... | head`) like other
    // line-oriented Unix tools instead of panicking mid-write.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::VerifyCatalog(args) => cmd_verify_catalog(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Audit(args) => cmd_audit(args),
    };
    ExitCode::from(code)
}

fn resolve_seed(explicit: Option<u64>) -> u64 {
    explicit
        .or_else(|| std::env::var("RIO_SEED").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(7)
}

fn default_sizes(family: Family, n_qubits: Option<usize>, controllers: Option<usize>) -> (usize, usize) {
    let n = n_qubits.unwrap_or(match family {
        Family::Controlled1q | Family::Combined1q => 1,
        _ => 2,
    });
    let c = controllers.unwrap_or(match family {
        Family::Controlled1q => 1,
        Family::ControlledNq => 1,
        _ => 0,
    });
    (n, c)
}

fn read_spec(spec: &str) -> Result<String, String> {
    if let Some(path) = spec.strip_prefix('@') {
        fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))
    } else {
        Ok(spec.to_string())
    }
}

fn parse_complex_list(body: &str) -> Result<Vec<Complex64>, String> {
    body.split(';')
        .map(|pair| {
            let mut parts = pair.split(',');
            let re = parts
                .next()
                .ok_or_else(|| format!("missing real part in '{pair}'"))?
                .trim()
                .parse::<f64>()
                .map_err(|e| format!("bad real part in '{pair}': {e}"))?;
            let im = parts
                .next()
                .ok_or_else(|| format!("missing imaginary part in '{pair}'"))?
                .trim()
                .parse::<f64>()
                .map_err(|e| format!("bad imaginary part in '{pair}': {e}"))?;
            if parts.next().is_some() {
                return Err(format!("expected 're,im' in '{pair}'"));
            }
            Ok(Complex64::new(re, im))
        })
        .collect()
}

/// Phases are angle lists by default (entry m becomes e^{i angle}); the
/// "pairs:" prefix switches to explicit complex entries.
fn parse_phases(spec: &str, dim: usize) -> Result<Vec<Complex64>, String> {
    let body = read_spec(spec)?;
    let body = body.trim();
    let values: Vec<Complex64> = if let Some(rest) = body.strip_prefix("pairs:") {
        parse_complex_list(rest)?
    } else {
        body.split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map(|angle| Complex64::new(angle.cos(), angle.sin()))
                    .map_err(|e| format!("bad angle '{tok}': {e}"))
            })
            .collect::<Result<_, _>>()?
    };
    if values.len() != dim {
        return Err(format!("need {dim} phases, got {}", values.len()));
    }
    Ok(values)
}

fn parse_state(spec: &str, dim: usize, fallback: u64) -> Result<UnknownState, String> {
    let body = read_spec(spec)?;
    let body = body.trim();
    if body == "seed" {
        return Ok(UnknownState::Seed(fallback));
    }
    if let Some(rest) = body.strip_prefix("seed:") {
        return rest
            .parse()
            .map(UnknownState::Seed)
            .map_err(|e| format!("bad state seed '{rest}': {e}"));
    }
    let amps = parse_complex_list(body.strip_prefix("pairs:").unwrap_or(body))?;
    if amps.len() != dim {
        return Err(format!("need {dim} amplitudes, got {}", amps.len()));
    }
    Ok(UnknownState::Amplitudes(amps))
}

fn parse_outcomes(spec: &str, fallback: u64) -> Result<OutcomeMode, String> {
    let spec = spec.trim();
    if spec == "all" {
        return Ok(OutcomeMode::EnumerateAll);
    }
    if spec == "seed" {
        return Ok(OutcomeMode::Sample(fallback));
    }
    if let Some(rest) = spec.strip_prefix("seed:") {
        return rest
            .parse()
            .map(OutcomeMode::Sample)
            .map_err(|e| format!("bad outcome seed '{rest}': {e}"));
    }
    spec.chars()
        .map(|ch| match ch {
            '0' => Ok(0u8),
            '1' => Ok(1u8),
            other => Err(format!("outcome bits must be 0/1, got '{other}'")),
        })
        .collect::<Result<Vec<u8>, _>>()
        .map(OutcomeMode::Fixed)
}

fn build_config(args: &RunArgs) -> Result<(ProtocolConfig, ConfigEcho), String> {
    let family = args.family.family();
    let (n_qubits, controllers) = default_sizes(family, args.n_qubits, args.controllers);
    if n_qubits == 0 || n_qubits > 8 {
        return Err(format!("--n-qubits {n_qubits} out of range"));
    }
    let seed = resolve_seed(args.seed);
    let dim = 1usize << n_qubits;
    let one = Complex64::new(1.0, 0.0);
    let phases = match &args.phases {
        Some(spec) => parse_phases(spec, dim)?,
        None => vec![one; dim],
    };
    let two_senders = matches!(family, Family::Combined1q | Family::CombinedNq);
    let (op2, phases2) = if two_senders {
        let phases2 = match &args.phases2 {
            Some(spec) => parse_phases(spec, dim)?,
            None => vec![one; dim],
        };
        (Some(OpSpec { x: args.y.unwrap_or(1), phases: phases2.clone() }), Some(phases2))
    } else {
        if args.y.is_some() || args.phases2.is_some() {
            return Err("--y and --phases2 apply only to the combined families".to_string());
        }
        (None, None)
    };
    let unknown = match &args.state {
        Some(spec) => parse_state(spec, dim, seed)?,
        None => UnknownState::Seed(seed),
    };
    let outcomes = parse_outcomes(&args.outcomes, seed)?;
    let echo = ConfigEcho {
        family: family.as_str().to_string(),
        n_qubits,
        controllers,
        variant: args.variant,
        x: args.x,
        y: op2.as_ref().map(|op| op.x),
        phases: phases.iter().map(|p| [p.re, p.im]).collect(),
        phases2: phases2.map(|ps| ps.iter().map(|p| [p.re, p.im]).collect()),
        state: args.state.clone().unwrap_or_else(|| format!("seed:{seed}")),
        outcomes: args.outcomes.clone(),
        seed,
    };
    let config = ProtocolConfig {
        family,
        n_qubits,
        controllers,
        variant: args.variant,
        op1: OpSpec { x: args.x, phases },
        op2,
        unknown,
        outcomes,
        sabotage: Sabotage::None,
        roles: RoleAssignment::Default,
        allow_non_unitary: false,
    };
    Ok((config, echo))
}

fn outcome_bits(result: &protocol::ProtocolResult) -> String {
    result.outcomes.iter().map(|(_, b)| if *b == 1 { '1' } else { '0' }).collect()
}

fn cmd_run(args: &RunArgs) -> u8 {
    let (config, echo) = match build_config(args) {
        Ok(pair) => pair,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let start = Instant::now();
    let results = match protocol::run(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    let audit_pass = results.iter().all(|r| {
        protocol::audit_bits(&r.transcript, &config).map(|a| a.pass).unwrap_or(false)
    });
    let min_fidelity = results.iter().map(|r| r.fidelity).fold(f64::INFINITY, f64::min);
    let mean_fidelity = results.iter().map(|r| r.fidelity).sum::<f64>() / results.len() as f64;
    let pass = min_fidelity >= 1.0 - protocol::FIDELITY_TOL && audit_pass;
    if args.json {
        let report = RunReport {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: echo,
            branches: results.iter().map(|r| r.to_json()).collect(),
            min_fidelity,
            mean_fidelity,
            audit_pass,
            substitutions: results[0].substitutions.clone(),
            wall_time_ms,
        };
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        for r in &results {
            println!(
                "branch {}  probability {:.6}  fidelity {:.12}",
                outcome_bits(r),
                r.branch_probability,
                r.fidelity
            );
        }
        for s in &results[0].substitutions {
            println!("substitution: {s}");
        }
        println!(
            "branches {}  min fidelity {:.12}  mean fidelity {:.12}  audit {}",
            results.len(),
            min_fidelity,
            mean_fidelity,
            if audit_pass { "pass" } else { "fail" }
        );
    }
    if pass {
        0
    } else {
        1
    }
}

fn cmd_verify_catalog(args: &VerifyCatalogArgs) -> u8 {
    let report = recovery2::verify_catalog();
    if args.table_only {
        println!("{}", report.correspondence_json());
    } else {
        println!("{}", report.to_json());
    }
    let pass = report.set_equal && (!args.strict_index || report.identity_correspondence);
    if pass {
        0
    } else {
        1
    }
}

fn cmd_sweep(args: &SweepArgs) -> u8 {
    let family = args.family.family();
    let (n_qubits, controllers) = default_sizes(family, args.n_qubits, args.controllers);
    let count = match set_count(n_qubits) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let two_senders = matches!(family, Family::Combined1q | Family::CombinedNq);
    let mut keys: Vec<(u64, Option<u64>)> = Vec::new();
    let base = resolve_seed(args.seed);
    let mut master = ChaCha8Rng::seed_from_u64(base);
    if args.all_x {
        if count > 24 {
            eprintln!("error: --all-x is supported up to N = 2 ({count} indices at this size); use --sample-x");
            return 2;
        }
        for x in 1..=count {
            if two_senders {
                for y in 1..=count {
                    keys.push((x, Some(y)));
                }
            } else {
                keys.push((x, None));
            }
        }
    } else if let Some(k) = args.sample_x {
        for _ in 0..k {
            let x = master.gen_range(1..=count);
            let y = if two_senders { Some(master.gen_range(1..=count)) } else { None };
            keys.push((x, y));
        }
        keys.sort_unstable();
    } else {
        eprintln!("error: pass --all-x or --sample-x K");
        return 2;
    }

    println!("family,n_qubits,controllers,variant,x,y,trial,outcomes,branch_probability,fidelity,pass");
    let mut all_pass = true;
    let dim = 1usize << n_qubits;
    for (x, y) in keys {
        for trial in 0..args.trials {
            let phases: Vec<Complex64> = (0..dim)
                .map(|_| {
                    let angle = master.gen::<f64>() * std::f64::consts::TAU;
                    Complex64::new(angle.cos(), angle.sin())
                })
                .collect();
            let op2 = y.map(|yy| OpSpec {
                x: yy,
                phases: (0..dim)
                    .map(|_| {
                        let angle = master.gen::<f64>() * std::f64::consts::TAU;
                        Complex64::new(angle.cos(), angle.sin())
                    })
                    .collect(),
            });
            let config = ProtocolConfig {
                family,
                n_qubits,
                controllers,
                variant: args.variant,
                op1: OpSpec { x, phases },
                op2,
                unknown: UnknownState::Seed(master.gen()),
                outcomes: OutcomeMode::EnumerateAll,
                sabotage: Sabotage::None,
                roles: RoleAssignment::Default,
                allow_non_unitary: false,
            };
            let results = match protocol::run(&config) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return 2;
                }
            };
            for r in &results {
                let pass = r.fidelity >= 1.0 - protocol::FIDELITY_TOL;
                all_pass &= pass;
                println!(
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    family.as_str(),
                    n_qubits,
                    controllers,
                    args.variant,
                    x,
                    y.map(|v| v.to_string()).unwrap_or_default(),
                    trial,
                    outcome_bits(r),
                    r.branch_probability,
                    r.fidelity,
                    pass
                );
            }
        }
    }
    if all_pass {
        0
    } else {
        1
    }
}

fn print_audit(report: &AuditReport) {
    println!("{:<3} {:<8} {:<8} {:<34} {:>5} {:>8}  ok", "#", "from", "to", "tag", "width", "expected");
    for e in &report.entries {
        println!(
            "{:<3} {:<8} {:<8} {:<34} {:>5} {:>8}  {}",
            e.index + 1,
            e.from,
            e.to,
            e.tag,
            e.width,
            e.expected_width,
            if e.pass { "yes" } else { "NO" }
        );
    }
    for m in &report.missing {
        println!("missing: {} -> {} ({} bits)", m.from, m.to, m.width);
    }
    for m in &report.unexpected {
        println!("unexpected: {} -> {} '{}' ({} bits)", m.from, m.to, m.tag, m.width);
    }
    println!("audit: {}", if report.pass { "pass" } else { "fail" });
}

/// Rebuild enough of a configuration to compute the expected schedule.
fn schedule_config(family: Family, n_qubits: usize, controllers: usize, variant: u8) -> ProtocolConfig {
    let dim = 1usize << n_qubits;
    let one = Complex64::new(1.0, 0.0);
    let two_senders = matches!(family, Family::Combined1q | Family::CombinedNq);
    ProtocolConfig {
        family,
        n_qubits,
        controllers,
        variant,
        op1: OpSpec { x: 1, phases: vec![one; dim] },
        op2: two_senders.then(|| OpSpec { x: 1, phases: vec![one; dim] }),
        unknown: UnknownState::Seed(0),
        outcomes: OutcomeMode::EnumerateAll,
        sabotage: Sabotage::None,
        roles: RoleAssignment::Default,
        allow_non_unitary: false,
    }
}

fn audit_stored(path: &str) -> Result<AuditReport, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| format!("{path} is not valid JSON: {e}"))?;
    let config = &value["config"];
    let family = config["family"]
        .as_str()
        .and_then(family_from_str)
        .ok_or_else(|| format!("{path}: missing or unknown config.family"))?;
    let n_qubits = config["n_qubits"].as_u64().ok_or("missing config.n_qubits")? as usize;
    let controllers = config["controllers"].as_u64().ok_or("missing config.controllers")? as usize;
    let variant = config["variant"].as_u64().ok_or("missing config.variant")? as u8;
    let branch = value["branches"]
        .as_array()
        .and_then(|b| b.first())
        .ok_or_else(|| format!("{path}: report has no branches"))?;
    let messages: Vec<ClassicalMessage> = branch["messages"]
        .as_array()
        .ok_or_else(|| format!("{path}: branch has no messages"))?
        .iter()
        .map(|m| {
            let bits = m["bits"].as_str().unwrap_or_default().to_string();
            ClassicalMessage {
                from: m["from"].as_str().unwrap_or_default().to_string(),
                to: m["to"].as_str().unwrap_or_default().to_string(),
                tag: m["tag"].as_str().unwrap_or_default().to_string(),
                width: bits.len(),
                bits,
            }
        })
        .collect();
    let config = schedule_config(family, n_qubits, controllers, variant);
    audit_messages(&messages, &config).map_err(|e| e.to_string())
}

fn cmd_audit(args: &AuditArgs) -> u8 {
    if let Some(path) = &args.input {
        match audit_stored(path) {
            Ok(report) => {
                print_audit(&report);
                if report.pass {
                    0
                } else {
                    1
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
        }
    } else if let Some(family_arg) = args.family {
        let family = family_arg.family();
        let (n_qubits, controllers) = default_sizes(family, args.n_qubits, args.controllers);
        let seed = resolve_seed(args.seed);
        let mut config = schedule_config(family, n_qubits, controllers, args.variant);
        config.unknown = UnknownState::Seed(seed);
        config.outcomes = OutcomeMode::Sample(seed);
        let results = match protocol::run(&config) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("error: {e}");
                return 2;
            }
        };
        match protocol::audit_bits(&results[0].transcript, &config) {
            Ok(report) => {
                print_audit(&report);
                if report.pass {
                    0
                } else {
                    1
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
        }
    } else {
        eprintln!("error: pass --input FILE or --family for a live audit");
        2
    }
}
