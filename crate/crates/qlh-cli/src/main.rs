//! `qlh` — command-line front door for the approximation-algorithm library:
//! generates instances, runs the relaxation/rounding pipelines, certifies
//! ratio constants, and regenerates the summary table.
//!
//! Every command takes an explicit seed, embeds it (with sample counts and
//! solver residuals) in its report, and produces byte-identical output files
//! on reruns with the same configuration, regardless of `--threads`.
//!
//! Exit codes: 0 success, 2 usage/IO, 3 solver non-convergence, 4 structural
//! rejection (non-bipartite graph, malformed instance, …).

use clap::{Args, Parser, Subcommand, ValueEnum};
use qlh::pauli::{self, Instance, InstanceKind};
use qlh::rng::{self, SALT_GENERATE};
use qlh::{grothendieck, hermite, rounding, sdp};
use rand::Rng;
use serde::Serialize;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const VERSION: &str = env!("CARGO_PKG_VERSION");

// ---------------------------------------------------------------------------
// Errors and exit codes
// ---------------------------------------------------------------------------

/// Command failures carrying their process exit code.
#[derive(Debug)]
enum CliError {
    /// Bad flags, unreadable/unwritable paths, malformed JSON — exit 2.
    Usage(String),
    /// The relaxation solver hit its iteration cap — exit 3.
    Solver(String),
    /// The instance is structurally unfit for the command — exit 4.
    Structure(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Structure(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Solver(m) => write!(f, "solver error: {m}"),
            CliError::Structure(m) => write!(f, "structure error: {m}"),
        }
    }
}

impl From<qlh::Error> for CliError {
    fn from(e: qlh::Error) -> Self {
        match e {
            qlh::Error::NoConvergence { .. } => CliError::Solver(e.to_string()),
            other => CliError::Structure(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(format!("invalid JSON: {e}"))
    }
}

type CliResult<T> = Result<T, CliError>;

// ---------------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "qlh",
    version,
    about = "Approximation algorithms for maximum-eigenvalue 2-local Hamiltonians",
    propagate_version = true
)]
struct Cli {
    /// Worker-thread cap (falls back to env QLH_THREADS, then all cores).
    /// Results are identical at any value.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance and write it as schema-valid JSON.
    Generate(GenerateArgs),
    /// Solve the moment relaxation, hyperplane-round product states, and
    /// report approximation ratios for an instance file.
    Ratio(RatioArgs),
    /// Certify the approximation-ratio constants for a projector rank and
    /// scan for the worst-case ratio over the moment polytope.
    Bounds(BoundsArgs),
    /// Krivine-round a bipartite traceless instance to a product state with
    /// a 0.187-factor guarantee.
    Krivine(KrivineArgs),
    /// Regenerate the ratio table: certified constants next to batched
    /// empirical worst-edge ratios, as CSV.
    Reproduce(ReproduceArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    /// Haar-random rank-k projector terms.
    #[value(name = "rank-projector")]
    RankProjector,
    /// Strictly quadratic rank-k projector terms (no 1-local part).
    #[value(name = "sq-projector")]
    SqProjector,
    /// Antiferromagnetic Heisenberg terms (singlet projectors up to shift).
    #[value(name = "heisenberg")]
    Heisenberg,
    /// Random Max 2-SAT clauses encoded as diagonal projectors.
    #[value(name = "max2sat")]
    Max2sat,
    /// Random bipartite antiferromagnetic Ising (−ZZ) couplings.
    #[value(name = "ising-bipartite")]
    IsingBipartite,
}

#[derive(Args)]
struct GenerateArgs {
    /// Instance family.
    #[arg(long, value_enum)]
    kind: Kind,
    /// Projector rank in 1..=3 (rank-projector and sq-projector only).
    #[arg(long)]
    rank: Option<u8>,
    /// Qubit (or 2-SAT variable) count.
    #[arg(long)]
    n: usize,
    /// Number of terms (edges or clauses).
    #[arg(long)]
    edges: usize,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path for the instance JSON.
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
}

#[derive(Args)]
struct RatioArgs {
    /// Instance JSON file.
    #[arg(value_name = "INSTANCE")]
    input: PathBuf,
    /// Rounding samples.
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// RNG seed for the rounding streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solver stopping tolerance.
    #[arg(long, default_value_t = sdp::DEFAULT_TOL)]
    tol: f64,
    /// Output path for the report JSON.
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
}

#[derive(Args)]
struct BoundsArgs {
    /// Projector rank in 1..=3.
    #[arg(long)]
    rank: u8,
    /// Simplex grid density for the observed-minimum scan.
    #[arg(long, default_value_t = 24)]
    grid: usize,
    /// Monte Carlo samples cross-checking the observed minimizer.
    #[arg(long, default_value_t = 200_000)]
    samples: u64,
    /// RNG seed for the Monte Carlo cross-check.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path for the certification JSON.
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
}

#[derive(Args)]
struct KrivineArgs {
    /// Instance JSON file (traceless, bipartite interaction graph).
    #[arg(value_name = "INSTANCE")]
    input: PathBuf,
    /// Sign-rounding samples.
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// RNG seed for the rounding streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solver stopping tolerance.
    #[arg(long, default_value_t = sdp::DEFAULT_TOL)]
    tol: f64,
    /// Output path for the report JSON.
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Qubit count of each sampled instance.
    #[arg(long, default_value_t = 6)]
    n: usize,
    /// Terms per sampled instance.
    #[arg(long, default_value_t = 10)]
    edges: usize,
    /// Instances per table row.
    #[arg(long, default_value_t = 8)]
    instances: usize,
    /// Rounding samples per instance.
    #[arg(long, default_value_t = 20_000)]
    samples: u64,
    /// Master RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path for the CSV table.
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
}

// ---------------------------------------------------------------------------
// Report envelope
// ---------------------------------------------------------------------------

/// Uniform wrapper for JSON reports: version + command + echoed config +
/// payload. `--threads` is deliberately excluded from the config echo, so
/// reruns at any thread count stay byte-identical.
#[derive(Serialize)]
struct Envelope<C: Serialize, T: Serialize> {
    version: &'static str,
    command: &'static str,
    config: C,
    report: T,
}

fn write_json<C: Serialize, T: Serialize>(
    path: &Path,
    command: &'static str,
    config: C,
    report: T,
) -> CliResult<()> {
    let envelope = Envelope {
        version: VERSION,
        command,
        config,
        report,
    };
    let mut text = serde_json::to_string_pretty(&envelope)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Fails early (before any compute) when the output location is unusable or
/// a required input file is missing.
fn check_paths(input: Option<&Path>, output: &Path) -> CliResult<()> {
    if let Some(input) = input {
        if !input.is_file() {
            return Err(CliError::Usage(format!(
                "instance file not found: {}",
                input.display()
            )));
        }
    }
    if let Some(dir) = output.parent() {
        if !dir.as_os_str().is_empty() && !dir.is_dir() {
            return Err(CliError::Usage(format!(
                "output directory does not exist: {}",
                dir.display()
            )));
        }
    }
    Ok(())
}

fn load_instance(path: &Path) -> CliResult<Instance> {
    let text = fs::read_to_string(path)?;
    let inst: Instance = serde_json::from_str(&text)?;
    inst.validate_basic()?;
    Ok(inst)
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

/// Uniformly random ordered pair of distinct indices below `n`.
fn random_pair(rng: &mut impl Rng, n: usize) -> (usize, usize) {
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

fn cmd_generate(args: &GenerateArgs) -> CliResult<()> {
    check_paths(None, &args.output)?;
    let needs_rank = matches!(args.kind, Kind::RankProjector | Kind::SqProjector);
    let rank = match (needs_rank, args.rank) {
        (true, Some(k)) if (1..=3).contains(&k) => Some(k),
        (true, Some(k)) => {
            return Err(CliError::Usage(format!(
                "--rank must be 1, 2 or 3, got {k}"
            )))
        }
        (true, None) => {
            return Err(CliError::Usage(
                "--rank is required for projector kinds".into(),
            ))
        }
        (false, Some(_)) => {
            return Err(CliError::Usage(
                "--rank only applies to rank-projector and sq-projector".into(),
            ))
        }
        (false, None) => None,
    };
    if args.n < 2 {
        return Err(CliError::Usage(format!(
            "need at least 2 qubits, got --n {}",
            args.n
        )));
    }

    let inst = match args.kind {
        Kind::RankProjector => pauli::random_instance(
            args.n,
            args.edges,
            InstanceKind::Projector(rank.unwrap()),
            args.seed,
        )?,
        Kind::SqProjector => pauli::random_instance(
            args.n,
            args.edges,
            InstanceKind::StrictlyQuadraticProjector(rank.unwrap()),
            args.seed,
        )?,
        Kind::Heisenberg => {
            let mut rng = rng::stream(args.seed, SALT_GENERATE, 1);
            let edges: Vec<(usize, usize, f64)> = (0..args.edges)
                .map(|_| {
                    let (i, j) = random_pair(&mut rng, args.n);
                    (i, j, 1.0)
                })
                .collect();
            pauli::encode_heisenberg(&edges, args.n)?
        }
        Kind::Max2sat => {
            let mut rng = rng::stream(args.seed, SALT_GENERATE, 2);
            let clauses: Vec<(pauli::Literal, pauli::Literal)> = (0..args.edges)
                .map(|_| {
                    let (i, j) = random_pair(&mut rng, args.n);
                    ((i, rng.random::<bool>()), (j, rng.random::<bool>()))
                })
                .collect();
            pauli::encode_max2sat(&clauses, args.n)?
        }
        Kind::IsingBipartite => pauli::random_bipartite_zz(args.n, args.edges, args.seed)?,
    };

    let validation = pauli::validate_instance(&inst);
    if !validation.passed() {
        return Err(CliError::Structure(format!(
            "generated instance failed validation:\n{validation}"
        )));
    }
    let mut text = serde_json::to_string_pretty(&inst)?;
    text.push('\n');
    fs::write(&args.output, text)?;

    println!(
        "wrote {}: kind {}, {} qubits, {} terms",
        args.output.display(),
        inst.kind,
        inst.n,
        inst.terms.len()
    );
    let warnings = validation.issues.len();
    if warnings == 0 {
        println!("validation: ok");
    } else {
        println!("validation: passed with {warnings} warning(s)");
        print!("{validation}");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// ratio
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RatioConfig {
    input: String,
    samples: u64,
    seed: u64,
    tol: f64,
}

fn cmd_ratio(args: &RatioArgs) -> CliResult<()> {
    check_paths(Some(&args.input), &args.output)?;
    let inst = load_instance(&args.input)?;
    let opts = rounding::PipelineOptions {
        tol: args.tol,
        ..rounding::PipelineOptions::default()
    };
    let report = rounding::ratio_pipeline(&inst, args.samples, args.seed, &opts)?;
    let converged = report.converged;
    let headline = (
        report.mean_energy,
        report.sdp_value,
        report.ratio_vs_sdp,
        report.ratio_vs_exact,
    );
    write_json(
        &args.output,
        "ratio",
        RatioConfig {
            input: args.input.display().to_string(),
            samples: args.samples,
            seed: args.seed,
            tol: args.tol,
        },
        report,
    )?;

    println!("wrote {}", args.output.display());
    println!(
        "mean energy {} | relaxation value {} | ratio vs relaxation {} | ratio vs exact {}",
        headline.0,
        headline.1,
        headline
            .2
            .map(|r| r.to_string())
            .unwrap_or_else(|| "n/a".into()),
        headline
            .3
            .map(|r| r.to_string())
            .unwrap_or_else(|| "n/a".into()),
    );
    if !converged {
        return Err(CliError::Solver(
            "relaxation solver hit its iteration cap; report written with converged=false".into(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// bounds
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct BoundsConfig {
    rank: u8,
    grid: usize,
    samples: u64,
    seed: u64,
}

#[derive(Serialize)]
struct BoundsReport {
    rank: u8,
    /// Closed-form certified constant for strictly quadratic instances.
    certified_quadratic_constant: f64,
    /// Closed-form certified constant for general rank-k instances.
    certified_general_constant: f64,
    /// Conjectured true worst case for strictly quadratic instances.
    conjectured_quadratic_minimum: f64,
    /// Grid certification of the strictly quadratic ratio function.
    quadratic: hermite::QuadraticCertification,
    /// Coarse-grained vertex bound for general instances.
    general: hermite::GeneralBound,
}

fn cmd_bounds(args: &BoundsArgs) -> CliResult<()> {
    check_paths(None, &args.output)?;
    if !(1..=3).contains(&args.rank) {
        return Err(CliError::Usage(format!(
            "--rank must be 1, 2 or 3, got {}",
            args.rank
        )));
    }
    if args.grid == 0 {
        return Err(CliError::Usage("--grid must be positive".into()));
    }
    let quadratic =
        hermite::certify_bounds_quadratic(args.rank, args.grid, args.samples, args.seed)?;
    let general = hermite::bound_general(args.rank)?;
    let report = BoundsReport {
        rank: args.rank,
        certified_quadratic_constant: hermite::certified_quadratic_constant(args.rank)?,
        certified_general_constant: hermite::certified_general_constant(args.rank)?,
        conjectured_quadratic_minimum: hermite::conjectured_quadratic_minimum(args.rank)?,
        quadratic: quadratic.clone(),
        general: general.clone(),
    };
    write_json(
        &args.output,
        "bounds",
        BoundsConfig {
            rank: args.rank,
            grid: args.grid,
            samples: args.samples,
            seed: args.seed,
        },
        report,
    )?;

    println!("wrote {}", args.output.display());
    println!(
        "rank {}: quadratic certified >= {} (constant {:.5}), observed min {} at {:?} (conjectured {:.3})",
        args.rank,
        quadratic.certified_min,
        hermite::certified_quadratic_constant(args.rank)?,
        quadratic.observed_min,
        quadratic.observed_argmin,
        hermite::conjectured_quadratic_minimum(args.rank)?,
    );
    println!(
        "rank {}: general-case constant {} ({} vertices, sign-matched min {})",
        args.rank,
        general.value,
        general.vertices.len(),
        general.matched_min
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// krivine
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct KrivineConfig {
    input: String,
    samples: u64,
    seed: u64,
    tol: f64,
}

#[derive(Serialize)]
struct KrivineCmdReport {
    #[serde(flatten)]
    rounding: grothendieck::KrivineReport,
    /// Bloch vectors of the best rounded product state.
    best_state: Vec<[f64; 3]>,
}

fn cmd_krivine(args: &KrivineArgs) -> CliResult<()> {
    check_paths(Some(&args.input), &args.output)?;
    let inst = load_instance(&args.input)?;
    let opts = grothendieck::TracelessOptions {
        tol: args.tol,
        ..grothendieck::TracelessOptions::default()
    };
    let (state, report) = grothendieck::bipartite_pipeline(&inst, args.samples, args.seed, &opts)?;
    let converged = report.converged;
    let headline = (report.mean_energy, report.sdp_value, report.guarantee);
    let best_state = state
        .thetas
        .iter()
        .map(|t| [t[0], t[1], t[2]])
        .collect::<Vec<_>>();
    write_json(
        &args.output,
        "krivine",
        KrivineConfig {
            input: args.input.display().to_string(),
            samples: args.samples,
            seed: args.seed,
            tol: args.tol,
        },
        KrivineCmdReport {
            rounding: report,
            best_state,
        },
    )?;

    println!("wrote {}", args.output.display());
    println!(
        "mean product energy {} | relaxation value {} | certified fraction {}",
        headline.0,
        headline.1,
        headline
            .2
            .map(|g| g.to_string())
            .unwrap_or_else(|| "n/a".into()),
    );
    if !converged {
        return Err(CliError::Solver(
            "relaxation solver hit its iteration cap; report written with converged=false".into(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// reproduce
// ---------------------------------------------------------------------------

/// Splits the master seed into a per-instance seed; any fixed injective
/// scheme works, this one just keeps rows independent.
fn instance_seed(master: u64, row: u64, idx: u64) -> u64 {
    master ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul((row << 32) | (idx + 1))
}

struct TableRow {
    family: &'static str,
    rank: u8,
    constant: f64,
    empirical: f64,
    stderr: f64,
}

/// Worst per-term ratio across a batch of random instances of one kind,
/// with the standard error of the mean at that term.
fn batch_worst_edge(kind: InstanceKind, row: u64, args: &ReproduceArgs) -> CliResult<(f64, f64)> {
    let mut worst = f64::INFINITY;
    let mut worst_stderr = 0.0;
    for idx in 0..args.instances {
        let seed = instance_seed(args.seed, row, idx as u64);
        let inst = pauli::random_instance(args.n, args.edges, kind, seed)?;
        let report = rounding::ratio_pipeline(
            &inst,
            args.samples,
            seed,
            &rounding::PipelineOptions::default(),
        )?;
        for edge in &report.per_edge {
            if let Some(r) = edge.ratio {
                if r < worst {
                    worst = r;
                    worst_stderr = edge.stderr / edge.sdp;
                }
            }
        }
    }
    if !worst.is_finite() {
        return Err(CliError::Structure(
            "no term produced a usable ratio (all relaxation values were zero)".into(),
        ));
    }
    Ok((worst, worst_stderr))
}

fn cmd_reproduce(args: &ReproduceArgs) -> CliResult<()> {
    check_paths(None, &args.output)?;
    if args.instances == 0 {
        return Err(CliError::Usage("--instances must be positive".into()));
    }
    let mut rows = Vec::with_capacity(6);
    for (row, rank) in (1..=3u8).enumerate() {
        let (empirical, stderr) =
            batch_worst_edge(InstanceKind::Projector(rank), row as u64, args)?;
        rows.push(TableRow {
            family: "general",
            rank,
            constant: hermite::bound_general(rank)?.value,
            empirical,
            stderr,
        });
    }
    for (row, rank) in (1..=3u8).enumerate() {
        let (empirical, stderr) = batch_worst_edge(
            InstanceKind::StrictlyQuadraticProjector(rank),
            (row + 3) as u64,
            args,
        )?;
        rows.push(TableRow {
            family: "strictly-quadratic",
            rank,
            constant: hermite::certified_quadratic_constant(rank)?,
            empirical,
            stderr,
        });
    }

    let mut csv = String::from("family,rank,constant,empirical,stderr,instances,samples,seed\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{:.3},{},{},{},{},{}\n",
            r.family,
            r.rank,
            r.constant,
            r.empirical,
            r.stderr,
            args.instances,
            args.samples,
            args.seed
        ));
    }
    fs::write(&args.output, &csv)?;

    println!("wrote {}", args.output.display());
    for r in &rows {
        println!(
            "{:>18} rank {}: constant {:.3}, worst observed edge ratio {:.4} (stderr {:.4})",
            r.family, r.rank, r.constant, r.empirical, r.stderr
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// main
// ---------------------------------------------------------------------------

/// Applies `--threads`, falling back to env `QLH_THREADS`; 0 or absent keeps
/// the rayon default (all cores).
fn init_threads(flag: Option<usize>) -> CliResult<()> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var("QLH_THREADS") {
            Ok(raw) => Some(raw.parse::<usize>().map_err(|_| {
                CliError::Usage(format!(
                    "QLH_THREADS must be a nonnegative integer, got {raw:?}"
                ))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult<()> {
    init_threads(cli.threads)?;
    match &cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Ratio(args) => cmd_ratio(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Krivine(args) => cmd_krivine(args),
        Command::Reproduce(args) => cmd_reproduce(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
