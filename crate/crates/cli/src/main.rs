//! `roadevo` command-line driver.
//!
//! Exit codes: 0 on success, 1 on input errors (unreadable or malformed
//! files, bad arguments), 2 on configuration errors such as a label product
//! above `--max-product`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use roadevo::generator::{self, GroundTruth};
use roadevo::ingest::{self, build_graph_from_segments, parse_erg, parse_segments};
use roadevo::matcher::match_auto_k;
use roadevo::metrics::{
    histogram_csv, pair_distance_histogram, EvalReport, DEFAULT_BUCKET_KM, DEFAULT_THRESHOLD_MILES,
};
use roadevo::oracle::{brute_force_max_conformal, DEFAULT_SIZE_CAP};
use roadevo::seed_index::max_product_curve;
use roadevo::{
    auto_tune_k, label_nodes, match_graphs, verify_conformal, EmbeddedGraph, Error, MatchConfig,
    MatchOutcome, DEFAULT_K, DEFAULT_MAX_PRODUCT,
};

#[derive(Parser, Debug)]
#[command(
    name = "roadevo",
    version,
    about = "Match two snapshots of a road network by topology"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic graph.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Randomly remove vertices and edges and add short edges.
    Perturb(PerturbArgs),
    /// Print the label of every vertex and a summary of table entry sizes.
    Label(LabelArgs),
    /// Print the maximum label product for each k and the chosen k.
    TuneK(TuneArgs),
    /// Compute a conformal matching between two graphs.
    Match(MatchArgs),
    /// Evaluate a matching against vertex coordinates.
    Validate(ValidateArgs),
    /// Exact maximum conformal matching for toy graphs.
    Oracle(OracleArgs),
}

#[derive(Subcommand, Debug)]
enum GenCommand {
    /// Lattice with random diagonals and removed edges.
    Grid(GridArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Erg,
    Segments,
}

#[derive(Args, Debug)]
struct InputOpts {
    /// Input format of the graph files.
    #[arg(long, value_enum, default_value_t = Format::Erg)]
    format: Format,
    /// Endpoint snapping tolerance in degrees for segment input.
    #[arg(long, default_value_t = 0.0)]
    snap_epsilon: f64,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    #[arg(long, default_value_t = 0.15)]
    irregularity: f64,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PerturbArgs {
    #[arg(long, default_value_t = 0.0)]
    remove_vertices: f64,
    #[arg(long, default_value_t = 0.0)]
    remove_edges: f64,
    #[arg(long, default_value_t = 0.0)]
    add_edges: f64,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    input: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Where to write the old -> new vertex correspondence.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[command(flatten)]
    io: InputOpts,
}

#[derive(Args, Debug)]
struct LabelArgs {
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    input: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    io: InputOpts,
}

#[derive(Args, Debug)]
struct TuneArgs {
    #[arg(long, default_value_t = DEFAULT_MAX_PRODUCT)]
    max_product: u64,
    #[arg(long, default_value_t = 12)]
    k_max: usize,
    g1: PathBuf,
    /// Second graph; the first graph is compared with itself when omitted.
    g2: Option<PathBuf>,
    #[command(flatten)]
    io: InputOpts,
}

#[derive(Args, Debug)]
struct MatchArgs {
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Pick the smallest k whose maximum product fits under --max-product.
    #[arg(long)]
    auto_k: bool,
    #[arg(long, default_value_t = 12)]
    k_max: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_PRODUCT)]
    max_product: u64,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Leave timings out of the stats block.
    #[arg(long)]
    no_timing: bool,
    g1: PathBuf,
    g2: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    io: InputOpts,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_MILES)]
    threshold_miles: f64,
    /// Depth used to relabel both graphs for the approximation ratio.
    #[arg(long)]
    k: Option<usize>,
    /// Write a CSV histogram of cross-graph same-label pair distances.
    #[arg(long)]
    hist: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BUCKET_KM)]
    bucket_km: f64,
    /// Ground-truth file from `perturb`, scored when given.
    #[arg(long)]
    truth: Option<PathBuf>,
    matching: PathBuf,
    g1: PathBuf,
    g2: PathBuf,
    #[command(flatten)]
    io: InputOpts,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long, default_value_t = DEFAULT_SIZE_CAP)]
    size_cap: usize,
    g1: PathBuf,
    g2: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    io: InputOpts,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_config() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command) -> CliResult {
    match cmd {
        Command::Gen(GenCommand::Grid(a)) => gen_grid(a),
        Command::Perturb(a) => perturb(a),
        Command::Label(a) => label(a),
        Command::TuneK(a) => tune_k(a),
        Command::Match(a) => run_match(a),
        Command::Validate(a) => validate(a),
        Command::Oracle(a) => oracle(a),
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path, io: &InputOpts) -> CliResult<EmbeddedGraph> {
    let text = read_text(path)?;
    let parsed = match io.format {
        Format::Erg => parse_erg(&text),
        Format::Segments => {
            if io.snap_epsilon.is_nan() || io.snap_epsilon < 0.0 {
                return Err(Failure::input("--snap-epsilon must be non-negative"));
            }
            parse_segments(&text).and_then(|s| build_graph_from_segments(&s, io.snap_epsilon))
        }
    };
    parsed.map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn gen_grid(a: GridArgs) -> CliResult {
    let g = generator::gen_irregular_grid(a.rows, a.cols, a.irregularity, a.rng_seed)?;
    write_out(a.output.as_deref(), &ingest::emit_erg(&g))
}

fn perturb(a: PerturbArgs) -> CliResult {
    let g = load_graph(&a.input, &a.io)?;
    let (g2, truth) = generator::perturb(
        &g,
        a.remove_vertices,
        a.remove_edges,
        a.add_edges,
        a.rng_seed,
    )?;
    write_out(a.output.as_deref(), &ingest::emit_erg(&g2))?;
    if let Some(t) = &a.truth {
        write_out(Some(t), &truth.to_text())?;
    }
    Ok(())
}

fn label(a: LabelArgs) -> CliResult {
    if a.k == 0 {
        return Err(Failure::input("--k must be at least 1"));
    }
    let g = load_graph(&a.input, &a.io)?;
    let l = label_nodes(&g, a.k);
    let mut out = String::new();
    for (v, lab) in g.vertices().zip(&l.labels) {
        let _ = writeln!(out, "label {v} {lab}");
    }
    out.push_str("# stats\n");
    let _ = writeln!(out, "k: {}", a.k);
    let _ = writeln!(out, "vertices: {}", g.vertex_count());
    let _ = writeln!(out, "distinct_labels: {}", l.table.len());
    for (size, entries) in l.table.size_histogram() {
        let _ = writeln!(out, "entries_of_size_{size}: {entries}");
    }
    write_out(a.output.as_deref(), &out)
}

fn tune_k(a: TuneArgs) -> CliResult {
    let g1 = load_graph(&a.g1, &a.io)?;
    let g2 = match &a.g2 {
        Some(p) => load_graph(p, &a.io)?,
        None => g1.clone(),
    };
    let tune = auto_tune_k(&g1, &g2, a.max_product, a.k_max)?;
    let mut out = String::new();
    for (k, p) in max_product_curve(&g1, &g2, a.k_max) {
        let _ = writeln!(out, "k {k} max_product {p}");
    }
    out.push_str("# stats\n");
    let _ = writeln!(out, "bound: {}", a.max_product);
    let _ = writeln!(out, "chosen_k: {}", tune.k);
    let _ = writeln!(out, "chosen_max_product: {}", tune.max_product);
    let _ = writeln!(out, "achieved: {}", tune.achieved);
    write_out(None, &out)
}

fn run_match(a: MatchArgs) -> CliResult {
    let g1 = load_graph(&a.g1, &a.io)?;
    let g2 = load_graph(&a.g2, &a.io)?;
    let outcome = if a.auto_k {
        match_auto_k(&g1, &g2, a.max_product, a.k_max, a.rng_seed)?.1
    } else {
        match_graphs(
            &g1,
            &g2,
            &MatchConfig {
                k: a.k,
                max_product: a.max_product,
                rng_seed: a.rng_seed,
            },
        )?
    };
    if let Err(v) = verify_conformal(&g1, &g2, &outcome.to_map()) {
        return Err(Failure::from(Error::Internal(format!(
            "matching failed verification: {v}"
        ))));
    }
    write_out(a.output.as_deref(), &outcome.to_text(!a.no_timing))
}

fn validate(a: ValidateArgs) -> CliResult {
    let text = read_text(&a.matching)?;
    let m = MatchOutcome::parse(&text)
        .map_err(|e| Failure::input(format!("{}: {e}", a.matching.display())))?;
    let g1 = load_graph(&a.g1, &a.io)?;
    let g2 = load_graph(&a.g2, &a.io)?;
    let map = m.to_map();
    let mut out = String::new();
    match verify_conformal(&g1, &g2, &map) {
        Ok(()) => out.push_str("conformal: true\n"),
        Err(v) => {
            let _ = writeln!(out, "conformal: false");
            let _ = writeln!(out, "violation: {v}");
        }
    }
    let k = a.k.unwrap_or(if m.k > 0 { m.k } else { DEFAULT_K });
    if k == 0 {
        return Err(Failure::input("--k must be at least 1"));
    }
    let (l1, l2) = (label_nodes(&g1, k), label_nodes(&g2, k));
    let mut report = EvalReport::new(
        &map,
        &g1,
        &g2,
        Some((&l1.table, &l2.table)),
        a.threshold_miles,
    );
    let secs = |d: std::time::Duration| (!d.is_zero()).then_some(d.as_secs_f64());
    report.seed_seconds = secs(m.stats.seed_time);
    report.match_seconds = secs(m.stats.match_time);
    let _ = writeln!(out, "matched: {}", map.len());
    out.push_str(&report.to_text());
    if let Some(t) = &a.truth {
        let gt = GroundTruth::parse(&read_text(t)?)
            .map_err(|e| Failure::input(format!("{}: {e}", t.display())))?;
        let s = generator::score_against_ground_truth(&map, &gt);
        let _ = writeln!(out, "truth_survivors: {}", s.survivors);
        let _ = writeln!(out, "truth_correct: {}", s.correct);
        if s.undefined {
            let _ = writeln!(out, "truth_correct_fraction: n/a");
        } else {
            let _ = writeln!(out, "truth_correct_fraction: {:.6}", s.correct_fraction);
        }
        let _ = writeln!(out, "truth_matched_fraction: {:.6}", s.matched_fraction);
    }
    if let Some(h) = &a.hist {
        let rows = pair_distance_histogram(&l1.table, &l2.table, &g1, &g2, a.bucket_km)?;
        write_out(Some(h), &histogram_csv(&rows))?;
    }
    write_out(None, &out)
}

fn oracle(a: OracleArgs) -> CliResult {
    let g1 = load_graph(&a.g1, &a.io)?;
    let g2 = load_graph(&a.g2, &a.io)?;
    let (best, witness) = brute_force_max_conformal(&g1, &g2, a.size_cap)?;
    let mut out = String::new();
    for (x, y) in &witness.pairs {
        let _ = writeln!(out, "m {x} {y}");
    }
    out.push_str("# stats\n");
    let _ = writeln!(out, "maximum: {best}");
    write_out(a.output.as_deref(), &out)
}
