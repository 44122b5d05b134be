use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use corrsketch::bench::{run_bench, write_csv, BenchGrid};
use corrsketch::ecc::Codebook;
use corrsketch::oracle::{correlation, large_set, plant_dataset, residual_norm, write_truth, PlantedSpec};
use corrsketch::recovery::{recover, select_parameters, ParamMode, ProductRoute, QueryRequest, RecoverOptions};
use corrsketch::sketch::{read_snapshot, write_snapshot, RowSketchStore, SketchTransform};
use corrsketch::stream::{DenseMatrix, ModelKind, StreamReader};

/// Largest matrix the oracle will densify.
const ORACLE_MAX_ENTRIES: usize = 100_000_000;

#[derive(Parser)]
#[command(name = "corrsketch", version, about = "Find highly correlated row pairs from streamed sketches")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sketch a stream file into a snapshot.
    Ingest(IngestArgs),
    /// Recover highly correlated pairs from a snapshot.
    Query(QueryArgs),
    /// Exact correlations of a (small) stream file.
    Oracle(OracleArgs),
    /// Generate a Gaussian instance with planted correlated pairs.
    Gen(GenArgs),
    /// Time ingest and query over a grid of sizes.
    Bench(BenchArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    model: ModelKind,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    phi: f64,
    #[arg(long)]
    k: usize,
    /// Residual Frobenius norm bound.
    #[arg(long = "R", value_name = "R")]
    residual: f64,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    pi: Option<usize>,
    #[arg(long)]
    gamma: Option<usize>,
    #[arg(long, default_value_t = ParamMode::Practical)]
    mode: ParamMode,
    /// Check candidates against direct sketch estimates (default).
    #[arg(long, overrides_with = "no_verify")]
    verify: bool,
    #[arg(long, overrides_with = "verify")]
    no_verify: bool,
    /// Transform seed; generated and reported when absent.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value_t = ProductRoute::Auto)]
    route: ProductRoute,
    /// Emit JSON lines instead of the plain report.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    phi: f64,
    #[arg(long)]
    k: usize,
    /// Also print the full correlation matrix.
    #[arg(long)]
    dump: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    /// Planted pairs as `i,j,rho`.
    #[arg(long, num_args = 1.., value_parser = parse_plant)]
    plant: Vec<(usize, usize, f64)>,
    #[arg(long)]
    seed: u64,
    /// Stream output; the ground truth goes to `<out>.truth`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// `key=value` pairs separated by `;`, e.g. `n=256,512,1024;p=4096`.
    #[arg(long, default_value = "")]
    grid: String,
    #[arg(long)]
    out: PathBuf,
}

fn parse_plant(s: &str) -> std::result::Result<(usize, usize, f64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [i, j, rho] = parts.as_slice() else {
        return Err(format!("expected i,j,rho, got {s:?}"));
    };
    let i = i.parse().map_err(|_| format!("bad index {i:?}"))?;
    let j = j.parse().map_err(|_| format!("bad index {j:?}"))?;
    let rho = rho.parse().map_err(|_| format!("bad correlation {rho:?}"))?;
    Ok((i, j, rho))
}

fn open_stream(path: &Path) -> Result<StreamReader<BufReader<File>>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    StreamReader::new(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let mut reader = open_stream(&args.input)?;
    let model = reader.model();
    if model.kind != args.model {
        bail!(
            "{} declares a {} stream, but --model {} was given",
            args.input.display(),
            model.kind,
            args.model
        );
    }
    let transform = SketchTransform::from_accuracy(model.p, args.epsilon, args.delta, args.seed)?;
    if transform.is_identity() {
        bail!("--epsilon and --delta must be positive for a snapshot");
    }
    let mut store = RowSketchStore::new(transform, model.n)?;
    for u in reader.by_ref() {
        let u = u.with_context(|| format!("reading {}", args.input.display()))?;
        store.update(&u)?;
    }
    if reader.position() > 0 {
        reader.check_complete().with_context(|| format!("reading {}", args.input.display()))?;
    }
    store.finalize_ones();
    let mut out = create(&args.out)?;
    let bytes = write_snapshot(&store, &mut out)?;
    out.flush()?;
    let t = store.transform();
    println!("n {}", store.n());
    println!("p {}", store.p());
    println!("b {}", t.buckets());
    println!("d {}", t.depth());
    println!("bytes {bytes}");
    Ok(())
}

fn cmd_query(args: QueryArgs) -> Result<()> {
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let file = File::open(&args.snapshot).with_context(|| format!("opening {}", args.snapshot.display()))?;
    let raw = read_snapshot(BufReader::new(file)).with_context(|| format!("loading {}", args.snapshot.display()))?;
    let n = raw.n();
    let (store, summary) = if raw.is_standardized() {
        (raw, Default::default())
    } else {
        let (copy, summary) = raw.standardized_copy()?;
        (copy, summary.degenerate_rows)
    };
    if !summary.is_empty() {
        log::warn!("{} degenerate rows are excluded: {:?}", summary.len(), summary);
    }

    let codebook = Codebook::for_indices(n)?;
    let mut req = QueryRequest::new(args.phi, args.k, args.residual);
    req.mode = args.mode;
    if let Some(theta) = args.theta {
        req.theta = theta;
    }
    req.pi = args.pi;
    req.gamma = args.gamma;
    req.epsilon = Some(store.transform().epsilon());
    req.delta = Some(store.transform().delta());
    let params = select_parameters(n, &req, &codebook)?;

    let seed = args.seed.unwrap_or_else(rand::random);
    let verify = !args.no_verify;
    let options = RecoverOptions {
        verify,
        route: args.route,
    };
    let start = Instant::now();
    let report = recover(&store, &params, &codebook, seed, &options)?;
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut pairs = report.pairs.clone();
    pairs.sort_by(|a, b| {
        b.estimate
            .abs()
            .total_cmp(&a.estimate.abs())
            .then((a.i, a.j).cmp(&(b.i, b.j)))
    });

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    if args.json {
        let header = json!({
            "type": "query",
            "n": n,
            "seed": seed,
            "phi": params.phi,
            "pi": params.pi,
            "gamma": params.gamma,
            "epsilon": params.epsilon,
            "delta": params.delta,
            "mode": params.mode.to_string(),
            "route": report.route.to_string(),
            "code": codebook.describe(),
            "verified": verify,
            "rejected": report.rejected.len(),
            "elapsed_ms": elapsed_ms,
            "warnings": params.warnings,
        });
        writeln!(out, "{header}")?;
        for p in &pairs {
            let line = json!({"type": "pair", "i": p.i, "j": p.j, "estimate": p.estimate, "count": p.count});
            writeln!(out, "{line}")?;
        }
        for d in &report.diagnostics {
            let line = json!({
                "type": "repetition",
                "rep": d.repetition,
                "seed": d.seed,
                "decode_failures": d.decode_failures,
                "candidates": d.candidates,
                "empty_buckets": d.empty_buckets,
                "diagonal": d.diagonal_hits,
                "elapsed_ms": d.elapsed_ms,
            });
            writeln!(out, "{line}")?;
        }
    } else {
        for p in &pairs {
            writeln!(out, "{} {} {:.6} {}", p.i, p.j, p.estimate, p.count)?;
        }
        eprintln!(
            "seed={seed} n={n} pi={} gamma={} epsilon={} delta={} route={} code={} verified={verify} rejected={} elapsed_ms={elapsed_ms:.1}",
            params.pi,
            params.gamma,
            params.epsilon,
            params.delta,
            report.route,
            codebook.describe(),
            report.rejected.len()
        );
        for d in &report.diagnostics {
            eprintln!("{d}");
        }
    }
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<()> {
    let reader = open_stream(&args.input)?;
    let model = reader.model();
    if model.n.saturating_mul(model.p) > ORACLE_MAX_ENTRIES {
        bail!(
            "{} x {} matrix exceeds the oracle limit of {ORACLE_MAX_ENTRIES} entries",
            model.n,
            model.p
        );
    }
    let m = DenseMatrix::from_stream(reader).with_context(|| format!("reading {}", args.input.display()))?;
    let c = correlation(&m);
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut pairs: Vec<(usize, usize)> = large_set(&c, args.phi).into_iter().filter(|(i, j)| i < j).collect();
    pairs.sort_by(|a, b| {
        c.get(b.0, b.1)
            .abs()
            .total_cmp(&c.get(a.0, a.1).abs())
            .then(a.cmp(b))
    });
    for (i, j) in pairs {
        writeln!(out, "{i} {j} {:.6}", c.get(i, j))?;
    }
    eprintln!("residual_norm k={} {:.6}", args.k, residual_norm(&c, args.k));
    if !c.degenerate_rows().is_empty() {
        eprintln!("degenerate rows: {:?}", c.degenerate_rows());
    }
    if args.dump {
        for i in 0..c.n() {
            let row: Vec<String> = (0..c.n()).map(|j| format!("{:.6}", c.get(i, j))).collect();
            writeln!(out, "# {}", row.join(" "))?;
        }
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let dataset = plant_dataset(&PlantedSpec::new(args.n, args.p, args.plant, args.seed))?;
    let mut out = create(&args.out)?;
    dataset.matrix.write_stream(ModelKind::RowPermutation, &mut out)?;
    out.flush()?;
    let mut truth_path = args.out.into_os_string();
    truth_path.push(".truth");
    let truth_path = PathBuf::from(truth_path);
    let mut truth = create(&truth_path)?;
    write_truth(&dataset, &mut truth)?;
    truth.flush()?;
    for p in &dataset.pairs {
        println!("{} {} {} {:.6}", p.i, p.j, p.target, p.realized);
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let grid: BenchGrid = args.grid.parse()?;
    let report = run_bench(&grid)?;
    let mut out = create(&args.out)?;
    write_csv(&report, &mut out)?;
    out.flush()?;
    let fmt = |e: Option<f64>| e.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
    println!("rows {}", report.rows.len());
    println!("query_exponent {}", fmt(report.query_exponent));
    println!("bytes_exponent {}", fmt(report.bytes_exponent));
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::parse().command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Query(a) => cmd_query(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Bench(a) => cmd_bench(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
