//! Command-line front end for the sgann library.
//!
//! Subcommands: `build` (index an svmlight file), `search` (query a saved
//! index), `eval` (budget sweep with recall/timing CSV), `sketch` (bit
//! signatures), `stats` (dataset summary line), and `bench-sim` (kernel
//! timing ratios).
//!
//! Exit codes: 0 success, 1 usage error, 2 data or IO error. Data errors
//! carry the file path and, for text inputs, the 1-based line number.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sgann::eval::{self, dataset_stats, run_sweep, DatasetStats, LabeledDataset};
use sgann::graph::{BuildParams, NavGraph, Payload};
use sgann::metric::Metric;
use sgann::signcrp::{save_signatures, CauchyProjector};
use sgann::sparse::{NormalizationMode, SparseVector};
use sgann::svmlight::{self, RawDataset};

#[derive(Parser)]
#[command(
    name = "sgann",
    version,
    about = "Graph-based approximate nearest neighbor search for sparse vectors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a graph index from an svmlight file and save it.
    Build(BuildArgs),
    /// Query a saved index and print ranked hits as CSV.
    Search(SearchArgs),
    /// Sweep search budgets and report recall, visit counts, and timing.
    Eval(EvalArgs),
    /// Project vectors to bit signatures and save them.
    Sketch(SketchArgs),
    /// Print a dataset summary: name, count, dim, mean nnz, sparsity.
    Stats(StatsArgs),
    /// Measure similarity kernel timing ratios.
    BenchSim(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Cosine,
    Chi2,
    Hamming,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Metric {
        match m {
            MetricArg::Cosine => Metric::Cosine,
            MetricArg::Chi2 => Metric::ChiSquare,
            MetricArg::Hamming => Metric::HammingSketch,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NormArg {
    L1,
    L2,
    None,
}

#[derive(Args)]
struct BuildArgs {
    /// Input vectors, svmlight text.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    metric: MetricArg,
    /// Normalization at ingestion; defaults to the metric's requirement
    /// (cosine -> l2, chi2/hamming -> l1). `none` trusts the file.
    #[arg(long, value_enum)]
    normalize: Option<NormArg>,
    /// Neighbors kept per vertex on upper layers; layer 0 keeps twice as many.
    #[arg(long, default_value_t = BuildParams::DEFAULT_M)]
    m: usize,
    /// Construction-time search budget.
    #[arg(long, default_value_t = BuildParams::DEFAULT_EF_CONSTRUCTION)]
    efc: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Signature width in bits, multiple of 64 (hamming metric only).
    #[arg(long)]
    sketch_k: Option<u32>,
    /// Dimension override; defaults to the largest index seen.
    #[arg(long)]
    dim: Option<u32>,
    /// Index file to write.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct SearchArgs {
    /// Index file written by `build`.
    #[arg(long)]
    index: PathBuf,
    /// Query vectors, svmlight text.
    #[arg(long)]
    queries: PathBuf,
    /// Search budget: how many best candidates the scan retains.
    #[arg(long)]
    l: usize,
    /// Hits printed per query.
    #[arg(long, default_value_t = 10)]
    k: usize,
}

#[derive(Args)]
struct EvalArgs {
    /// Base vectors, svmlight text.
    #[arg(long)]
    input: PathBuf,
    /// Query vectors, svmlight text.
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, value_enum)]
    metric: MetricArg,
    /// Comma-separated strictly ascending search budgets.
    #[arg(long, value_delimiter = ',', default_value = "10,20,40,80,160")]
    l_grid: Vec<usize>,
    /// Neighbors scored per query; the report format fixes this at 10.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Use svmlight labels and report 10-NN classification accuracy.
    #[arg(long)]
    labels: bool,
    /// Signature width in bits, multiple of 64 (hamming metric only).
    #[arg(long)]
    sketch_k: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Neighbors kept per vertex on upper layers.
    #[arg(long, default_value_t = BuildParams::DEFAULT_M)]
    m: usize,
    /// Construction-time search budget.
    #[arg(long, default_value_t = BuildParams::DEFAULT_EF_CONSTRUCTION)]
    efc: usize,
    /// Dimension override; defaults to the largest index in either file.
    #[arg(long)]
    dim: Option<u32>,
    /// Report CSV path; stdout if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SketchArgs {
    /// Input vectors, svmlight text.
    #[arg(long)]
    input: PathBuf,
    /// Signature width in bits, multiple of 64.
    #[arg(long)]
    k: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dimension override; defaults to the largest index seen.
    #[arg(long)]
    dim: Option<u32>,
    /// Signature file to write.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    /// Input vectors, svmlight text.
    #[arg(long)]
    input: PathBuf,
    /// Dimension override; defaults to the largest index seen.
    #[arg(long)]
    dim: Option<u32>,
}

#[derive(Args)]
struct BenchArgs {
    /// Input vectors, svmlight text.
    #[arg(long)]
    input: PathBuf,
    /// Metric for the dense-versus-sparse comparison.
    #[arg(long, value_enum, default_value_t = MetricArg::Chi2)]
    metric: MetricArg,
    /// Random vector pairs to time.
    #[arg(long, default_value_t = 200)]
    pairs: usize,
    /// Time a dense-array scan against the sparse merge-join.
    #[arg(long)]
    dense: bool,
    /// Time exact chi-square against signature collision counting at this width.
    #[arg(long)]
    sketch_k: Option<u32>,
    /// Dimension override; defaults to the largest index seen.
    #[arg(long)]
    dim: Option<u32>,
}

enum CliError {
    /// Bad flags or flag combinations: exit 1.
    Usage(String),
    /// Bad data or IO: exit 2.
    Data(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests print to stdout and succeed; real
            // parse failures print to stderr and exit 1.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Build(a) => run_build(a),
        Command::Search(a) => run_search(a),
        Command::Eval(a) => run_eval(a),
        Command::Sketch(a) => run_sketch(a),
        Command::Stats(a) => run_stats(a),
        Command::BenchSim(a) => run_bench(a),
    }
}

/// Dataset name for report lines: the input file stem.
fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string())
}

fn norm_mode(arg: Option<NormArg>, metric: Metric) -> Option<NormalizationMode> {
    match arg {
        Some(NormArg::L1) => Some(NormalizationMode::L1SumToOne),
        Some(NormArg::L2) => Some(NormalizationMode::L2Unit),
        Some(NormArg::None) => None,
        None => Some(metric.required_normalization()),
    }
}

fn parse_raw(path: &Path) -> Result<RawDataset, CliError> {
    Ok(svmlight::parse_file(path).with_context(|| path.display().to_string())?)
}

/// Resolves parsed rows against `dim` and applies normalization, keeping
/// the source path and line in every error.
fn realize(
    raw: RawDataset,
    dim: u32,
    normalize: Option<NormalizationMode>,
    path: &Path,
) -> Result<(Vec<i32>, Vec<SparseVector>), CliError> {
    let lines: Vec<u64> = raw.rows.iter().map(|r| r.line).collect();
    let (labels, mut vectors) = raw
        .into_vectors(dim)
        .with_context(|| path.display().to_string())?;
    if let Some(mode) = normalize {
        for (v, line) in vectors.iter_mut().zip(&lines) {
            *v = v
                .normalized(mode)
                .map_err(|e| anyhow!("{}: line {line}: {e}", path.display()))?;
        }
    }
    Ok((labels, vectors))
}

fn stats_line(name: &str, s: &DatasetStats) -> String {
    format!(
        "{},{},{},{:.1},{:.4}",
        name, s.count, s.dim, s.mean_nnz, s.sparsity
    )
}

fn build_params(m: usize, efc: usize, seed: u64) -> Result<BuildParams, CliError> {
    // Level decay 1/ln(m) keeps the expected layer population ratio at m,
    // matching the default for m = 16.
    let level_lambda = if m > 1 { 1.0 / (m as f64).ln() } else { 0.0 };
    BuildParams::new(m, efc, level_lambda, seed).map_err(|e| usage(e.to_string()))
}

fn check_sketch_k(metric: Metric, sketch_k: Option<u32>) -> Result<(), CliError> {
    match (metric, sketch_k) {
        (Metric::HammingSketch, None) => {
            Err(usage("--metric hamming requires --sketch-k"))
        }
        (Metric::HammingSketch, Some(k)) if k == 0 || k % 64 != 0 => {
            Err(usage("--sketch-k must be a positive multiple of 64"))
        }
        (Metric::Cosine | Metric::ChiSquare, Some(_)) => {
            Err(usage("--sketch-k only applies to --metric hamming"))
        }
        _ => Ok(()),
    }
}

fn run_build(a: BuildArgs) -> Result<(), CliError> {
    let metric = Metric::from(a.metric);
    check_sketch_k(metric, a.sketch_k)?;
    let params = build_params(a.m, a.efc, a.seed)?;

    let raw = parse_raw(&a.input)?;
    let dim = a.dim.unwrap_or_else(|| raw.inferred_dim());
    let (labels, vectors) = realize(raw, dim, norm_mode(a.normalize, metric), &a.input)?;
    let ds = LabeledDataset::new(stem(&a.input), dim, vectors, Some(labels), Vec::new(), None)
        .map_err(|e| anyhow!("{}: {e}", a.input.display()))?;
    let stats = dataset_stats(&ds);

    let mut graph = match metric {
        Metric::Cosine | Metric::ChiSquare => NavGraph::new_sparse(metric, dim, params)
            .map_err(|e| CliError::Data(e.into()))?,
        Metric::HammingSketch => {
            let k = a.sketch_k.expect("checked above");
            let projector = CauchyProjector::new(dim, k, eval::sketch_seed(a.seed))
                .map_err(|e| anyhow!("{}: {e}", a.input.display()))?;
            NavGraph::new_sketch(projector, params).map_err(|e| CliError::Data(e.into()))?
        }
    };
    for (row, v) in ds.vectors().iter().enumerate() {
        let payload = match graph.store().projector() {
            Some(p) => Payload::Signature(p.sketch(v).map_err(|e| CliError::Data(e.into()))?),
            None => Payload::Sparse(v.clone()),
        };
        graph
            .insert(row as u32, payload)
            .map_err(|e| CliError::Data(e.into()))?;
    }
    graph
        .save(&a.output)
        .with_context(|| a.output.display().to_string())?;
    println!("{}", stats_line(ds.name(), &stats));
    Ok(())
}

fn run_search(a: SearchArgs) -> Result<(), CliError> {
    if a.l == 0 {
        return Err(usage("--l must be positive"));
    }
    if a.k == 0 {
        return Err(usage("--k must be positive"));
    }
    let graph = NavGraph::load(&a.index).with_context(|| a.index.display().to_string())?;
    let raw = parse_raw(&a.queries)?;
    let dim = graph.store().dim();
    let normalize = Some(graph.metric().required_normalization());
    let (_, queries) = realize(raw, dim, normalize, &a.queries)?;

    println!("query_row,rank,vertex_id,similarity");
    for (row, q) in queries.iter().enumerate() {
        let payload = match graph.store().projector() {
            Some(p) => Payload::Signature(p.sketch(q).map_err(|e| CliError::Data(e.into()))?),
            None => Payload::Sparse(q.clone()),
        };
        let result = graph
            .search(&payload, a.l)
            .map_err(|e| anyhow!("query row {row}: {e}"))?;
        for (rank, (id, sim)) in result.hits.iter().take(a.k).enumerate() {
            println!("{},{},{},{:.6}", row, rank + 1, id, sim);
        }
    }
    Ok(())
}

fn run_eval(a: EvalArgs) -> Result<(), CliError> {
    let metric = Metric::from(a.metric);
    check_sketch_k(metric, a.sketch_k)?;
    if a.k != 10 {
        return Err(usage("the report format fixes --k at 10"));
    }
    if a.l_grid.is_empty()
        || a.l_grid[0] == 0
        || !a.l_grid.windows(2).all(|w| w[0] < w[1])
    {
        return Err(usage("--l-grid must be positive and strictly ascending"));
    }
    let params = build_params(a.m, a.efc, a.seed)?;

    let raw_base = parse_raw(&a.input)?;
    let raw_queries = parse_raw(&a.queries)?;
    let dim = a
        .dim
        .unwrap_or_else(|| raw_base.inferred_dim().max(raw_queries.inferred_dim()));
    let normalize = Some(metric.required_normalization());
    let (labels, vectors) = realize(raw_base, dim, normalize, &a.input)?;
    let (query_labels, queries) = realize(raw_queries, dim, normalize, &a.queries)?;
    let ds = LabeledDataset::new(
        stem(&a.input),
        dim,
        vectors,
        a.labels.then_some(labels),
        queries,
        a.labels.then_some(query_labels),
    )
    .map_err(|e| CliError::Data(e.into()))?;

    let report = run_sweep(&ds, metric, &a.l_grid, &params, a.sketch_k)
        .map_err(|e| CliError::Data(e.into()))?;
    match &a.output {
        Some(path) => {
            let mut f = std::fs::File::create(path)
                .with_context(|| path.display().to_string())?;
            report
                .write_csv(&mut f)
                .with_context(|| path.display().to_string())?;
        }
        None => print!("{}", report.to_csv()),
    }
    Ok(())
}

fn run_sketch(a: SketchArgs) -> Result<(), CliError> {
    if a.k == 0 || !a.k.is_multiple_of(64) {
        return Err(usage("--k must be a positive multiple of 64"));
    }
    let raw = parse_raw(&a.input)?;
    let dim = a.dim.unwrap_or_else(|| raw.inferred_dim());
    let (_, vectors) = realize(raw, dim, None, &a.input)?;
    let projector = CauchyProjector::new(dim, a.k, a.seed)
        .map_err(|e| anyhow!("{}: {e}", a.input.display()))?;
    let signatures = vectors
        .iter()
        .map(|v| projector.sketch(v))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| anyhow!("{}: {e}", a.input.display()))?;
    save_signatures(&a.output, &projector, &signatures)
        .with_context(|| a.output.display().to_string())?;
    Ok(())
}

fn run_stats(a: StatsArgs) -> Result<(), CliError> {
    let raw = parse_raw(&a.input)?;
    let dim = a.dim.unwrap_or_else(|| raw.inferred_dim());
    let (labels, vectors) = realize(raw, dim, None, &a.input)?;
    let ds = LabeledDataset::new(stem(&a.input), dim, vectors, Some(labels), Vec::new(), None)
        .map_err(|e| anyhow!("{}: {e}", a.input.display()))?;
    println!("{}", stats_line(ds.name(), &dataset_stats(&ds)));
    Ok(())
}

fn run_bench(a: BenchArgs) -> Result<(), CliError> {
    if !a.dense && a.sketch_k.is_none() {
        return Err(usage("pass --dense and/or --sketch-k to select a measurement"));
    }
    let metric = Metric::from(a.metric);
    if a.dense && metric == Metric::HammingSketch {
        return Err(usage("--dense compares exact kernels; use cosine or chi2"));
    }
    if let Some(k) = a.sketch_k {
        if k == 0 || k % 64 != 0 {
            return Err(usage("--sketch-k must be a positive multiple of 64"));
        }
    }
    let raw = parse_raw(&a.input)?;
    let dim = a.dim.unwrap_or_else(|| raw.inferred_dim());

    if a.dense {
        let (labels, vectors) = realize(
            raw.clone(),
            dim,
            Some(metric.required_normalization()),
            &a.input,
        )?;
        let ds = LabeledDataset::new(stem(&a.input), dim, vectors, Some(labels), Vec::new(), None)
            .map_err(|e| anyhow!("{}: {e}", a.input.display()))?;
        let ratio = eval::timing_ratio_sparse_dense(&ds, metric, a.pairs)
            .map_err(|e| CliError::Data(e.into()))?;
        println!("dense_over_sparse_ratio,{ratio:.4}");
    }
    if let Some(k) = a.sketch_k {
        // The sketch comparison estimates chi-square, so it always runs on
        // L1-normalized vectors regardless of --metric.
        let (labels, vectors) = realize(
            raw,
            dim,
            Some(NormalizationMode::L1SumToOne),
            &a.input,
        )?;
        let ds = LabeledDataset::new(stem(&a.input), dim, vectors, Some(labels), Vec::new(), None)
            .map_err(|e| anyhow!("{}: {e}", a.input.display()))?;
        let ratio = eval::timing_ratio_exact_sketch(&ds, k, a.pairs)
            .map_err(|e| CliError::Data(e.into()))?;
        println!("exact_over_sketch_ratio,{ratio:.4}");
    }
    Ok(())
}
