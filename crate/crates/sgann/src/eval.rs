//! Recall, classification, and timing measurements over labeled datasets.
//!
//! [`run_sweep`] builds one index per call and searches every query at
//! each result budget in a grid, reporting recall against exact ground
//! truth, mean visited vertices, mean similarity evaluations, the
//! fraction of search time spent inside similarity kernels, and 10-NN
//! label accuracy. Ground truth is computed internally by brute force on
//! the raw vectors, so reported recall can never be measured against a
//! stale or mismatched truth set. The sketch metric is scored against
//! exact chi-square truth: recall then reflects both graph and sketch
//! approximation error.
//!
//! All non-timing outputs are deterministic for a fixed dataset, metric,
//! grid, and build parameters.

use std::collections::HashMap;
use std::hint::black_box;
use std::io::Write;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::graph::{brute_force_topk, BuildParams, GraphError, NavGraph, Payload, VectorStore};
use crate::metric::Metric;
use crate::rng::{stream_at, SplitMix64};
use crate::signcrp::{collision_fraction, CauchyProjector, SketchError};
use crate::sparse::{chi_square, cosine, similarity_dense, SparseError, SparseVector};

/// Depth of recall@10 ground truth and of the k-NN classifier.
const EVAL_K: usize = 10;
/// Stream index for deriving a projector seed from a build seed.
const SKETCH_SEED_STREAM: u64 = 0x51C7;
/// Seed for sampling timing pairs; affects timing only, never values.
const PAIR_SAMPLE_SEED: u64 = 0x7A1B_5EED;
/// Projector seed for the exact-versus-sketch timing comparison.
const SKETCH_TIMING_SEED: u64 = 0x0BE5_70FF;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset has no vectors")]
    EmptyDataset,
    #[error("dataset has no queries")]
    NoQueries,
    #[error("ground truth holds {truth} ids but depth {k} was requested")]
    TruthSizeMismatch { truth: usize, k: usize },
    #[error("vertex {0} has no label")]
    MissingLabel(u32),
    #[error("no neighbors to classify from")]
    NoNeighbors,
    #[error("budget grid must be nonempty, positive, and strictly ascending")]
    InvalidGrid,
    #[error("the signature metric needs a sketch width")]
    MissingSketchWidth,
    #[error("pair count must be positive")]
    NoPairs,
    #[error("input lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} points, got {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("dimension mismatch: dataset {expected}, vector {found}")]
    DimensionMismatch { expected: u32, found: u32 },
    #[error("{kind} count {found} does not match {expected} vectors")]
    LabelCountMismatch {
        kind: &'static str,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
}

/// A dataset of base vectors, query vectors, and optional integer labels.
///
/// Base vectors and queries share one dimension. Labels, when present,
/// are parallel to their vector arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    name: String,
    dim: u32,
    vectors: Vec<SparseVector>,
    labels: Option<Vec<i32>>,
    queries: Vec<SparseVector>,
    query_labels: Option<Vec<i32>>,
}

impl LabeledDataset {
    pub fn new(
        name: impl Into<String>,
        dim: u32,
        vectors: Vec<SparseVector>,
        labels: Option<Vec<i32>>,
        queries: Vec<SparseVector>,
        query_labels: Option<Vec<i32>>,
    ) -> Result<Self, EvalError> {
        if vectors.is_empty() {
            return Err(EvalError::EmptyDataset);
        }
        for v in vectors.iter().chain(&queries) {
            if v.dim() != dim {
                return Err(EvalError::DimensionMismatch {
                    expected: dim,
                    found: v.dim(),
                });
            }
        }
        if let Some(l) = &labels {
            if l.len() != vectors.len() {
                return Err(EvalError::LabelCountMismatch {
                    kind: "label",
                    expected: vectors.len(),
                    found: l.len(),
                });
            }
        }
        if let Some(l) = &query_labels {
            if l.len() != queries.len() {
                return Err(EvalError::LabelCountMismatch {
                    kind: "query label",
                    expected: queries.len(),
                    found: l.len(),
                });
            }
        }
        Ok(LabeledDataset {
            name: name.into(),
            dim,
            vectors,
            labels,
            queries,
            query_labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    /// Number of base vectors.
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[SparseVector] {
        &self.vectors
    }

    pub fn labels(&self) -> Option<&[i32]> {
        self.labels.as_deref()
    }

    pub fn queries(&self) -> &[SparseVector] {
        &self.queries
    }

    pub fn query_labels(&self) -> Option<&[i32]> {
        self.query_labels.as_deref()
    }

    /// True when both base and query labels are present.
    pub fn has_labels(&self) -> bool {
        self.labels.is_some() && self.query_labels.is_some()
    }
}

/// Size and sparsity profile of a dataset's base vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub count: usize,
    pub query_count: usize,
    pub dim: u32,
    pub mean_nnz: f64,
    /// Mean fraction of nonzero coordinates, `mean_nnz / dim`.
    pub sparsity: f64,
}

/// Profile of the base vectors (queries are counted but not profiled).
pub fn dataset_stats(ds: &LabeledDataset) -> DatasetStats {
    let total_nnz: usize = ds.vectors.iter().map(|v| v.nnz()).sum();
    let mean_nnz = total_nnz as f64 / ds.vectors.len() as f64;
    DatasetStats {
        count: ds.vectors.len(),
        query_count: ds.queries.len(),
        dim: ds.dim,
        mean_nnz,
        sparsity: if ds.dim == 0 {
            0.0
        } else {
            mean_nnz / ds.dim as f64
        },
    }
}

/// Fraction of the `k` true neighbors present among the first `k` found.
///
/// `truth` must hold exactly `k` ids. A `found` list shorter than `k`
/// counts the absent positions as misses.
pub fn recall_at_k(found: &[u32], truth: &[u32], k: usize) -> Result<f64, EvalError> {
    if truth.len() != k || k == 0 {
        return Err(EvalError::TruthSizeMismatch {
            truth: truth.len(),
            k,
        });
    }
    let hits = found
        .iter()
        .take(k)
        .filter(|id| truth.contains(id))
        .count();
    Ok(hits as f64 / k as f64)
}

/// Majority-vote label of a neighbor list.
///
/// `labels` is indexed by vertex id. Vote ties prefer the label with the
/// higher summed similarity, then the smaller label value.
pub fn knn_classify(neighbors: &[(u32, f64)], labels: &[i32]) -> Result<i32, EvalError> {
    if neighbors.is_empty() {
        return Err(EvalError::NoNeighbors);
    }
    let mut tally: HashMap<i32, (usize, f64)> = HashMap::new();
    for &(id, sim) in neighbors {
        let label = *labels
            .get(id as usize)
            .ok_or(EvalError::MissingLabel(id))?;
        let entry = tally.entry(label).or_insert((0, 0.0));
        entry.0 += 1;
        entry.1 += sim;
    }
    let mut ranked: Vec<(i32, usize, f64)> =
        tally.into_iter().map(|(l, (c, s))| (l, c, s)).collect();
    ranked.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then_with(|| b.2.total_cmp(&a.2))
            .then_with(|| a.0.cmp(&b.0))
    });
    Ok(ranked[0].0)
}

/// Spearman rank correlation with average ranks for ties.
///
/// Returns 0 when either input has no variation.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(EvalError::InsufficientData {
            needed: 2,
            found: xs.len(),
        });
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = rx.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mean) * (b - mean);
        var_x += (a - mean) * (a - mean);
        var_y += (b - mean) * (b - mean);
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (var_x * var_y).sqrt())
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share the average 1-based rank.
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// One row of a sweep: aggregate measurements at a single result budget.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub metric: Metric,
    pub budget: usize,
    pub recall_at_1: f64,
    pub recall_at_10: f64,
    pub mean_visited: f64,
    pub mean_sim_evals: f64,
    /// Fraction of per-search wall time spent in similarity kernels.
    pub sim_time_fraction: f64,
    /// 10-NN majority-vote accuracy; present only with labels.
    pub knn10_accuracy: Option<f64>,
    /// Wall time for the whole budget's query batch.
    pub wall_time: Duration,
}

/// Sweep output: dataset profile plus one row per budget.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub dataset: DatasetStats,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str =
        "metric,L,recall@1,recall@10,mean_visited,mean_sim_evals,sim_time_fraction,knn10_acc,wall_ms";

    /// Renders the rows as CSV with a fixed column order. All columns
    /// except `sim_time_fraction` and `wall_ms` are deterministic for a
    /// fixed input and seed.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let knn = row
                .knn10_accuracy
                .map(|a| format!("{a:.6}"))
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{:.3},{:.3},{:.6},{},{:.3}\n",
                row.metric,
                row.budget,
                row.recall_at_1,
                row.recall_at_10,
                row.mean_visited,
                row.mean_sim_evals,
                row.sim_time_fraction,
                knn,
                row.wall_time.as_secs_f64() * 1e3,
            ));
        }
        out
    }

    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }
}

fn validate_grid(budgets: &[usize]) -> Result<(), EvalError> {
    if budgets.is_empty() || budgets[0] == 0 {
        return Err(EvalError::InvalidGrid);
    }
    if budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::InvalidGrid);
    }
    Ok(())
}

/// Derives the signature projector seed from the graph build seed, so one
/// user-facing seed determines both the level draws and the projection
/// matrix while keeping the two streams distinct.
pub fn sketch_seed(build_seed: u64) -> u64 {
    stream_at(build_seed, SKETCH_SEED_STREAM)
}

/// Builds an index and measures search quality at each budget in `budgets`.
///
/// Vertices are inserted in dataset order with their row index as id.
/// Ground truth per query is the exact top-10 (or top-`len` for tiny
/// datasets) by brute force: under the cosine metric against cosine
/// truth, under chi-square and the sketch metric against chi-square truth
/// on the raw vectors. For the sketch metric, vectors and queries are
/// sketched with a projector seeded from `build.seed` and `sketch_k`
/// projections.
pub fn run_sweep(
    ds: &LabeledDataset,
    metric: Metric,
    budgets: &[usize],
    build: &BuildParams,
    sketch_k: Option<u32>,
) -> Result<EvalReport, EvalError> {
    validate_grid(budgets)?;
    if ds.queries.is_empty() {
        return Err(EvalError::NoQueries);
    }
    if metric == Metric::HammingSketch && sketch_k.is_none() {
        return Err(EvalError::MissingSketchWidth);
    }

    let k_eval = EVAL_K.min(ds.len());
    let truth_metric = match metric {
        Metric::Cosine => Metric::Cosine,
        Metric::ChiSquare | Metric::HammingSketch => Metric::ChiSquare,
    };
    let truth_store = VectorStore::from_sparse_vectors(ds.dim, ds.vectors.clone())?;
    let mut truths: Vec<Vec<u32>> = Vec::with_capacity(ds.queries.len());
    for q in &ds.queries {
        let res = brute_force_topk(&truth_store, &Payload::Sparse(q.clone()), k_eval, truth_metric)?;
        truths.push(res.hits.into_iter().map(|(id, _)| id).collect());
    }

    let (graph, query_payloads) = match metric {
        Metric::Cosine | Metric::ChiSquare => {
            let mut g = NavGraph::new_sparse(metric, ds.dim, build.clone())?;
            for (i, v) in ds.vectors.iter().enumerate() {
                g.insert(i as u32, Payload::Sparse(v.clone()))?;
            }
            let qs = ds
                .queries
                .iter()
                .map(|q| Payload::Sparse(q.clone()))
                .collect::<Vec<_>>();
            (g, qs)
        }
        Metric::HammingSketch => {
            let k = sketch_k.expect("checked above");
            let projector = CauchyProjector::new(ds.dim, k, sketch_seed(build.seed))?;
            let mut g = NavGraph::new_sketch(projector.clone(), build.clone())?;
            for (i, v) in ds.vectors.iter().enumerate() {
                g.insert(i as u32, Payload::Signature(projector.sketch(v)?))?;
            }
            let qs = ds
                .queries
                .iter()
                .map(|q| Ok(Payload::Signature(projector.sketch(q)?)))
                .collect::<Result<Vec<_>, SketchError>>()?;
            (g, qs)
        }
    };

    let labels = ds.labels.as_deref().filter(|_| ds.query_labels.is_some());
    let mut rows = Vec::with_capacity(budgets.len());
    for &budget in budgets {
        let row_start = Instant::now();
        let nq = query_payloads.len() as f64;
        let mut recall1_sum = 0.0;
        let mut recall10_sum = 0.0;
        let mut visited_sum = 0u64;
        let mut evals_sum = 0u64;
        let mut sim_time = Duration::ZERO;
        let mut total_time = Duration::ZERO;
        let mut knn_correct = 0usize;

        for (qi, qp) in query_payloads.iter().enumerate() {
            let res = graph.search(qp, budget)?;
            let found: Vec<u32> = res.hits.iter().map(|&(id, _)| id).collect();
            recall1_sum += recall_at_k(&found, &truths[qi][..1], 1)?;
            recall10_sum += recall_at_k(&found, &truths[qi], k_eval)?;
            if let Some(labels) = labels {
                let depth = EVAL_K.min(res.hits.len());
                let pred = knn_classify(&res.hits[..depth], labels)?;
                if pred == ds.query_labels.as_ref().expect("checked")[qi] {
                    knn_correct += 1;
                }
            }
            visited_sum += res.stats.visited;
            evals_sum += res.stats.similarity_evals;
            sim_time += res.stats.sim_time;
            total_time += res.stats.total_time;
        }

        rows.push(EvalRow {
            metric,
            budget,
            recall_at_1: recall1_sum / nq,
            recall_at_10: recall10_sum / nq,
            mean_visited: visited_sum as f64 / nq,
            mean_sim_evals: evals_sum as f64 / nq,
            sim_time_fraction: sim_time.as_secs_f64() / total_time.as_secs_f64().max(1e-12),
            knn10_accuracy: labels.map(|_| knn_correct as f64 / nq),
            wall_time: row_start.elapsed(),
        });
    }

    Ok(EvalReport {
        dataset: dataset_stats(ds),
        rows,
    })
}

fn sample_pairs(n: usize, pair_count: usize) -> Vec<(usize, usize)> {
    let mut rng = SplitMix64::new(PAIR_SAMPLE_SEED);
    (0..pair_count)
        .map(|_| {
            let i = rng.next_below(n as u64) as usize;
            let mut j = rng.next_below(n as u64 - 1) as usize;
            if j >= i {
                j += 1;
            }
            (i, j)
        })
        .collect()
}

/// Wall-time ratio of dense over sparse evaluation of the same exact
/// metric on sampled dataset pairs. Before timing, both paths are
/// evaluated once per pair and checked to produce the same similarity.
///
/// Densifies every sampled vector, so memory grows with `dim`.
pub fn timing_ratio_sparse_dense(
    ds: &LabeledDataset,
    metric: Metric,
    pair_count: usize,
) -> Result<f64, EvalError> {
    if pair_count == 0 {
        return Err(EvalError::NoPairs);
    }
    if ds.len() < 2 {
        return Err(EvalError::EmptyDataset);
    }
    let pairs = sample_pairs(ds.len(), pair_count);

    let mut dense: HashMap<usize, Vec<f64>> = HashMap::new();
    for &(i, j) in &pairs {
        dense.entry(i).or_insert_with(|| ds.vectors[i].to_dense());
        dense.entry(j).or_insert_with(|| ds.vectors[j].to_dense());
    }

    let sparse_sim = |a: &SparseVector, b: &SparseVector| match metric {
        Metric::Cosine => cosine(a, b),
        Metric::ChiSquare => chi_square(a, b),
        Metric::HammingSketch => Err(SparseError::UnsupportedDenseMetric(metric)),
    };

    // Verification pass, untimed: both paths must agree on every pair.
    for &(i, j) in &pairs {
        let s = sparse_sim(&ds.vectors[i], &ds.vectors[j])?;
        let d = similarity_dense(&dense[&i], &dense[&j], metric)?;
        assert!(
            (s - d).abs() <= 1e-9 * s.abs().max(1.0),
            "sparse and dense kernels disagree: {s} vs {d}"
        );
    }

    let sparse_start = Instant::now();
    for &(i, j) in &pairs {
        black_box(sparse_sim(black_box(&ds.vectors[i]), black_box(&ds.vectors[j])).unwrap());
    }
    let sparse_elapsed = sparse_start.elapsed();

    let dense_start = Instant::now();
    for &(i, j) in &pairs {
        black_box(similarity_dense(black_box(&dense[&i]), black_box(&dense[&j]), metric).unwrap());
    }
    let dense_elapsed = dense_start.elapsed();

    Ok(dense_elapsed.as_secs_f64() / sparse_elapsed.as_secs_f64().max(1e-9))
}

/// Wall-time ratio of exact chi-square evaluation over signature collision
/// counting on sampled dataset pairs. Sketching happens before timing;
/// the ratio compares only the per-pair comparison cost.
pub fn timing_ratio_exact_sketch(
    ds: &LabeledDataset,
    sketch_k: u32,
    pair_count: usize,
) -> Result<f64, EvalError> {
    if pair_count == 0 {
        return Err(EvalError::NoPairs);
    }
    if ds.len() < 2 {
        return Err(EvalError::EmptyDataset);
    }
    let pairs = sample_pairs(ds.len(), pair_count);
    let projector = CauchyProjector::new(ds.dim, sketch_k, SKETCH_TIMING_SEED)?;

    let mut signatures: HashMap<usize, crate::signcrp::BitSignature> = HashMap::new();
    for &(i, j) in &pairs {
        for idx in [i, j] {
            if let std::collections::hash_map::Entry::Vacant(e) = signatures.entry(idx) {
                e.insert(projector.sketch(&ds.vectors[idx])?);
            }
        }
    }

    // Warmup pass, untimed: exercises both paths once per pair.
    for &(i, j) in &pairs {
        black_box(chi_square(&ds.vectors[i], &ds.vectors[j])?);
        black_box(collision_fraction(&signatures[&i], &signatures[&j])?);
    }

    let exact_start = Instant::now();
    for &(i, j) in &pairs {
        black_box(chi_square(black_box(&ds.vectors[i]), black_box(&ds.vectors[j])).unwrap());
    }
    let exact_elapsed = exact_start.elapsed();

    let sketch_start = Instant::now();
    for &(i, j) in &pairs {
        black_box(
            collision_fraction(black_box(&signatures[&i]), black_box(&signatures[&j])).unwrap(),
        );
    }
    let sketch_elapsed = sketch_start.elapsed();

    Ok(exact_elapsed.as_secs_f64() / sketch_elapsed.as_secs_f64().max(1e-9))
}
