//! Layered navigable graph index over sparse vectors or bit signatures.
//!
//! Vertices are inserted one at a time. Each vertex draws a top level from
//! a geometric-like distribution keyed by `(seed, id)`, then connects to a
//! bounded number of diverse neighbors on every layer it occupies. A query
//! descends greedily from the top-layer entry point (breadth one) and runs
//! a best-first scan on layer 0 with a result budget `L`: the scan stops
//! as soon as the best unexpanded candidate cannot improve the `L` best
//! results found so far. Larger `L` explores more of the graph and trades
//! time for recall.
//!
//! All similarity orderings break ties toward the lower vertex id, so
//! builds and searches are fully deterministic for a given seed.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::fileio::{
    corrupt, read_f64, read_header, read_u32, read_u64, read_varint, write_f64, write_header,
    write_u32, write_u64, write_varint, FileError,
};
use crate::metric::Metric;
use crate::rng::{stream_at, u01_open};
use crate::signcrp::{BitSignature, CauchyProjector, SketchError};
use crate::sparse::{chi_square_sorted, dot_sorted, NormalizationMode, SparseError, SparseVector};

const INDEX_MAGIC: &[u8; 4] = b"SGAN";
const INDEX_VERSION: u32 = 1;
/// Upper bound on sampled levels; keeps adjacency allocation bounded for
/// extreme decay parameters.
const MAX_LEVEL: usize = 31;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("vertex id {0} is already present")]
    DuplicateId(u32),
    #[error("search on an empty graph")]
    EmptyGraph,
    #[error("result budget must be at least 1")]
    BudgetError,
    #[error("brute-force scan over an empty store")]
    EmptyStore,
    #[error("dimension mismatch: index expects {expected}, payload has {found}")]
    DimensionMismatch { expected: u32, found: u32 },
    #[error("payload kind mismatch: index stores {expected}, got {found}")]
    PayloadKindMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("metric {metric} does not match the payload store")]
    MetricMismatch { metric: Metric },
    #[error("max degree must be at least 2, got {0}")]
    DegreeTooSmall(usize),
    #[error("construction budget {efc} must be at least the degree bound {m}")]
    ConstructionBudgetTooSmall { efc: usize, m: usize },
    #[error("level decay must be finite and nonnegative, got {0}")]
    InvalidLevelDecay(f64),
    #[error("invalid graph structure: {0}")]
    InvalidStructure(String),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
}

/// Construction parameters.
///
/// `m` bounds the stored degree (2m on layer 0, m on upper layers) and the
/// number of neighbors linked at insertion. `ef_construction` is the
/// result budget of the candidate scan run for each inserted vertex.
/// `level_lambda` scales the exponential level draw; zero keeps every
/// vertex on layer 0.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildParams {
    pub m: usize,
    pub ef_construction: usize,
    pub level_lambda: f64,
    pub seed: u64,
}

impl BuildParams {
    pub const DEFAULT_M: usize = 16;
    pub const DEFAULT_EF_CONSTRUCTION: usize = 200;

    pub fn new(
        m: usize,
        ef_construction: usize,
        level_lambda: f64,
        seed: u64,
    ) -> Result<Self, GraphError> {
        let params = BuildParams {
            m,
            ef_construction,
            level_lambda,
            seed,
        };
        params.validate()?;
        Ok(params)
    }

    /// Default parameters: m = 16, ef_construction = 200, and level decay
    /// 1 / ln(m), which yields roughly single-digit top levels for
    /// million-vertex graphs.
    pub fn with_seed(seed: u64) -> Self {
        BuildParams {
            m: Self::DEFAULT_M,
            ef_construction: Self::DEFAULT_EF_CONSTRUCTION,
            level_lambda: 1.0 / (Self::DEFAULT_M as f64).ln(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if self.m < 2 {
            return Err(GraphError::DegreeTooSmall(self.m));
        }
        if self.ef_construction < self.m {
            return Err(GraphError::ConstructionBudgetTooSmall {
                efc: self.ef_construction,
                m: self.m,
            });
        }
        if !self.level_lambda.is_finite() || self.level_lambda < 0.0 {
            return Err(GraphError::InvalidLevelDecay(self.level_lambda));
        }
        Ok(())
    }
}

impl Default for BuildParams {
    fn default() -> Self {
        BuildParams::with_seed(0)
    }
}

/// A vertex payload: either a sparse vector (exact metrics) or a bit
/// signature (sketch metric).
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Sparse(SparseVector),
    Signature(BitSignature),
}

impl Payload {
    fn kind_name(&self) -> &'static str {
        match self {
            Payload::Sparse(_) => "sparse vectors",
            Payload::Signature(_) => "bit signatures",
        }
    }
}

/// Backing storage for vertex payloads, indexed by insertion order.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorStore {
    Sparse {
        dim: u32,
        vectors: Vec<SparseVector>,
    },
    Sketch {
        projector: CauchyProjector,
        signatures: Vec<BitSignature>,
    },
}

impl VectorStore {
    pub fn new_sparse(dim: u32) -> Self {
        VectorStore::Sparse {
            dim,
            vectors: Vec::new(),
        }
    }

    pub fn new_sketch(projector: CauchyProjector) -> Self {
        VectorStore::Sketch {
            projector,
            signatures: Vec::new(),
        }
    }

    /// Wraps existing vectors, validating their dimensions.
    pub fn from_sparse_vectors(dim: u32, vectors: Vec<SparseVector>) -> Result<Self, GraphError> {
        for v in &vectors {
            if v.dim() != dim {
                return Err(GraphError::DimensionMismatch {
                    expected: dim,
                    found: v.dim(),
                });
            }
        }
        Ok(VectorStore::Sparse { dim, vectors })
    }

    /// Wraps existing signatures, validating their widths.
    pub fn from_signatures(
        projector: CauchyProjector,
        signatures: Vec<BitSignature>,
    ) -> Result<Self, GraphError> {
        for s in &signatures {
            if s.k() != projector.k() {
                return Err(GraphError::DimensionMismatch {
                    expected: projector.k(),
                    found: s.k(),
                });
            }
        }
        Ok(VectorStore::Sketch {
            projector,
            signatures,
        })
    }

    pub fn len(&self) -> usize {
        match self {
            VectorStore::Sparse { vectors, .. } => vectors.len(),
            VectorStore::Sketch { signatures, .. } => signatures.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Input dimension: vector dimension for sparse stores, projector
    /// input dimension for sketch stores.
    pub fn dim(&self) -> u32 {
        match self {
            VectorStore::Sparse { dim, .. } => *dim,
            VectorStore::Sketch { projector, .. } => projector.dim(),
        }
    }

    pub fn projector(&self) -> Option<&CauchyProjector> {
        match self {
            VectorStore::Sparse { .. } => None,
            VectorStore::Sketch { projector, .. } => Some(projector),
        }
    }

    pub fn sparse_vectors(&self) -> Option<&[SparseVector]> {
        match self {
            VectorStore::Sparse { vectors, .. } => Some(vectors),
            VectorStore::Sketch { .. } => None,
        }
    }

    pub fn signatures(&self) -> Option<&[BitSignature]> {
        match self {
            VectorStore::Sparse { .. } => None,
            VectorStore::Sketch { signatures, .. } => Some(signatures),
        }
    }

    /// Checks that a metric can rank payloads of this store.
    fn supports_metric(&self, metric: Metric) -> bool {
        matches!(
            (self, metric),
            (VectorStore::Sparse { .. }, Metric::Cosine)
                | (VectorStore::Sparse { .. }, Metric::ChiSquare)
                | (VectorStore::Sketch { .. }, Metric::HammingSketch)
        )
    }

    fn check_payload(&self, payload: &Payload) -> Result<(), GraphError> {
        match (self, payload) {
            (VectorStore::Sparse { dim, .. }, Payload::Sparse(v)) => {
                if v.dim() != *dim {
                    return Err(GraphError::DimensionMismatch {
                        expected: *dim,
                        found: v.dim(),
                    });
                }
                Ok(())
            }
            (VectorStore::Sketch { projector, .. }, Payload::Signature(s)) => {
                if s.k() != projector.k() {
                    return Err(GraphError::DimensionMismatch {
                        expected: projector.k(),
                        found: s.k(),
                    });
                }
                Ok(())
            }
            (store, payload) => Err(GraphError::PayloadKindMismatch {
                expected: match store {
                    VectorStore::Sparse { .. } => "sparse vectors",
                    VectorStore::Sketch { .. } => "bit signatures",
                },
                found: payload.kind_name(),
            }),
        }
    }

    fn push(&mut self, payload: Payload) {
        match (self, payload) {
            (VectorStore::Sparse { vectors, .. }, Payload::Sparse(v)) => vectors.push(v),
            (VectorStore::Sketch { signatures, .. }, Payload::Signature(s)) => signatures.push(s),
            _ => unreachable!("payload kind checked before push"),
        }
    }

    /// Clones the payload stored at a slot.
    pub fn payload_at(&self, slot: usize) -> Payload {
        match self {
            VectorStore::Sparse { vectors, .. } => Payload::Sparse(vectors[slot].clone()),
            VectorStore::Sketch { signatures, .. } => Payload::Signature(signatures[slot].clone()),
        }
    }

    /// Similarity of a stored payload to an external one. Kind, dimension,
    /// and metric coherence must have been checked.
    fn similarity_to(&self, slot: usize, query: &Payload, metric: Metric) -> f64 {
        match (self, query) {
            (VectorStore::Sparse { vectors, .. }, Payload::Sparse(q)) => match metric {
                Metric::Cosine => dot_sorted(&vectors[slot], q),
                Metric::ChiSquare => chi_square_sorted(&vectors[slot], q),
                Metric::HammingSketch => unreachable!("sketch metric on sparse store"),
            },
            (VectorStore::Sketch { signatures, .. }, Payload::Signature(q)) => {
                crate::signcrp::collision_fraction(&signatures[slot], q)
                    .expect("signature widths validated at insert")
            }
            _ => unreachable!("payload kind checked before similarity"),
        }
    }

    fn similarity_between(&self, a: usize, b: usize, metric: Metric) -> f64 {
        match self {
            VectorStore::Sparse { vectors, .. } => match metric {
                Metric::Cosine => dot_sorted(&vectors[a], &vectors[b]),
                Metric::ChiSquare => chi_square_sorted(&vectors[a], &vectors[b]),
                Metric::HammingSketch => unreachable!("sketch metric on sparse store"),
            },
            VectorStore::Sketch { signatures, .. } => {
                crate::signcrp::collision_fraction(&signatures[a], &signatures[b])
                    .expect("signature widths validated at insert")
            }
        }
    }
}

/// Counters and timers accumulated over one search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SearchStats {
    /// Number of similarity kernel evaluations.
    pub similarity_evals: u64,
    /// Number of distinct vertices marked visited in the layer-0 scan.
    pub visited: u64,
    /// Wall time spent inside similarity kernels.
    pub sim_time: Duration,
    /// Wall time of the whole search.
    pub total_time: Duration,
}

/// Ranked hits plus instrumentation. Hits are ordered by descending
/// similarity, ties broken by ascending vertex id.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub hits: Vec<(u32, f64)>,
    pub stats: SearchStats,
}

/// Deterministic record of one search: every similarity evaluation in
/// order, and every vertex expanded by the layer-0 scan in pop order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchTrace {
    pub evaluated: Vec<(u32, f64)>,
    pub expanded: Vec<u32>,
}

/// Explicit vertex description for [`NavGraph::from_parts`]: one neighbor
/// list (of external vertex ids) per layer the vertex occupies. The
/// vertex's top level is `neighbors.len() - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphVertex {
    pub id: u32,
    pub neighbors: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    id: u32,
    /// Neighbor slots per layer, each list sorted ascending. The vector
    /// has `level + 1` entries.
    links: Vec<Vec<u32>>,
}

impl Node {
    fn level(&self) -> usize {
        self.links.len() - 1
    }
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    sim: f64,
    id: u32,
    slot: u32,
}

impl Candidate {
    /// Ranking order: higher similarity first, then lower id.
    fn ranks_before(&self, other: &Candidate) -> bool {
        match self.sim.total_cmp(&other.sim) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => self.id < other.id,
        }
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    /// Max-heap order: greater means popped earlier. Higher similarity
    /// wins; equal similarity pops the lower id first.
    fn cmp(&self, other: &Self) -> Ordering {
        self.sim
            .total_cmp(&other.sim)
            .then_with(|| other.id.cmp(&self.id))
    }
}

#[derive(PartialEq)]
struct TotalF64(f64);

impl Eq for TotalF64 {}

impl PartialOrd for TotalF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TotalF64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Default)]
struct SimMeter {
    evals: u64,
    sim_time: Duration,
}

impl SimMeter {
    fn measure(&mut self, f: impl FnOnce() -> f64) -> f64 {
        let start = Instant::now();
        let value = f();
        self.sim_time += start.elapsed();
        self.evals += 1;
        value
    }
}

struct ScanOutput {
    /// Best-first candidates, at most the budget.
    found: Vec<Candidate>,
    visited: u64,
}

/// Layered navigable graph index.
#[derive(Debug, Clone, PartialEq)]
pub struct NavGraph {
    metric: Metric,
    params: BuildParams,
    store: VectorStore,
    nodes: Vec<Node>,
    slot_of: HashMap<u32, u32>,
    /// Slot of the top-level entry vertex; meaningful only when nonempty.
    entry: u32,
    max_level: usize,
}

impl NavGraph {
    /// Creates an empty index over sparse vectors of dimension `dim`.
    /// `metric` must be one of the exact metrics.
    pub fn new_sparse(metric: Metric, dim: u32, params: BuildParams) -> Result<Self, GraphError> {
        params.validate()?;
        if metric == Metric::HammingSketch {
            return Err(GraphError::MetricMismatch { metric });
        }
        Ok(NavGraph {
            metric,
            params,
            store: VectorStore::new_sparse(dim),
            nodes: Vec::new(),
            slot_of: HashMap::new(),
            entry: 0,
            max_level: 0,
        })
    }

    /// Creates an empty index over bit signatures produced by `projector`,
    /// ranked by collision fraction.
    pub fn new_sketch(projector: CauchyProjector, params: BuildParams) -> Result<Self, GraphError> {
        params.validate()?;
        Ok(NavGraph {
            metric: Metric::HammingSketch,
            params,
            store: VectorStore::new_sketch(projector),
            nodes: Vec::new(),
            slot_of: HashMap::new(),
            entry: 0,
            max_level: 0,
        })
    }

    /// Assembles an index from explicit adjacency, validating every
    /// structural invariant: ids unique, neighbor ids present on their
    /// layers, no self loops, symmetric edges, degrees within the caps,
    /// and the entry vertex on the top layer. `vertices[i]` owns
    /// `store[i]`.
    pub fn from_parts(
        metric: Metric,
        params: BuildParams,
        store: VectorStore,
        vertices: Vec<GraphVertex>,
        entry_id: u32,
    ) -> Result<Self, GraphError> {
        params.validate()?;
        if !store.supports_metric(metric) {
            return Err(GraphError::MetricMismatch { metric });
        }
        if store.len() != vertices.len() {
            return Err(GraphError::InvalidStructure(format!(
                "store holds {} payloads for {} vertices",
                store.len(),
                vertices.len()
            )));
        }
        if vertices.is_empty() {
            return Err(GraphError::InvalidStructure(
                "graph must have at least one vertex".into(),
            ));
        }

        let mut slot_of: HashMap<u32, u32> = HashMap::with_capacity(vertices.len());
        for (slot, v) in vertices.iter().enumerate() {
            if slot_of.insert(v.id, slot as u32).is_some() {
                return Err(GraphError::DuplicateId(v.id));
            }
            if v.neighbors.is_empty() || v.neighbors.len() > MAX_LEVEL + 1 {
                return Err(GraphError::InvalidStructure(format!(
                    "vertex {} occupies {} layers",
                    v.id,
                    v.neighbors.len()
                )));
            }
        }

        let max_level = vertices.iter().map(|v| v.neighbors.len() - 1).max().unwrap();
        let entry = *slot_of
            .get(&entry_id)
            .ok_or_else(|| GraphError::InvalidStructure(format!("entry id {entry_id} unknown")))?;
        if vertices[entry as usize].neighbors.len() - 1 != max_level {
            return Err(GraphError::InvalidStructure(format!(
                "entry vertex {entry_id} is not on the top layer"
            )));
        }

        let mut nodes: Vec<Node> = Vec::with_capacity(vertices.len());
        for v in &vertices {
            let mut links = Vec::with_capacity(v.neighbors.len());
            for (layer, ids) in v.neighbors.iter().enumerate() {
                let cap = if layer == 0 { 2 * params.m } else { params.m };
                if ids.len() > cap {
                    return Err(GraphError::InvalidStructure(format!(
                        "vertex {} exceeds the degree cap on layer {layer}",
                        v.id
                    )));
                }
                let mut slots = Vec::with_capacity(ids.len());
                for &nb_id in ids {
                    if nb_id == v.id {
                        return Err(GraphError::InvalidStructure(format!(
                            "vertex {} links to itself",
                            v.id
                        )));
                    }
                    let nb_slot = *slot_of.get(&nb_id).ok_or_else(|| {
                        GraphError::InvalidStructure(format!(
                            "vertex {} links to unknown id {nb_id}",
                            v.id
                        ))
                    })?;
                    if vertices[nb_slot as usize].neighbors.len() <= layer {
                        return Err(GraphError::InvalidStructure(format!(
                            "vertex {} links to {nb_id} on layer {layer}, where it is absent",
                            v.id
                        )));
                    }
                    slots.push(nb_slot);
                }
                slots.sort_unstable();
                if slots.windows(2).any(|w| w[0] == w[1]) {
                    return Err(GraphError::InvalidStructure(format!(
                        "vertex {} has duplicate neighbors on layer {layer}",
                        v.id
                    )));
                }
                links.push(slots);
            }
            nodes.push(Node { id: v.id, links });
        }

        for (slot, node) in nodes.iter().enumerate() {
            for (layer, nbs) in node.links.iter().enumerate() {
                for &nb in nbs {
                    if nodes[nb as usize].links[layer]
                        .binary_search(&(slot as u32))
                        .is_err()
                    {
                        return Err(GraphError::InvalidStructure(format!(
                            "edge {} -> {} on layer {layer} has no reverse edge",
                            node.id, nodes[nb as usize].id
                        )));
                    }
                }
            }
        }

        Ok(NavGraph {
            metric,
            params,
            store,
            nodes,
            slot_of,
            entry,
            max_level,
        })
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn params(&self) -> &BuildParams {
        &self.params
    }

    pub fn store(&self) -> &VectorStore {
        &self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: u32) -> bool {
        self.slot_of.contains_key(&id)
    }

    /// Vertex ids in insertion order.
    pub fn vertex_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.nodes.iter().map(|n| n.id)
    }

    /// Top layer occupied by the vertex.
    pub fn vertex_level(&self, id: u32) -> Option<usize> {
        let slot = *self.slot_of.get(&id)?;
        Some(self.nodes[slot as usize].level())
    }

    /// Top layer of the graph, if nonempty.
    pub fn top_level(&self) -> Option<usize> {
        (!self.nodes.is_empty()).then_some(self.max_level)
    }

    /// Id of the entry vertex for searches, if nonempty.
    pub fn entry_id(&self) -> Option<u32> {
        (!self.nodes.is_empty()).then(|| self.nodes[self.entry as usize].id)
    }

    /// Neighbor ids of a vertex on one layer.
    pub fn layer_neighbors(&self, id: u32, layer: usize) -> Option<Vec<u32>> {
        let slot = *self.slot_of.get(&id)?;
        let node = &self.nodes[slot as usize];
        let nbs = node.links.get(layer)?;
        Some(nbs.iter().map(|&s| self.nodes[s as usize].id).collect())
    }

    fn layer_cap(&self, layer: usize) -> usize {
        if layer == 0 {
            2 * self.params.m
        } else {
            self.params.m
        }
    }

    fn level_for(&self, id: u32) -> usize {
        let u = u01_open(stream_at(self.params.seed, id as u64));
        let level = (-u.ln() * self.params.level_lambda).floor();
        (level.min(MAX_LEVEL as f64)) as usize
    }

    fn check_payload(&self, payload: &Payload) -> Result<(), GraphError> {
        self.store.check_payload(payload)?;
        if let Payload::Sparse(v) = payload {
            match self.metric.required_normalization() {
                NormalizationMode::L2Unit => debug_assert!(
                    v.nnz() == 0 || (v.l2_norm() - 1.0).abs() < 1e-6,
                    "payload must have unit L2 norm for the inner-product metric"
                ),
                NormalizationMode::L1SumToOne => debug_assert!(
                    v.nnz() == 0 || (v.value_sum() - 1.0).abs() < 1e-6,
                    "payload must sum to one for the chi-square metric"
                ),
            }
        }
        Ok(())
    }

    fn candidate(&self, slot: u32, sim: f64) -> Candidate {
        Candidate {
            sim,
            id: self.nodes[slot as usize].id,
            slot,
        }
    }

    /// Breadth-one greedy walk on one layer: repeatedly move to the best
    /// neighbor while it improves on the current vertex. Ties move toward
    /// the lower id, which keeps the walk finite and deterministic.
    fn greedy_descend(
        &self,
        layer: usize,
        mut cur: Candidate,
        query: &Payload,
        meter: &mut SimMeter,
        mut trace: Option<&mut SearchTrace>,
    ) -> Candidate {
        loop {
            let mut best = cur;
            for &nb in &self.nodes[cur.slot as usize].links[layer] {
                let sim = meter.measure(|| self.store.similarity_to(nb as usize, query, self.metric));
                let cand = self.candidate(nb, sim);
                if let Some(t) = trace.as_deref_mut() {
                    t.evaluated.push((cand.id, sim));
                }
                if cand.ranks_before(&best) {
                    best = cand;
                }
            }
            if best.slot == cur.slot {
                return cur;
            }
            cur = best;
        }
    }

    /// Best-first scan of one layer with a result budget.
    ///
    /// Maintains a max-heap frontier of evaluated but unexpanded vertices
    /// and a running set of expanded results. A popped candidate whose
    /// similarity does not exceed the budget-th best result ends the scan:
    /// no frontier vertex can improve the final top results beyond that
    /// point. Returned candidates are ranked best-first and truncated to
    /// the budget. `start` must carry its already-computed similarity.
    fn scan_layer(
        &self,
        layer: usize,
        start: Candidate,
        query: &Payload,
        budget: usize,
        meter: &mut SimMeter,
        mut trace: Option<&mut SearchTrace>,
    ) -> ScanOutput {
        let mut visited = vec![false; self.nodes.len()];
        visited[start.slot as usize] = true;
        let mut visited_count = 1u64;

        let mut frontier = BinaryHeap::new();
        frontier.push(start);
        let mut results: Vec<Candidate> = Vec::new();
        // Min-heap of the best `budget` similarities expanded so far; its
        // minimum is the pruning threshold.
        let mut best_sims: BinaryHeap<Reverse<TotalF64>> = BinaryHeap::with_capacity(budget + 1);

        while let Some(cand) = frontier.pop() {
            if results.len() >= budget {
                let threshold = best_sims.peek().expect("tracker filled with results").0 .0;
                if cand.sim <= threshold {
                    break;
                }
            }
            results.push(cand);
            best_sims.push(Reverse(TotalF64(cand.sim)));
            if best_sims.len() > budget {
                best_sims.pop();
            }
            if let Some(t) = trace.as_deref_mut() {
                t.expanded.push(cand.id);
            }
            for &nb in &self.nodes[cand.slot as usize].links[layer] {
                if !visited[nb as usize] {
                    visited[nb as usize] = true;
                    visited_count += 1;
                    let sim =
                        meter.measure(|| self.store.similarity_to(nb as usize, query, self.metric));
                    let next = self.candidate(nb, sim);
                    frontier.push(next);
                    if let Some(t) = trace.as_deref_mut() {
                        t.evaluated.push((next.id, sim));
                    }
                }
            }
        }

        results.sort_unstable_by(|a, b| {
            b.sim
                .total_cmp(&a.sim)
                .then_with(|| a.id.cmp(&b.id))
        });
        results.truncate(budget);
        ScanOutput {
            found: results,
            visited: visited_count,
        }
    }

    /// Selects up to `m` diverse candidates from a best-first list: a
    /// candidate is kept when it is closer to the query vertex than to
    /// every previously kept candidate; remaining slots are refilled with
    /// the best skipped candidates, so exactly `min(m, candidates)` are
    /// returned.
    fn select_diverse(&self, candidates: &[Candidate], m: usize) -> Vec<Candidate> {
        if candidates.len() <= m {
            return candidates.to_vec();
        }
        let mut selected: Vec<Candidate> = Vec::with_capacity(m);
        let mut skipped: Vec<Candidate> = Vec::new();
        for &cand in candidates {
            if selected.len() == m {
                break;
            }
            let diverse = selected.iter().all(|kept| {
                cand.sim
                    > self
                        .store
                        .similarity_between(cand.slot as usize, kept.slot as usize, self.metric)
            });
            if diverse {
                selected.push(cand);
            } else {
                skipped.push(cand);
            }
        }
        for cand in skipped {
            if selected.len() == m {
                break;
            }
            selected.push(cand);
        }
        selected
    }

    /// Re-runs diverse selection over a vertex's neighbor list after it
    /// exceeded the layer cap, and removes the reverse edge of every
    /// dropped neighbor so edges stay symmetric.
    fn prune_symmetric(&mut self, slot: u32, layer: usize) {
        let cap = self.layer_cap(layer);
        let neighbors = self.nodes[slot as usize].links[layer].clone();
        if neighbors.len() <= cap {
            return;
        }
        let mut candidates: Vec<Candidate> = neighbors
            .iter()
            .map(|&nb| {
                let sim = self
                    .store
                    .similarity_between(slot as usize, nb as usize, self.metric);
                self.candidate(nb, sim)
            })
            .collect();
        candidates.sort_unstable_by(|a, b| {
            b.sim
                .total_cmp(&a.sim)
                .then_with(|| a.id.cmp(&b.id))
        });
        let keep = self.select_diverse(&candidates, cap);
        let mut keep_slots: Vec<u32> = keep.iter().map(|c| c.slot).collect();
        keep_slots.sort_unstable();
        for &nb in &neighbors {
            if keep_slots.binary_search(&nb).is_err() {
                let list = &mut self.nodes[nb as usize].links[layer];
                if let Ok(pos) = list.binary_search(&slot) {
                    list.remove(pos);
                }
            }
        }
        self.nodes[slot as usize].links[layer] = keep_slots;
    }

    /// Inserts a vertex. The payload must match the store kind and
    /// dimension, satisfy the metric's normalization contract, and carry
    /// an id not yet present.
    pub fn insert(&mut self, id: u32, payload: Payload) -> Result<(), GraphError> {
        if self.slot_of.contains_key(&id) {
            return Err(GraphError::DuplicateId(id));
        }
        self.check_payload(&payload)?;
        let level = self.level_for(id);
        let new_slot = self.nodes.len() as u32;

        if self.nodes.is_empty() {
            self.store.push(payload);
            self.nodes.push(Node {
                id,
                links: vec![Vec::new(); level + 1],
            });
            self.slot_of.insert(id, new_slot);
            self.entry = new_slot;
            self.max_level = level;
            return Ok(());
        }

        let mut meter = SimMeter::default();
        let entry_sim = meter.measure(|| {
            self.store
                .similarity_to(self.entry as usize, &payload, self.metric)
        });
        let mut cur = self.candidate(self.entry, entry_sim);
        for layer in ((level + 1)..=self.max_level).rev() {
            cur = self.greedy_descend(layer, cur, &payload, &mut meter, None);
        }

        let top_connect = level.min(self.max_level);
        let mut selections: Vec<(usize, Vec<Candidate>)> = Vec::with_capacity(top_connect + 1);
        for layer in (0..=top_connect).rev() {
            let scan = self.scan_layer(
                layer,
                cur,
                &payload,
                self.params.ef_construction,
                &mut meter,
                None,
            );
            cur = scan.found[0];
            let selected = self.select_diverse(&scan.found, self.params.m);
            selections.push((layer, selected));
        }

        self.store.push(payload);
        self.nodes.push(Node {
            id,
            links: vec![Vec::new(); level + 1],
        });
        self.slot_of.insert(id, new_slot);

        for (layer, selected) in selections {
            let mut own: Vec<u32> = selected.iter().map(|c| c.slot).collect();
            own.sort_unstable();
            self.nodes[new_slot as usize].links[layer] = own;
            for cand in &selected {
                let list = &mut self.nodes[cand.slot as usize].links[layer];
                if let Err(pos) = list.binary_search(&new_slot) {
                    list.insert(pos, new_slot);
                }
            }
            for cand in &selected {
                if self.nodes[cand.slot as usize].links[layer].len() > self.layer_cap(layer) {
                    self.prune_symmetric(cand.slot, layer);
                }
            }
        }

        if level > self.max_level {
            self.max_level = level;
            self.entry = new_slot;
        }
        Ok(())
    }

    fn search_impl(
        &self,
        query: &Payload,
        budget: usize,
        want_trace: bool,
    ) -> Result<(SearchResult, Option<SearchTrace>), GraphError> {
        if budget == 0 {
            return Err(GraphError::BudgetError);
        }
        if self.nodes.is_empty() {
            return Err(GraphError::EmptyGraph);
        }
        self.check_payload(query)?;

        let start_time = Instant::now();
        let mut meter = SimMeter::default();
        let mut trace = want_trace.then(SearchTrace::default);

        let entry_sim = meter.measure(|| {
            self.store
                .similarity_to(self.entry as usize, query, self.metric)
        });
        let mut cur = self.candidate(self.entry, entry_sim);
        if let Some(t) = &mut trace {
            t.evaluated.push((cur.id, cur.sim));
        }
        for layer in (1..=self.max_level).rev() {
            cur = self.greedy_descend(layer, cur, query, &mut meter, trace.as_mut());
        }
        let scan = self.scan_layer(0, cur, query, budget, &mut meter, trace.as_mut());

        let hits = scan.found.iter().map(|c| (c.id, c.sim)).collect();
        let stats = SearchStats {
            similarity_evals: meter.evals,
            visited: scan.visited,
            sim_time: meter.sim_time,
            total_time: start_time.elapsed(),
        };
        Ok((SearchResult { hits, stats }, trace))
    }

    /// Approximate top results for a query with result budget `budget`.
    /// Returns at most `budget` hits, fewer only when the reachable part
    /// of the graph is smaller.
    pub fn search(&self, query: &Payload, budget: usize) -> Result<SearchResult, GraphError> {
        Ok(self.search_impl(query, budget, false)?.0)
    }

    /// Like [`NavGraph::search`], additionally recording the full
    /// evaluation and expansion order.
    pub fn search_traced(
        &self,
        query: &Payload,
        budget: usize,
    ) -> Result<(SearchResult, SearchTrace), GraphError> {
        let (result, trace) = self.search_impl(query, budget, true)?;
        Ok((result, trace.expect("trace requested")))
    }

    /// Exact top-k over this graph's own payloads by full scan.
    pub fn brute_force(&self, query: &Payload, k: usize) -> Result<SearchResult, GraphError> {
        if k == 0 {
            return Err(GraphError::BudgetError);
        }
        if self.nodes.is_empty() {
            return Err(GraphError::EmptyStore);
        }
        self.check_payload(query)?;
        let start_time = Instant::now();
        let mut meter = SimMeter::default();
        let mut all: Vec<Candidate> = (0..self.nodes.len())
            .map(|slot| {
                let sim = meter.measure(|| self.store.similarity_to(slot, query, self.metric));
                self.candidate(slot as u32, sim)
            })
            .collect();
        all.sort_unstable_by(|a, b| b.sim.total_cmp(&a.sim).then_with(|| a.id.cmp(&b.id)));
        all.truncate(k);
        let stats = SearchStats {
            similarity_evals: meter.evals,
            visited: self.nodes.len() as u64,
            sim_time: meter.sim_time,
            total_time: start_time.elapsed(),
        };
        Ok(SearchResult {
            hits: all.into_iter().map(|c| (c.id, c.sim)).collect(),
            stats,
        })
    }

    /// Writes the index to a binary file.
    pub fn save(&self, path: &Path) -> Result<(), FileError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Reads an index written by [`NavGraph::save`], revalidating all
    /// structural invariants. Searches on the loaded index reproduce the
    /// original's results and traces exactly.
    pub fn load(path: &Path) -> Result<Self, FileError> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }

    fn write_to(&self, w: &mut impl Write) -> Result<(), FileError> {
        write_header(w, INDEX_MAGIC, INDEX_VERSION)?;
        w.write_all(&[self.metric.tag()])?;
        write_u32(w, self.params.m as u32)?;
        write_u32(w, self.params.ef_construction as u32)?;
        write_f64(w, self.params.level_lambda)?;
        write_u64(w, self.params.seed)?;
        write_u64(w, self.nodes.len() as u64)?;
        write_u64(w, self.store.dim() as u64)?;
        match &self.store {
            VectorStore::Sparse { .. } => {}
            VectorStore::Sketch { projector, .. } => {
                write_u32(w, projector.k())?;
                write_u64(w, projector.seed())?;
            }
        }
        if !self.nodes.is_empty() {
            write_u32(w, self.nodes[self.entry as usize].id)?;
        }

        for (slot, node) in self.nodes.iter().enumerate() {
            write_u32(w, node.id)?;
            write_u32(w, node.level() as u32)?;
            match &self.store {
                VectorStore::Sparse { vectors, .. } => {
                    let v = &vectors[slot];
                    write_u32(w, v.nnz() as u32)?;
                    for &i in v.indices() {
                        write_u32(w, i)?;
                    }
                    for &x in v.values() {
                        write_f64(w, x)?;
                    }
                }
                VectorStore::Sketch { signatures, .. } => {
                    for &word in signatures[slot].words() {
                        write_u64(w, word)?;
                    }
                }
            }
        }

        for node in &self.nodes {
            for nbs in &node.links {
                write_varint(w, nbs.len() as u64)?;
                let mut prev = 0u64;
                for (i, &nb) in nbs.iter().enumerate() {
                    let delta = if i == 0 { nb as u64 } else { nb as u64 - prev };
                    write_varint(w, delta)?;
                    prev = nb as u64;
                }
            }
        }
        Ok(())
    }

    fn read_from(r: &mut impl Read) -> Result<Self, FileError> {
        read_header(r, INDEX_MAGIC, INDEX_VERSION)?;
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::UnexpectedEof => corrupt("unexpected end of file reading metric"),
                _ => FileError::Io(e),
            })?;
        let metric =
            Metric::from_tag(tag[0]).ok_or_else(|| corrupt(format!("unknown metric tag {}", tag[0])))?;
        let m = read_u32(r, "degree bound")? as usize;
        let efc = read_u32(r, "construction budget")? as usize;
        let level_lambda = read_f64(r, "level decay")?;
        let seed = read_u64(r, "seed")?;
        let count = read_u64(r, "vertex count")?;
        let count = usize::try_from(count).map_err(|_| corrupt("vertex count exceeds usize"))?;
        let dim = read_u64(r, "dimension")?;
        let dim = u32::try_from(dim).map_err(|_| corrupt("dimension exceeds u32"))?;
        let params = BuildParams::new(m, efc, level_lambda, seed)
            .map_err(|e| corrupt(format!("invalid build parameters: {e}")))?;

        let mut sketch_meta = None;
        if metric == Metric::HammingSketch {
            let k = read_u32(r, "sketch width")?;
            let proj_seed = read_u64(r, "projector seed")?;
            sketch_meta = Some((k, proj_seed));
        }
        if count == 0 {
            let store = match sketch_meta {
                None => VectorStore::new_sparse(dim),
                Some((k, proj_seed)) => {
                    let projector = CauchyProjector::new(dim, k, proj_seed)
                        .map_err(|e| corrupt(format!("invalid projector parameters: {e}")))?;
                    VectorStore::new_sketch(projector)
                }
            };
            return Ok(NavGraph {
                metric,
                params,
                store,
                nodes: Vec::new(),
                slot_of: HashMap::new(),
                entry: 0,
                max_level: 0,
            });
        }
        let entry_id = read_u32(r, "entry id")?;

        let mut ids = Vec::with_capacity(count.min(1 << 24));
        let mut levels = Vec::with_capacity(count.min(1 << 24));
        let mut sparse_vectors = Vec::new();
        let mut signatures = Vec::new();
        for _ in 0..count {
            ids.push(read_u32(r, "vertex id")?);
            let level = read_u32(r, "vertex level")? as usize;
            if level > MAX_LEVEL {
                return Err(corrupt(format!("vertex level {level} exceeds the maximum")));
            }
            levels.push(level);
            match sketch_meta {
                None => {
                    let nnz = read_u32(r, "nonzero count")? as usize;
                    let mut indices = Vec::with_capacity(nnz.min(1 << 24));
                    for _ in 0..nnz {
                        indices.push(read_u32(r, "index")?);
                    }
                    let mut values = Vec::with_capacity(nnz.min(1 << 24));
                    for _ in 0..nnz {
                        values.push(read_f64(r, "value")?);
                    }
                    let v = SparseVector::new(dim, indices, values)
                        .map_err(|e| corrupt(format!("invalid stored vector: {e}")))?;
                    sparse_vectors.push(v);
                }
                Some((k, _)) => {
                    let words_per_sig = (k / 64) as usize;
                    let mut words = Vec::with_capacity(words_per_sig);
                    for _ in 0..words_per_sig {
                        words.push(read_u64(r, "signature word")?);
                    }
                    let sig = BitSignature::from_words(k, words)
                        .map_err(|e| corrupt(format!("invalid stored signature: {e}")))?;
                    signatures.push(sig);
                }
            }
        }

        let mut vertices: Vec<GraphVertex> = Vec::with_capacity(count);
        for i in 0..count {
            let mut neighbors = Vec::with_capacity(levels[i] + 1);
            for _ in 0..=levels[i] {
                let degree = read_varint(r, "degree")? as usize;
                if degree > count {
                    return Err(corrupt("neighbor degree exceeds vertex count"));
                }
                let mut list = Vec::with_capacity(degree);
                let mut prev = 0u64;
                for j in 0..degree {
                    let delta = read_varint(r, "neighbor delta")?;
                    let slot = if j == 0 { delta } else { prev + delta };
                    if slot >= count as u64 {
                        return Err(corrupt("neighbor slot out of range"));
                    }
                    list.push(ids[slot as usize]);
                    prev = slot;
                }
                neighbors.push(list);
            }
            vertices.push(GraphVertex {
                id: ids[i],
                neighbors,
            });
        }

        let store = match sketch_meta {
            None => VectorStore::from_sparse_vectors(dim, sparse_vectors)
                .map_err(|e| corrupt(format!("invalid payload store: {e}")))?,
            Some((k, proj_seed)) => {
                let projector = CauchyProjector::new(dim, k, proj_seed)
                    .map_err(|e| corrupt(format!("invalid projector parameters: {e}")))?;
                VectorStore::from_signatures(projector, signatures)
                    .map_err(|e| corrupt(format!("invalid payload store: {e}")))?
            }
        };

        NavGraph::from_parts(metric, params, store, vertices, entry_id)
            .map_err(|e| corrupt(format!("structural validation failed: {e}")))
    }
}

/// Exact top-k over a payload store by full scan: every payload is
/// evaluated once and ranked by descending similarity with ties broken by
/// ascending position. Positions in the store serve as result ids.
pub fn brute_force_topk(
    store: &VectorStore,
    query: &Payload,
    k: usize,
    metric: Metric,
) -> Result<SearchResult, GraphError> {
    if k == 0 {
        return Err(GraphError::BudgetError);
    }
    if store.is_empty() {
        return Err(GraphError::EmptyStore);
    }
    if !store.supports_metric(metric) {
        return Err(GraphError::MetricMismatch { metric });
    }
    store.check_payload(query)?;
    let start_time = Instant::now();
    let mut meter = SimMeter::default();
    let mut all: Vec<Candidate> = (0..store.len())
        .map(|slot| {
            let sim = meter.measure(|| store.similarity_to(slot, query, metric));
            Candidate {
                sim,
                id: slot as u32,
                slot: slot as u32,
            }
        })
        .collect();
    all.sort_unstable_by(|a, b| b.sim.total_cmp(&a.sim).then_with(|| a.id.cmp(&b.id)));
    all.truncate(k);
    let stats = SearchStats {
        similarity_evals: meter.evals,
        visited: store.len() as u64,
        sim_time: meter.sim_time,
        total_time: start_time.elapsed(),
    };
    Ok(SearchResult {
        hits: all.into_iter().map(|c| (c.id, c.sim)).collect(),
        stats,
    })
}
