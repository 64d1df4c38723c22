//! Approximate nearest neighbor search for sparse vectors.
//!
//! The crate is built around three similarity metrics and a layered
//! navigable graph index:
//!
//! * [`sparse`] holds the sparse vector type and the exact similarity
//!   kernels (inner product for L2-normalized input, chi-square for
//!   L1-normalized nonnegative input).
//! * [`signcrp`] compresses sparse vectors into bit signatures via sign
//!   Cauchy random projections; Hamming-style collision counting over the
//!   signatures approximates chi-square similarity.
//! * [`graph`] implements the layered graph index with greedy descent and
//!   best-first layer search, plus exact brute-force scans and binary
//!   persistence for indexes and signature sets.
//! * [`eval`] provides recall / classification / timing sweeps over
//!   labeled datasets, and [`synth`] generates clustered synthetic
//!   datasets for benchmarks.
//! * [`svmlight`] reads and writes the 1-based `label idx:val` text
//!   format.
//!
//! All randomness is derived from explicit seeds; identical inputs and
//! seeds produce identical indexes, signatures, and search results.

pub mod eval;
pub mod fileio;
pub mod graph;
pub mod metric;
mod rng;
pub mod signcrp;
pub mod sparse;
pub mod svmlight;
pub mod synth;

pub use eval::{DatasetStats, EvalReport, EvalRow, LabeledDataset};
pub use fileio::FileError;
pub use graph::{BuildParams, NavGraph, Payload, SearchResult, SearchStats, VectorStore};
pub use metric::Metric;
pub use signcrp::{BitSignature, CauchyProjector};
pub use sparse::{NormalizationMode, SparseVector};
