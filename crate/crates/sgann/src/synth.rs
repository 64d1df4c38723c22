//! Synthetic clustered sparse datasets for benchmarks and tests.
//!
//! Vectors are generated around cluster prototypes: each cluster owns a
//! random support of `nnz` coordinates with random positive weights, and
//! every member keeps most of that support, resampling a `noise` fraction
//! of its entries to fresh coordinates and jittering the kept weights.
//! Queries are drawn by the same process, so each query has planted near
//! neighbors (its cluster members) without duplicating any vector.
//! Labels are cluster ids.

use std::collections::HashSet;

use thiserror::Error;

use crate::eval::{EvalError, LabeledDataset};
use crate::rng::SplitMix64;
use crate::sparse::{NormalizationMode, SparseVector};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic profile: {0}")]
    InvalidProfile(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Shape of a synthetic dataset.
#[derive(Debug, Clone)]
pub struct SyntheticProfile {
    pub name: String,
    pub dim: u32,
    pub n_vectors: usize,
    pub n_queries: usize,
    /// Nonzero entries per vector.
    pub nnz: usize,
    pub clusters: usize,
    /// Fraction of entries resampled to random coordinates, in [0, 1).
    pub noise: f64,
    pub normalization: NormalizationMode,
    pub seed: u64,
}

struct Prototype {
    support: Vec<u32>,
    weights: Vec<f64>,
}

/// Weight distribution: uniform in [0.5, 1.5).
fn draw_weight(rng: &mut SplitMix64) -> f64 {
    0.5 + rng.next_f64()
}

fn draw_support(rng: &mut SplitMix64, dim: u32, nnz: usize) -> Vec<u32> {
    let mut used = HashSet::with_capacity(nnz);
    let mut support = Vec::with_capacity(nnz);
    while support.len() < nnz {
        let idx = rng.next_below(dim as u64) as u32;
        if used.insert(idx) {
            support.push(idx);
        }
    }
    support.sort_unstable();
    support
}

fn perturb(
    rng: &mut SplitMix64,
    proto: &Prototype,
    dim: u32,
    noise: f64,
    normalization: NormalizationMode,
) -> SparseVector {
    let mut used: HashSet<u32> = proto.support.iter().copied().collect();
    let mut entries: Vec<(u32, f64)> = Vec::with_capacity(proto.support.len());
    for (&idx, &w) in proto.support.iter().zip(&proto.weights) {
        if rng.next_f64() < noise {
            let fresh = loop {
                let cand = rng.next_below(dim as u64) as u32;
                if used.insert(cand) {
                    break cand;
                }
            };
            entries.push((fresh, draw_weight(rng)));
        } else {
            // Jitter kept weights by up to 25 percent either way.
            entries.push((idx, w * (0.75 + 0.5 * rng.next_f64())));
        }
    }
    entries.sort_unstable_by_key(|e| e.0);
    let indices = entries.iter().map(|e| e.0).collect();
    let values = entries.iter().map(|e| e.1).collect();
    SparseVector::new(dim, indices, values)
        .expect("generated entries are sorted, in range, and positive")
        .normalized(normalization)
        .expect("generated vectors are nonzero and nonnegative")
}

/// Generates a labeled dataset with the requested shape. Deterministic in `seed`.
pub fn generate(profile: &SyntheticProfile) -> Result<LabeledDataset, SynthError> {
    if profile.nnz == 0 || profile.nnz as u64 > profile.dim as u64 {
        return Err(SynthError::InvalidProfile(format!(
            "nnz {} must be in 1..={}",
            profile.nnz, profile.dim
        )));
    }
    if profile.n_vectors == 0 {
        return Err(SynthError::InvalidProfile("need at least one vector".into()));
    }
    if profile.clusters == 0 {
        return Err(SynthError::InvalidProfile("need at least one cluster".into()));
    }
    if !(0.0..1.0).contains(&profile.noise) {
        return Err(SynthError::InvalidProfile(format!(
            "noise {} must be in [0, 1)",
            profile.noise
        )));
    }
    // Resampling needs free coordinates outside the cluster support.
    if (profile.nnz as u64) * 2 > profile.dim as u64 && profile.noise > 0.0 {
        return Err(SynthError::InvalidProfile(
            "noise requires nnz to be at most half of dim".into(),
        ));
    }

    let mut rng = SplitMix64::new(profile.seed);
    let prototypes: Vec<Prototype> = (0..profile.clusters)
        .map(|_| {
            let support = draw_support(&mut rng, profile.dim, profile.nnz);
            let weights = support.iter().map(|_| draw_weight(&mut rng)).collect();
            Prototype { support, weights }
        })
        .collect();

    let mut vectors = Vec::with_capacity(profile.n_vectors);
    let mut labels = Vec::with_capacity(profile.n_vectors);
    for i in 0..profile.n_vectors {
        let cluster = i % profile.clusters;
        vectors.push(perturb(
            &mut rng,
            &prototypes[cluster],
            profile.dim,
            profile.noise,
            profile.normalization,
        ));
        labels.push(cluster as i32);
    }

    let mut queries = Vec::with_capacity(profile.n_queries);
    let mut query_labels = Vec::with_capacity(profile.n_queries);
    for i in 0..profile.n_queries {
        let cluster = i % profile.clusters;
        queries.push(perturb(
            &mut rng,
            &prototypes[cluster],
            profile.dim,
            profile.noise,
            profile.normalization,
        ));
        query_labels.push(cluster as i32);
    }

    Ok(LabeledDataset::new(
        profile.name.clone(),
        profile.dim,
        vectors,
        Some(labels),
        queries,
        Some(query_labels),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::chi_square;

    fn base_profile() -> SyntheticProfile {
        SyntheticProfile {
            name: "test".into(),
            dim: 500,
            n_vectors: 60,
            n_queries: 12,
            nnz: 20,
            clusters: 6,
            noise: 0.15,
            normalization: NormalizationMode::L1SumToOne,
            seed: 42,
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&base_profile()).unwrap();
        let b = generate(&base_profile()).unwrap();
        assert_eq!(a.vectors(), b.vectors());
        assert_eq!(a.queries(), b.queries());
        assert_eq!(a.labels(), b.labels());

        let mut other = base_profile();
        other.seed = 43;
        let c = generate(&other).unwrap();
        assert_ne!(a.vectors(), c.vectors());
    }

    #[test]
    fn vectors_match_the_requested_shape() {
        let ds = generate(&base_profile()).unwrap();
        assert_eq!(ds.len(), 60);
        assert_eq!(ds.queries().len(), 12);
        assert_eq!(ds.dim(), 500);
        for v in ds.vectors().iter().chain(ds.queries()) {
            assert_eq!(v.nnz(), 20);
            assert!((v.value_sum() - 1.0).abs() < 1e-9);
            assert!(v.values().iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn l2_mode_produces_unit_vectors() {
        let mut profile = base_profile();
        profile.normalization = NormalizationMode::L2Unit;
        let ds = generate(&profile).unwrap();
        for v in ds.vectors() {
            assert!((v.l2_norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn queries_are_closer_to_their_own_cluster() {
        let ds = generate(&base_profile()).unwrap();
        let labels = ds.labels().unwrap();
        let qlabels = ds.query_labels().unwrap();
        let mut own_total = 0.0;
        let mut other_total = 0.0;
        let mut own_n = 0.0;
        let mut other_n = 0.0;
        for (q, &ql) in ds.queries().iter().zip(qlabels) {
            for (v, &vl) in ds.vectors().iter().zip(labels) {
                let sim = chi_square(q, v).unwrap();
                if vl == ql {
                    own_total += sim;
                    own_n += 1.0;
                } else {
                    other_total += sim;
                    other_n += 1.0;
                }
            }
        }
        let own_mean = own_total / own_n;
        let other_mean = other_total / other_n;
        assert!(
            own_mean > other_mean + 0.3,
            "own {own_mean} vs other {other_mean}"
        );
    }

    #[test]
    fn invalid_profiles_are_rejected() {
        let mut s = base_profile();
        s.nnz = 0;
        assert!(matches!(generate(&s), Err(SynthError::InvalidProfile(_))));

        let mut s = base_profile();
        s.nnz = 501;
        assert!(matches!(generate(&s), Err(SynthError::InvalidProfile(_))));

        let mut s = base_profile();
        s.noise = 1.0;
        assert!(matches!(generate(&s), Err(SynthError::InvalidProfile(_))));

        let mut s = base_profile();
        s.n_vectors = 0;
        assert!(matches!(generate(&s), Err(SynthError::InvalidProfile(_))));

        let mut s = base_profile();
        s.clusters = 0;
        assert!(matches!(generate(&s), Err(SynthError::InvalidProfile(_))));
    }
}
