//! Sparse vectors and exact similarity kernels.
//!
//! A [`SparseVector`] stores the nonzero coordinates of a `dim`-dimensional
//! vector as parallel arrays: strictly ascending `u32` indices and finite
//! nonzero `f64` values. All kernels merge-join the two index arrays, so a
//! similarity evaluation costs O(nnz(u) + nnz(v)) regardless of `dim`.
//!
//! Two normalization contracts exist:
//!
//! * inner-product similarity ([`cosine`]) expects L2-unit inputs, and
//! * chi-square similarity ([`chi_square`]) expects nonnegative inputs
//!   whose values sum to one.
//!
//! [`SparseVector::normalized`] produces vectors satisfying either
//! contract. The kernels verify the contract with debug assertions and
//! report genuinely invalid data (negative chi-square input, dimension
//! mismatch) as errors.

use thiserror::Error;

use crate::metric::Metric;

/// Normalization applied to a vector before indexing or comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizationMode {
    /// Divide by the sum of values; requires nonnegative input. The result
    /// sums to one, as chi-square similarity expects.
    L1SumToOne,
    /// Divide by the Euclidean norm. The result has unit L2 norm, as
    /// inner-product similarity expects.
    L2Unit,
}

#[derive(Debug, Error, PartialEq)]
pub enum SparseError {
    #[error("cannot normalize a vector with no nonzero entries")]
    AllZeroVector,
    #[error("negative value {value} at index {index} in sum-to-one normalization")]
    NegativeValueInL1Mode { index: u32, value: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: u32, right: u32 },
    #[error("negative value {value} at index {index} in chi-square input")]
    NegativeValue { index: u32, value: f64 },
    #[error("index {index} out of bounds for dimension {dim}")]
    IndexOutOfBounds { index: u32, dim: u32 },
    #[error("indices must be strictly ascending (offset {position})")]
    NonAscendingIndices { position: usize },
    #[error("non-finite value at index {index}")]
    NonFiniteValue { index: u32 },
    #[error("indices and values have different lengths: {indices} vs {values}")]
    LengthMismatch { indices: usize, values: usize },
    #[error("metric {0} is not defined on dense float vectors")]
    UnsupportedDenseMetric(Metric),
}

/// Sparse vector in parallel-array form.
///
/// Invariants, enforced at construction: indices are strictly ascending
/// and below `dim`, values are finite and nonzero, and both arrays have
/// equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    dim: u32,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    /// Builds a vector from parallel index/value arrays.
    ///
    /// Indices must be strictly ascending and below `dim`. Values must be
    /// finite; entries with value exactly zero are dropped.
    pub fn new(dim: u32, indices: Vec<u32>, values: Vec<f64>) -> Result<Self, SparseError> {
        if indices.len() != values.len() {
            return Err(SparseError::LengthMismatch {
                indices: indices.len(),
                values: values.len(),
            });
        }
        for (pos, &idx) in indices.iter().enumerate() {
            if idx >= dim {
                return Err(SparseError::IndexOutOfBounds { index: idx, dim });
            }
            if pos > 0 && indices[pos - 1] >= idx {
                return Err(SparseError::NonAscendingIndices { position: pos });
            }
            if !values[pos].is_finite() {
                return Err(SparseError::NonFiniteValue { index: idx });
            }
        }
        let (indices, values) = if values.contains(&0.0) {
            indices
                .into_iter()
                .zip(values)
                .filter(|&(_, v)| v != 0.0)
                .unzip()
        } else {
            (indices, values)
        };
        Ok(SparseVector {
            dim,
            indices,
            values,
        })
    }

    /// Builds a sparse vector from a dense slice, keeping nonzero entries.
    pub fn from_dense(dense: &[f64]) -> Result<Self, SparseError> {
        let dim =
            u32::try_from(dense.len()).map_err(|_| SparseError::IndexOutOfBounds {
                index: u32::MAX,
                dim: u32::MAX,
            })?;
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (i, &v) in dense.iter().enumerate() {
            if !v.is_finite() {
                return Err(SparseError::NonFiniteValue { index: i as u32 });
            }
            if v != 0.0 {
                indices.push(i as u32);
                values.push(v);
            }
        }
        Ok(SparseVector {
            dim,
            indices,
            values,
        })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    /// Number of stored (nonzero) entries.
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.dim as usize];
        for (i, v) in self.iter() {
            dense[i as usize] = v;
        }
        dense
    }

    /// Sum of raw values (not absolute values).
    pub fn value_sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Returns a copy normalized under `mode`.
    ///
    /// `L1SumToOne` rejects negative values; both modes reject vectors
    /// with no nonzero entries. The returned vector satisfies the
    /// corresponding kernel contract to within 1e-9 relative error.
    pub fn normalized(&self, mode: NormalizationMode) -> Result<SparseVector, SparseError> {
        if self.indices.is_empty() {
            return Err(SparseError::AllZeroVector);
        }
        let scale = match mode {
            NormalizationMode::L1SumToOne => {
                for (i, v) in self.iter() {
                    if v < 0.0 {
                        return Err(SparseError::NegativeValueInL1Mode { index: i, value: v });
                    }
                }
                self.value_sum()
            }
            NormalizationMode::L2Unit => self.l2_norm(),
        };
        let values = self.values.iter().map(|v| v / scale).collect();
        Ok(SparseVector {
            dim: self.dim,
            indices: self.indices.clone(),
            values,
        })
    }
}

fn check_dims(u: &SparseVector, v: &SparseVector) -> Result<(), SparseError> {
    if u.dim != v.dim {
        return Err(SparseError::DimensionMismatch {
            left: u.dim,
            right: v.dim,
        });
    }
    Ok(())
}

/// Merge-join inner product over the common support.
pub(crate) fn dot_sorted(u: &SparseVector, v: &SparseVector) -> f64 {
    let mut acc = 0.0f64;
    let (mut i, mut j) = (0usize, 0usize);
    while i < u.indices.len() && j < v.indices.len() {
        match u.indices[i].cmp(&v.indices[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += u.values[i] * v.values[j];
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Merge-join chi-square similarity over the common support. Entries
/// absent from either vector contribute nothing, including the 0/0 case.
pub(crate) fn chi_square_sorted(u: &SparseVector, v: &SparseVector) -> f64 {
    let mut acc = 0.0f64;
    let (mut i, mut j) = (0usize, 0usize);
    while i < u.indices.len() && j < v.indices.len() {
        match u.indices[i].cmp(&v.indices[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                let (a, b) = (u.values[i], v.values[j]);
                acc += 2.0 * a * b / (a + b);
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Inner-product similarity of two L2-unit sparse vectors.
///
/// For unit inputs this equals the cosine of the angle between them and
/// lies in [-1, 1]. The unit-norm contract is checked per call in debug
/// builds only.
pub fn cosine(u: &SparseVector, v: &SparseVector) -> Result<f64, SparseError> {
    check_dims(u, v)?;
    debug_assert!(
        u.nnz() == 0 || (u.l2_norm() - 1.0).abs() < 1e-6,
        "cosine input must have unit L2 norm"
    );
    debug_assert!(
        v.nnz() == 0 || (v.l2_norm() - 1.0).abs() < 1e-6,
        "cosine input must have unit L2 norm"
    );
    Ok(dot_sorted(u, v))
}

/// Chi-square similarity of two nonnegative sum-to-one sparse vectors:
/// the sum of `2 * u_i * v_i / (u_i + v_i)` over the common support.
///
/// Lies in [0, 1] for valid input, reaching 1 exactly when `u == v`.
/// Negative values anywhere in either vector are reported as
/// [`SparseError::NegativeValue`]; the sum-to-one contract is checked in
/// debug builds only.
pub fn chi_square(u: &SparseVector, v: &SparseVector) -> Result<f64, SparseError> {
    check_dims(u, v)?;
    for (i, val) in u.iter().chain(v.iter()) {
        if val < 0.0 {
            return Err(SparseError::NegativeValue {
                index: i,
                value: val,
            });
        }
    }
    debug_assert!(
        u.nnz() == 0 || (u.value_sum() - 1.0).abs() < 1e-6,
        "chi-square input must sum to one"
    );
    debug_assert!(
        v.nnz() == 0 || (v.value_sum() - 1.0).abs() < 1e-6,
        "chi-square input must sum to one"
    );
    Ok(chi_square_sorted(u, v))
}

/// Chi-square distance, `2 - 2 * chi_square(u, v)`.
///
/// Equals the classic sum of `(u_i - v_i)^2 / (u_i + v_i)` over the union
/// support when both inputs sum to one.
pub fn chi_square_distance(u: &SparseVector, v: &SparseVector) -> Result<f64, SparseError> {
    Ok(2.0 - 2.0 * chi_square(u, v)?)
}

/// Similarity of two dense float vectors under `metric`.
///
/// Supports the exact metrics only; signature-based similarity has no
/// dense counterpart. Produces the same value as the sparse kernels on
/// the densified inputs.
pub fn similarity_dense(u: &[f64], v: &[f64], metric: Metric) -> Result<f64, SparseError> {
    if u.len() != v.len() {
        return Err(SparseError::DimensionMismatch {
            left: u.len() as u32,
            right: v.len() as u32,
        });
    }
    match metric {
        Metric::Cosine => Ok(u.iter().zip(v).map(|(a, b)| a * b).sum()),
        Metric::ChiSquare => {
            let mut acc = 0.0f64;
            for (i, (&a, &b)) in u.iter().zip(v).enumerate() {
                if a < 0.0 || b < 0.0 {
                    return Err(SparseError::NegativeValue {
                        index: i as u32,
                        value: a.min(b),
                    });
                }
                let s = a + b;
                if s > 0.0 {
                    acc += 2.0 * a * b / s;
                }
            }
            Ok(acc)
        }
        Metric::HammingSketch => Err(SparseError::UnsupportedDenseMetric(metric)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sv(dim: u32, entries: &[(u32, f64)]) -> SparseVector {
        let indices = entries.iter().map(|e| e.0).collect();
        let values = entries.iter().map(|e| e.1).collect();
        SparseVector::new(dim, indices, values).unwrap()
    }

    #[test]
    fn construction_validates_entries() {
        assert!(matches!(
            SparseVector::new(4, vec![0, 4], vec![1.0, 1.0]),
            Err(SparseError::IndexOutOfBounds { index: 4, dim: 4 })
        ));
        assert!(matches!(
            SparseVector::new(4, vec![2, 1], vec![1.0, 1.0]),
            Err(SparseError::NonAscendingIndices { position: 1 })
        ));
        assert!(matches!(
            SparseVector::new(4, vec![1, 1], vec![1.0, 1.0]),
            Err(SparseError::NonAscendingIndices { position: 1 })
        ));
        assert!(matches!(
            SparseVector::new(4, vec![0], vec![f64::NAN]),
            Err(SparseError::NonFiniteValue { index: 0 })
        ));
        assert!(matches!(
            SparseVector::new(4, vec![0], vec![1.0, 2.0]),
            Err(SparseError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn construction_drops_exact_zeros() {
        let v = SparseVector::new(5, vec![0, 2, 4], vec![1.0, 0.0, 3.0]).unwrap();
        assert_eq!(v.indices(), &[0, 4]);
        assert_eq!(v.values(), &[1.0, 3.0]);
    }

    #[test]
    fn dense_round_trip() {
        let v = sv(6, &[(1, 0.5), (4, -2.0)]);
        let dense = v.to_dense();
        assert_eq!(dense, vec![0.0, 0.5, 0.0, 0.0, -2.0, 0.0]);
        assert_eq!(SparseVector::from_dense(&dense).unwrap(), v);
    }

    #[test]
    fn l1_normalization_splits_mass() {
        let v = sv(4, &[(0, 2.0), (3, 2.0)])
            .normalized(NormalizationMode::L1SumToOne)
            .unwrap();
        assert_eq!(v.values(), &[0.5, 0.5]);

        let v = sv(10, &[(0, 1.0), (5, 2.0), (9, 1.0)])
            .normalized(NormalizationMode::L1SumToOne)
            .unwrap();
        assert_eq!(v.values(), &[0.25, 0.5, 0.25]);
        assert_relative_eq!(v.value_sum(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn l2_normalization_gives_unit_norm() {
        let v = sv(3, &[(1, 3.0), (2, 4.0)])
            .normalized(NormalizationMode::L2Unit)
            .unwrap();
        assert_relative_eq!(v.values()[0], 0.6, max_relative = 1e-12);
        assert_relative_eq!(v.values()[1], 0.8, max_relative = 1e-12);
        assert_relative_eq!(v.l2_norm(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn normalization_rejects_bad_input() {
        let v = sv(4, &[(0, -1.0), (1, 2.0)]);
        assert!(matches!(
            v.normalized(NormalizationMode::L1SumToOne),
            Err(SparseError::NegativeValueInL1Mode { index: 0, .. })
        ));
        let empty = SparseVector::new(4, vec![], vec![]).unwrap();
        assert_eq!(
            empty.normalized(NormalizationMode::L1SumToOne),
            Err(SparseError::AllZeroVector)
        );
        assert_eq!(
            empty.normalized(NormalizationMode::L2Unit),
            Err(SparseError::AllZeroVector)
        );
    }

    #[test]
    fn cosine_matches_hand_computed_values() {
        let u = sv(3, &[(1, 0.6), (2, 0.8)]);
        let v = sv(3, &[(2, 1.0)]);
        assert_relative_eq!(cosine(&u, &v).unwrap(), 0.8, max_relative = 1e-12);
        assert_relative_eq!(cosine(&v, &u).unwrap(), 0.8, max_relative = 1e-12);
    }

    #[test]
    fn cosine_disjoint_support_is_zero() {
        let u = sv(4, &[(0, 1.0)]);
        let v = sv(4, &[(3, 1.0)]);
        assert_eq!(cosine(&u, &v).unwrap(), 0.0);
    }

    #[test]
    fn cosine_self_similarity_is_one() {
        let v = sv(5, &[(0, 1.0), (2, 2.0), (4, -1.0)])
            .normalized(NormalizationMode::L2Unit)
            .unwrap();
        assert_relative_eq!(cosine(&v, &v).unwrap(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn chi_square_matches_hand_computed_value() {
        let u = sv(3, &[(0, 0.5), (1, 0.5)]);
        let v = sv(3, &[(0, 0.25), (1, 0.25), (2, 0.5)]);
        let expected = 2.0 / 3.0;
        assert_relative_eq!(chi_square(&u, &v).unwrap(), expected, max_relative = 1e-12);
        assert_relative_eq!(chi_square(&v, &u).unwrap(), expected, max_relative = 1e-12);
        assert_relative_eq!(
            chi_square_distance(&u, &v).unwrap(),
            2.0 - 2.0 * expected,
            max_relative = 1e-12
        );
    }

    #[test]
    fn chi_square_self_similarity_is_one() {
        let v = sv(8, &[(0, 0.2), (3, 1.7), (7, 0.6)])
            .normalized(NormalizationMode::L1SumToOne)
            .unwrap();
        assert_relative_eq!(chi_square(&v, &v).unwrap(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn chi_square_disjoint_support_is_zero() {
        let u = sv(4, &[(0, 1.0)]);
        let v = sv(4, &[(2, 0.5), (3, 0.5)]);
        assert_eq!(chi_square(&u, &v).unwrap(), 0.0);
        assert_eq!(chi_square_distance(&u, &v).unwrap(), 2.0);
    }

    #[test]
    fn chi_square_rejects_negative_values() {
        let u = sv(3, &[(0, -0.5), (1, 1.5)]);
        let v = sv(3, &[(0, 0.5), (1, 0.5)]);
        assert!(matches!(
            chi_square(&u, &v),
            Err(SparseError::NegativeValue { index: 0, .. })
        ));
        assert!(matches!(
            chi_square(&v, &u),
            Err(SparseError::NegativeValue { index: 0, .. })
        ));
    }

    #[test]
    fn kernels_reject_dimension_mismatch() {
        let u = sv(3, &[(0, 1.0)]);
        let v = sv(4, &[(0, 1.0)]);
        assert!(matches!(
            cosine(&u, &v),
            Err(SparseError::DimensionMismatch { left: 3, right: 4 })
        ));
        assert!(matches!(
            chi_square(&u, &v),
            Err(SparseError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            similarity_dense(&[1.0], &[1.0, 0.0], Metric::Cosine),
            Err(SparseError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dense_path_agrees_with_sparse_kernels() {
        let u = sv(6, &[(0, 0.3), (2, 0.7)]);
        let v = sv(6, &[(2, 0.4), (5, 0.6)]);
        let (du, dv) = (u.to_dense(), v.to_dense());
        assert_relative_eq!(
            similarity_dense(&du, &dv, Metric::ChiSquare).unwrap(),
            chi_square_sorted(&u, &v),
            max_relative = 1e-12
        );
        let a = sv(6, &[(1, 0.6), (2, 0.8)]);
        let b = sv(6, &[(2, 1.0)]);
        assert_relative_eq!(
            similarity_dense(&a.to_dense(), &b.to_dense(), Metric::Cosine).unwrap(),
            0.8,
            max_relative = 1e-12
        );
    }

    #[test]
    fn dense_path_rejects_signature_metric() {
        assert!(matches!(
            similarity_dense(&[1.0], &[1.0], Metric::HammingSketch),
            Err(SparseError::UnsupportedDenseMetric(_))
        ));
    }

    #[test]
    fn dense_chi_square_skips_zero_zero_terms() {
        let u = [0.0, 0.5, 0.5, 0.0];
        let v = [0.0, 0.5, 0.0, 0.5];
        assert_relative_eq!(
            similarity_dense(&u, &v, Metric::ChiSquare).unwrap(),
            0.5,
            max_relative = 1e-12
        );
    }
}
