//! Sign Cauchy random projections.
//!
//! A [`CauchyProjector`] maps a sparse vector to `k` projections
//! `x_j = sum_i v_i * r_ij` with i.i.d. standard Cauchy entries `r_ij`,
//! then keeps only the signs, packed 64 per `u64` word. The fraction of
//! positions where two signatures agree (the collision fraction) is a
//! monotone proxy for chi-square similarity between the underlying
//! nonnegative vectors, and [`estimate_chi_square`] converts it back to a
//! similarity estimate.
//!
//! The projection matrix is never materialized: `r_ij` is recomputed on
//! demand from `(seed, i, j)` through a counter-based generator, so a
//! projector is three integers and any two projectors with equal
//! `(dim, k, seed)` produce bit-identical signatures.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::fileio::{
    corrupt, read_header, read_u32, read_u64, write_header, write_u32, write_u64, FileError,
};
use crate::rng::{stream_at, u01_open};
use crate::sparse::SparseVector;

const SIGNATURE_MAGIC: &[u8; 4] = b"SCRP";
const SIGNATURE_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum SketchError {
    #[error("sketch width {k} must be a positive multiple of 64")]
    InvalidSketchWidth { k: u32 },
    #[error("projector dimension must be positive")]
    ZeroDimension,
    #[error("dimension mismatch: projector {projector}, vector {vector}")]
    DimensionMismatch { projector: u32, vector: u32 },
    #[error("inverse CDF input {0} outside the open interval (0, 1)")]
    DomainError(f64),
    #[error("signature widths differ: {left} vs {right}")]
    SignatureLengthMismatch { left: u32, right: u32 },
    #[error("signature of width {k} needs {expected} words, got {found}")]
    WordCountMismatch { k: u32, expected: usize, found: usize },
}

/// Standard Cauchy draw from a uniform in the open interval (0, 1) via
/// the inverse CDF `tan(pi * (u - 1/2))`.
pub fn sample_cauchy(u: f64) -> Result<f64, SketchError> {
    if !(u > 0.0 && u < 1.0) {
        return Err(SketchError::DomainError(u));
    }
    Ok(cauchy_tan(u))
}

fn cauchy_tan(u: f64) -> f64 {
    (std::f64::consts::PI * (u - 0.5)).tan()
}

/// Bit-packed sign pattern of `k` random projections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitSignature {
    k: u32,
    words: Vec<u64>,
}

impl BitSignature {
    /// Wraps raw words as a signature of width `k`.
    pub fn from_words(k: u32, words: Vec<u64>) -> Result<Self, SketchError> {
        if k == 0 || !k.is_multiple_of(64) {
            return Err(SketchError::InvalidSketchWidth { k });
        }
        let expected = (k / 64) as usize;
        if words.len() != expected {
            return Err(SketchError::WordCountMismatch {
                k,
                expected,
                found: words.len(),
            });
        }
        Ok(BitSignature { k, words })
    }

    /// Number of projections (bits).
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Sign bit of projection `j`: true when the projection was positive.
    pub fn bit(&self, j: u32) -> bool {
        debug_assert!(j < self.k);
        self.words[(j / 64) as usize] >> (j % 64) & 1 == 1
    }
}

/// Number of positions where the two sign patterns differ.
pub fn hamming_distance(a: &BitSignature, b: &BitSignature) -> Result<u32, SketchError> {
    if a.k != b.k {
        return Err(SketchError::SignatureLengthMismatch {
            left: a.k,
            right: b.k,
        });
    }
    Ok(a.words
        .iter()
        .zip(&b.words)
        .map(|(x, y)| (x ^ y).count_ones())
        .sum())
}

/// Fraction of positions where the two sign patterns agree, in [0, 1].
pub fn collision_fraction(a: &BitSignature, b: &BitSignature) -> Result<f64, SketchError> {
    let distance = hamming_distance(a, b)?;
    Ok((a.k - distance) as f64 / a.k as f64)
}

/// Chi-square similarity estimate from a collision fraction:
/// `cos(pi * (1 - c))`, clamped to [0, 1].
///
/// Inverts the collision model `c = 1 - acos(rho) / pi`. Collision
/// fractions below one half, which a valid similarity in [0, 1] can only
/// produce through sampling noise, clamp to zero.
pub fn estimate_chi_square(a: &BitSignature, b: &BitSignature) -> Result<f64, SketchError> {
    let c = collision_fraction(a, b)?;
    Ok((std::f64::consts::PI * (1.0 - c)).cos().clamp(0.0, 1.0))
}

/// Matrix-free sign Cauchy projector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CauchyProjector {
    dim: u32,
    k: u32,
    seed: u64,
}

impl CauchyProjector {
    /// Creates a projector for `dim`-dimensional input with `k`
    /// projections. `k` must be a positive multiple of 64.
    pub fn new(dim: u32, k: u32, seed: u64) -> Result<Self, SketchError> {
        if dim == 0 {
            return Err(SketchError::ZeroDimension);
        }
        if k == 0 || !k.is_multiple_of(64) {
            return Err(SketchError::InvalidSketchWidth { k });
        }
        Ok(CauchyProjector { dim, k, seed })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Matrix entry `r_ij`, derived from `(seed, i, j)` alone.
    fn cauchy_at(&self, i: u32, j: u32) -> f64 {
        let counter = i as u64 * self.k as u64 + j as u64;
        cauchy_tan(u01_open(stream_at(self.seed, counter)))
    }

    /// Projects a sparse vector and packs the projection signs.
    ///
    /// A projection that is exactly zero (in particular every projection
    /// of an all-zero vector) yields a zero bit. Signatures are invariant
    /// under positive scaling of the input.
    pub fn sketch(&self, v: &SparseVector) -> Result<BitSignature, SketchError> {
        if v.dim() != self.dim {
            return Err(SketchError::DimensionMismatch {
                projector: self.dim,
                vector: v.dim(),
            });
        }
        let mut acc = vec![0.0f64; self.k as usize];
        for (i, val) in v.iter() {
            for (j, slot) in acc.iter_mut().enumerate() {
                *slot += val * self.cauchy_at(i, j as u32);
            }
        }
        let mut words = vec![0u64; (self.k / 64) as usize];
        for (j, &x) in acc.iter().enumerate() {
            if x > 0.0 {
                words[j / 64] |= 1u64 << (j % 64);
            }
        }
        Ok(BitSignature { k: self.k, words })
    }
}

/// Writes a signature set with its projector parameters.
pub fn save_signatures(
    path: &Path,
    projector: &CauchyProjector,
    signatures: &[BitSignature],
) -> Result<(), FileError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_signatures_to(&mut w, projector, signatures)?;
    w.flush()?;
    Ok(())
}

/// Reads a signature set and reconstructs the projector that produced it.
pub fn load_signatures(path: &Path) -> Result<(CauchyProjector, Vec<BitSignature>), FileError> {
    let mut r = BufReader::new(File::open(path)?);
    read_signatures_from(&mut r)
}

fn write_signatures_to(
    w: &mut impl Write,
    projector: &CauchyProjector,
    signatures: &[BitSignature],
) -> Result<(), FileError> {
    write_header(w, SIGNATURE_MAGIC, SIGNATURE_VERSION)?;
    write_u32(w, projector.k())?;
    write_u64(w, signatures.len() as u64)?;
    write_u64(w, projector.seed())?;
    write_u64(w, projector.dim() as u64)?;
    for sig in signatures {
        if sig.k() != projector.k() {
            return Err(corrupt(format!(
                "signature width {} does not match projector width {}",
                sig.k(),
                projector.k()
            )));
        }
        for &word in sig.words() {
            write_u64(w, word)?;
        }
    }
    Ok(())
}

fn read_signatures_from(
    r: &mut impl Read,
) -> Result<(CauchyProjector, Vec<BitSignature>), FileError> {
    read_header(r, SIGNATURE_MAGIC, SIGNATURE_VERSION)?;
    let k = read_u32(r, "sketch width")?;
    let count = read_u64(r, "signature count")?;
    let seed = read_u64(r, "seed")?;
    let dim = read_u64(r, "dimension")?;
    let dim = u32::try_from(dim).map_err(|_| corrupt("dimension exceeds u32"))?;
    let projector = CauchyProjector::new(dim, k, seed)
        .map_err(|e| corrupt(format!("invalid projector parameters: {e}")))?;
    let words_per_sig = (k / 64) as usize;
    let mut signatures = Vec::with_capacity(count.min(1 << 24) as usize);
    for _ in 0..count {
        let mut words = Vec::with_capacity(words_per_sig);
        for _ in 0..words_per_sig {
            words.push(read_u64(r, "signature word")?);
        }
        signatures.push(BitSignature { k, words });
    }
    Ok((projector, signatures))
}
