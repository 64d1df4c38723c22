//! Metric selection shared by the index, the evaluation harness, and the
//! binary file formats.

use std::fmt;

use crate::sparse::NormalizationMode;

/// Similarity metric used to rank vectors. Higher is always closer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    /// Inner product of L2-unit sparse vectors.
    Cosine,
    /// Chi-square similarity of nonnegative sum-to-one sparse vectors.
    ChiSquare,
    /// Collision fraction of sign Cauchy projection bit signatures; an
    /// approximation of chi-square similarity.
    HammingSketch,
}

impl Metric {
    /// Normalization the metric expects on raw input vectors.
    ///
    /// `HammingSketch` compares signatures, which are scale invariant, but
    /// the chi-square similarity the signatures estimate is defined on
    /// sum-to-one vectors, so that is what sketching expects.
    pub fn required_normalization(self) -> NormalizationMode {
        match self {
            Metric::Cosine => NormalizationMode::L2Unit,
            Metric::ChiSquare | Metric::HammingSketch => NormalizationMode::L1SumToOne,
        }
    }

    /// Stable one-byte tag used in index files.
    pub(crate) fn tag(self) -> u8 {
        match self {
            Metric::Cosine => 0,
            Metric::ChiSquare => 1,
            Metric::HammingSketch => 2,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Metric> {
        match tag {
            0 => Some(Metric::Cosine),
            1 => Some(Metric::ChiSquare),
            2 => Some(Metric::HammingSketch),
            _ => None,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Metric::Cosine => "cosine",
            Metric::ChiSquare => "chi2",
            Metric::HammingSketch => "hamming",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "chi2" => Ok(Metric::ChiSquare),
            "hamming" => Ok(Metric::HammingSketch),
            other => Err(format!(
                "unknown metric '{other}' (expected cosine, chi2, or hamming)"
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_round_trips() {
        for m in [Metric::Cosine, Metric::ChiSquare, Metric::HammingSketch] {
            assert_eq!(Metric::from_tag(m.tag()), Some(m));
        }
        assert_eq!(Metric::from_tag(3), None);
    }

    #[test]
    fn display_and_parse_round_trip() {
        for m in [Metric::Cosine, Metric::ChiSquare, Metric::HammingSketch] {
            assert_eq!(m.to_string().parse::<Metric>().unwrap(), m);
        }
        assert!("euclidean".parse::<Metric>().is_err());
    }
}
