//! Per-snapshot arithmetic cost of each LCMV algorithm.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostedAlgorithm {
    FullSg,
    FullRls,
    PropSg,
    PropRls,
    MswfSg,
    MswfRls,
    Avf,
}

impl CostedAlgorithm {
    pub const ALL: [CostedAlgorithm; 7] = [
        CostedAlgorithm::FullSg,
        CostedAlgorithm::FullRls,
        CostedAlgorithm::PropSg,
        CostedAlgorithm::PropRls,
        CostedAlgorithm::MswfSg,
        CostedAlgorithm::MswfRls,
        CostedAlgorithm::Avf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CostedAlgorithm::FullSg => "full-sg",
            CostedAlgorithm::FullRls => "full-rls",
            CostedAlgorithm::PropSg => "prop-sg",
            CostedAlgorithm::PropRls => "prop-rls",
            CostedAlgorithm::MswfSg => "mswf-sg",
            CostedAlgorithm::MswfRls => "mswf-rls",
            CostedAlgorithm::Avf => "avf",
        }
    }

    /// `(additions, multiplications)` for `M` elements and rank `D`.
    pub fn counts(self, m: u64, d: u64) -> (u64, u64) {
        let m2 = m * m;
        let d2 = d * d;
        // Each polynomial is arranged so every intermediate stays non-negative.
        match self {
            CostedAlgorithm::FullSg => (3 * m + 1, 3 * m + 2),
            CostedAlgorithm::FullRls => (3 * m2 + 3 - 2 * m, 6 * m2 + 2 * m + 2),
            CostedAlgorithm::PropSg => (3 * d * m + 2 * m + 2 * d - 2, 3 * d * m + m + 5 * d + 2),
            CostedAlgorithm::PropRls => (3 * m2 + 3 + 3 * d2 + 3 - 2 * m - 8 * d, 7 * m2 + 2 * m + 7 * d2 + 9 * d),
            CostedAlgorithm::MswfSg => (d * m2 + 3 * d - m2 - 2, d * m2 + 2 * d * m + 4 * d + 1 - m2),
            CostedAlgorithm::MswfRls => (d * m2 + m2 + 6 * d2 + 2 - 8 * d, d * m2 + m2 + 2 * d * m + 3 * d + 2),
            CostedAlgorithm::Avf => {
                let mm1 = m - 1;
                (
                    d * (m2 + 3 * mm1 * mm1) + d * (5 * mm1 + 1) + 2 * m - 1,
                    d * (4 * m2 + 4 * m + 1) + 4 * m + 2,
                )
            }
        }
    }
}

impl fmt::Display for CostedAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ComplexityCount {
    pub algorithm: CostedAlgorithm,
    pub additions: u64,
    pub multiplications: u64,
}

pub fn complexity_counts(m: usize, d: usize) -> Result<Vec<ComplexityCount>> {
    if m == 0 || d == 0 || d > m {
        return Err(Error::InvalidParameter(format!("complexity needs 1 <= D <= M, got M={m}, D={d}")));
    }
    let (m, d) = (m as u64, d as u64);
    Ok(CostedAlgorithm::ALL
        .iter()
        .map(|&algorithm| {
            let (additions, multiplications) = algorithm.counts(m, d);
            ComplexityCount { algorithm, additions, multiplications }
        })
        .collect())
}
