//! Finite-alphabet signal sets and exhaustive vector-symbol enumeration.
//!
//! A [`Constellation`] is a unit-average-energy point set with distinct bit
//! labels. A [`SymbolSpace`] enumerates every n-dimensional vector symbol a
//! user can transmit, in lexicographic order of per-coordinate point
//! indices, together with the pairwise bit-error weight matrix `beta`
//! (Hamming distance of the concatenated labels).

use crate::{C64, Error, Result};
use ndarray::prelude::*;

/// Default cap on `|points|^n`. Objective sums and exhaustive detection are
/// quadratic in the vector-symbol count, so enumeration fails loudly beyond
/// this size.
pub const DEFAULT_ENUMERATION_CAP: usize = 65_536;

/// A finite signal set with bit labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub name: String,
    pub points: Vec<C64>,
    pub bit_labels: Vec<String>,
}

impl Constellation {
    /// Unit-energy BPSK: `+1 -> "0"`, `-1 -> "1"`.
    pub fn bpsk() -> Self {
        Constellation {
            name: "bpsk".into(),
            points: vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)],
            bit_labels: vec!["0".into(), "1".into()],
        }
    }

    /// Gray-labeled unit-energy QPSK. The first bit selects the sign of the
    /// in-phase component, the second the quadrature component.
    pub fn qpsk() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Constellation {
            name: "qpsk".into(),
            points: vec![
                C64::new(s, s),
                C64::new(s, -s),
                C64::new(-s, s),
                C64::new(-s, -s),
            ],
            bit_labels: vec!["00".into(), "01".into(), "10".into(), "11".into()],
        }
    }

    /// A user-supplied constellation, validated against the type invariants.
    pub fn custom(points: Vec<C64>, bit_labels: Vec<String>) -> Result<Self> {
        let c = Constellation {
            name: "custom".into(),
            points,
            bit_labels,
        };
        c.validate()?;
        Ok(c)
    }

    /// Checks the invariants: matching lengths, power-of-two size, distinct
    /// equal-length labels, and unit average energy.
    pub fn validate(&self) -> Result<()> {
        let m = self.points.len();
        if m == 0 || self.bit_labels.len() != m {
            return Err(Error::Validation(format!(
                "constellation: {} points but {} bit labels",
                m,
                self.bit_labels.len()
            )));
        }
        if !m.is_power_of_two() {
            return Err(Error::Validation(format!(
                "constellation: {m} points is not a power of two"
            )));
        }
        let label_len = self.bit_labels[0].len();
        if label_len == 0 || self.bit_labels.iter().any(|l| l.len() != label_len) {
            return Err(Error::Validation(
                "constellation: bit labels must be nonempty and of equal length".into(),
            ));
        }
        if self
            .bit_labels
            .iter()
            .any(|l| l.bytes().any(|b| b != b'0' && b != b'1'))
        {
            return Err(Error::Validation(
                "constellation: bit labels must consist of 0/1 characters".into(),
            ));
        }
        for (i, a) in self.bit_labels.iter().enumerate() {
            for b in self.bit_labels.iter().skip(i + 1) {
                if a == b {
                    return Err(Error::Validation(format!(
                        "constellation: duplicate bit label {a:?}"
                    )));
                }
            }
        }
        let avg_energy: f64 =
            self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / m as f64;
        if (avg_energy - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "constellation: average point energy {avg_energy} != 1"
            )));
        }
        Ok(())
    }

    pub fn bits_per_point(&self) -> usize {
        self.bit_labels[0].len()
    }
}

/// Exhaustive, ordered enumeration of one user's vector symbols.
#[derive(Debug, Clone)]
pub struct SymbolSpace {
    pub user_index: usize,
    /// Vector dimension (streams).
    pub dimension: usize,
    /// All `|points|^dimension` vector symbols in lexicographic order of
    /// per-coordinate point indices (first coordinate most significant).
    pub vectors: Vec<Array1<C64>>,
    /// `beta[j][k]`: Hamming distance between the concatenated bit labels of
    /// vector symbols `j` and `k`.
    pub beta: Array2<u32>,
    /// Bits carried by one vector symbol.
    pub bits_per_vector: usize,
    pub(crate) points_per_coord: usize,
}

impl SymbolSpace {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Maps per-coordinate point indices back to the vector-symbol index.
    pub fn index_of_digits(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.dimension);
        digits
            .iter()
            .fold(0usize, |acc, &d| acc * self.points_per_coord + d)
    }
}

/// Enumerates all vector symbols of dimension `n` with the default cap.
pub fn enumerate_vectors(c: &Constellation, user_index: usize, n: usize) -> Result<SymbolSpace> {
    enumerate_vectors_capped(c, user_index, n, DEFAULT_ENUMERATION_CAP)
}

/// Enumerates all vector symbols of dimension `n`, failing when
/// `|points|^n` exceeds `cap`.
pub fn enumerate_vectors_capped(
    c: &Constellation,
    user_index: usize,
    n: usize,
    cap: usize,
) -> Result<SymbolSpace> {
    c.validate()?;
    if n == 0 {
        return Err(Error::Validation("symbol space: dimension must be >= 1".into()));
    }
    let m = c.points.len();
    let total = m
        .checked_pow(n as u32)
        .filter(|&t| t <= cap)
        .ok_or(Error::Capacity {
            requested: m.checked_pow(n as u32).unwrap_or(usize::MAX),
            cap,
        })?;

    let mut vectors = Vec::with_capacity(total);
    let mut labels: Vec<String> = Vec::with_capacity(total);
    let mut digits = vec![0usize; n];
    for idx in 0..total {
        let mut rem = idx;
        for t in (0..n).rev() {
            digits[t] = rem % m;
            rem /= m;
        }
        let v = Array1::from_iter(digits.iter().map(|&d| c.points[d]));
        let label: String = digits.iter().map(|&d| c.bit_labels[d].as_str()).collect();
        vectors.push(v);
        labels.push(label);
    }

    let mut beta = Array2::<u32>::zeros((total, total));
    for j in 0..total {
        for k in (j + 1)..total {
            let dist = labels[j]
                .bytes()
                .zip(labels[k].bytes())
                .filter(|(a, b)| a != b)
                .count() as u32;
            beta[[j, k]] = dist;
            beta[[k, j]] = dist;
        }
    }

    Ok(SymbolSpace {
        user_index,
        dimension: n,
        vectors,
        beta,
        bits_per_vector: n * c.bits_per_point(),
        points_per_coord: m,
    })
}

/// All ordered error vectors `(j, k, x[j] - x[k])` with `j != k`.
pub fn error_vectors(s: &SymbolSpace) -> Vec<(usize, usize, Array1<C64>)> {
    let n = s.len();
    let mut out = Vec::with_capacity(n * (n - 1));
    for j in 0..n {
        for k in 0..n {
            if j != k {
                out.push((j, k, &s.vectors[j] - &s.vectors[k]));
            }
        }
    }
    out
}
