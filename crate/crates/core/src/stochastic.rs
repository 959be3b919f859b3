//! Dense row-stochastic matrices and the cut / pair flow functionals.
//!
//! Indices are 0-based inside the library. [`IndexSet::from_one_based`] and the
//! error variants translate to the 1-based convention used by reports and
//! scenario files.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Default tolerance for [`StochasticMatrix::validate`].
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// A dense `m x m` matrix with nonnegative entries and unit row sums.
#[derive(Clone, PartialEq)]
pub struct StochasticMatrix {
    m: usize,
    data: Vec<f64>,
}

impl StochasticMatrix {
    /// Validates `rows` and renormalizes row sums that are within `tolerance` of 1.
    ///
    /// Entries in `[-tolerance, 0)` are clamped to zero before renormalizing.
    pub fn validate(rows: &[Vec<f64>], tolerance: f64) -> Result<Self> {
        if !(tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {tolerance}"
            )));
        }
        let m = rows.len();
        if m == 0 {
            return Err(Error::Empty);
        }
        let mut data = Vec::with_capacity(m * m);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::NonSquare {
                    row: i + 1,
                    len: row.len(),
                    expected: m,
                });
            }
            data.extend_from_slice(row);
        }
        Self::validate_flat(m, data, tolerance)
    }

    /// Row-major variant of [`StochasticMatrix::validate`].
    pub fn validate_flat(m: usize, mut data: Vec<f64>, tolerance: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::Empty);
        }
        if data.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                found: data.len(),
            });
        }
        for i in 0..m {
            let row = &mut data[i * m..(i + 1) * m];
            for (j, w) in row.iter_mut().enumerate() {
                if !w.is_finite() {
                    return Err(Error::NonFinite { row: i + 1, col: j + 1 });
                }
                if *w < -tolerance {
                    return Err(Error::NegativeEntry {
                        row: i + 1,
                        col: j + 1,
                        value: *w,
                    });
                }
                if *w < 0.0 {
                    *w = 0.0;
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > tolerance {
                return Err(Error::RowSumViolation { row: i + 1, sum });
            }
            if sum != 1.0 {
                row.iter_mut().for_each(|w| *w /= sum);
            }
        }
        Ok(Self { m, data })
    }

    /// Builds a matrix the caller already knows to be stochastic.
    pub(crate) fn from_flat_unchecked(m: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), m * m);
        debug_assert!(
            (0..m).all(|i| (data[i * m..(i + 1) * m].iter().sum::<f64>() - 1.0).abs() < 1e-9),
            "row sums drifted"
        );
        Self { m, data }
    }

    pub fn identity(m: usize) -> Self {
        let mut data = vec![0.0; m * m];
        for i in 0..m {
            data[i * m + i] = 1.0;
        }
        Self { m, data }
    }

    /// The averaging matrix `(1/m) e e^T`.
    pub fn uniform(m: usize) -> Self {
        Self {
            m,
            data: vec![1.0 / m as f64; m * m],
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.m).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_doubly_stochastic(&self, tolerance: f64) -> bool {
        (0..self.m).all(|j| ((0..self.m).map(|i| self.get(i, j)).sum::<f64>() - 1.0).abs() <= tolerance)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.m).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// One step of `x(k+1) = W(k) x(k)`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                found: x.len(),
            });
        }
        let mut out = vec![0.0; self.m];
        self.apply_columns(x, 1, &mut out);
        Ok(out)
    }

    /// Applies the matrix to `cols` state vectors stored agent-major
    /// (`state[i * cols + c]` is agent `i` of column `c`).
    ///
    /// Uses the increment form `x_i + sum_{j != i} W_ij (x_j - x_i)`, which is
    /// algebraically equal to `W x` for stochastic `W` and keeps consensus
    /// vectors fixed bit for bit.
    pub fn apply_columns(&self, state: &[f64], cols: usize, out: &mut [f64]) {
        let m = self.m;
        debug_assert_eq!(state.len(), m * cols);
        debug_assert_eq!(out.len(), m * cols);
        for i in 0..m {
            let own = &state[i * cols..(i + 1) * cols];
            let dst = &mut out[i * cols..(i + 1) * cols];
            dst.copy_from_slice(own);
            for (j, &w) in self.row(i).iter().enumerate() {
                if j == i || w == 0.0 {
                    continue;
                }
                let other = &state[j * cols..(j + 1) * cols];
                for c in 0..cols {
                    dst[c] += w * (other[c] - own[c]);
                }
            }
        }
    }

    /// `W_ij + W_ji`, the per-step increment of the pair's flow.
    pub fn pair_flow(&self, i: usize, j: usize) -> Result<f64> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i == j {
            return Err(Error::EqualIndices(i + 1));
        }
        Ok(self.get(i, j) + self.get(j, i))
    }

    /// `W_S = sum_{i in S, j not in S} (W_ij + W_ji)`.
    pub fn cut_flow(&self, cut: &IndexSet) -> Result<f64> {
        self.check_dim(cut.ambient())?;
        cut.require_nontrivial()?;
        let inside = cut.indicator();
        let mut total = 0.0;
        for i in 0..self.m {
            if !inside[i] {
                continue;
            }
            for j in 0..self.m {
                if !inside[j] {
                    total += self.get(i, j) + self.get(j, i);
                }
            }
        }
        Ok(total)
    }

    /// Entrywise `sum_ij |A_ij - B_ij|`.
    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        self.check_dim(other.m)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .sum())
    }

    pub(crate) fn check_dim(&self, m: usize) -> Result<()> {
        if m != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                found: m,
            });
        }
        Ok(())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.m {
            return Err(Error::IndexOutOfRange {
                index: i + 1,
                m: self.m,
            });
        }
        Ok(())
    }
}

impl fmt::Debug for StochasticMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries((0..self.m).map(|i| self.row(i))).finish()
    }
}

impl Serialize for StochasticMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

/// Free-function form of [`StochasticMatrix::validate`].
pub fn validate_stochastic(rows: &[Vec<f64>], tolerance: f64) -> Result<StochasticMatrix> {
    StochasticMatrix::validate(rows, tolerance)
}

pub fn cut_flow(matrix: &StochasticMatrix, cut: &IndexSet) -> Result<f64> {
    matrix.cut_flow(cut)
}

pub fn pair_flow(matrix: &StochasticMatrix, i: usize, j: usize) -> Result<f64> {
    matrix.pair_flow(i, j)
}

pub fn l1_matrix_distance(a: &StochasticMatrix, b: &StochasticMatrix) -> Result<f64> {
    a.l1_distance(b)
}

/// A sorted, duplicate-free subset of `{0, .., m-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexSet {
    m: usize,
    members: Vec<usize>,
}

impl IndexSet {
    pub fn new(m: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut members: Vec<usize> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if let Some(&bad) = members.iter().find(|&&i| i >= m) {
            return Err(Error::IndexOutOfRange { index: bad + 1, m });
        }
        if members.is_empty() {
            return Err(Error::TrivialCut);
        }
        Ok(Self { m, members })
    }

    /// Builds a set from 1-based indices as written in scenario files.
    pub fn from_one_based(m: usize, members: &[usize]) -> Result<Self> {
        if let Some(&bad) = members.iter().find(|&&i| i == 0 || i > m) {
            return Err(Error::IndexOutOfRange { index: bad, m });
        }
        Self::new(m, members.iter().map(|i| i - 1))
    }

    /// Set from the bits of `mask` (bit `i` selects index `i`).
    pub fn from_mask(m: usize, mask: u64) -> Result<Self> {
        Self::new(m, (0..m).filter(|i| mask >> i & 1 == 1))
    }

    pub fn ambient(&self) -> usize {
        self.m
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn is_nontrivial(&self) -> bool {
        !self.members.is_empty() && self.members.len() < self.m
    }

    pub fn require_nontrivial(&self) -> Result<()> {
        if self.is_nontrivial() {
            Ok(())
        } else {
            Err(Error::TrivialCut)
        }
    }

    /// The complement; fails when `self` is the whole index set.
    pub fn complement(&self) -> Result<Self> {
        Self::new(self.m, (0..self.m).filter(|i| !self.contains(*i)))
    }

    pub fn indicator(&self) -> Vec<bool> {
        let mut v = vec![false; self.m];
        for &i in &self.members {
            v[i] = true;
        }
        v
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.members.iter().map(|i| i + 1).collect()
    }
}
