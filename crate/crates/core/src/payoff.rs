//! Sequence-form payoff matrix `P` (rows: min player's sequences, columns: max
//! player's sequences). Entries already carry chance weights.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transpose {
    No,
    Yes,
}

/// Compressed storage for fast products in both directions.
#[derive(Debug, Clone, PartialEq)]
struct Compressed {
    ptr: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl Compressed {
    fn build(major: usize, entries: impl Iterator<Item = (usize, usize, f64)> + Clone) -> Self {
        let mut ptr = vec![0usize; major + 1];
        for (m, _, _) in entries.clone() {
            ptr[m + 1] += 1;
        }
        for i in 0..major {
            ptr[i + 1] += ptr[i];
        }
        let nnz = ptr[major];
        let mut fill = ptr.clone();
        let mut idx = vec![0; nnz];
        let mut val = vec![0.0; nnz];
        for (m, k, v) in entries {
            let slot = fill[m];
            idx[slot] = k;
            val[slot] = v;
            fill[m] += 1;
        }
        Compressed { ptr, idx, val }
    }

    fn mul_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.ptr[i]..self.ptr[i + 1] {
                s += self.val[k] * x[self.idx[k]];
            }
            *o = s;
        }
    }
}

/// Coordinate triplet `[row, col, value]` as serialized in game files.
pub type Triplet = (usize, usize, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct SparsePayoff {
    rows: usize,
    cols: usize,
    triplets: Vec<Triplet>,
    by_row: Compressed,
    by_col: Compressed,
}

impl SparsePayoff {
    /// Builds `P` from triplets. Duplicate coordinates are rejected.
    pub fn new(rows: usize, cols: usize, triplets: Vec<Triplet>) -> Result<Self> {
        let mut keys = Vec::with_capacity(triplets.len());
        for (i, &(r, c, v)) in triplets.iter().enumerate() {
            if r >= rows || c >= cols {
                return Err(Error::PayoffOutOfRange {
                    row: r,
                    col: c,
                    rows,
                    cols,
                });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "payoff",
                    index: i,
                });
            }
            keys.push((r, c));
        }
        keys.sort_unstable();
        if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicatePayoff {
                row: w[0].0,
                col: w[0].1,
            });
        }
        let by_row = Compressed::build(rows, triplets.iter().copied());
        let by_col = Compressed::build(cols, triplets.iter().map(|&(r, c, v)| (c, r, v)));
        Ok(SparsePayoff {
            rows,
            cols,
            triplets,
            by_row,
            by_col,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.triplets.len()
    }

    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    /// `P x` or `P^T x`.
    pub fn apply(&self, x: &[f64], transpose: Transpose) -> Result<Vec<f64>> {
        let (expected, out_len) = match transpose {
            Transpose::No => (self.cols, self.rows),
            Transpose::Yes => (self.rows, self.cols),
        };
        if x.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "payoff operand",
                expected,
                found: x.len(),
            });
        }
        let mut out = vec![0.0; out_len];
        match transpose {
            Transpose::No => self.by_row.mul_into(x, &mut out),
            Transpose::Yes => self.by_col.mul_into(x, &mut out),
        }
        Ok(out)
    }

    /// `out = P v` without allocation; dimensions must already match.
    pub(crate) fn mul_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        self.by_row.mul_into(v, out);
    }

    /// `out = P^T u` without allocation.
    pub(crate) fn mul_t_into(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.rows);
        self.by_col.mul_into(u, out);
    }

    /// `u^T P v`.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        self.triplets.iter().map(|&(r, c, p)| u[r] * p * v[c]).sum()
    }

    /// `-P^T`, the payoff matrix seen from the other side.
    pub fn negated_transpose(&self) -> SparsePayoff {
        SparsePayoff::new(
            self.cols,
            self.rows,
            self.triplets.iter().map(|&(r, c, v)| (c, r, -v)).collect(),
        )
        .expect("transpose of a valid payoff is valid")
    }

    /// Returns a copy with entry `(row, col)` replaced (inserted when absent).
    pub fn with_entry(&self, row: usize, col: usize, value: f64) -> Result<SparsePayoff> {
        let mut t = self.triplets.clone();
        match t.iter_mut().find(|e| e.0 == row && e.1 == col) {
            Some(e) => e.2 = value,
            None => t.push((row, col, value)),
        }
        SparsePayoff::new(self.rows, self.cols, t)
    }

    /// Value at `(row, col)`, zero when structurally absent.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        let (lo, hi) = (self.by_row.ptr[row], self.by_row.ptr[row + 1]);
        (lo..hi)
            .find(|&k| self.by_row.idx[k] == col)
            .map_or(0.0, |k| self.by_row.val[k])
    }
}
