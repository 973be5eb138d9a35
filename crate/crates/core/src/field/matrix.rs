//! Dense matrices over a prime field with exact rank computation.
//!
//! Rank is decided by sequential Gaussian elimination; over Z_p there is no
//! pivot-size concern, so the first nonzero entry in column order is always
//! taken. Deficient-column diagnosis follows the definition directly: a
//! column is deficient iff deleting it leaves the rank unchanged.

use std::fmt;

use super::{FieldElement, PrimeField};

/// Row-major dense matrix over Z_p.
#[derive(Clone, PartialEq, Eq)]
pub struct FieldMatrix {
    field: PrimeField,
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl fmt::Debug for FieldMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "FieldMatrix {}x{} mod {} [", self.rows, self.cols, self.field.modulus())?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[r * self.cols..(r + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

impl FieldMatrix {
    pub fn zero(field: PrimeField, rows: usize, cols: usize) -> Self {
        FieldMatrix { field, rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(field: PrimeField, n: usize) -> Self {
        let mut m = Self::zero(field, n, n);
        for i in 0..n {
            m.set_raw(i, i, 1);
        }
        m
    }

    /// Builds from rows of raw residues; all rows must have equal length.
    pub fn from_rows(field: PrimeField, rows: &[Vec<u64>]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        let p = field.modulus();
        let mut data = Vec::with_capacity(height * width);
        for row in rows {
            assert!(row.len() == width, "ragged rows: {} vs {width}", row.len());
            data.extend(row.iter().map(|&v| v % p));
        }
        FieldMatrix { field, rows: height, cols: width, data }
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> FieldElement {
        self.field.element(self.data[r * self.cols + c])
    }

    pub fn set(&mut self, r: usize, c: usize, v: FieldElement) {
        assert!(v.field() == self.field, "field mismatch");
        self.set_raw(r, c, v.value());
    }

    pub(crate) fn set_raw(&mut self, r: usize, c: usize, v: u64) {
        self.data[r * self.cols + c] = v % self.field.modulus();
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zero(self.field, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Copy without column `col`.
    pub fn without_column(&self, col: usize) -> Self {
        assert!(col < self.cols, "column {col} out of range");
        let mut data = Vec::with_capacity(self.rows * (self.cols - 1));
        for r in 0..self.rows {
            for c in 0..self.cols {
                if c != col {
                    data.push(self.data[r * self.cols + c]);
                }
            }
        }
        FieldMatrix { field: self.field, rows: self.rows, cols: self.cols - 1, data }
    }

    /// Rank by forward elimination on a working copy.
    pub fn rank(&self) -> usize {
        let mut m = self.data.clone();
        let f = self.field;
        let (rows, cols) = (self.rows, self.cols);
        let mut rank = 0;
        for col in 0..cols {
            // Find a pivot at or below `rank`.
            let Some(pivot_row) = (rank..rows).find(|&r| m[r * cols + col] != 0) else {
                continue;
            };
            if pivot_row != rank {
                for c in 0..cols {
                    m.swap(pivot_row * cols + c, rank * cols + c);
                }
            }
            let inv = f.inv_raw(m[rank * cols + col]).expect("pivot nonzero");
            for r in rank + 1..rows {
                let factor = f.mul_raw(m[r * cols + col], inv);
                if factor == 0 {
                    continue;
                }
                for c in col..cols {
                    let sub = f.mul_raw(factor, m[rank * cols + c]);
                    m[r * cols + c] = f.sub_raw(m[r * cols + c], sub);
                }
            }
            rank += 1;
            if rank == rows {
                break;
            }
        }
        rank
    }

    /// Indices of columns whose removal leaves the rank unchanged.
    ///
    /// Callers invoke this only after observing `rank() < full_rank_target`;
    /// calling it on a matrix that already meets the target is a logic error.
    pub fn deficient_columns(&self, full_rank_target: usize) -> Vec<usize> {
        let rank = self.rank();
        assert!(
            rank < full_rank_target,
            "deficient_columns called on a matrix meeting its rank target ({rank} >= {full_rank_target})"
        );
        (0..self.cols)
            .filter(|&c| self.without_column(c).rank() == rank)
            .collect()
    }
}
