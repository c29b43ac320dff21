//! Dense exact linear algebra over the rationals.

use num_traits::{One, Zero};

use crate::poly::Q;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Q>,
}

impl QMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        QMatrix { rows, cols, data: vec![Q::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Q::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Q>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.into_iter().enumerate() {
            assert_eq!(row.len(), c, "ragged matrix");
            for (j, v) in row.into_iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> &Q {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Q) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<Q> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| v.is_zero())
    }

    pub fn mul(&self, o: &QMatrix) -> QMatrix {
        assert_eq!(self.cols, o.rows);
        let mut r = QMatrix::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let b = o.get(k, j);
                    if !b.is_zero() {
                        let v = r.get(i, j) + a * b;
                        r.set(i, j, v);
                    }
                }
            }
        }
        r
    }

    pub fn mul_vec(&self, v: &[Q]) -> Vec<Q> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut s = Q::zero();
                for (j, x) in v.iter().enumerate() {
                    if !x.is_zero() {
                        s += self.get(i, j) * x;
                    }
                }
                s
            })
            .collect()
    }

    pub fn transpose(&self) -> QMatrix {
        let mut t = QMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    /// Reduced row echelon form in place; returns pivot columns.
    pub fn rref(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| !self.get(i, c).is_zero()) else {
                continue;
            };
            self.swap_rows(r, p);
            let inv = self.get(r, c).recip();
            for j in 0..self.cols {
                let v = self.get(r, j) * &inv;
                self.set(r, j, v);
            }
            for i in 0..self.rows {
                if i != r && !self.get(i, c).is_zero() {
                    let f = self.get(i, c).clone();
                    for j in 0..self.cols {
                        let s = self.get(r, j);
                        if !s.is_zero() {
                            let v = self.get(i, j) - &f * s;
                            self.set(i, j, v);
                        }
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn rank(&self) -> usize {
        self.clone().rref().len()
    }

    /// Basis of the null space, one vector per free column, in reduced form:
    /// each vector has a 1 at its free column and 0 at the other free columns.
    pub fn kernel(&self) -> Vec<Vec<Q>> {
        let mut m = self.clone();
        let piv = m.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !piv.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![Q::zero(); self.cols];
                v[f] = Q::one();
                for (r, &pc) in piv.iter().enumerate() {
                    v[pc] = -m.get(r, f).clone();
                }
                v
            })
            .collect()
    }

    /// Solves `self * x = b`. On failure returns a row functional `y`
    /// with `y * self = 0` and `y * b != 0`.
    pub fn solve(&self, b: &[Q]) -> Result<Vec<Q>, Vec<Q>> {
        assert_eq!(b.len(), self.rows);
        // augment [A | b | I] and track the row operations
        let w = self.cols + 1 + self.rows;
        let mut aug = QMatrix::zeros(self.rows, w);
        for i in 0..self.rows {
            for j in 0..self.cols {
                aug.set(i, j, self.get(i, j).clone());
            }
            aug.set(i, self.cols, b[i].clone());
            aug.set(i, self.cols + 1 + i, Q::one());
        }
        // eliminate only on the coefficient columns
        let mut r = 0;
        let mut piv = Vec::new();
        for c in 0..self.cols {
            if r == aug.rows {
                break;
            }
            let Some(p) = (r..aug.rows).find(|&i| !aug.get(i, c).is_zero()) else {
                continue;
            };
            aug.swap_rows(r, p);
            let inv = aug.get(r, c).recip();
            for j in 0..w {
                let v = aug.get(r, j) * &inv;
                aug.set(r, j, v);
            }
            for i in 0..aug.rows {
                if i != r && !aug.get(i, c).is_zero() {
                    let f = aug.get(i, c).clone();
                    for j in 0..w {
                        let s = aug.get(r, j);
                        if !s.is_zero() {
                            let v = aug.get(i, j) - &f * s;
                            aug.set(i, j, v);
                        }
                    }
                }
            }
            piv.push(c);
            r += 1;
        }
        for i in r..aug.rows {
            if !aug.get(i, self.cols).is_zero() {
                let y = (0..self.rows).map(|k| aug.get(i, self.cols + 1 + k).clone()).collect();
                return Err(y);
            }
        }
        let mut x = vec![Q::zero(); self.cols];
        for (i, &pc) in piv.iter().enumerate() {
            x[pc] = aug.get(i, self.cols).clone();
        }
        Ok(x)
    }
}

/// Reduced column echelon basis of a subspace given by spanning vectors.
pub fn column_echelon_basis(vectors: &[Vec<Q>], dim: usize) -> Vec<Vec<Q>> {
    if vectors.is_empty() {
        return Vec::new();
    }
    let mut m = QMatrix::from_rows(vectors.to_vec());
    assert_eq!(m.cols, dim);
    let piv = m.rref();
    (0..piv.len()).map(|i| (0..dim).map(|j| m.get(i, j).clone()).collect()).collect()
}
