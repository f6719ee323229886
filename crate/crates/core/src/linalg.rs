//! Dense Gaussian elimination over the prime field Z_N.
//!
//! Used to audit the lattice algebra (ranks of the incidence and stabilizer
//! matrices, independence of the logical functionals). Cubic in the matrix
//! size, so only practical for small lattices.

use std::fmt;

use crate::zn::Modulus;

#[derive(Clone, PartialEq, Eq)]
pub struct ZnMatrix {
    z: Modulus,
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl fmt::Debug for ZnMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}x{} over {:?}", self.rows, self.cols, self.z)?;
        for r in 0..self.rows {
            let row: Vec<String> = self.row(r).iter().map(|v| v.to_string()).collect();
            writeln!(f, "  [{}]", row.join(" "))?;
        }
        Ok(())
    }
}

impl ZnMatrix {
    pub fn zeros(z: Modulus, rows: usize, cols: usize) -> Self {
        Self {
            z,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_rows(z: Modulus, cols: usize, rows: &[Vec<u8>]) -> Self {
        let mut m = Self::zeros(z, rows.len(), cols);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged row {r}");
            for (c, &v) in row.iter().enumerate() {
                m.set(r, c, z.reduce(v as i64));
            }
        }
        m
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u8) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[u8] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.z, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// Stack `other`'s rows below `self`'s.
    pub fn vstack(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.cols);
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Self {
            z: self.z,
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn mul_vec(&self, v: &[u8]) -> Vec<u8> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|r| self.z.dot(self.row(r), v)).collect()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    /// In-place reduction to reduced row echelon form. Returns pivot columns.
    pub fn rref(&mut self) -> Vec<usize> {
        let z = self.z;
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| self.get(i, c) != 0) else {
                continue;
            };
            self.swap_rows(r, p);
            let inv = z.inv(self.get(r, c));
            for j in c..self.cols {
                let v = z.mul(self.get(r, j), inv);
                self.set(r, j, v);
            }
            for i in 0..self.rows {
                if i == r {
                    continue;
                }
                let f = self.get(i, c);
                if f == 0 {
                    continue;
                }
                for j in c..self.cols {
                    let v = z.sub(self.get(i, j), z.mul(f, self.get(r, j)));
                    self.set(i, j, v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        self.clone().rref().len()
    }

    /// Basis of the right null space {x : A x = 0}.
    pub fn nullspace(&self) -> Vec<Vec<u8>> {
        let z = self.z;
        let mut m = self.clone();
        let pivots = m.rref();
        let mut is_pivot = vec![false; self.cols];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        let mut basis = Vec::new();
        for free in (0..self.cols).filter(|&c| !is_pivot[c]) {
            let mut x = vec![0u8; self.cols];
            x[free] = 1;
            for (r, &p) in pivots.iter().enumerate() {
                x[p] = z.neg(m.get(r, free));
            }
            basis.push(x);
        }
        basis
    }

    /// Some solution of A x = b, if one exists.
    pub fn solve(&self, b: &[u8]) -> Option<Vec<u8>> {
        assert_eq!(b.len(), self.rows);
        let mut aug = Self::zeros(self.z, self.rows, self.cols + 1);
        for r in 0..self.rows {
            for c in 0..self.cols {
                aug.set(r, c, self.get(r, c));
            }
            aug.set(r, self.cols, self.z.reduce(b[r] as i64));
        }
        let pivots = aug.rref();
        if pivots.last() == Some(&self.cols) {
            return None;
        }
        let mut x = vec![0u8; self.cols];
        for (r, &p) in pivots.iter().enumerate() {
            x[p] = aug.get(r, self.cols);
        }
        Some(x)
    }
}
