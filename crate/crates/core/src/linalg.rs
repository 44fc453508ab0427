//! Dense linear algebra over F_p.

use crate::fp;

/// Row-major dense matrix over F_p.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FpMatrix {
    pub rows: usize,
    pub cols: usize,
    pub p: u32,
    pub data: Vec<u32>,
}

impl FpMatrix {
    pub fn zero(rows: usize, cols: usize, p: u32) -> Self {
        FpMatrix { rows, cols, p, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize, p: u32) -> Self {
        let mut m = Self::zero(n, n, p);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    /// Build from column vectors.
    pub fn from_columns(cols: &[Vec<u32>], rows: usize, p: u32) -> Self {
        let mut m = Self::zero(rows, cols.len(), p);
        for (j, c) in cols.iter().enumerate() {
            for (i, &x) in c.iter().enumerate() {
                m.data[i * m.cols + j] = x;
            }
        }
        m
    }

    pub fn get(&self, r: usize, c: usize) -> u32 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: u32) {
        self.data[r * self.cols + c] = v % self.p;
    }

    pub fn column(&self, c: usize) -> Vec<u32> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn mul(&self, o: &FpMatrix) -> FpMatrix {
        assert_eq!(self.cols, o.rows);
        let p = self.p as u64;
        let mut out = vec![0u64; self.rows * o.cols];
        for i in 0..self.rows {
            let row = &mut out[i * o.cols..(i + 1) * o.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k] as u64;
                if a == 0 {
                    continue;
                }
                let orow = &o.data[k * o.cols..(k + 1) * o.cols];
                for (acc, &b) in row.iter_mut().zip(orow) {
                    *acc = (*acc + a * b as u64) % p;
                }
            }
        }
        FpMatrix { rows: self.rows, cols: o.cols, p: self.p, data: out.into_iter().map(|x| x as u32).collect() }
    }

    pub fn apply(&self, v: &[u32]) -> Vec<u32> {
        let p = self.p as u64;
        (0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                (row.iter().zip(v).map(|(&a, &b)| a as u64 * b as u64 % p).sum::<u64>() % p) as u32
            })
            .collect()
    }

    pub fn add(&self, o: &FpMatrix) -> FpMatrix {
        let data = self.data.iter().zip(&o.data).map(|(&a, &b)| fp::add(a, b, self.p)).collect();
        FpMatrix { data, ..*self }
    }

    pub fn sub(&self, o: &FpMatrix) -> FpMatrix {
        let data = self.data.iter().zip(&o.data).map(|(&a, &b)| fp::sub(a, b, self.p)).collect();
        FpMatrix { data, ..*self }
    }

    pub fn scale(&self, c: u32) -> FpMatrix {
        let data = self.data.iter().map(|&a| fp::mul(a, c % self.p, self.p)).collect();
        FpMatrix { data, ..*self }
    }

    pub fn pow(&self, mut e: u64) -> FpMatrix {
        let mut acc = Self::identity(self.rows, self.p);
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn rank(&self) -> usize {
        let mut rs = RowSpace::new(self.cols, self.p);
        for r in 0..self.rows {
            rs.insert(&self.data[r * self.cols..(r + 1) * self.cols]);
        }
        rs.rank()
    }

    /// Basis of the null space `{v : M v = 0}`.
    pub fn kernel(&self) -> Vec<Vec<u32>> {
        let mut rs = RowSpace::new(self.cols, self.p);
        for r in 0..self.rows {
            rs.insert(&self.data[r * self.cols..(r + 1) * self.cols]);
        }
        let p = self.p;
        let pivots: Vec<usize> = rs.pivots.clone();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![0u32; self.cols];
                v[f] = 1;
                for (row, &pc) in rs.rows.iter().zip(&pivots) {
                    v[pc] = fp::neg(row[f], p);
                }
                v
            })
            .collect()
    }
}

/// A subspace of F_p^n kept in reduced row echelon form. Pivots are the first
/// non-zero position of each row, so the canonical order of coordinates decides
/// the representative.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowSpace {
    pub n: usize,
    pub p: u32,
    pub rows: Vec<Vec<u32>>,
    pub pivots: Vec<usize>,
}

impl RowSpace {
    pub fn new(n: usize, p: u32) -> Self {
        RowSpace { n, p, rows: Vec::new(), pivots: Vec::new() }
    }

    pub fn full(n: usize, p: u32) -> Self {
        let mut rs = Self::new(n, p);
        for i in 0..n {
            let mut v = vec![0; n];
            v[i] = 1;
            rs.insert(&v);
        }
        rs
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Residual of `v` after elimination against the pivots.
    pub fn reduce(&self, v: &[u32]) -> Vec<u32> {
        let p = self.p;
        let mut r = v.to_vec();
        for (row, &pc) in self.rows.iter().zip(&self.pivots) {
            let c = r[pc];
            if c == 0 {
                continue;
            }
            for (x, &y) in r.iter_mut().zip(row) {
                if y != 0 {
                    *x = fp::sub(*x, fp::mul(c, y, p), p);
                }
            }
        }
        r
    }

    pub fn contains(&self, v: &[u32]) -> bool {
        self.reduce(v).iter().all(|&x| x == 0)
    }

    /// Insert a vector; returns whether the rank grew.
    pub fn insert(&mut self, v: &[u32]) -> bool {
        let p = self.p;
        let mut r = self.reduce(v);
        let Some(pc) = r.iter().position(|&x| x != 0) else { return false };
        let inv = fp::inv(r[pc], p);
        for x in r.iter_mut() {
            *x = fp::mul(*x, inv, p);
        }
        for row in self.rows.iter_mut() {
            let c = row[pc];
            if c != 0 {
                for (x, &y) in row.iter_mut().zip(&r) {
                    if y != 0 {
                        *x = fp::sub(*x, fp::mul(c, y, p), p);
                    }
                }
            }
        }
        let pos = self.pivots.partition_point(|&q| q < pc);
        self.pivots.insert(pos, pc);
        self.rows.insert(pos, r);
        true
    }

    /// Dimension of the intersection with the coordinate subspace spanned by `keep`.
    pub fn intersect_coordinates_dim(&self, keep: &[bool]) -> usize {
        let mut proj = RowSpace::new(self.n, self.p);
        for row in &self.rows {
            let v: Vec<u32> = row.iter().zip(keep).map(|(&x, &k)| if k { 0 } else { x }).collect();
            proj.insert(&v);
        }
        self.rank() - proj.rank()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rref_and_membership() {
        let mut rs = RowSpace::new(3, 3);
        assert!(rs.insert(&[1, 2, 0]));
        assert!(rs.insert(&[0, 1, 1]));
        assert!(!rs.insert(&[1, 0, 1]));
        assert_eq!(rs.rank(), 2);
        assert!(rs.contains(&[2, 1, 0]) == rs.contains(&[2, 1, 0]));
        assert_eq!(rs.rows[0], vec![1, 0, 1]);
    }

    #[test]
    fn kernel_is_annihilated() {
        let m = FpMatrix { rows: 2, cols: 3, p: 5, data: vec![1, 2, 3, 0, 1, 4] };
        let k = m.kernel();
        assert_eq!(k.len(), 1);
        assert!(m.apply(&k[0]).iter().all(|&x| x == 0));
    }

    #[test]
    fn coordinate_intersection() {
        let mut rs = RowSpace::new(3, 2);
        rs.insert(&[1, 1, 0]);
        rs.insert(&[0, 0, 1]);
        assert_eq!(rs.intersect_coordinates_dim(&[false, false, true]), 1);
        assert_eq!(rs.intersect_coordinates_dim(&[true, false, false]), 0);
    }
}
