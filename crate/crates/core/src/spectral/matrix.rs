use crate::error::{Error, Result};
use crate::par;

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Wrap row-major `data`, rejecting non-square or non-symmetric input.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::contract(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::contract("matrix has non-finite entries"));
        }
        let scale = data.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        for i in 0..n {
            for j in i + 1..n {
                if (data[i * n + j] - data[j * n + i]).abs() > 1e-12 * scale {
                    return Err(Error::contract(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(SymMatrix { n, data })
    }

    /// Caller guarantees symmetry.
    pub(crate) fn from_vec_unchecked(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        SymMatrix { n, data }
    }

    /// Build from the upper triangle: `f(i, j)` is called once for each `i < j`.
    pub fn from_upper<F>(n: usize, diag: f64, f: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Sync + Send,
    {
        let mut data = vec![0.0; n * n];
        par::for_each_row_mut(&mut data, n, |i, row| {
            row[i] = diag;
            for (j, x) in row.iter_mut().enumerate().skip(i + 1) {
                *x = f(i, j);
            }
        });
        mirror_upper(n, &mut data);
        SymMatrix { n, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_upper(n, 1.0, |_, _| 0.0)
    }

    pub fn constant(n: usize, value: f64) -> Self {
        SymMatrix {
            n,
            data: vec![value; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row_sums(&self) -> Vec<f64> {
        par::map_range(self.n, |i| self.row(i).iter().sum())
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        par::fill_indexed(y, |i| dot(self.row(i), x));
    }

    pub fn submatrix(&self, idx: &[usize]) -> SymMatrix {
        let k = idx.len();
        let mut data = Vec::with_capacity(k * k);
        for &i in idx {
            let row = self.row(i);
            data.extend(idx.iter().map(|&j| row[j]));
        }
        SymMatrix { n: k, data }
    }
}

/// Copy the strict upper triangle onto the lower one.
pub(crate) fn mirror_upper(n: usize, data: &mut [f64]) {
    for i in 0..n {
        for j in i + 1..n {
            data[j * n + i] = data[i * n + j];
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize without reassociation flags.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_asymmetric() {
        assert!(SymMatrix::new(2, vec![1.0, 0.5, 0.4, 1.0]).is_err());
        assert!(SymMatrix::new(2, vec![1.0, 0.5, 0.5]).is_err());
        assert!(SymMatrix::new(2, vec![1.0, 0.5, 0.5, 1.0]).is_ok());
    }

    #[test]
    fn upper_builder_mirrors() {
        let m = SymMatrix::from_upper(3, 1.0, |i, j| (i + 10 * j) as f64);
        assert_eq!(m.get(2, 0), m.get(0, 2));
        assert_eq!(m.get(1, 2), 21.0);
        assert_eq!(m.row_sums()[0], 1.0 + 10.0 + 20.0);
    }

    #[test]
    fn submatrix_picks_entries() {
        let m = SymMatrix::from_upper(4, 1.0, |i, j| (i * 4 + j) as f64);
        let s = m.submatrix(&[1, 3]);
        assert_eq!(s.data(), &[1.0, 7.0, 7.0, 1.0]);
    }
}
