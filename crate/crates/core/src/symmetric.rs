//! Small symmetric matrices.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-14;

/// A `k x k` real symmetric matrix. Construction symmetrizes after checking
/// the input is symmetric to within `1e-14` (relative to its size).
#[derive(Clone, PartialEq)]
pub struct SymMatrixK {
    m: DMatrix<f64>,
}

impl SymMatrixK {
    pub fn zeros(k: usize) -> Self {
        SymMatrixK {
            m: DMatrix::zeros(k, k),
        }
    }

    pub fn identity(k: usize) -> Self {
        SymMatrixK {
            m: DMatrix::identity(k, k),
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrixK {
            m: DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
        }
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Quadratic(format!(
                "matrix is {}x{}, not square",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.amax().max(1.0);
        let asym = (&m - m.transpose()).amax();
        if asym > SYMMETRY_TOL * scale || m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Quadratic(format!(
                "matrix is not symmetric and finite (asymmetry {asym:.3e})"
            )));
        }
        Ok(SymMatrixK {
            m: (&m + m.transpose()) * 0.5,
        })
    }

    /// Symmetrizes without checking; intended for results of exact symmetric algebra.
    pub fn symmetrize(m: DMatrix<f64>) -> Self {
        SymMatrixK {
            m: (&m + m.transpose()) * 0.5,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Quadratic("matrix rows have inconsistent lengths".into()));
        }
        Self::from_matrix(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.k())
            .map(|i| (0..self.k()).map(|j| self.m[(i, j)]).collect())
            .collect()
    }

    pub fn k(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.m[(i, j)] = v;
        self.m[(j, i)] = v;
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn frobenius(&self) -> f64 {
        self.m.norm()
    }

    pub fn is_zero(&self) -> bool {
        self.m.iter().all(|&v| v == 0.0)
    }

    pub fn is_diagonal(&self) -> bool {
        let k = self.k();
        (0..k).all(|i| (0..k).all(|j| i == j || self.m[(i, j)] == 0.0))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.k()).map(|i| self.m[(i, i)]).collect()
    }

    pub fn scale(&self, s: f64) -> Self {
        SymMatrixK { m: &self.m * s }
    }

    pub fn add(&self, o: &SymMatrixK) -> Self {
        SymMatrixK { m: &self.m + &o.m }
    }

    pub fn sub(&self, o: &SymMatrixK) -> Self {
        SymMatrixK { m: &self.m - &o.m }
    }

    /// `self * o`; symmetric only when the factors commute, so the result is plain.
    pub fn mul(&self, o: &SymMatrixK) -> DMatrix<f64> {
        &self.m * &o.m
    }

    /// `self^2`, exactly symmetrized.
    pub fn square(&self) -> Self {
        Self::symmetrize(&self.m * &self.m)
    }

    /// `S^T self S`.
    pub fn conjugate(&self, s: &DMatrix<f64>) -> Self {
        Self::symmetrize(s.transpose() * &self.m * s)
    }

    /// Eigen-decomposition with descending eigenvalues and each eigenvector's
    /// first non-negligible component made positive.
    pub fn spectral(&self) -> (DMatrix<f64>, Vec<f64>) {
        let k = self.k();
        if self.is_diagonal() {
            let mut order: Vec<usize> = (0..k).collect();
            let d = self.diagonal();
            order.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(a.cmp(&b)));
            let mut frame = DMatrix::zeros(k, k);
            for (col, &i) in order.iter().enumerate() {
                frame[(i, col)] = 1.0;
            }
            return (frame, order.iter().map(|&i| d[i]).collect());
        }
        let eig = nalgebra::SymmetricEigen::new(self.m.clone());
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .total_cmp(&eig.eigenvalues[a])
                .then(a.cmp(&b))
        });
        let mut frame = DMatrix::zeros(k, k);
        let mut vals = Vec::with_capacity(k);
        for (col, &i) in order.iter().enumerate() {
            let mut v = eig.eigenvectors.column(i).clone_owned();
            let lead = v.iter().copied().find(|x| x.abs() > 1e-12).unwrap_or(1.0);
            if lead < 0.0 {
                v = -v;
            }
            frame.set_column(col, &v);
            vals.push(eig.eigenvalues[i]);
        }
        (frame, vals)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.spectral().1
    }

    /// `F diag(lambda) F^T`.
    pub fn from_spectral(frame: &DMatrix<f64>, lambda: &[f64]) -> Self {
        let k = frame.nrows();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(lambda));
        let mut m = frame * d * frame.transpose();
        // exact zeros stay zero when the frame is a permutation
        for i in 0..k {
            for j in 0..k {
                if m[(i, j)].abs() < 1e-300 {
                    m[(i, j)] = 0.0;
                }
            }
        }
        Self::symmetrize(m)
    }

    /// Zero-padding to `k2 >= k`.
    pub fn embed(&self, k2: usize) -> Self {
        assert!(k2 >= self.k());
        let mut m = DMatrix::zeros(k2, k2);
        m.view_mut((0, 0), (self.k(), self.k())).copy_from(&self.m);
        SymMatrixK { m }
    }
}

impl fmt::Debug for SymMatrixK {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMatrixK{:?}", self.to_rows())
    }
}

impl Serialize for SymMatrixK {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrixK {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        SymMatrixK::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_of_diagonal_is_permutation() {
        let u = SymMatrixK::from_diagonal(&[-0.3, 0.0, -0.1]);
        let (f, l) = u.spectral();
        assert_eq!(l, vec![0.0, -0.1, -0.3]);
        assert_eq!(SymMatrixK::from_spectral(&f, &l), u);
    }

    #[test]
    fn spectral_reconstructs_and_fixes_signs() {
        let u = SymMatrixK::from_rows(&[vec![-0.5, 0.2], vec![0.2, -0.1]]).unwrap();
        let (f, l) = u.spectral();
        assert!(l[0] >= l[1]);
        let r = SymMatrixK::from_spectral(&f, &l);
        assert!((r.sub(&u)).frobenius() < 1e-14);
        for c in 0..2 {
            let lead = f.column(c).iter().copied().find(|x| x.abs() > 1e-12).unwrap();
            assert!(lead > 0.0);
        }
    }

    #[test]
    fn rejects_asymmetric() {
        assert!(SymMatrixK::from_rows(&[vec![1.0, 0.1], vec![0.0, 1.0]]).is_err());
    }
}
