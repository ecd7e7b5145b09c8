//! Principal component compression of row-sample matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sampling::RowMatrix;

/// Singular values below this fraction of the reference scale count as zero.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    mean: DVector<f64>,
    /// n x k, orthonormal columns ordered by decreasing singular value.
    basis: DMatrix<f64>,
    singular_values: Vec<f64>,
}

fn to_dmatrix(x: &RowMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(x.rows(), x.cols(), x.data())
}

fn from_dmatrix(m: &DMatrix<f64>) -> RowMatrix {
    let data: Vec<f64> = m.transpose().as_slice().to_vec();
    RowMatrix::from_data(m.ncols(), data).expect("shape from a valid matrix")
}

impl Pca {
    /// Fits the mean and the top-`k` principal directions of `x` (one sample
    /// per row).
    pub fn fit(x: &RowMatrix, k: usize) -> Result<Self> {
        let (m, n) = (x.rows(), x.cols());
        if k == 0 {
            return Err(Error::InvalidParameter(
                "PCA needs at least one component".into(),
            ));
        }
        if m == 0 {
            return Err(Error::RankDeficient {
                requested: k,
                attainable: 0,
            });
        }
        let raw = to_dmatrix(x);
        let mean = raw.row_mean().transpose();
        let mut centered = raw.clone();
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }

        // right singular vectors and values of the centered data
        let (sv, vt) = if m > n {
            let r = centered.qr().r();
            let svd = r.svd(false, true);
            (svd.singular_values, svd.v_t.expect("requested"))
        } else {
            let svd = centered.svd(false, true);
            (svd.singular_values, svd.v_t.expect("requested"))
        };

        let scale = sv[0].max(raw.norm() * f64::EPSILON.sqrt());
        let rank = sv.iter().take_while(|&&s| s > RANK_TOL * scale).count();
        if k > rank {
            return Err(Error::RankDeficient {
                requested: k,
                attainable: rank,
            });
        }
        let mut basis = vt.rows(0, k).transpose();
        for mut col in basis.column_iter_mut() {
            let lead = col
                .iter()
                .copied()
                .fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
            if lead < 0.0 {
                col.neg_mut();
            }
        }
        Ok(Self {
            mean,
            basis,
            singular_values: sv.iter().copied().collect(),
        })
    }

    /// Reassembles a model from stored parts; the basis is `n x k` in
    /// column-major order.
    pub fn from_parts(
        mean: Vec<f64>,
        basis: Vec<f64>,
        k: usize,
        singular_values: Vec<f64>,
    ) -> Result<Self> {
        let n = mean.len();
        if k == 0 || basis.len() != n * k {
            return Err(Error::dims(n * k, basis.len(), "PCA basis"));
        }
        Ok(Self {
            mean: DVector::from_vec(mean),
            basis: DMatrix::from_vec(n, k, basis),
            singular_values,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.basis.ncols()
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    /// Column-major `n x k` basis.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// All singular values of the centered training data, not only the
    /// retained ones.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn compress(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.dim() {
            return Err(Error::dims(self.dim(), y.len(), "PCA compress"));
        }
        let d = DVector::from_column_slice(y) - &self.mean;
        Ok(self.basis.tr_mul(&d).as_slice().to_vec())
    }

    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.k() {
            return Err(Error::dims(self.k(), x.len(), "PCA reconstruct"));
        }
        let out = &self.mean + &self.basis * DVector::from_column_slice(x);
        Ok(out.as_slice().to_vec())
    }

    pub fn compress_rows(&self, y: &RowMatrix) -> Result<RowMatrix> {
        if y.cols() != self.dim() {
            return Err(Error::dims(self.dim(), y.cols(), "PCA compress"));
        }
        let mut m = to_dmatrix(y);
        for mut row in m.row_iter_mut() {
            row -= self.mean.transpose();
        }
        Ok(from_dmatrix(&(m * &self.basis)))
    }

    pub fn reconstruct_rows(&self, x: &RowMatrix) -> Result<RowMatrix> {
        if x.cols() != self.k() {
            return Err(Error::dims(self.k(), x.cols(), "PCA reconstruct"));
        }
        let mut out = to_dmatrix(x) * self.basis.transpose();
        for mut row in out.row_iter_mut() {
            row += self.mean.transpose();
        }
        Ok(from_dmatrix(&out))
    }

    /// Mean over rows and columns of the squared reconstruction error.
    pub fn reconstruction_mse(&self, y: &RowMatrix) -> Result<f64> {
        let back = self.reconstruct_rows(&self.compress_rows(y)?)?;
        let total: f64 = back
            .data()
            .iter()
            .zip(y.data())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        Ok(total / y.data().len().max(1) as f64)
    }
}
