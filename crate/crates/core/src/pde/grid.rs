//! Fourier collocation on the half period r in (0, pi].
//!
//! Radially symmetric fields are even in r, so their periodic extension to
//! (-pi, pi] is a cosine series. The Nr nodes `r_j = j pi / Nr` determine
//! the even extension on the 2Nr-point periodic grid once the Nyquist mode
//! is required to vanish, which leaves cosine modes 0..Nr-1 and an
//! interpolant that is also defined at the excluded center r = 0. Radial
//! fluxes are odd; their extension is a sine series in modes 1..Nr-1 that
//! vanishes at r = pi.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SpectralGrid {
    nr: usize,
    nodes: Vec<f64>,
    inv_r: Vec<f64>,
    even_d1: DMatrix<f64>,
    even_d2: DMatrix<f64>,
    odd_d1: DMatrix<f64>,
    center: Vec<f64>,
    quadrature: Vec<f64>,
}

impl SpectralGrid {
    pub fn new(nr: usize) -> Result<Self> {
        if nr < 16 || nr % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "need an even node count of at least 16, got {nr}"
            )));
        }
        let nodes: Vec<f64> = (1..=nr).map(|j| j as f64 * PI / nr as f64).collect();
        let inv_r = nodes.iter().map(|r| 1.0 / r).collect();

        // nodal values -> cosine coefficients
        let cos = DMatrix::from_fn(nr, nr, |j, m| (m as f64 * nodes[j]).cos());
        let cos_inv = cos
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::InvalidGrid("singular cosine interpolation matrix".into()))?;
        let d1 = DMatrix::from_fn(nr, nr, |j, m| -(m as f64) * (m as f64 * nodes[j]).sin());
        let d2 = DMatrix::from_fn(nr, nr, |j, m| {
            -((m * m) as f64) * (m as f64 * nodes[j]).cos()
        });
        let mut even_d1 = &d1 * &cos_inv;
        let mut even_d2 = &d2 * &cos_inv;
        // rows must annihilate constants; absorb the roundoff in the diagonal
        for d in [&mut even_d1, &mut even_d2] {
            for j in 0..nr {
                let sum: f64 = d.row(j).iter().sum();
                d[(j, j)] -= sum;
            }
        }

        // odd nodal values at r_1..r_{Nr-1} -> sine coefficients (DST-I,
        // self-inverse up to 2/Nr), then differentiate onto every node
        let m_odd = nr - 1;
        let sin_inv = DMatrix::from_fn(m_odd, m_odd, |m, l| {
            2.0 / nr as f64 * ((m + 1) as f64 * nodes[l]).sin()
        });
        let dsin = DMatrix::from_fn(nr, m_odd, |j, m| {
            let k = (m + 1) as f64;
            k * (k * nodes[j]).cos()
        });
        let partial = &dsin * &sin_inv;
        let mut odd_d1 = DMatrix::zeros(nr, nr);
        odd_d1.view_mut((0, 0), (nr, m_odd)).copy_from(&partial);

        let ones = DVector::from_element(nr, 1.0);
        let mut center = (cos_inv.transpose() * &ones).as_slice().to_vec();
        let total: f64 = center.iter().sum();
        center.iter_mut().for_each(|w| *w /= total);
        // exact integrals of r cos(m r) over [0, pi]
        let moments = DVector::from_fn(nr, |m, _| {
            if m == 0 {
                PI * PI / 2.0
            } else {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                (sign - 1.0) / (m * m) as f64
            }
        });
        let quadrature = (cos_inv.transpose() * moments).as_slice().to_vec();

        Ok(Self {
            nr,
            nodes,
            inv_r,
            even_d1,
            even_d2,
            odd_d1,
            center,
            quadrature,
        })
    }

    pub fn len(&self) -> usize {
        self.nr
    }

    pub fn is_empty(&self) -> bool {
        self.nr == 0
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn inv_r(&self) -> &[f64] {
        &self.inv_r
    }

    pub fn even_d1_matrix(&self) -> &DMatrix<f64> {
        &self.even_d1
    }

    pub fn even_d2_matrix(&self) -> &DMatrix<f64> {
        &self.even_d2
    }

    /// Acts on odd fields sampled at every node; the last column is zero.
    pub fn odd_d1_matrix(&self) -> &DMatrix<f64> {
        &self.odd_d1
    }

    /// First derivative of an even field (result is odd).
    pub fn d1_even(&self, u: &[f64], out: &mut [f64]) {
        matvec(&self.even_d1, u, out);
    }

    /// Second derivative of an even field.
    pub fn d2_even(&self, u: &[f64], out: &mut [f64]) {
        matvec(&self.even_d2, u, out);
    }

    /// First derivative of an odd field (result is even). The value at r = pi
    /// is ignored; odd fields vanish there.
    pub fn d1_odd(&self, q: &[f64], out: &mut [f64]) {
        matvec(&self.odd_d1, q, out);
    }

    /// `(1/r) d/dr (r q)` for an odd flux `q`.
    pub fn radial_div(&self, q: &[f64], out: &mut [f64]) {
        self.d1_odd(q, out);
        for ((o, qj), ir) in out.iter_mut().zip(q).zip(&self.inv_r) {
            *o += qj * ir;
        }
    }

    /// Radial Laplacian `u_rr + u_r / r` of an even field, reusing its
    /// precomputed first derivative `du`.
    pub fn laplacian_with(&self, u: &[f64], du: &[f64], out: &mut [f64]) {
        self.d2_even(u, out);
        for ((o, d), ir) in out.iter_mut().zip(du).zip(&self.inv_r) {
            *o += d * ir;
        }
    }

    /// Band-limited interpolation of an even field to r = 0.
    pub fn center_value(&self, u: &[f64]) -> f64 {
        self.center.iter().zip(u).map(|(w, v)| w * v).sum()
    }

    /// Integral of `r u(r)` over (0, pi] for the interpolant of an even field.
    pub fn integrate_r(&self, u: &[f64]) -> f64 {
        self.quadrature.iter().zip(u).map(|(w, v)| w * v).sum()
    }
}

fn matvec(m: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    let n = m.nrows();
    out[..n].fill(0.0);
    // column-major storage: accumulate column by column
    for (j, col) in m.column_iter().enumerate() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(col.iter()) {
            *o += a * xj;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_err(a: &[f64], b: impl Fn(f64) -> f64, r: &[f64]) -> f64 {
        a.iter()
            .zip(r)
            .map(|(v, &x)| (v - b(x)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(SpectralGrid::new(8).is_err());
        assert!(SpectralGrid::new(33).is_err());
        assert!(SpectralGrid::new(16).is_ok());
    }

    #[test]
    fn nodes_exclude_origin_and_include_pi() {
        let g = SpectralGrid::new(32).unwrap();
        assert!(g.nodes()[0] > 0.0);
        assert!((g.nodes()[31] - PI).abs() < 1e-15);
    }

    #[test]
    fn differentiation_is_exact_for_band_limited_fields() {
        for nr in [16, 64, 128] {
            let g = SpectralGrid::new(nr).unwrap();
            let r = g.nodes().to_vec();
            let mut out = vec![0.0; nr];

            g.d1_even(&vec![3.0; nr], &mut out);
            assert!(out.iter().all(|v| v.abs() <= 1e-12), "nr {nr}");

            let cos: Vec<f64> = r.iter().map(|x| x.cos()).collect();
            g.d1_even(&cos, &mut out);
            assert!(max_err(&out, |x| -x.sin(), &r) <= 1e-10, "nr {nr}");

            let cos2: Vec<f64> = r.iter().map(|x| (2.0 * x).cos()).collect();
            g.d2_even(&cos2, &mut out);
            assert!(
                max_err(&out, |x| -4.0 * (2.0 * x).cos(), &r) <= 1e-8,
                "nr {nr}"
            );

            let sin3: Vec<f64> = r.iter().map(|x| (3.0 * x).sin()).collect();
            g.d1_odd(&sin3, &mut out);
            assert!(
                max_err(&out, |x| 3.0 * (3.0 * x).cos(), &r) <= 1e-10,
                "nr {nr}"
            );
        }
    }

    #[test]
    fn spectral_accuracy_on_smooth_even_field() {
        let g = SpectralGrid::new(64).unwrap();
        let r = g.nodes().to_vec();
        let u: Vec<f64> = r.iter().map(|x| x.cos().exp()).collect();
        let mut out = vec![0.0; 64];
        g.d1_even(&u, &mut out);
        assert!(max_err(&out, |x| -x.sin() * x.cos().exp(), &r) < 1e-11);
        assert!((g.center_value(&u) - 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn radial_operators() {
        let g = SpectralGrid::new(64).unwrap();
        let r = g.nodes().to_vec();
        let u: Vec<f64> = r.iter().map(|x| x.cos()).collect();
        let mut du = vec![0.0; 64];
        let mut lap = vec![0.0; 64];
        g.d1_even(&u, &mut du);
        g.laplacian_with(&u, &du, &mut lap);
        assert!(max_err(&lap, |x| -x.cos() - x.sin() / x, &r) < 1e-9);
        // div of the odd flux sin(r): cos(r) + sin(r)/r
        let q: Vec<f64> = r.iter().map(|x| x.sin()).collect();
        g.radial_div(&q, &mut lap);
        assert!(max_err(&lap, |x| x.cos() + x.sin() / x, &r) < 1e-10);
    }

    #[test]
    fn center_and_quadrature() {
        let g = SpectralGrid::new(32).unwrap();
        let r = g.nodes().to_vec();
        assert!((g.center_value(&vec![1.0; 32]) - 1.0).abs() < 1e-13);
        let cos2: Vec<f64> = r.iter().map(|x| (2.0 * x).cos()).collect();
        assert!((g.center_value(&cos2) - 1.0).abs() < 1e-12);
        assert!((g.integrate_r(&vec![1.0; 32]) - PI * PI / 2.0).abs() < 1e-12);
        // integral of r cos r over [0, pi] is -2
        let cos: Vec<f64> = r.iter().map(|x| x.cos()).collect();
        assert!((g.integrate_r(&cos) + 2.0).abs() < 1e-12);
    }
}
