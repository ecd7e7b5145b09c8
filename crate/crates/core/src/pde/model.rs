//! Right-hand side of the spectrally discretized glob model.
//!
//! The pressure is explicit in h, so it is substituted at every evaluation
//! and the semi-discrete system is a plain (stiff) ODE in (h, Gamma, c, f).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::physics::{blend, PdeNondim};

use super::grid::SpectralGrid;

/// Field values on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeState {
    pub h: Vec<f64>,
    pub gamma: Vec<f64>,
    pub c: Vec<f64>,
    pub f: Vec<f64>,
}

impl PdeState {
    pub fn to_vec(&self) -> Vec<f64> {
        [&self.h[..], &self.gamma, &self.c, &self.f].concat()
    }

    pub fn from_slice(y: &[f64]) -> Self {
        let n = y.len() / 4;
        Self {
            h: y[..n].to_vec(),
            gamma: y[n..2 * n].to_vec(),
            c: y[2 * n..3 * n].to_vec(),
            f: y[3 * n..].to_vec(),
        }
    }
}

/// `p = -(1/r)(r h_r)_r - A h^-3`.
pub fn pressure(h: &[f64], hamaker: f64, grid: &SpectralGrid) -> Result<Vec<f64>> {
    let n = grid.len();
    check_len(h, n)?;
    let mut dh = vec![0.0; n];
    let mut p = vec![0.0; n];
    pressure_into(h, hamaker, grid, &mut dh, &mut p)?;
    Ok(p)
}

fn pressure_into(
    h: &[f64],
    hamaker: f64,
    grid: &SpectralGrid,
    dh: &mut [f64],
    p: &mut [f64],
) -> Result<()> {
    if let Some(j) = h.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::SingularState(format!(
            "pressure needs h > 0, h = {} at node {j}",
            h[j]
        )));
    }
    grid.d1_even(h, dh);
    grid.laplacian_with(h, dh, p);
    for (pj, hj) in p.iter_mut().zip(h) {
        *pj = -*pj - hamaker / (hj * hj * hj);
    }
    Ok(())
}

/// Surface velocity `u_r` and depth-averaged velocity `ubar`, given the
/// pressure and the glob indicator `b` on the nodes.
pub fn velocities(
    h: &[f64],
    gamma: &[f64],
    p: &[f64],
    marangoni: f64,
    b: &[f64],
    grid: &SpectralGrid,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = grid.len();
    for v in [h, gamma, p, b] {
        check_len(v, n)?;
    }
    let mut dp = vec![0.0; n];
    let mut dg = vec![0.0; n];
    grid.d1_even(p, &mut dp);
    grid.d1_even(gamma, &mut dg);
    let mut ur = vec![0.0; n];
    let mut ubar = vec![0.0; n];
    velocities_into(h, &dp, &dg, marangoni, b, &mut ur, &mut ubar)?;
    Ok((ur, ubar))
}

fn velocities_into(
    h: &[f64],
    dp: &[f64],
    dg: &[f64],
    marangoni: f64,
    b: &[f64],
    ur: &mut [f64],
    ubar: &mut [f64],
) -> Result<()> {
    for j in 0..h.len() {
        let (hj, bj) = (h[j], b[j]);
        let denom = bj + (1.0 - bj) * hj;
        if !(denom > 0.0) {
            return Err(Error::SingularState(format!(
                "velocity denominator {denom} at node {j}"
            )));
        }
        let surf = marangoni * dg[j] * hj * bj;
        ur[j] = -(0.5 * hj * hj * dp[j] * bj + surf) / denom;
        ubar[j] = -(hj * hj * dp[j] / 3.0 * (bj + 0.25 * hj * (1.0 - bj)) + 0.5 * surf) / denom;
    }
    Ok(())
}

/// Evaporation rate on the nodes: `v` under the glob, vanishing outside.
pub fn evap_profile(grid: &SpectralGrid, glob_radius: f64, v: f64) -> Vec<f64> {
    grid.nodes()
        .iter()
        .map(|&r| (1.0 - blend(r, glob_radius)) * v)
        .collect()
}

pub fn glob_indicator(grid: &SpectralGrid, glob_radius: f64) -> Vec<f64> {
    grid.nodes()
        .iter()
        .map(|&r| blend(r, glob_radius))
        .collect()
}

/// Time derivative of every field at `state`.
pub fn pde_rhs(state: &PdeState, p: &PdeNondim, grid: &SpectralGrid) -> Result<PdeState> {
    let rhs = GlobRhs::new(grid, *p);
    let y = state.to_vec();
    check_len(&y, 4 * grid.len())?;
    let mut dy = vec![0.0; y.len()];
    rhs.eval(&y, &mut dy)?;
    Ok(PdeState::from_slice(&dy))
}

fn check_len(v: &[f64], n: usize) -> Result<()> {
    if v.len() == n {
        Ok(())
    } else {
        Err(Error::dims(n, v.len(), "field length vs grid"))
    }
}

/// Evaluator of the semi-discrete system, with the state laid out as
/// `[h, Gamma, c, f]`. Batches of states are evaluated column-wise with
/// matrix products, which is what makes difference Jacobians affordable.
pub struct GlobRhs<'g> {
    grid: &'g SpectralGrid,
    params: PdeNondim,
    b: Vec<f64>,
    evap: Vec<f64>,
}

impl<'g> GlobRhs<'g> {
    pub fn new(grid: &'g SpectralGrid, params: PdeNondim) -> Self {
        Self {
            grid,
            b: glob_indicator(grid, params.glob_radius),
            evap: evap_profile(grid, params.glob_radius, params.v),
            params,
        }
    }

    pub fn glob_indicator(&self) -> &[f64] {
        &self.b
    }

    pub fn eval(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let out = self.eval_batch(&DMatrix::from_column_slice(y.len(), 1, y))?;
        dy.copy_from_slice(out.as_slice());
        Ok(())
    }

    /// Time derivatives of every column of `y` (4 Nr rows).
    pub fn eval_batch(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let grid = self.grid;
        let n = grid.len();
        if y.nrows() != 4 * n {
            return Err(Error::dims(4 * n, y.nrows(), "state length vs grid"));
        }
        let m = y.ncols();
        let p = &self.params;
        let h = y.rows(0, n).into_owned();
        let gamma = y.rows(n, n).into_owned();
        let c = y.rows(2 * n, n);
        let f = y.rows(3 * n, n);
        if let Some((k, v)) = h.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::SingularState(format!(
                "pressure needs h > 0, h = {v} at node {}",
                k % n
            )));
        }
        let inv_r = grid.inv_r();
        let scale_rows = |a: &mut DMatrix<f64>, w: &[f64]| {
            for mut col in a.column_iter_mut() {
                col.iter_mut().zip(w).for_each(|(x, wj)| *x *= wj);
            }
        };
        // (1/r)(r q)_r for odd fluxes q
        let div = |q: &DMatrix<f64>| {
            let mut out = grid.odd_d1_matrix() * q;
            out.zip_apply(&r_weighted(q, inv_r), |o, v| *o += v);
            out
        };

        let dh = grid.even_d1_matrix() * &h;
        let mut press = grid.even_d2_matrix() * &h;
        press.zip_apply(&r_weighted(&dh, inv_r), |o, v| *o += v);
        press.zip_apply(&h, |o, hj| *o = -*o - p.hamaker / (hj * hj * hj));
        let dp = grid.even_d1_matrix() * &press;
        let dg = grid.even_d1_matrix() * &gamma;

        let mut ur = DMatrix::zeros(n, m);
        let mut ubar = DMatrix::zeros(n, m);
        for k in 0..m {
            velocities_into(
                h.column(k).as_slice(),
                dp.column(k).as_slice(),
                dg.column(k).as_slice(),
                p.marangoni,
                &self.b,
                ur.column_mut(k).as_mut_slice(),
                ubar.column_mut(k).as_mut_slice(),
            )?;
        }

        let mut dy = DMatrix::zeros(4 * n, m);

        // thickness
        let div_h = div(&h.component_mul(&ubar));
        for k in 0..m {
            for j in 0..n {
                dy[(j, k)] = -self.evap[j] + p.pc * (c[(j, k)] - 1.0) - div_h[(j, k)];
            }
        }

        // surfactant: diffusion minus advection, frozen under the glob
        let div_g = div(&ur.component_mul(&gamma));
        let mut lap_g = grid.even_d2_matrix() * &gamma;
        lap_g.zip_apply(&r_weighted(&dg, inv_r), |o, v| *o += v);
        let mut dgamma = lap_g / p.pe_s - div_g;
        scale_rows(&mut dgamma, &self.b);
        dy.rows_mut(n, n).copy_from(&dgamma);

        // osmolarity and fluorescein share the transport operator
        for (u, row0, pe) in [(c, 2 * n, p.pe_c), (f, 3 * n, p.pe_f)] {
            let du = grid.even_d1_matrix() * u;
            let flux_div = div(&h.component_mul(&du));
            for k in 0..m {
                for j in 0..n {
                    let source = (self.evap[j] - p.pc * (c[(j, k)] - 1.0)) * u[(j, k)];
                    dy[(row0 + j, k)] =
                        (flux_div[(j, k)] / pe + source) / h[(j, k)] - ubar[(j, k)] * du[(j, k)];
                }
            }
        }
        Ok(dy)
    }

    /// Forward-difference Jacobian at `y`, every column perturbed in one
    /// batch.
    pub fn jacobian(&self, y: &[f64], jac: &mut DMatrix<f64>) -> Result<()> {
        let dim = y.len();
        let sqrt_eps = f64::EPSILON.sqrt();
        let mut batch = DMatrix::from_fn(dim, dim + 1, |i, _| y[i]);
        let mut steps = vec![0.0; dim];
        for j in 0..dim {
            let delta = sqrt_eps * y[j].abs().max(1e-3);
            batch[(j, j + 1)] = y[j] + delta;
            steps[j] = batch[(j, j + 1)] - y[j];
        }
        let out = self.eval_batch(&batch)?;
        for j in 0..dim {
            let inv = 1.0 / steps[j];
            for i in 0..dim {
                jac[(i, j)] = (out[(i, j + 1)] - out[(i, 0)]) * inv;
            }
        }
        Ok(())
    }
}

fn r_weighted(q: &DMatrix<f64>, inv_r: &[f64]) -> DMatrix<f64> {
    let mut out = q.clone();
    for mut col in out.column_iter_mut() {
        col.iter_mut().zip(inv_r).for_each(|(x, w)| *x *= w);
    }
    out
}
