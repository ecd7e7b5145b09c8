//! Stiffly accurate Rosenbrock method of order 4 with embedded order-3 error
//! estimate (the six-stage Rodas4 scheme), for autonomous systems
//! `y' = f(y)`.
//!
//! Each step factors `I / (h gamma) - J` once and reuses it for all stages.
//! The Jacobian is formed by forward differences unless the caller supplies
//! one. Output between steps is cubic Hermite interpolation from the step
//! endpoint values and slopes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::{error_norm, Outcome, Stats};

#[derive(Debug, Clone, Copy)]
pub struct RosenbrockOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for RosenbrockOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-6,
            atol: 1e-8,
            initial_step: 1e-4,
            min_step: 1e-12,
            max_step: 0.05,
            max_steps: 100_000,
        }
    }
}

const GAMMA: f64 = 0.25;

const A21: f64 = 1.544;
const A31: f64 = 0.946_678_528_081_582_6;
const A32: f64 = 0.255_701_169_898_328_4;
const A41: f64 = 3.314_825_187_068_521;
const A42: f64 = 2.896_124_015_972_201;
const A43: f64 = 0.998_641_913_997_781_7;
const A51: f64 = 1.221_224_509_226_641;
const A52: f64 = 6.019_134_481_288_629;
const A53: f64 = 12.537_083_329_320_87;
const A54: f64 = -0.687_886_036_105_895;

const C21: f64 = -5.6688;
const C31: f64 = -2.430_093_356_833_875;
const C32: f64 = -0.206_359_915_709_191_5;
const C41: f64 = -0.107_352_905_815_137_5;
const C42: f64 = -9.594_562_251_023_355;
const C43: f64 = -20.470_286_148_096_16;
const C51: f64 = 7.496_443_313_967_647;
const C52: f64 = -10.246_804_314_643_52;
const C53: f64 = -33.999_903_528_199_05;
const C54: f64 = 11.708_908_932_061_6;
const C61: f64 = 8.083_246_795_921_522;
const C62: f64 = -7.981_132_988_064_893;
const C63: f64 = -31.521_594_328_743_71;
const C64: f64 = 16.319_305_431_231_36;
const C65: f64 = -6.058_818_238_834_054;

type Jacobian<'a> = dyn FnMut(&[f64], &mut DMatrix<f64>) -> Result<()> + 'a;

pub struct Rosenbrock {
    pub options: RosenbrockOptions,
    pub stats: Stats,
}

struct Work {
    k: [Vec<f64>; 6],
    stage: Vec<f64>,
    f: Vec<f64>,
    rhs: DVector<f64>,
}

impl Rosenbrock {
    pub fn new(options: RosenbrockOptions) -> Self {
        Self {
            options,
            stats: Stats::default(),
        }
    }

    /// Integrates `y' = rhs(y)` from `t_out[0]`, recording the state at every
    /// time in `t_out`. `jacobian`, when given, fills the dense Jacobian at a
    /// state; otherwise forward differences are used. `rhs` failing with
    /// [`Error::SingularState`] rejects the step.
    pub fn solve<F, S>(
        &mut self,
        mut rhs: F,
        mut jacobian: Option<&mut Jacobian<'_>>,
        y0: &[f64],
        t_out: &[f64],
        mut stop: S,
    ) -> Result<(Vec<Vec<f64>>, Outcome)>
    where
        F: FnMut(&[f64], &mut [f64]) -> Result<()>,
        S: FnMut(f64, &[f64]) -> bool,
    {
        let n = y0.len();
        let opts = self.options;
        let mut out = Vec::with_capacity(t_out.len());
        let Some(&t0) = t_out.first() else {
            return Ok((out, Outcome::Complete));
        };
        out.push(y0.to_vec());
        let mut next_out = 1;

        let mut t = t0;
        let t_end = *t_out.last().unwrap();
        let mut y = y0.to_vec();
        let mut f0 = vec![0.0; n];
        rhs(&y, &mut f0)?;
        self.stats.rhs_evals += 1;

        let mut work = Work {
            k: std::array::from_fn(|_| vec![0.0; n]),
            stage: vec![0.0; n],
            f: vec![0.0; n],
            rhs: DVector::zeros(n),
        };
        let mut jac = DMatrix::zeros(n, n);
        let mut y_new = vec![0.0; n];
        let mut f_new = vec![0.0; n];
        let mut step = opts.initial_step.min(opts.max_step);
        let mut steps = 0usize;

        while next_out < t_out.len() {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::IntegrationFailure {
                    t,
                    reason: "maximum step count exceeded".into(),
                });
            }
            match jacobian.as_mut() {
                Some(j) => j(&y, &mut jac)?,
                None => self.fd_jacobian(&mut rhs, &y, &f0, &mut jac)?,
            }
            self.stats.jacobians += 1;

            // retry with the same Jacobian until a step is accepted
            loop {
                if step < opts.min_step {
                    return Err(Error::IntegrationFailure {
                        t,
                        reason: format!("step size underflow ({step:e})"),
                    });
                }
                let hs = step.min(t_end - t);
                let attempt = self.attempt(&mut rhs, &y, &f0, &jac, hs, &mut work, &mut y_new);
                let norm = match attempt {
                    Ok(()) => error_norm(&work.k[5], &y, &y_new, opts.rtol, opts.atol),
                    Err(Error::SingularState(_)) => f64::INFINITY,
                    Err(e) => return Err(e),
                };
                if norm.is_finite() && norm <= 1.0 {
                    // slope at the new point doubles as the next first stage
                    match rhs(&y_new, &mut f_new) {
                        Ok(()) => {}
                        Err(Error::SingularState(_)) => {
                            self.stats.rejected += 1;
                            step = hs * 0.25;
                            continue;
                        }
                        Err(e) => return Err(e),
                    }
                    self.stats.rhs_evals += 1;
                    self.stats.accepted += 1;
                    let t_new = if t_end - t - hs <= 1e-14 {
                        t_end
                    } else {
                        t + hs
                    };
                    while next_out < t_out.len() && t_out[next_out] <= t_new {
                        let tau = t_out[next_out];
                        out.push(hermite(t, t_new, &y, &y_new, &f0, &f_new, tau));
                        next_out += 1;
                    }
                    t = t_new;
                    std::mem::swap(&mut y, &mut y_new);
                    std::mem::swap(&mut f0, &mut f_new);
                    let factor = if norm == 0.0 {
                        6.0
                    } else {
                        (0.9 * norm.powf(-0.25)).clamp(0.2, 6.0)
                    };
                    step = (hs * factor).min(opts.max_step);
                    if stop(t, &y) && next_out < t_out.len() {
                        return Ok((out, Outcome::Stopped { t }));
                    }
                    break;
                }
                self.stats.rejected += 1;
                step = if norm.is_finite() {
                    hs * (0.9 * norm.powf(-0.25)).clamp(0.2, 1.0)
                } else {
                    hs * 0.25
                };
            }
        }
        Ok((out, Outcome::Complete))
    }

    fn fd_jacobian<F>(
        &mut self,
        rhs: &mut F,
        y: &[f64],
        f0: &[f64],
        jac: &mut DMatrix<f64>,
    ) -> Result<()>
    where
        F: FnMut(&[f64], &mut [f64]) -> Result<()>,
    {
        let n = y.len();
        let mut yp = y.to_vec();
        let mut fp = vec![0.0; n];
        let sqrt_eps = f64::EPSILON.sqrt();
        for j in 0..n {
            let delta = sqrt_eps * y[j].abs().max(1e-3);
            yp[j] = y[j] + delta;
            rhs(&yp, &mut fp)?;
            self.stats.rhs_evals += 1;
            let inv = 1.0 / (yp[j] - y[j]);
            for i in 0..n {
                jac[(i, j)] = (fp[i] - f0[i]) * inv;
            }
            yp[j] = y[j];
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn attempt<F>(
        &mut self,
        rhs: &mut F,
        y: &[f64],
        f0: &[f64],
        jac: &DMatrix<f64>,
        h: f64,
        w: &mut Work,
        y_new: &mut [f64],
    ) -> Result<()>
    where
        F: FnMut(&[f64], &mut [f64]) -> Result<()>,
    {
        let n = y.len();
        let fac = 1.0 / (h * GAMMA);
        let mut m = -jac.clone();
        for i in 0..n {
            m[(i, i)] += fac;
        }
        let lu = m.lu();

        let solve = |w: &mut Work, s: usize| -> Result<()> {
            let x = lu.solve(&w.rhs).ok_or_else(|| {
                Error::SingularState("singular Rosenbrock iteration matrix".into())
            })?;
            w.k[s].copy_from_slice(x.as_slice());
            Ok(())
        };

        // stage 1
        w.rhs.as_mut_slice().copy_from_slice(f0);
        solve(w, 0)?;

        let coeffs_a: [&[f64]; 4] = [&[A21], &[A31, A32], &[A41, A42, A43], &[A51, A52, A53, A54]];
        let coeffs_c: [&[f64]; 5] = [
            &[C21],
            &[C31, C32],
            &[C41, C42, C43],
            &[C51, C52, C53, C54],
            &[C61, C62, C63, C64, C65],
        ];

        for s in 1..6 {
            if s < 5 {
                let a = coeffs_a[s - 1];
                for i in 0..n {
                    w.stage[i] = y[i] + (0..s).map(|j| a[j] * w.k[j][i]).sum::<f64>();
                }
            } else {
                // stiffly accurate: stage 6 starts from the stage-5 point plus k5
                for i in 0..n {
                    w.stage[i] += w.k[4][i];
                }
            }
            rhs(&w.stage, &mut w.f)?;
            self.stats.rhs_evals += 1;
            let c = coeffs_c[s - 1];
            for i in 0..n {
                w.rhs[i] = w.f[i] + (0..s).map(|j| c[j] * w.k[j][i]).sum::<f64>() / h;
            }
            solve(w, s)?;
        }
        for i in 0..n {
            y_new[i] = w.stage[i] + w.k[5][i];
        }
        if y_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularState("non-finite Rosenbrock stage".into()));
        }
        Ok(())
    }
}

fn hermite(t0: f64, t1: f64, y0: &[f64], y1: &[f64], f0: &[f64], f1: &[f64], t: f64) -> Vec<f64> {
    let h = t1 - t0;
    if h <= 0.0 {
        return y1.to_vec();
    }
    let s = ((t - t0) / h).clamp(0.0, 1.0);
    if s == 1.0 {
        return y1.to_vec();
    }
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    (0..y0.len())
        .map(|i| h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i])
        .collect()
}
